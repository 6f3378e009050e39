import datetime

import pytest

from paperlinks.ingest import (
    Field,
    MetadataError,
    load_metadata,
    parse_latex,
    segment_sentences,
)


def _write_metadata(tmp_path, lines):
    path = tmp_path / "meta.jsonl"
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


class TestLoadMetadata:
    def test_three_valid_records(self, tmp_path):
        path = _write_metadata(tmp_path, [
            '{"paper_id": "a", "submit_date": "2015-01-02", "field": "cs", "citation_count": 3}',
            '{"paper_id": "b", "submit_date": "2016-07-09", "field": "math", "citation_count": 0}',
            '{"paper_id": "c", "submit_date": "2017-12-31", "field": "physics", "citation_count": 11}',
        ])
        load = load_metadata(path)
        assert len(load.papers) == 3
        assert load.papers[0].field is Field.CS
        assert load.papers[1].submit_date == datetime.date(2016, 7, 9)
        assert load.dropped_count == 0

    def test_other_field_dropped_and_counted(self, tmp_path):
        path = _write_metadata(tmp_path, [
            '{"paper_id": "a", "submit_date": "2015-01-02", "field": "q-bio", "citation_count": 3}',
            '{"paper_id": "b", "submit_date": "2016-07-09", "field": "cs", "citation_count": 1}',
        ])
        load = load_metadata(path)
        assert [p.paper_id for p in load.papers] == ["b"]
        assert load.dropped == {"q-bio": 1}

    def test_empty_file(self, tmp_path):
        load = load_metadata(_write_metadata(tmp_path, []))
        assert load.papers == []

    def test_malformed_line_names_line_number(self, tmp_path):
        path = _write_metadata(tmp_path, [
            '{"paper_id": "a", "submit_date": "2015-01-02", "field": "cs", "citation_count": 3}',
            '{"paper_id": "b", "submit_date": "2015-01-02"}',
        ])
        with pytest.raises(MetadataError, match="line 2"):
            load_metadata(path)

    def test_duplicate_paper_id(self, tmp_path):
        path = _write_metadata(tmp_path, [
            '{"paper_id": "a", "submit_date": "2015-01-02", "field": "cs", "citation_count": 3}',
            '{"paper_id": "a", "submit_date": "2016-01-02", "field": "cs", "citation_count": 4}',
        ])
        with pytest.raises(MetadataError, match="duplicate"):
            load_metadata(path)

    def test_year_only_date_means_january_first(self, tmp_path):
        path = _write_metadata(tmp_path, [
            '{"paper_id": "a", "submit_date": "2014", "field": "cs", "citation_count": 0}',
        ])
        assert load_metadata(path).papers[0].submit_date == datetime.date(2014, 1, 1)

    def test_negative_citations_rejected(self, tmp_path):
        path = _write_metadata(tmp_path, [
            '{"paper_id": "a", "submit_date": "2014-01-01", "field": "cs", "citation_count": -1}',
        ])
        with pytest.raises(MetadataError, match="negative"):
            load_metadata(path)


class TestParseLatex:
    def test_two_sections_plus_front(self):
        source = (
            "Before any heading.\n\n"
            "\\section{A}\nFirst body.\n\n"
            "\\section{B}\nSecond body.\n"
        )
        doc = parse_latex(source, "p")
        assert [s.heading for s in doc.sections] == ["FRONT", "A", "B"]
        assert doc.paragraph_count == 3

    def test_section_paragraphs_without_front_text(self):
        doc = parse_latex("\\section{A}\nOnly body.\n", "p")
        assert [s.heading for s in doc.sections] == ["A"]
        assert doc.paragraph_count == 1

    def test_footnote_inlined_with_span_and_url_preserved(self):
        doc = parse_latex(
            "We use it.\\footnote{see \\url{http://x.org}} More text.\n", "p")
        para = doc.sections[0].paragraphs[0]
        assert para.text == "We use it. see http://x.org More text."
        (fs, fe), = para.footnote_spans
        assert para.text[fs:fe] == "see http://x.org"
        (ls,) = para.link_spans
        assert para.text[ls.start:ls.end] == "http://x.org"

    def test_comment_line_leaves_no_trace(self):
        doc = parse_latex(
            "Line one.\n% http://secret.example\nLine two.\n", "p")
        assert doc.paragraph_count == 1
        text = doc.sections[0].paragraphs[0].text
        assert "secret" not in text
        assert text == "Line one. Line two."

    def test_comment_only_line_does_not_split_paragraph(self):
        doc = parse_latex("a b\n% note\nc d\n", "p")
        assert doc.paragraph_count == 1

    def test_escaped_percent_is_kept(self):
        doc = parse_latex("Improved by 4\\% overall.\n", "p")
        assert doc.sections[0].paragraphs[0].text == "Improved by 4% overall."

    def test_percent_inside_url_command_is_not_a_comment(self):
        doc = parse_latex("See \\url{http://x.org/a%20b} now.\n", "p")
        para = doc.sections[0].paragraphs[0]
        assert "http://x.org/a%20b" in para.text

    def test_display_math_becomes_placeholder(self):
        doc = parse_latex(
            "Given \\begin{equation}x=1\\end{equation} we proceed.\n", "p")
        assert doc.sections[0].paragraphs[0].text == "Given [EQUATION] we proceed."
        doc = parse_latex("Given \\[x=1\\] we proceed.\n", "p")
        assert doc.sections[0].paragraphs[0].text == "Given [EQUATION] we proceed."

    def test_formatting_macros_and_braces_stripped(self):
        doc = parse_latex(
            "\\textbf{Bold} and \\emph{soft} words {grouped}.\n", "p")
        assert doc.sections[0].paragraphs[0].text == "Bold and soft words grouped."

    def test_unbalanced_braces_warn_but_parse(self):
        doc = parse_latex("Broken \\textbf{group text\n\nNext para.\n", "p")
        assert doc.warnings
        assert doc.paragraph_count >= 1

    def test_href_keeps_text_and_url(self):
        doc = parse_latex("\\href{http://x.org/d}{our data} here.\n", "p")
        para = doc.sections[0].paragraphs[0]
        assert para.text == "our data <http://x.org/d> here."
        (ls,) = para.link_spans
        assert para.text[ls.start:ls.end] == "http://x.org/d"
        assert ls.kind == "href"

    def test_deterministic(self):
        source = "Intro.\n\n\\section{A}\nText \\url{http://x.org} more.\n"
        first = parse_latex(source, "p")
        second = parse_latex(source, "p")
        assert first == second

    def test_footnote_spans_inside_paragraph_bounds(self, corpus_documents):
        for doc in corpus_documents:
            for _, _, para in doc.iter_paragraphs():
                for fs, fe in para.footnote_spans:
                    assert 0 <= fs <= fe <= len(para.text)

    def test_paragraph_count_consistent(self, corpus_documents):
        for doc in corpus_documents:
            assert doc.paragraph_count == sum(
                len(s.paragraphs) for s in doc.sections)


class TestSegmentSentences:
    def test_three_plain_sentences(self):
        text = "We release code. See http://a.b/c. Results follow."
        spans = segment_sentences(text)
        assert len(spans) == 3
        assert [text[s:e].strip() for s, e in spans] == [
            "We release code.", "See http://a.b/c.", "Results follow."]

    def test_period_inside_url_not_a_boundary(self):
        text = "Data at http://x.org/v1.2 is public."
        assert len(segment_sentences(text)) == 1

    def test_empty_paragraph(self):
        assert segment_sentences("") == []

    def test_spans_tile_paragraph(self):
        text = "One two. Three four! Five? Six http://a.b/c.d ok."
        spans = segment_sentences(text)
        assert spans[0][0] == 0
        assert spans[-1][1] == len(text)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 == s2

    def test_single_letter_abbreviation(self):
        text = "Results by J. Doe confirm it. Done."
        spans = segment_sentences(text)
        assert len(spans) == 2
        assert text[spans[0][0]:spans[0][1]].strip() == "Results by J. Doe confirm it."

    def test_url_never_straddles_spans(self, corpus_documents):
        from paperlinks.extract import detect_urls

        for doc in corpus_documents:
            paragraphs = {i: p for i, _, p in doc.iter_paragraphs()}
            for hit in detect_urls(doc):
                para = paragraphs[hit.paragraph_index]
                spans = segment_sentences(para.text)
                start, end = hit.char_span
                containing = [
                    (s, e) for s, e in spans if s <= start < e]
                assert len(containing) == 1
                assert end <= containing[0][1]
