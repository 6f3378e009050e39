"""Mention classification: lexicon rules, the external-classifier protocol,
and evaluation metrics.

The lexicon classifier is the always-available default; an external neural
classifier can be plugged in over a line-delimited stdin/stdout protocol and
falls back to the lexicon per item whenever it misbehaves, so the pipeline
always emits exactly one class per mention.
"""

import json
import queue
import random
import re
import subprocess
import threading
from dataclasses import dataclass, field
from enum import Enum

from .extract import normalize_url


class LinkClass(str, Enum):
    DATA = "data"
    METHODS = "methods"
    SUPPLEMENT = "supplement"


CLASS_ORDER = (LinkClass.DATA, LinkClass.METHODS, LinkClass.SUPPLEMENT)

METHODS_CUES = frozenset({
    "code", "implementation", "software", "tool", "toolkit", "library",
    "package", "repository", "script",
})
DATA_CUES = frozenset({
    "data", "dataset", "corpus", "database", "benchmark", "annotations",
    "samples", "measurements",
})
DATA_HOST_DOMAINS = frozenset({"zenodo.org", "figshare.com", "kaggle.com"})
METHODS_HOST_DOMAINS = frozenset({"github.com", "gitlab.com", "bitbucket.org"})

CONTEXT_CUE_CONFIDENCE = 0.9
HOST_CUE_CONFIDENCE = 0.6
DEFAULT_CONFIDENCE = 0.5

URL_PLACEHOLDER = "[URL]"

_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class ClassifiedMention:
    mention: object  # LinkMention
    link_class: LinkClass
    confidence: float
    classifier_id: str


@dataclass
class EvalReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: dict          # LinkClass -> (precision, recall, f1)
    confusion: list          # 3x3, rows = gold, cols = predicted, CLASS_ORDER
    n: int

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                c.value: {"precision": p, "recall": r, "f1": f}
                for c, (p, r, f) in self.per_class.items()
            },
            "confusion": self.confusion,
            "n": self.n,
        }


@dataclass(frozen=True)
class LabeledExample:
    url: str
    context: str
    label: LinkClass


def _match_cue(token, cues):
    if token in cues:
        return True
    if token.endswith("s") and token[:-1] in cues:
        return True
    return token + "s" in cues


def _url_position(context, url):
    """Character offset of the URL inside its context sentence.

    Uses only what the wire protocol carries (context + canonical URL), so
    an external classifier can reproduce the same positioning: canonical
    match, then the ``[URL]`` placeholder used by annotation files, then
    case-insensitive canonical and host matches, then the midpoint.
    """
    pos = context.find(url.canonical)
    if pos != -1:
        return pos, pos + len(url.canonical)
    pos = context.find(URL_PLACEHOLDER)
    if pos != -1:
        return pos, pos + len(URL_PLACEHOLDER)
    lower = context.lower()
    pos = lower.find(url.canonical.lower())
    if pos != -1:
        return pos, pos + len(url.canonical)
    pos = lower.find(url.host)
    if pos != -1:
        return pos, pos + len(url.host)
    mid = len(context) // 2
    return mid, mid


def classify_lexicon(context, url):
    """Classify one mention from its context sentence and normalized URL.

    The cue term nearest the URL wins; an exact distance tie goes to
    methods. Without a context cue the host decides; without either the
    mention is a supplement.
    """
    url_start, url_end = _url_position(context, url)
    best = None  # (distance, class_rank) -> class
    for m in _WORD_RE.finditer(context.lower()):
        if m.start() < url_end and url_start < m.end():
            continue  # tokens inside the URL itself are not cues
        token = m.group()
        if _match_cue(token, METHODS_CUES):
            cue_class = LinkClass.METHODS
        elif _match_cue(token, DATA_CUES):
            cue_class = LinkClass.DATA
        else:
            continue
        distance = abs(m.start() - url_start)
        # ties break toward methods
        rank = 0 if cue_class is LinkClass.METHODS else 1
        key = (distance, rank)
        if best is None or key < best[0]:
            best = (key, cue_class)
    if best is not None:
        return best[1], CONTEXT_CUE_CONFIDENCE
    if url.domain in DATA_HOST_DOMAINS:
        return LinkClass.DATA, HOST_CUE_CONFIDENCE
    if url.domain in METHODS_HOST_DOMAINS:
        return LinkClass.METHODS, HOST_CUE_CONFIDENCE
    return LinkClass.SUPPLEMENT, DEFAULT_CONFIDENCE


LEXICON_CLASSIFIER_ID = "lexicon"


def classify_mentions_lexicon(mentions):
    out = []
    for m in mentions:
        link_class, confidence = classify_lexicon(m.context_sentence, m.normalized)
        out.append(ClassifiedMention(m, link_class, confidence, LEXICON_CLASSIFIER_ID))
    return out


# ---------------------------------------------------------------------------
# External classifier protocol
# ---------------------------------------------------------------------------

class ExternalClassifierError(RuntimeError):
    pass


class _StdoutReader(threading.Thread):
    def __init__(self, stream):
        super().__init__(daemon=True)
        self.stream = stream
        self.lines = queue.Queue()

    def run(self):
        for line in self.stream:
            self.lines.put(line)
        self.lines.put(None)  # EOF marker


class ExternalClassifier:
    """One protocol session with an external classifier child process.

    Requests and responses are line-delimited JSON matched by id; responses
    may arrive out of order. Items the child answers badly (or not at all
    within the idle timeout) fall back to the lexicon classifier.
    """

    def __init__(self, command, idle_timeout=60.0):
        self.command = list(command)
        self.idle_timeout = idle_timeout
        self.fallback_count = 0
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise ExternalClassifierError(
                f"classifier process failed to start: {self.command!r}: {exc}"
            ) from exc
        self._reader = _StdoutReader(self.proc.stdout)
        self._reader.start()

    def close(self):
        if self.proc.stdin and not self.proc.stdin.closed:
            self.proc.stdin.close()
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def classify_batch(self, items):
        """items: list of (id, url_canonical, context, section).
        Returns {id: (LinkClass, confidence) or None for protocol failures}.
        """
        # stale responses from a previously timed-out batch must not be
        # matched against this batch's ids
        while True:
            try:
                stale = self._reader.lines.get_nowait()
            except queue.Empty:
                break
            if stale is None:
                self._reader.lines.put(None)  # keep the EOF marker visible
                break
        pending = {item[0] for item in items}
        try:
            for item_id, url, context, section in items:
                request = {"id": item_id, "url": url, "context": context,
                           "section": section}
                self.proc.stdin.write(json.dumps(request) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            return {item_id: None for item_id in pending}

        answers = {item_id: None for item_id in pending}
        eof = False
        while pending and not eof:
            try:
                line = self._reader.lines.get(timeout=self.idle_timeout)
            except queue.Empty:
                break  # idle timeout: everything left falls back
            if line is None:
                eof = True
                break
            try:
                rec = json.loads(line)
                item_id = rec["id"]
                label = LinkClass(str(rec["label"]).lower())
                confidence = float(rec.get("confidence", 1.0))
            except (KeyError, TypeError, ValueError):
                # malformed or out-of-vocabulary response; if it names a
                # pending id, resolve that id as a fallback
                item_id = None
                try:
                    item_id = json.loads(line).get("id")
                except (ValueError, AttributeError):
                    pass
                if item_id in pending:
                    pending.discard(item_id)
                continue
            if item_id in pending:
                answers[item_id] = (label, confidence)
                pending.discard(item_id)
        return answers


def classify_mentions_external(mentions, classifier, classifier_id="external"):
    """Classify mentions through an ExternalClassifier session, falling back
    to the lexicon per item when the protocol fails for that item."""
    items = [
        (i, m.normalized.canonical, m.context_sentence, m.section_heading)
        for i, m in enumerate(mentions)
    ]
    answers = classifier.classify_batch(items)
    out = []
    for i, m in enumerate(mentions):
        answer = answers.get(i)
        if answer is None:
            classifier.fallback_count += 1
            link_class, confidence = classify_lexicon(m.context_sentence, m.normalized)
            out.append(ClassifiedMention(m, link_class, confidence, LEXICON_CLASSIFIER_ID))
        else:
            link_class, confidence = answer
            out.append(ClassifiedMention(m, link_class, confidence, classifier_id))
    return out


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(predictions, gold):
    """Confusion matrix and macro metrics over the three classes.

    Macro scores are unweighted means; a class with no predicted and no gold
    instances contributes precision = recall = F1 = 0.
    """
    if len(predictions) != len(gold):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold"
        )
    if not gold:
        raise ValueError("cannot evaluate an empty label set")
    index = {c: i for i, c in enumerate(CLASS_ORDER)}
    confusion = [[0] * 3 for _ in range(3)]
    for pred, g in zip(predictions, gold):
        confusion[index[g]][index[pred]] += 1
    n = len(gold)
    per_class = {}
    for i, c in enumerate(CLASS_ORDER):
        tp = confusion[i][i]
        predicted = sum(confusion[r][i] for r in range(3))
        actual = sum(confusion[i])
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = (precision, recall, f1)
    accuracy = sum(confusion[i][i] for i in range(3)) / n
    macro = [sum(v[k] for v in per_class.values()) / 3 for k in range(3)]
    return EvalReport(
        accuracy=accuracy,
        macro_precision=macro[0],
        macro_recall=macro[1],
        macro_f1=macro[2],
        per_class=per_class,
        confusion=confusion,
        n=n,
    )


@dataclass
class KFoldReport:
    mean: EvalReport
    folds: list = field(default_factory=list)


def kfold_split(n, k, seed):
    """Deterministic shuffled indices split into k contiguous folds whose
    sizes differ by at most one (earlier folds take the remainder)."""
    order = list(range(n))
    random.Random(seed).shuffle(order)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(order[start:start + size])
        start += size
    return folds


def _lexicon_predictor(_train):
    def predict(example):
        url = normalize_url(example.url)
        if url is None:
            return LinkClass.SUPPLEMENT
        return classify_lexicon(example.context, url)[0]
    return predict


def kfold_evaluate(labeled, k, seed, train_fn=_lexicon_predictor):
    """k-fold cross-validation of a classifier factory over labeled examples.

    train_fn maps the training split to a predict(example) -> LinkClass
    function; the default ignores the split and applies the lexicon. The
    mean report averages metrics over folds and sums the confusions.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(labeled) < k:
        raise ValueError(f"need at least {k} examples for {k} folds")
    folds = kfold_split(len(labeled), k, seed)
    reports = []
    for i, fold in enumerate(folds):
        held_out = set(fold)
        train = [ex for j, ex in enumerate(labeled) if j not in held_out]
        predict = train_fn(train)
        test = [labeled[j] for j in fold]
        predictions = [predict(ex) for ex in test]
        reports.append(evaluate(predictions, [ex.label for ex in test]))
    return KFoldReport(mean=mean_report(reports), folds=reports)


def mean_report(reports):
    """Unweighted mean of fold metrics; confusion matrices are summed."""
    k = len(reports)
    confusion = [
        [sum(r.confusion[i][j] for r in reports) for j in range(3)]
        for i in range(3)
    ]
    per_class = {
        c: tuple(
            sum(r.per_class[c][m] for r in reports) / k for m in range(3)
        )
        for c in CLASS_ORDER
    }
    return EvalReport(
        accuracy=sum(r.accuracy for r in reports) / k,
        macro_precision=sum(r.macro_precision for r in reports) / k,
        macro_recall=sum(r.macro_recall for r in reports) / k,
        macro_f1=sum(r.macro_f1 for r in reports) / k,
        per_class=per_class,
        confusion=confusion,
        n=sum(r.n for r in reports),
    )


def load_labeled_file(path):
    """Line-delimited LabeledExample records: {url, context, label}."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                examples.append(
                    LabeledExample(
                        url=str(rec["url"]),
                        context=str(rec["context"]),
                        label=LinkClass(str(rec["label"]).lower()),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"line {lineno}: bad labeled example ({exc})") from exc
    return examples
