"""Small trainable transformer classifier over (context, url) inputs.

The context sentence (with the URL occurrence replaced by a marker token)
and the URL's host labels are encoded as one token sequence; a pooled
transformer encoding feeds a 3-way head. Training is fully seeded and
single-threaded so repeated runs are bit-identical, which the training
acceptance check relies on. A saved checkpoint can be the starting point of
further fine-tuning runs via ``init_from``.
"""

import json
import math
import random
import re
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .lexicon import LABELS, host_of

PAD, UNK, URL_TOKEN, SEP = 0, 1, 2, 3
_RESERVED = {"<pad>": PAD, "<unk>": UNK, "[url]": URL_TOKEN, "[sep]": SEP}

_WORD_RE = re.compile(r"[a-z0-9]+|\[url\]")


@dataclass
class Hyperparams:
    d_model: int = 48
    heads: int = 4
    layers: int = 2
    feedforward: int = 96
    max_len: int = 48
    dropout: float = 0.1
    vocab_size: int = 2000
    epochs: int = 12
    batch_size: int = 16
    learning_rate: float = 2e-3


def _seed_everything(seed):
    random.seed(seed)
    torch.manual_seed(seed)
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)


def tokenize(context, url):
    text = context.replace(url, " [url] ") if url else context
    tokens = _WORD_RE.findall(text.lower())
    host = host_of(url).lower() if url else ""
    host_tokens = [t for t in host.split(".") if t]
    return tokens + ["[sep]"] + host_tokens


def build_vocab(examples, size):
    counts = Counter()
    for ex in examples:
        counts.update(tokenize(ex["context"], ex["url"]))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    vocab = dict(_RESERVED)
    for token, _ in ranked:
        if token in vocab:
            continue
        if len(vocab) >= size:
            break
        vocab[token] = len(vocab)
    return vocab


def encode(tokens, vocab, max_len):
    ids = [vocab.get(t, UNK) for t in tokens][:max_len]
    mask = [1] * len(ids)
    while len(ids) < max_len:
        ids.append(PAD)
        mask.append(0)
    return ids, mask


class MentionClassifier(nn.Module):
    def __init__(self, vocab_size, hp):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, hp.d_model, padding_idx=PAD)
        self.positions = nn.Embedding(hp.max_len, hp.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=hp.d_model, nhead=hp.heads,
            dim_feedforward=hp.feedforward, dropout=hp.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, hp.layers,
                                             enable_nested_tensor=False)
        self.head = nn.Linear(hp.d_model, len(LABELS))
        self.scale = math.sqrt(hp.d_model)

    def forward(self, ids, mask):
        pos = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        x = self.embed(ids) * self.scale + self.positions(pos)
        x = self.encoder(x, src_key_padding_mask=mask == 0)
        weights = mask.unsqueeze(-1).float()
        pooled = (x * weights).sum(dim=1) / weights.sum(dim=1).clamp(min=1.0)
        return self.head(pooled)


class TransformerModel:
    """Train/predict wrapper holding the vocab and hyperparameters."""

    def __init__(self, vocab, hp, network=None):
        self.vocab = vocab
        self.hp = hp
        self.network = network or MentionClassifier(len(vocab), hp)

    @classmethod
    def train_on(cls, examples, seed, hp, init_from=None):
        _seed_everything(seed)
        if init_from is not None:
            base = load_model(init_from)
            vocab, network = base.vocab, base.network
            hp = base.hp
        else:
            vocab = build_vocab(examples, hp.vocab_size)
            network = MentionClassifier(len(vocab), hp)
        model = cls(vocab, hp, network)
        label_ids = {label: i for i, label in enumerate(LABELS)}
        encoded = []
        for ex in examples:
            ids, mask = encode(tokenize(ex["context"], ex["url"]),
                               vocab, hp.max_len)
            encoded.append((ids, mask, label_ids[ex["label"]]))
        optimizer = torch.optim.Adam(network.parameters(), lr=hp.learning_rate)
        loss_fn = nn.CrossEntropyLoss()
        order = list(range(len(encoded)))
        shuffler = random.Random(seed)
        network.train()
        for _ in range(hp.epochs):
            shuffler.shuffle(order)
            for start in range(0, len(order), hp.batch_size):
                batch = [encoded[i] for i in order[start:start + hp.batch_size]]
                ids = torch.tensor([b[0] for b in batch])
                mask = torch.tensor([b[1] for b in batch])
                target = torch.tensor([b[2] for b in batch])
                optimizer.zero_grad()
                loss = loss_fn(network(ids, mask), target)
                loss.backward()
                optimizer.step()
        network.eval()
        return model

    def predict(self, context, url):
        ids, mask = encode(tokenize(context, url), self.vocab, self.hp.max_len)
        with torch.no_grad():
            logits = self.network(torch.tensor([ids]), torch.tensor([mask]))
            probs = torch.softmax(logits[0], dim=-1)
        best = int(torch.argmax(probs))
        return LABELS[best], float(probs[best])

    def predict_many(self, pairs):
        return [self.predict(context, url) for context, url in pairs]


def save_model(model, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps({"type": "transformer", "hyperparams": asdict(model.hp),
                    "labels": list(LABELS)}, indent=2) + "\n",
        encoding="utf-8",
    )
    (out_dir / "vocab.json").write_text(
        json.dumps(model.vocab, sort_keys=True) + "\n", encoding="utf-8")
    torch.save(model.network.state_dict(), out_dir / "weights.pt")


def save_lexicon_model(out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps({"type": "lexicon"}, indent=2) + "\n", encoding="utf-8")


class LexiconModel:
    def predict(self, context, url):
        from . import lexicon

        return lexicon.classify(context, url)


def load_model(model_dir):
    model_dir = Path(model_dir)
    config = json.loads((model_dir / "config.json").read_text(encoding="utf-8"))
    if config["type"] == "lexicon":
        return LexiconModel()
    if config["type"] == "transformer":
        hp = Hyperparams(**config["hyperparams"])
        vocab = json.loads((model_dir / "vocab.json").read_text(encoding="utf-8"))
        network = MentionClassifier(len(vocab), hp)
        network.load_state_dict(
            torch.load(model_dir / "weights.pt", weights_only=True))
        network.eval()
        return TransformerModel(vocab, hp, network)
    raise ValueError(f"unknown model type {config['type']!r}")
