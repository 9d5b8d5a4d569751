"""Linear-chain CRF over lexical semantic tags.

Two emission providers are available: hashed sparse feature templates over
the word sequence, and a linear projection of externally supplied per-token
vectors. Structural transitions of the tag scheme are fixed at ``NEG`` and
never trained.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .constraints import LatticeMasks, LexcatConstraintTable, build_masks, structural_masks
from .corpus import Sentence, Token
from .decoder import ScoreLattice, path_score, viterbi
from .kernels import NEG
from .tagcodec import LexTag, TagSet, encode, format_tag, parse_tag

log = logging.getLogger(__name__)

MODEL_FORMAT = "lexrec-crf"
MODEL_VERSION = 1


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 64
    max_epochs: int = 75
    clip_norm: float = 5.0
    patience: int = 25
    l2: float = 0.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        for name in ("lr", "batch_size", "max_epochs", "clip_norm", "patience", "eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")


class Adam:
    """Adam over a dict of named parameter arrays, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            self.params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# emissions

DEFAULT_TEMPLATES = ("bias", "word", "lower", "affixes", "shape", "window_words")
ALL_TEMPLATES = DEFAULT_TEMPLATES + ("lemma", "upos", "window_upos")


def word_shape(w: str) -> str:
    out = []
    for ch in w:
        c = "X" if ch.isupper() else "x" if ch.islower() else "d" if ch.isdigit() else ch
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def extract_features(tokens: Sequence[Token], templates: Sequence[str] = DEFAULT_TEMPLATES) -> list[list[str]]:
    """Feature strings per token; every token gets the same number of features."""
    unknown = set(templates) - set(ALL_TEMPLATES)
    if unknown:
        raise ValueError(f"unknown feature templates {sorted(unknown)}")
    lows = [t.form.lower() for t in tokens]
    upos = [t.upos for t in tokens]
    n = len(tokens)

    def at(seq, i, pad):
        return seq[i] if 0 <= i < n else pad

    feats = []
    for i, tok in enumerate(tokens):
        f = []
        lw = lows[i]
        for name in templates:
            if name == "bias":
                f.append("b")
            elif name == "word":
                f.append("w=" + tok.form)
            elif name == "lower":
                f.append("l=" + lw)
            elif name == "affixes":
                for k in (2, 3, 4):
                    f.append(f"p{k}=" + lw[:k])
                    f.append(f"s{k}=" + lw[-k:])
            elif name == "shape":
                f.append("sh=" + word_shape(tok.form))
            elif name == "window_words":
                for d in (-2, -1, 1, 2):
                    f.append(f"w{d:+d}=" + at(lows, i + d, "<s>" if d < 0 else "</s>"))
            elif name == "lemma":
                f.append("lem=" + tok.lemma)
            elif name == "upos":
                f.append("pos=" + tok.upos)
            elif name == "window_upos":
                for d in (-2, -1, 1, 2):
                    f.append(f"pos{d:+d}=" + at(upos, i + d, "<s>" if d < 0 else "</s>"))
        feats.append(f)
    return feats


_HASH_CACHE: dict[str, int] = {}
_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _hash64(s: str) -> int:
    h = _HASH_CACHE.get(s)
    if h is None:
        h = int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")
        if len(_HASH_CACHE) < 5_000_000:
            _HASH_CACHE[s] = h
    return h


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def tag_salts(k: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix(np.arange(1, k + 1, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15))


class FeatureEmissions:
    """Sparse feature templates with signed hashing of (feature, tag) pairs."""

    kind = "features"

    def __init__(self, num_tags: int, templates: Sequence[str] = DEFAULT_TEMPLATES,
                 dim: int = 2 ** 22):
        self.templates = tuple(templates)
        self.dim = int(dim)
        self.num_tags = num_tags
        self.weights = np.zeros(self.dim)
        self._salts = tag_salts(num_tags)
        self._last = (None, None, None)

    def params(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights}

    def prepare(self, tokens: Sequence[Token], vectors=None) -> np.ndarray:
        feats = extract_features(tokens, self.templates)
        return np.array([[_hash64(f) for f in row] for row in feats], dtype=np.uint64).reshape(
            len(tokens), -1)

    def _index(self, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # scoring and the gradient step of one sentence share the expansion
        if self._last[0] is H:
            return self._last[1], self._last[2]
        idx, sign = self._expand(H)
        self._last = (H, idx, sign)
        return idx, sign

    def _expand(self, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        with np.errstate(over="ignore"):
            z = _mix(H[:, :, None] ^ self._salts[None, None, :])
        idx = (z % np.uint64(self.dim)).astype(np.intp)
        sign = np.where((z >> np.uint64(63)) == 1, -1.0, 1.0)
        return idx, sign

    def scores(self, H: np.ndarray) -> np.ndarray:
        idx, sign = self._index(H)
        return (self.weights[idx] * sign).sum(axis=1)

    def accumulate(self, H: np.ndarray, d_em: np.ndarray, grads: dict) -> None:
        idx, sign = self._index(H)
        np.add.at(grads["weights"], idx.ravel(), (sign * d_em[:, None, :]).ravel())

    def config(self) -> dict:
        return {"kind": self.kind, "templates": list(self.templates), "dim": self.dim}


class ProjectionEmissions:
    """Linear projection of externally supplied token vectors into tag scores."""

    kind = "projection"

    def __init__(self, num_tags: int, dim: int):
        self.dim = int(dim)
        self.num_tags = num_tags
        self.weight = np.zeros((self.dim, num_tags))
        self.bias = np.zeros(num_tags)

    def params(self) -> dict[str, np.ndarray]:
        return {"proj_weight": self.weight, "proj_bias": self.bias}

    def prepare(self, tokens: Sequence[Token], vectors=None) -> np.ndarray:
        if vectors is None:
            raise ValueError("projection emissions need per-token vectors")
        X = np.asarray(vectors, dtype=np.float64)
        if X.shape != (len(tokens), self.dim):
            raise ValueError(f"expected vectors of shape {(len(tokens), self.dim)}, got {X.shape}")
        return X

    def scores(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weight + self.bias

    def accumulate(self, X: np.ndarray, d_em: np.ndarray, grads: dict) -> None:
        grads["proj_weight"] += X.T @ d_em
        grads["proj_bias"] += d_em.sum(axis=0)

    def config(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


EmissionProvider = Union[FeatureEmissions, ProjectionEmissions]


# ---------------------------------------------------------------------------
# model


@dataclass
class Example:
    tokens: Sequence[Token]
    tags: Optional[Sequence[LexTag]] = None
    vectors: Optional[np.ndarray] = None
    sent_id: str = ""


def examples_from_sentences(sentences: Iterable[Sentence], vectors=None, with_tags=True) -> list[Example]:
    out = []
    vecs = list(vectors) if vectors is not None else None
    for i, s in enumerate(sentences):
        out.append(Example(s.tokens, encode(s) if with_tags else None,
                           vecs[i] if vecs is not None else None, s.sent_id))
    return out


@dataclass
class Instance:
    """An example with emission inputs precomputed for a given model."""
    example: Example
    inputs: np.ndarray
    gold: Optional[list[int]] = None


class CrfModel:
    def __init__(self, tagset: TagSet, emissions: EmissionProvider):
        if emissions.num_tags != len(tagset):
            raise ValueError("emission provider and tag set disagree on size")
        self.tagset = tagset
        self.emissions = emissions
        K = len(tagset)
        self.trans_mask, self.start_mask, self.end_mask = structural_masks(tagset)
        self.transitions = np.where(self.trans_mask, 0.0, NEG)
        self.start = np.where(self.start_mask, 0.0, NEG)
        self.end = np.where(self.end_mask, 0.0, NEG)
        assert self.transitions.shape == (K, K)

    @property
    def num_tags(self) -> int:
        return len(self.tagset)

    def params(self) -> dict[str, np.ndarray]:
        p = {"transitions": self.transitions, "start": self.start, "end": self.end}
        p.update(self.emissions.params())
        return p

    def learned_masks(self) -> dict[str, np.ndarray]:
        return {"transitions": self.trans_mask, "start": self.start_mask, "end": self.end_mask}

    def prepare(self, ex: Example, backoff: bool = True) -> Instance:
        inputs = self.emissions.prepare(ex.tokens, ex.vectors)
        gold = None
        if ex.tags is not None:
            try:
                gold = self.tagset.indices(ex.tags, backoff=backoff)
            except KeyError:
                if not backoff:
                    raise
                # a flag never seen in training: no index, but the tags stay
                # on the example for accuracy
                log.debug("sentence %s: gold tags without a backoff", ex.sent_id)
        return Instance(ex, inputs, gold)

    def lattice(self, inst: Instance, masks: Optional[LatticeMasks] = None,
                structural: bool = True) -> ScoreLattice:
        """Score lattice; without `masks`, structural masks are attached unless
        `structural` is off (the NEG transition parameters enforce them anyway)."""
        em = self.emissions.scores(inst.inputs)
        if masks is None and structural:
            T = em.shape[0]
            masks = LatticeMasks(np.ones((T, self.num_tags), dtype=bool), self.trans_mask,
                                 self.start_mask, self.end_mask)
        return ScoreLattice(em, self.transitions, self.start, self.end, masks)

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params().items()}

    def load_params(self, saved: dict[str, np.ndarray]) -> None:
        for k, v in self.params().items():
            v[...] = saved[k]


def new_model(tagset: TagSet, provider: str = "features", **kw) -> CrfModel:
    if provider == "features":
        em = FeatureEmissions(len(tagset), kw.get("templates", DEFAULT_TEMPLATES),
                              kw.get("dim", 2 ** 22))
    elif provider == "projection":
        em = ProjectionEmissions(len(tagset), kw["dim"])
    else:
        raise ValueError(f"unknown emission provider {provider!r}")
    return CrfModel(tagset, em)


def log_partition(lattice: ScoreLattice) -> float:
    """log of the summed exp-scores of all mask-feasible paths."""
    if lattice.shape[0] == 0:
        return 0.0
    return float(kernels.log_partition(*lattice.masked()))


def zero_grads(model: CrfModel) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in model.params().items()}


def _accumulate(model: CrfModel, inst: Instance, grads: dict) -> float:
    if inst.gold is None:
        raise ValueError("instance has no gold tags")
    lat = model.lattice(inst, structural=False)
    gold = inst.gold
    T, K = lat.shape
    em, tr, st, en = lat.masked()
    log_z, node, edge = kernels.forward_backward(em, tr, st, en)
    nll = log_z - path_score(lat, gold)
    d_em = node.copy()
    d_em[np.arange(T), gold] -= 1.0
    g_tr = grads["transitions"]
    g_tr += edge
    g_idx = np.asarray(gold, dtype=np.intp)
    np.add.at(g_tr, (g_idx[:-1], g_idx[1:]), -1.0)
    grads["start"] += node[0]
    grads["start"][gold[0]] -= 1.0
    grads["end"] += node[-1]
    grads["end"][gold[-1]] -= 1.0
    model.emissions.accumulate(inst.inputs, d_em, grads)
    return float(nll)


def _mask_grads(model: CrfModel, grads: dict) -> None:
    for k, m in model.learned_masks().items():
        grads[k][~m] = 0.0


def nll_and_gradient(model: CrfModel, inst: Instance) -> tuple[float, dict[str, np.ndarray]]:
    """Negative log-likelihood of the gold path and its gradient (expected minus gold counts)."""
    grads = zero_grads(model)
    nll = _accumulate(model, inst, grads)
    _mask_grads(model, grads)
    return nll, grads


def tag(model: CrfModel, inst: Union[Instance, Example], masks: Optional[LatticeMasks] = None) -> list[LexTag]:
    if isinstance(inst, Example):
        inst = model.prepare(Example(inst.tokens, None, inst.vectors, inst.sent_id))
    if len(inst.example.tokens) == 0:
        return []
    path, _ = viterbi(model.lattice(inst, masks))
    return [model.tagset.tags[k] for k in path]


def sentence_masks(model: CrfModel, tokens: Sequence[Token], table: Optional[LexcatConstraintTable],
                   upos=None, lemmas=None, scope: str = "single") -> Optional[LatticeMasks]:
    if table is None:
        return None
    upos = upos if upos is not None else [t.upos for t in tokens]
    lemmas = lemmas if lemmas is not None else [t.lemma for t in tokens]
    return build_masks(list(zip(upos, lemmas)), model.tagset, table, scope)


def accuracy(model: CrfModel, data: Sequence[Instance], table=None) -> float:
    correct = total = 0
    for inst in data:
        pred = tag(model, inst, sentence_masks(model, inst.example.tokens, table))
        gold = inst.example.tags
        correct += sum(p == g for p, g in zip(pred, gold))
        total += len(gold)
    return correct / total if total else 0.0


def mean_nll(model: CrfModel, data: Sequence[Instance]) -> float:
    tot = 0.0
    n = 0
    for inst in data:
        if inst.gold is None:
            continue
        lat = model.lattice(inst, structural=False)
        tot += log_partition(lat) - path_score(lat, inst.gold)
        n += len(inst.gold)
    return tot / max(n, 1)


def _global_norm(grads: dict) -> float:
    return math.sqrt(sum(float(np.dot(g.ravel(), g.ravel())) for g in grads.values()))


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    dev_accuracy: Optional[float]
    best_epoch: int
    seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def train(train_data: Sequence[Example], config: TrainConfig = TrainConfig(),
          dev_data: Optional[Sequence[Example]] = None, provider: str = "features",
          table: Optional[LexcatConstraintTable] = None,
          on_epoch: Optional[Callable[[EpochRecord], None]] = None,
          model: Optional[CrfModel] = None, **provider_kw) -> CrfModel:
    """Minibatch Adam on the summed NLL with global-norm clipping and early stopping.

    After every epoch the model is scored by full-tag accuracy on `dev_data`
    (decoded with `table` constraints when given); the best epoch's
    parameters are restored at the end.
    """
    if not train_data:
        raise ValueError("empty training corpus")
    if model is None:
        tagset = TagSet.from_sequences(ex.tags for ex in train_data)
        if provider == "projection" and "dim" not in provider_kw:
            provider_kw["dim"] = np.asarray(train_data[0].vectors).shape[1]
        model = new_model(tagset, provider, **provider_kw)
    train_inst = [model.prepare(ex, backoff=False) for ex in train_data]
    dev_inst = [model.prepare(ex) for ex in dev_data] if dev_data else []
    params = model.params()
    masks = model.learned_masks()
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.eps)
    rng = np.random.default_rng(config.seed)
    grads = zero_grads(model)

    best_acc = -1.0
    best_epoch = 0
    best_params = model.copy_params()
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_inst))
        total_nll = 0.0
        for b in range(0, len(order), config.batch_size):
            for g in grads.values():
                g.fill(0.0)
            for i in order[b:b + config.batch_size]:
                total_nll += _accumulate(model, train_inst[i], grads)
            if config.l2 > 0:
                for k, g in grads.items():
                    p = params[k]
                    if k in masks:
                        g += config.l2 * np.where(masks[k], p, 0.0)
                    else:
                        g += config.l2 * p
            _mask_grads(model, grads)
            norm = _global_norm(grads)
            if norm > config.clip_norm:
                for g in grads.values():
                    g *= config.clip_norm / norm
            opt.step(grads)
        dev_acc = accuracy(model, dev_inst, table) if dev_inst else None
        score = dev_acc if dev_acc is not None else float(epoch)
        if score > best_acc:
            best_acc, best_epoch = score, epoch
            best_params = model.copy_params()
        rec = EpochRecord(epoch, total_nll, dev_acc, best_epoch, time.perf_counter() - t0)
        log.debug("epoch %d nll %.3f dev_acc %s", epoch, total_nll, dev_acc)
        if on_epoch is not None:
            on_epoch(rec)
        if epoch - best_epoch >= config.patience:
            break
    model.load_params(best_params)
    return model


def most_frequent_tag_baseline(train_data: Sequence[Example]):
    """Per-word most frequent tag, falling back to the overall most frequent one."""
    from collections import Counter, defaultdict

    by_word: dict = defaultdict(Counter)
    overall: Counter = Counter()
    for ex in train_data:
        for tok, t in zip(ex.tokens, ex.tags):
            by_word[tok.form.lower()][format_tag(t)] += 1
            overall[format_tag(t)] += 1
    best = {w: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0] for w, c in by_word.items()}
    default = min(overall.items(), key=lambda kv: (-kv[1], kv[0]))[0]

    def predict(tokens: Sequence[Token]) -> list[LexTag]:
        return [parse_tag(best.get(t.form.lower(), default)) for t in tokens]

    return predict


# ---------------------------------------------------------------------------
# persistence


def save_model(model: CrfModel, path, config: Optional[TrainConfig] = None) -> None:
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "tagset": model.tagset.strings(),
        "tag_counts": [model.tagset.counts.get(t, 0) for t in model.tagset.tags],
        "emissions": model.emissions.config(),
        "train_config": asdict(config) if config is not None else None,
    }
    arrays = {k: v for k, v in model.params().items()}
    buf = io.BytesIO()
    np.savez_compressed(buf, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
                        **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_model(path) -> CrfModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(bytes(z["meta"]).decode("utf-8"))
        if meta.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} model file")
        if meta.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {meta.get('version')}")
        from collections import Counter
        tags = [parse_tag(s) for s in meta["tagset"]]
        tagset = TagSet(tags, Counter(dict(zip(tags, meta["tag_counts"]))))
        em = meta["emissions"]
        if em["kind"] == "features":
            model = new_model(tagset, "features", templates=em["templates"], dim=em["dim"])
        else:
            model = new_model(tagset, "projection", dim=em["dim"])
        model.load_params({k: z[k] for k in model.params()})
    return model


# ---------------------------------------------------------------------------
# external vectors


def read_vectors(lines: Iterable[str]) -> list[np.ndarray]:
    """Parse a ``dim=<d>`` header followed by blank-line separated sentence blocks."""
    it = iter(lines)
    dim = None
    for lineno, raw in enumerate(it, 1):
        line = raw.strip()
        if not line:
            continue
        if not line.startswith("dim="):
            raise ValueError(f"line {lineno}: expected 'dim=<d>' header")
        dim = int(line[4:])
        break
    if dim is None:
        return []
    out: list[np.ndarray] = []
    rows: list[list[float]] = []
    for lineno, raw in enumerate(it, 2):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if rows:
                out.append(np.array(rows))
                rows = []
            continue
        idx, _, vals = line.partition("\t")
        if int(idx) != len(rows) + 1:
            raise ValueError(f"line {lineno}: token index {idx} out of sequence")
        v = [float(x) for x in vals.split()]
        if len(v) != dim:
            raise ValueError(f"line {lineno}: expected {dim} values, found {len(v)}")
        rows.append(v)
    if rows:
        out.append(np.array(rows))
    return out


def write_vectors(blocks: Sequence[np.ndarray]) -> list[str]:
    if not blocks:
        return []
    dim = np.asarray(blocks[0]).shape[1]
    out = [f"dim={dim}\n"]
    for X in blocks:
        for i, row in enumerate(np.asarray(X), 1):
            out.append(f"{i}\t" + " ".join(repr(float(x)) for x in row) + "\n")
        out.append("\n")
    return out
