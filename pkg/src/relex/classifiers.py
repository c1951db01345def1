"""Two binary classifiers over discrete feature tokens.

``NgramLinearModel`` embeds unigrams (by vocabulary id) and hashed
higher-order ngrams into a shared table, mean-pools them into one hidden
vector, and applies a 2-class softmax; trained by SGD with a linearly
decaying rate. ``MaxEntModel`` is L2-regularized logistic regression
over binary presence features, fit with L-BFGS to a hard gradient
tolerance; its objective is convex, so results are seed-independent.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass
from hashlib import blake2b
from typing import Sequence

import numpy as np
from scipy import optimize, sparse

from relex.errors import ConvergenceError, DataError

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"RLXMODEL"
MODEL_VERSION = 1

_NGRAM_SEP = "\x1e"


@dataclass
class FeatureExample:
    features: list[str]
    label: int
    x: str = ""
    y: str = ""
    relation: str = ""
    n_supports: int = 1


def read_features_jsonl(path: str) -> list[FeatureExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                examples.append(
                    FeatureExample(
                        features=list(d["features"]),
                        label=int(d["label"]),
                        x=d.get("x", ""),
                        y=d.get("y", ""),
                        relation=d.get("relation", ""),
                        n_supports=int(d.get("n_supports", 1)),
                    )
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise DataError(f"bad featurized record: {exc}", path=path, line=lineno)
    return examples


@dataclass
class TrainConfig:
    seed: int
    dim: int = 100
    bucket_count: int = 2_000_000
    epochs: int = 5
    learning_rate: float = 0.1
    ngram_order: int = 4

    def __post_init__(self):
        if min(self.dim, self.bucket_count, self.epochs, self.ngram_order) < 1:
            raise ValueError("dim, bucket_count, epochs and ngram_order must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _hash_ngram(tokens: tuple[str, ...], seed_key: bytes) -> int:
    digest = blake2b(_NGRAM_SEP.join(tokens).encode("utf-8"), digest_size=8, key=seed_key).digest()
    return int.from_bytes(digest, "little")


class NgramLinearModel:
    def __init__(self, vocab: dict[str, int], cfg: TrainConfig, embeddings: np.ndarray, output: np.ndarray):
        self.vocab = vocab
        self.cfg = cfg
        self.embeddings = embeddings  # (len(vocab) + bucket_count, dim) float32
        self.output = output  # (dim, 2) float32
        self._seed_key = cfg.seed.to_bytes(8, "little", signed=True)
        self.epoch_losses: list[float] = []

    def feature_rows(self, tokens: Sequence[str]) -> np.ndarray:
        """Embedding-table rows for a token sequence: in-vocabulary
        unigrams plus hashed ngrams of order 2..ngram_order. Bucket
        indices always land in range, collisions included."""
        rows = [self.vocab[t] for t in tokens if t in self.vocab]
        base = len(self.vocab)
        buckets = self.cfg.bucket_count
        for n in range(2, self.cfg.ngram_order + 1):
            for i in range(len(tokens) - n + 1):
                h = _hash_ngram(tuple(tokens[i : i + n]), self._seed_key)
                rows.append(base + h % buckets)
        return np.asarray(rows, dtype=np.int64)

    def _hidden(self, rows: np.ndarray) -> np.ndarray:
        if rows.size == 0:
            return np.zeros(self.cfg.dim, dtype=np.float32)
        return self.embeddings[rows].mean(axis=0)

    def predict_proba(self, tokens: Sequence[str]) -> float:
        """Probability of the positive class."""
        logits = self._hidden(self.feature_rows(tokens)) @ self.output
        logits = logits - logits.max()
        exp = np.exp(logits)
        return float(exp[1] / exp.sum())

    def save(self, path: str) -> None:
        header = {"kind": "ngram_linear", "config": asdict(self.cfg), "vocab": list(self.vocab)}
        _write_model(path, header, [self.embeddings, self.output])

    @classmethod
    def load(cls, path: str) -> "NgramLinearModel":
        header, arrays = _read_model(path, "ngram_linear")
        cfg = TrainConfig(**header["config"])
        vocab = {tok: i for i, tok in enumerate(header["vocab"])}
        return cls(vocab, cfg, arrays[0], arrays[1])


def train_ngram_linear(examples: Sequence[FeatureExample], cfg: TrainConfig) -> NgramLinearModel:
    """Single-threaded SGD on the softmax NLL; deterministic for a fixed
    seed (init, shuffling, and float32 update order all derive from it)."""
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    if len(set(labels.tolist())) < 2:
        raise ValueError("training data must contain both classes")

    vocab: dict[str, int] = {}
    for ex in examples:
        for tok in ex.features:
            if tok not in vocab:
                vocab[tok] = len(vocab)

    rng = np.random.default_rng(cfg.seed)
    table_rows = len(vocab) + cfg.bucket_count
    embeddings = rng.uniform(-1.0 / cfg.dim, 1.0 / cfg.dim, size=(table_rows, cfg.dim)).astype(np.float32)
    output = np.zeros((cfg.dim, 2), dtype=np.float32)
    model = NgramLinearModel(vocab, cfg, embeddings, output)

    # Feature rows are static across epochs; precompute once, with
    # per-row multiplicities so repeated tokens keep their weight in the
    # mean pooling.
    unique_rows = []
    row_counts = []
    for ex in examples:
        rows = model.feature_rows(ex.features)
        uniq, counts = np.unique(rows, return_counts=True)
        unique_rows.append(uniq)
        row_counts.append(counts.astype(np.float32)[:, None])

    n = len(examples)
    total_steps = cfg.epochs * n
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for idx in order:
            lr = cfg.learning_rate * (1.0 - step / total_steps)
            step += 1
            uniq, counts = unique_rows[idx], row_counts[idx]
            total = counts.sum()
            if total == 0:
                continue
            hidden = (embeddings[uniq] * counts).sum(axis=0) / total
            logits = hidden @ output
            logits = logits - logits.max()
            exp = np.exp(logits)
            probs = exp / exp.sum()
            loss_sum += -np.log(max(probs[labels[idx]], 1e-12))
            err = probs.copy()
            err[labels[idx]] -= 1.0
            grad_hidden = output @ err
            output -= lr * np.outer(hidden, err)
            embeddings[uniq] -= (lr / total) * counts * grad_hidden
        model.epoch_losses.append(loss_sum / n)
        logger.debug("epoch %d: mean nll %.4f", epoch + 1, model.epoch_losses[-1])
    return model


class MaxEntModel:
    """Binary logistic regression with a Gaussian prior (variance
    ``sigma2``) on all parameters. The positive-class probability is
    sigmoid(sum of present-token weights + bias); unseen tokens
    contribute nothing."""

    def __init__(self, vocab: dict[str, int], weights: np.ndarray, bias: float, sigma2: float, use_counts: bool = False):
        self.vocab = vocab
        self.weights = weights  # (len(vocab),) float64
        self.bias = bias
        self.sigma2 = sigma2
        self.use_counts = use_counts
        self.objective_trace: list[float] = []

    def score(self, tokens: Sequence[str]) -> float:
        total = self.bias
        if self.use_counts:
            for t in tokens:
                idx = self.vocab.get(t)
                if idx is not None:
                    total += self.weights[idx]
        else:
            for t in set(tokens):
                idx = self.vocab.get(t)
                if idx is not None:
                    total += self.weights[idx]
        return float(total)

    def predict_proba(self, tokens: Sequence[str]) -> float:
        s = self.score(tokens)
        if s >= 0:
            return float(1.0 / (1.0 + np.exp(-s)))
        e = np.exp(s)
        return float(e / (1.0 + e))

    def save(self, path: str) -> None:
        header = {
            "kind": "maxent",
            "config": {"sigma2": self.sigma2, "use_counts": self.use_counts},
            "vocab": list(self.vocab),
        }
        _write_model(path, header, [self.weights, np.array([self.bias])])

    @classmethod
    def load(cls, path: str) -> "MaxEntModel":
        header, arrays = _read_model(path, "maxent")
        vocab = {tok: i for i, tok in enumerate(header["vocab"])}
        cfg = header["config"]
        return cls(vocab, arrays[0], float(arrays[1][0]), cfg["sigma2"], cfg["use_counts"])


def _design_matrix(
    examples: Sequence[FeatureExample], vocab: dict[str, int], use_counts: bool
) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for ex in examples:
        if use_counts:
            seen: dict[int, float] = {}
            for t in ex.features:
                idx = vocab.get(t)
                if idx is not None:
                    seen[idx] = seen.get(idx, 0.0) + 1.0
        else:
            seen = {vocab[t]: 1.0 for t in set(ex.features) if t in vocab}
        for idx in sorted(seen):
            indices.append(idx)
            data.append(seen[idx])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(examples), len(vocab)),
    )


def _objective_factory(X: sparse.csr_matrix, y: np.ndarray, sigma2: float):
    """Summed NLL + sum(w^2)/(2 sigma2) over [weights..., bias], with its
    analytic gradient. Exposed separately so tests can difference it."""

    inv_sigma2 = 1.0 / sigma2

    def objective(wb: np.ndarray) -> tuple[float, np.ndarray]:
        w, b = wb[:-1], wb[-1]
        scores = X @ w + b
        nll = float(np.sum(np.logaddexp(0.0, scores) - y * scores))
        penalty = 0.5 * inv_sigma2 * float(wb @ wb)
        probs = 1.0 / (1.0 + np.exp(-scores))
        residual = probs - y
        grad = np.empty_like(wb)
        grad[:-1] = X.T @ residual + inv_sigma2 * w
        grad[-1] = residual.sum() + inv_sigma2 * b
        return nll + penalty, grad

    return objective


def train_maxent(
    examples: Sequence[FeatureExample],
    sigma2: float = 1.0,
    *,
    use_counts: bool = False,
    tol: float = 1e-5,
    max_iter: int = 2000,
) -> MaxEntModel:
    """Fit to max|gradient| <= tol; raises ConvergenceError otherwise."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    y = np.array([ex.label for ex in examples], dtype=np.float64)
    if len(set(y.tolist())) < 2:
        raise ValueError("training data must contain both classes")

    vocab: dict[str, int] = {}
    for ex in examples:
        for tok in ex.features:
            if tok not in vocab:
                vocab[tok] = len(vocab)

    X = _design_matrix(examples, vocab, use_counts)
    objective = _objective_factory(X, y, sigma2)
    trace: list[float] = []

    result = optimize.minimize(
        objective,
        np.zeros(len(vocab) + 1),
        jac=True,
        method="L-BFGS-B",
        callback=lambda wb: trace.append(objective(wb)[0]),
        options={"maxiter": max_iter, "maxfun": 5 * max_iter, "gtol": tol / 10, "ftol": 1e-14},
    )
    _, grad = objective(result.x)
    grad_norm = float(np.max(np.abs(grad)))
    if grad_norm > tol:
        raise ConvergenceError(
            f"MaxEnt did not converge in {max_iter} iterations", grad_norm=grad_norm
        )
    model = MaxEntModel(vocab, result.x[:-1].copy(), float(result.x[-1]), sigma2, use_counts)
    model.objective_trace = trace
    logger.info("maxent converged: %d iterations, grad norm %.2e", result.nit, grad_norm)
    return model


def _write_model(path: str, header: dict, arrays: list[np.ndarray]) -> None:
    payload = json.dumps(
        {"version": MODEL_VERSION, "n_arrays": len(arrays), **header}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for arr in arrays:
            np.lib.format.write_array(fh, arr, allow_pickle=False)


def _read_model(path: str, expected_kind: str) -> tuple[dict, list[np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise DataError("not a model file (bad magic)", path=path)
        (length,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(length).decode("utf-8"))
        if header.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {header.get('version')}", path=path)
        if header.get("kind") != expected_kind:
            raise DataError(f"model kind {header.get('kind')!r}, expected {expected_kind!r}", path=path)
        arrays = [
            np.lib.format.read_array(fh, allow_pickle=False) for _ in range(header["n_arrays"])
        ]
    return header, arrays


def load_model(path: str):
    """Open either model kind by inspecting the header."""
    with open(path, "rb") as fh:
        if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise DataError("not a model file (bad magic)", path=path)
        (length,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(length).decode("utf-8"))
    kind = header.get("kind")
    if kind == "ngram_linear":
        return NgramLinearModel.load(path)
    if kind == "maxent":
        return MaxEntModel.load(path)
    raise DataError(f"unknown model kind {kind!r}", path=path)
