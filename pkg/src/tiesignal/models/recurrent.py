"""LSTM pairwise comparator trained with backpropagation through time.

Inputs are (T, 4) count series (ego-i calls, ego-i texts, ego-j calls, ego-j
texts), fed through ``log1p``. Batches of unequal length are left-padded and
masked so padded steps leave the state untouched. The last hidden state goes
through a logistic readout.

Gate rows in ``W``, ``U`` and ``b`` are stacked as [input, forget, output, cell].
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

log = logging.getLogger(__name__)

FORMAT = "tiesignal-lstm"
VERSION = 1
N_INPUT = 4
PARAM_NAMES = ("W", "U", "b", "v", "c")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class RecurrentConfig:
    hidden: int = 32
    learning_rate: float = 1e-2
    epochs: int = 30
    batch_size: int = 32
    clip_norm: float = 5.0
    init_scale: float = 0.1
    forget_bias: float = 1.0
    max_pairs: int | None = None


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def transform_input(series: np.ndarray) -> np.ndarray:
    return np.log1p(np.asarray(series, dtype=float))


def init_params(hidden: int, rng: np.random.Generator, scale: float = 0.1, forget_bias: float = 1.0) -> dict:
    H = hidden
    p = {
        "W": rng.uniform(-scale, scale, size=(4 * H, N_INPUT)),
        "U": rng.uniform(-scale, scale, size=(4 * H, H)),
        "b": np.zeros(4 * H),
        "v": rng.uniform(-scale, scale, size=H),
        "c": np.zeros(1),
    }
    p["b"][H:2 * H] = forget_bias
    return p


def pad_batch(seqs: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Left-pad (T_k, 4) inputs to (B, T, 4) with a (B, T) validity mask."""
    T = max(len(s) for s in seqs)
    X = np.zeros((len(seqs), T, N_INPUT))
    mask = np.zeros((len(seqs), T), dtype=bool)
    for k, s in enumerate(seqs):
        X[k, T - len(s):] = s
        mask[k, T - len(s):] = True
    return X, mask


def forward(params: dict, X: np.ndarray, mask: np.ndarray | None = None, keep_cache: bool = False):
    """Run the recurrence over (B, T, 4) inputs. Returns probabilities (B,) and an optional cache."""
    W, U, b, v, c0 = params["W"], params["U"], params["b"], params["v"], params["c"]
    B, T, _ = X.shape
    H = U.shape[1]
    if mask is None:
        mask = np.ones((B, T), dtype=bool)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    for t in range(T):
        z = X[:, t] @ W.T + h @ U.T + b
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        o = sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        m = mask[:, t:t + 1]
        if keep_cache:
            cache.append((h, c, i, f, o, g, tc, m))
        h = np.where(m, h_new, h)
        c = np.where(m, c_new, c)
    logit = h @ v + c0[0]
    p = sigmoid(logit)
    if keep_cache:
        return p, (X, cache, h)
    return p, None


def loss_and_grads(params: dict, X: np.ndarray, mask: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    """Mean binary cross-entropy and its gradient by backpropagation through time."""
    p, (X, cache, h_last) = forward(params, X, mask, keep_cache=True)
    U, v = params["U"], params["v"]
    B = len(y)
    H = U.shape[1]
    eps = 1e-12
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    dlogit = (p - y) / B
    grads = {k: np.zeros_like(params[k]) for k in PARAM_NAMES}
    grads["v"] = h_last.T @ dlogit
    grads["c"][0] = dlogit.sum()
    dh = np.outer(dlogit, v)
    dc = np.zeros((B, H))
    for t in range(len(cache) - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tc, m = cache[t]
        do = dh * tc
        dct = dc + dh * o * (1.0 - tc * tc)
        di = dct * g
        dg = dct * i
        df = dct * c_prev
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1)
        dz = np.where(m, dz, 0.0)
        grads["W"] += dz.T @ X[:, t]
        grads["U"] += dz.T @ h_prev
        grads["b"] += dz.sum(axis=0)
        dh = np.where(m, dz @ U, dh)
        dc = np.where(m, dct * f, dc)
    return loss, grads


def clip_gradients(grads: dict, max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class RecurrentComparator:
    params: dict
    config: RecurrentConfig = field(default_factory=RecurrentConfig)
    seed: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def hidden(self) -> int:
        return self.params["U"].shape[1]

    def predict_series(self, seqs: list[np.ndarray], chunk: int = 4096) -> np.ndarray:
        """Probabilities for raw (T_k, 4) count series; padded in chunks."""
        out = np.empty(len(seqs))
        for start in range(0, len(seqs), chunk):
            part = [transform_input(s) for s in seqs[start:start + chunk]]
            X, mask = pad_batch(part)
            out[start:start + len(part)] = forward(self.params, X, mask)[0]
        return out

    def to_json(self) -> str:
        return json.dumps({
            "format": FORMAT,
            "version": VERSION,
            "seed": self.seed,
            "config": asdict(self.config),
            "history": self.history,
            "params": {k: {"shape": list(self.params[k].shape), "data": self.params[k].ravel().tolist()}
                       for k in PARAM_NAMES},
        })

    @classmethod
    def from_json(cls, text: str) -> "RecurrentComparator":
        d = json.loads(text)
        if d.get("format") != FORMAT or d.get("version") != VERSION:
            raise ValueError("not a serialized recurrent model")
        params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["params"].items()}
        return cls(params, RecurrentConfig(**d["config"]), d["seed"], d.get("history", []))


def recurrent_forward(model: RecurrentComparator | dict, series: np.ndarray) -> float:
    """Probability that the first alter of a (T, 4) count series outranks the second."""
    params = model.params if isinstance(model, RecurrentComparator) else model
    series = np.asarray(series, dtype=float)
    if series.ndim != 2 or series.shape[1] != N_INPUT or len(series) < 1:
        raise ValueError("series must have shape (T >= 1, 4)")
    if not np.all(np.isfinite(series)):
        raise ValueError("non-finite input series")
    return float(forward(params, transform_input(series)[None])[0][0])


def fit_recurrent(seqs: list[np.ndarray], labels: np.ndarray, config: RecurrentConfig = RecurrentConfig(),
                  seed: int = 0) -> RecurrentComparator:
    """Mini-batch gradient descent with global-norm clipping on raw count series."""
    if not seqs:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    params = init_params(config.hidden, rng, config.init_scale, config.forget_bias)
    inputs = [transform_input(s) for s in seqs]
    y = np.asarray(labels, dtype=float)
    n = len(inputs)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            X, mask = pad_batch([inputs[k] for k in batch])
            loss, grads = loss_and_grads(params, X, mask, y[batch])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDivergedError(
                    f"non-finite loss/gradient at epoch {epoch}, batch starting {start}; last epoch losses {history[-3:]}")
            clip_gradients(grads, config.clip_norm)
            for k in PARAM_NAMES:
                params[k] -= config.learning_rate * grads[k]
            total += loss * len(batch)
        history.append(total / n)
        log.debug("epoch %d loss %.5f", epoch, history[-1])
    return RecurrentComparator(params, config, seed, history)


def dataset_loss(params: dict, seqs: list[np.ndarray], labels: np.ndarray) -> float:
    X, mask = pad_batch([transform_input(s) for s in seqs])
    p = forward(params, X, mask)[0]
    y = np.asarray(labels, dtype=float)
    eps = 1e-12
    return float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
