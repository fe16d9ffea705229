"""Rolling supervised datasets and the sequence classifier that emits views.

Each sample is a sequence_length x N block of factor returns; its label is
the factor with the highest cumulative return over the following `window`
days. A single-layer LSTM trained by full-batch gradient descent maps the
final hidden state through an affine head and softmax to a factor class, and
the predicted class becomes a one-hot absolute view with a fixed target Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blacklitterman import ViewSet, default_omega
from .covariance import CovEstimate
from .errors import BadInput, InsufficientData
from .marketdata import ReturnPanel

try:  # optional numba fast path; the numpy implementation is the reference
    from ._lstm_kernel import lstm_loss_and_grads as _fast_loss_and_grads
except ImportError:  # pragma: no cover - depends on environment
    _fast_loss_and_grads = None

VIEW_Q = 0.01
DYNAMIC_TAU = 1.0 / 252.0  # one-day level certainty for rolling runs


@dataclass(frozen=True)
class ViewModelConfig:
    sequence_length: int = 126
    window: int = 10
    train_span: int = 504
    hidden_size: int = 32
    epochs: int = 150
    learning_rate: float = 0.05
    seed: int = 42

    def __post_init__(self):
        if min(self.sequence_length, self.window, self.train_span, self.hidden_size, self.epochs) < 1:
            raise BadInput("model config fields must be positive")
        if self.learning_rate <= 0:
            raise BadInput("learning rate must be positive")
        if self.train_span != 4 * self.sequence_length:
            raise BadInput("train_span must equal 4 x sequence_length")


@dataclass(frozen=True)
class SequenceSample:
    features: np.ndarray  # L x N factor returns
    label: int  # argmax factor of the following window's cumulative return


@dataclass(frozen=True)
class GeneratedView:
    factor: int
    q: float
    one_hot_row: np.ndarray

    def __post_init__(self):
        row = np.asarray(self.one_hot_row, dtype=float)
        if not (np.count_nonzero(row) == 1 and row[self.factor] == 1.0):
            raise BadInput("view row must be one-hot on the chosen factor")
        row.setflags(write=False)
        object.__setattr__(self, "one_hot_row", row)


def cumulative_return(block: np.ndarray) -> np.ndarray:
    """Per-column cumulative simple return prod(1 + r) - 1."""
    return np.prod(1.0 + block, axis=0) - 1.0


def build_dataset(panel: ReturnPanel, span, config: ViewModelConfig) -> list[SequenceSample]:
    """Cut the span into rolling samples: features every `window` days, label
    from the holding window right after each feature block.

    Sample count is floor((span_len - L - window) / window) + 1. A rolling
    round passes a span of train_span + sequence_length days here, which makes
    the count exactly train_span / window (50 for the default configuration)
    while the last label still ends before the round's invested days.
    """
    lo, hi = panel.window_rows(span)
    span_len = hi - lo
    length = config.sequence_length
    horizon = config.window
    if span_len < length + horizon:
        raise InsufficientData(
            f"span of {span_len} days is too short for {length}-day features "
            f"plus a {horizon}-day label"
        )
    factors = panel.factor_matrix()
    samples = []
    for start in range(lo, hi - length - horizon + 1, config.window):
        features = factors[start : start + length]
        future = factors[start + length : start + length + horizon]
        label = int(np.argmax(cumulative_return(future)))  # ties -> lowest index
        samples.append(SequenceSample(features, label))
    return samples


def samples_to_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return x, y


def _sigmoid(z):
    # clip keeps exp in range; saturation beyond +-60 is exact in float64 anyway
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


class SequenceModel:
    """Single-layer LSTM with an affine softmax head, all in numpy.

    Pre-activations are packed as [input | forget | output | cell] columns so
    one sigmoid call covers the three sigmoid gates. Training is
    deterministic: seeded uniform init scaled by 1/sqrt(fan-in), forget-gate
    bias starting at 1, full-batch gradient descent.
    """

    def __init__(self, n_features: int, hidden_size: int, n_classes: int, seed: int):
        rng = np.random.default_rng(seed)
        h, n, c = hidden_size, n_features, n_classes
        sx, sh = 1.0 / np.sqrt(n), 1.0 / np.sqrt(h)
        self.params = {
            "wx": rng.uniform(-sx, sx, size=(n, 4 * h)),
            "wh": rng.uniform(-sh, sh, size=(h, 4 * h)),
            "b": np.zeros(4 * h),
            "wo": rng.uniform(-sh, sh, size=(h, c)),
            "bo": np.zeros(c),
        }
        self.params["b"][h : 2 * h] = 1.0
        self.n_features = n
        self.hidden_size = h
        self.n_classes = c
        self.seed = seed
        self.loss_history: list[float] = []

    def _forward(self, x: np.ndarray, keep_cache: bool = False):
        s, length, _ = x.shape
        h_dim = self.hidden_size
        wx, wh, b = self.params["wx"], self.params["wh"], self.params["b"]
        xw = (x.reshape(s * length, -1) @ wx + b).reshape(s, length, 4 * h_dim)
        h = np.zeros((s, h_dim))
        c = np.zeros((s, h_dim))
        cache = None
        if keep_cache:
            cache = {
                "sig": np.empty((s, length, 3 * h_dim)),
                "gg": np.empty((s, length, h_dim)),
                "c_prev": np.empty((s, length, h_dim)),
                "tanh_c": np.empty((s, length, h_dim)),
                "h_prev": np.empty((s, length, h_dim)),
            }
        for t in range(length):
            a = xw[:, t] + h @ wh
            sig = _sigmoid(a[:, : 3 * h_dim])
            gg = np.tanh(a[:, 3 * h_dim :])
            gi, gf, go = sig[:, :h_dim], sig[:, h_dim : 2 * h_dim], sig[:, 2 * h_dim :]
            c_new = gf * c + gi * gg
            tanh_c = np.tanh(c_new)
            if keep_cache:
                cache["sig"][:, t] = sig
                cache["gg"][:, t] = gg
                cache["c_prev"][:, t] = c
                cache["tanh_c"][:, t] = tanh_c
                cache["h_prev"][:, t] = h
            c = c_new
            h = go * tanh_c
        logits = h @ self.params["wo"] + self.params["bo"]
        return logits, h, cache

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 2
        if single:
            x = x[None]
        logits, _, _ = self._forward(x)
        z = logits - logits.max(axis=1, keepdims=True)
        ez = np.exp(z)
        probs = ez / ez.sum(axis=1, keepdims=True)
        return probs[0] if single else probs

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, use_fast: bool | None = None):
        """Mean cross-entropy and its gradients by backpropagation through time.

        Routes through the jitted kernel when numba is present; pass
        use_fast=False to force the reference numpy implementation.
        """
        if use_fast is None:
            use_fast = _fast_loss_and_grads is not None
        if use_fast:
            if _fast_loss_and_grads is None:
                raise BadInput("numba kernel is not available")
            x_t = np.ascontiguousarray(np.swapaxes(np.asarray(x, dtype=float), 0, 1))
            loss, dwx, dwh, db, dwo, dbo = _fast_loss_and_grads(
                x_t,
                np.asarray(y, dtype=np.int64),
                self.params["wx"],
                self.params["wh"],
                self.params["b"],
                self.params["wo"],
                self.params["bo"],
            )
            return float(loss), {"wx": dwx, "wh": dwh, "b": db, "wo": dwo, "bo": dbo}
        return self._loss_and_grads_numpy(x, y)

    def _loss_and_grads_numpy(self, x: np.ndarray, y: np.ndarray):
        s, length, _ = x.shape
        h_dim = self.hidden_size
        wh, wo = self.params["wh"], self.params["wo"]
        logits, h_final, cache = self._forward(x, keep_cache=True)

        z = logits - logits.max(axis=1, keepdims=True)
        ez = np.exp(z)
        probs = ez / ez.sum(axis=1, keepdims=True)
        loss = float(-np.mean(np.log(probs[np.arange(s), y] + 1e-300)))

        dlogits = probs
        dlogits[np.arange(s), y] -= 1.0
        dlogits /= s
        grads = {
            "wo": h_final.T @ dlogits,
            "bo": dlogits.sum(axis=0),
        }
        dh = dlogits @ wo.T
        dc = np.zeros((s, h_dim))
        da_all = np.empty((s, length, 4 * h_dim))
        wh_t = wh.T
        for t in range(length - 1, -1, -1):
            sig = cache["sig"][:, t]
            gi, gf, go = sig[:, :h_dim], sig[:, h_dim : 2 * h_dim], sig[:, 2 * h_dim :]
            gg = cache["gg"][:, t]
            tanh_c = cache["tanh_c"][:, t]
            do = dh * tanh_c
            dc += dh * go * (1.0 - tanh_c**2)
            da = da_all[:, t]
            da[:, :h_dim] = dc * gg
            da[:, h_dim : 2 * h_dim] = dc * cache["c_prev"][:, t]
            da[:, 2 * h_dim : 3 * h_dim] = do
            da[:, : 3 * h_dim] *= sig * (1.0 - sig)
            da[:, 3 * h_dim :] = dc * gi * (1.0 - gg**2)
            dh = da @ wh_t
            dc *= gf
        flat = da_all.reshape(s * length, 4 * h_dim)
        grads["wx"] = x.reshape(s * length, -1).T @ flat
        grads["b"] = flat.sum(axis=0)
        grads["wh"] = cache["h_prev"].reshape(s * length, h_dim).T @ flat
        return loss, grads

    def fit(self, x: np.ndarray, y: np.ndarray, epochs: int, learning_rate: float):
        for _ in range(epochs):
            loss, grads = self.loss_and_grads(x, y)
            self.loss_history.append(loss)
            for key, grad in grads.items():
                self.params[key] -= learning_rate * grad
        return self

    def accuracy(self, x: np.ndarray, y: np.ndarray) -> float:
        probs = self.predict_proba(x)
        return float(np.mean(probs.argmax(axis=1) == y))

    def save(self, path) -> None:
        np.savez(
            path,
            n_features=self.n_features,
            hidden_size=self.hidden_size,
            n_classes=self.n_classes,
            seed=self.seed,
            **self.params,
        )

    @classmethod
    def load(cls, path) -> "SequenceModel":
        data = np.load(path)
        model = cls(
            int(data["n_features"]), int(data["hidden_size"]), int(data["n_classes"]), int(data["seed"])
        )
        for key in model.params:
            model.params[key] = data[key]
        return model


def train_sequence_model(samples, config: ViewModelConfig) -> SequenceModel:
    """Fit a fresh seeded model on the samples; no train/validation split."""
    samples = list(samples)
    if not samples:
        raise InsufficientData("no training samples")
    x, y = samples_to_arrays(samples)
    n_factors = x.shape[2]
    model = SequenceModel(n_factors, config.hidden_size, n_factors, config.seed)
    return model.fit(x, y, config.epochs, config.learning_rate)


def predict_view(model: SequenceModel, features: np.ndarray) -> GeneratedView:
    """Argmax class of the softmax output, emitted as a one-hot view with Q fixed."""
    probs = model.predict_proba(features)
    factor = int(np.argmax(probs))  # ties -> lowest index
    row = np.zeros(model.n_classes)
    row[factor] = 1.0
    return GeneratedView(factor, VIEW_Q, row)


def momentum_oracle_view(panel: ReturnPanel, span, config: ViewModelConfig) -> GeneratedView:
    """Deterministic baseline generator: argmax of the trailing
    sequence_length-day cumulative return. Drop-in replacement for the model."""
    lo, hi = panel.window_rows(span)
    if hi - lo < config.sequence_length:
        raise InsufficientData("span shorter than sequence_length")
    block = panel.factor_matrix()[hi - config.sequence_length : hi]
    factor = int(np.argmax(cumulative_return(block)))
    row = np.zeros(panel.universe.n_factors)
    row[factor] = 1.0
    return GeneratedView(factor, VIEW_Q, row)


def view_to_viewset(view: GeneratedView, sigma: CovEstimate, tau: float = DYNAMIC_TAU) -> ViewSet:
    """Wrap a generated one-hot view as a single-view belief bundle."""
    views = ViewSet(view.one_hot_row[None, :], np.array([view.q]), None, tau, ("absolute",))
    return views.with_omega(default_omega(views, sigma))
