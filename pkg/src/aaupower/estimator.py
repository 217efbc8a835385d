"""Heteroscedastic MLP power estimator trained by Gaussian NLL.

The network maps a feature vector to a Gaussian over hourly power: hidden
layers use ReLU, the first output is the mean (identity link) and the second
the standard deviation through ``softplus(z) + 1e-6``.  Training minimizes
the exact negative log-likelihood

    nll = 0.5*ln(2*pi) + ln(std) + (y - mean)^2 / (2*std^2)

with Adam on shuffled mini-batches.  Everything is plain numpy and
deterministic given the seed."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .seeds import substream

#: Additive floor keeping predicted standard deviations strictly positive.
STD_FLOOR = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; ``iteration`` is the failing step (0-based)."""

    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"training diverged at iteration {iteration} (loss {loss})")


@dataclass(frozen=True)
class GaussianPrediction:
    """Predicted distribution of one hourly power value."""

    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError(f"std must be positive, got {self.std}")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; defaults are tuned for the synthetic fleet."""

    iterations: int = 6000
    learning_rate: float = 3e-3
    batch_size: int = 256
    seed: int = 7
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class MLPWeights:
    """Dense-layer parameters; ``weights[i]`` has shape (fan_in, fan_out)."""

    layer_sizes: tuple[int, ...]
    weights: list
    biases: list

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.layer_sizes[-1] != 2:
            raise ValueError("output layer must have size 2 (mean, std)")
        expected = list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))
        if len(self.weights) != len(expected) or len(self.biases) != len(expected):
            raise ValueError("one weight matrix and bias vector per layer required")
        for i, (fan_in, fan_out) in enumerate(expected):
            if self.weights[i].shape != (fan_in, fan_out):
                raise ValueError(
                    f"layer {i} weights have shape {self.weights[i].shape}, "
                    f"expected {(fan_in, fan_out)}"
                )
            if self.biases[i].shape != (fan_out,):
                raise ValueError(f"layer {i} biases have shape {self.biases[i].shape}")

    def copy(self) -> "MLPWeights":
        return MLPWeights(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_weights(seed: int, layer_sizes=(85, 100, 50, 2)) -> MLPWeights:
    """Scaled-uniform fan-in init: W ~ U(+-1/sqrt(fan_in)), biases zero."""
    rng = substream(seed, "init")
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPWeights(layer_sizes=tuple(layer_sizes), weights=weights, biases=biases)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cache(w: MLPWeights, X):
    """Run the network, keeping pre-activations for backprop."""
    acts = [X]
    zs = []
    a = X
    last = len(w.weights) - 1
    for i, (W, b) in enumerate(zip(w.weights, w.biases)):
        z = a @ W + b
        zs.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    out = zs[-1]
    means = out[:, 0]
    stds = _softplus(out[:, 1]) + STD_FLOOR
    return means, stds, zs, acts


def predict(w: MLPWeights, X):
    """Batch prediction: (means, stds) for an (n, width) matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != w.layer_sizes[0]:
        raise ValueError(
            f"expected inputs of shape (n, {w.layer_sizes[0]}), got {X.shape}"
        )
    means, stds, _, _ = _forward_cache(w, X)
    return means, stds


def forward(w: MLPWeights, x) -> GaussianPrediction:
    """Predict the power distribution for one feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != w.layer_sizes[0]:
        raise ValueError(f"expected a vector of width {w.layer_sizes[0]}, got {x.shape}")
    means, stds = predict(w, x[None, :])
    return GaussianPrediction(mean=float(means[0]), std=float(stds[0]))


def nll_loss(pred: GaussianPrediction, actual: float) -> float:
    """Exact Gaussian negative log-likelihood of one observation."""
    return float(
        0.5 * _LOG_2PI
        + math.log(pred.std)
        + (actual - pred.mean) ** 2 / (2.0 * pred.std**2)
    )


def _nll_vector(means, stds, y):
    return 0.5 * _LOG_2PI + np.log(stds) + (y - means) ** 2 / (2.0 * stds**2)


def mean_nll(w: MLPWeights, X, y) -> float:
    means, stds = predict(w, X)
    return float(np.mean(_nll_vector(means, stds, np.asarray(y, dtype=float))))


def gradients(w: MLPWeights, X, y):
    """Analytic gradients of the mean NLL over the batch.

    Returns ``(grad_weights, grad_biases, loss)`` with shapes mirroring the
    parameters.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    means, stds, zs, acts = _forward_cache(w, X)
    resid = means - y
    loss = float(np.mean(_nll_vector(means, stds, y)))

    dmean = resid / stds**2 / n
    dstd = (1.0 / stds - resid**2 / stds**3) / n
    delta = np.empty((n, 2))
    delta[:, 0] = dmean
    delta[:, 1] = dstd * _sigmoid(zs[-1][:, 1])

    grad_w = [None] * len(w.weights)
    grad_b = [None] * len(w.biases)
    for i in range(len(w.weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ w.weights[i].T) * (zs[i - 1] > 0.0)
    return grad_w, grad_b, loss


def train(w: MLPWeights, X, y, config: TrainConfig = TrainConfig()):
    """Adam on shuffled mini-batches; returns (trained weights, loss trace).

    Deterministic for fixed (initial weights, data, config).  Raises
    :class:`TrainingDivergedError` as soon as the batch loss is not finite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, width) with one target per row")
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")

    w = w.copy()
    n = X.shape[0]
    batch = min(config.batch_size, n)
    rng = substream(config.seed, "shuffle")
    perm = rng.permutation(n)
    pos = 0

    m_w = [np.zeros_like(a) for a in w.weights]
    v_w = [np.zeros_like(a) for a in w.weights]
    m_b = [np.zeros_like(a) for a in w.biases]
    v_b = [np.zeros_like(a) for a in w.biases]
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate

    trace = []
    for step in range(config.iterations):
        if pos + batch > n:
            perm = rng.permutation(n)
            pos = 0
        idx = perm[pos:pos + batch]
        pos += batch

        grad_w, grad_b, loss = gradients(w, X[idx], y[idx])
        if not math.isfinite(loss):
            raise TrainingDivergedError(iteration=step, loss=loss)
        trace.append(loss)

        t = step + 1
        corr1 = 1.0 - b1**t
        corr2 = 1.0 - b2**t
        for i in range(len(w.weights)):
            m_w[i] = b1 * m_w[i] + (1 - b1) * grad_w[i]
            v_w[i] = b2 * v_w[i] + (1 - b2) * grad_w[i] ** 2
            w.weights[i] -= lr * (m_w[i] / corr1) / (np.sqrt(v_w[i] / corr2) + eps)
            m_b[i] = b1 * m_b[i] + (1 - b1) * grad_b[i]
            v_b[i] = b2 * v_b[i] + (1 - b2) * grad_b[i] ** 2
            w.biases[i] -= lr * (m_b[i] / corr1) / (np.sqrt(v_b[i] / corr2) + eps)
    return w, trace


# --------------------------------------------------------------------------
# Intervals and metrics


def predict_interval(pred: GaussianPrediction, coverage: float = 0.95):
    """Central interval: mean +- z * std with z the Gaussian quantile."""
    if not 0.0 < coverage < 1.0:
        raise ValueError(f"coverage must be in (0, 1), got {coverage}")
    z = NormalDist().inv_cdf(0.5 + coverage / 2.0)
    return (pred.mean - z * pred.std, pred.mean + z * pred.std)


def _check_pair(predicted, actual):
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape or predicted.ndim != 1 or predicted.size == 0:
        raise ValueError("predicted and actual must be equal-length non-empty vectors")
    return predicted, actual


def rmse(predicted, actual) -> float:
    predicted, actual = _check_pair(predicted, actual)
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def mae(predicted, actual) -> float:
    predicted, actual = _check_pair(predicted, actual)
    return float(np.mean(np.abs(predicted - actual)))


def mape(predicted, actual) -> float:
    """Mean absolute percentage error (in percent)."""
    predicted, actual = _check_pair(predicted, actual)
    zero = np.flatnonzero(actual == 0.0)
    if zero.size:
        raise ValueError(f"actual[{int(zero[0])}] is zero; MAPE undefined")
    return float(np.mean(np.abs((predicted - actual) / actual)) * 100.0)


def calibration_coverage(means, stds, actual, coverage: float = 0.95) -> float:
    """Fraction of actuals inside the central predicted interval."""
    if not 0.0 < coverage < 1.0:
        raise ValueError(f"coverage must be in (0, 1), got {coverage}")
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if not (means.shape == stds.shape == actual.shape) or means.size == 0:
        raise ValueError("means, stds, actual must be equal-length non-empty vectors")
    z = NormalDist().inv_cdf(0.5 + coverage / 2.0)
    inside = np.abs(actual - means) <= z * stds
    return float(np.mean(inside))


# --------------------------------------------------------------------------
# Serialization


def save_weights(w: MLPWeights, path, feature_schema_hash: str) -> None:
    """Write weights as JSON (row-major matrices) tagged with the feature layout."""
    doc = {
        "layer_sizes": list(w.layer_sizes),
        "hidden_activation": "relu",
        "output_links": ["identity", "softplus_plus_floor"],
        "std_floor": STD_FLOOR,
        "feature_schema_hash": feature_schema_hash,
        "layers": [
            {"weights": wi.tolist(), "biases": bi.tolist()}
            for wi, bi in zip(w.weights, w.biases)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_weights(path):
    """Read weights back; returns ``(MLPWeights, feature_schema_hash)``."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    sizes = tuple(int(s) for s in doc["layer_sizes"])
    layers = doc["layers"]
    if len(layers) != len(sizes) - 1:
        raise ValueError("layer count does not match layer_sizes")
    weights = [np.array(l["weights"], dtype=float) for l in layers]
    biases = [np.array(l["biases"], dtype=float) for l in layers]
    w = MLPWeights(layer_sizes=sizes, weights=weights, biases=biases)
    return w, str(doc.get("feature_schema_hash", ""))
