"""Probabilistic classifiers: the predictor contract and a small ReLU MLP."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@runtime_checkable
class PredictorContract(Protocol):
    """Anything with ``predict_proba`` mapping (n, d) or (d,) inputs to class probabilities."""

    n_classes: int

    def predict_proba(self, X) -> np.ndarray: ...


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(X, d):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = X.reshape(1, -1) if single else X
    if X2.ndim != 2 or X2.shape[1] != d:
        raise ValueError(f"expected input of dimension {d}, got shape {X.shape}")
    if not np.all(np.isfinite(X2)):
        raise ValueError("input contains non-finite values")
    return X2, single


class MlpModel:
    """Fully connected network, ReLU hidden layers and softmax output.

    Weight matrices have shape ``(fan_in, fan_out)``; a layer computes
    ``a @ W + b``.
    """

    def __init__(self, weights, biases, metadata=None):
        self.weights = [np.array(W, dtype=np.float64) for W in weights]
        self.biases = [np.array(b, dtype=np.float64).reshape(-1) for b in biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or W.shape[1] != b.shape[0]:
                raise ValueError(f"layer {k}: weight {W.shape} does not match bias {b.shape}")
            if k and W.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"layer {k}: fan-in {W.shape[0]} does not match previous layer")
        self.metadata = dict(metadata or {})

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_features(self):
        return self.weights[0].shape[0]

    @property
    def n_classes(self):
        return self.weights[-1].shape[1]

    @classmethod
    def init_random(cls, layer_sizes, rng, scale=0.1):
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            biases.append(rng.normal(0.0, scale, size=fan_out))
        return cls(weights, biases)

    # forward / backward -----------------------------------------------------

    def _forward(self, X):
        pre, act = [], [X]
        a = X
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            pre.append(z)
            a = softmax(z) if k == last else np.maximum(z, 0.0)
            act.append(a)
        return pre, act

    def logits(self, X):
        X2, single = _check_input(X, self.n_features)
        z = self._forward(X2)[0][-1]
        return z[0] if single else z

    def predict_proba(self, X):
        X2, single = _check_input(X, self.n_features)
        P = self._forward(X2)[1][-1]
        return P[0] if single else P

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=-1)

    def _backward(self, pre, act, delta):
        """Backpropagate ``delta`` (gradient w.r.t. final logits)."""
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            gW[k] = act[k].T @ delta
            gb[k] = delta.sum(axis=0)
            delta = delta @ self.weights[k].T
            if k:
                delta = delta * (pre[k - 1] > 0)
        return gW, gb, delta

    def loss_and_grads(self, X, y):
        """Mean cross-entropy and its gradients ``(gW, gb)``."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = X.shape[0]
        pre, act = self._forward(X)
        logits = pre[-1]
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -logp[np.arange(n), y].mean()
        delta = act[-1].copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        gW, gb, _ = self._backward(pre, act, delta)
        return float(loss), gW, gb

    def input_gradient(self, x, cls):
        """Gradient of ``predict_proba(x)[cls]`` with respect to ``x``."""
        X2, _ = _check_input(x, self.n_features)
        pre, act = self._forward(X2)
        p = act[-1]
        delta = -p[:, cls:cls + 1] * p
        delta[:, cls] += p[:, cls]
        _, _, dx = self._backward(pre, act, delta)
        return dx[0]

    # flat parameter view ----------------------------------------------------

    def get_params(self):
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(self.weights, self.biases)])

    def set_params(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        pos = 0
        for W, b in zip(self.weights, self.biases):
            W[...] = theta[pos:pos + W.size].reshape(W.shape)
            pos += W.size
            b[...] = theta[pos:pos + b.size]
            pos += b.size

    def flat_grads(self, gW, gb):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(gW, gb)])

    # serialization ----------------------------------------------------------

    def to_dict(self):
        return {
            "layer_sizes": self.layer_sizes,
            "activation": "relu",
            "output": "softmax",
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        model = cls(d["weights"], d["biases"], d.get("metadata"))
        if "layer_sizes" in d and list(d["layer_sizes"]) != model.layer_sizes:
            raise ValueError("layer_sizes disagree with the stored weights")
        return model

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_mlp(data, learning_rate=0.05, epochs=5000, seed=0, hidden=(10, 10), init_scale=0.1):
    """Full-batch gradient descent on mean cross-entropy.

    Deterministic for a given seed. The final training accuracy is stored in
    ``model.metadata["train_accuracy"]``.
    """
    if not learning_rate > 0:
        raise ValueError("learning_rate must be positive")
    if int(epochs) < 1:
        raise ValueError("epochs must be positive")
    X, y = data.features, data.labels
    if X.shape[0] < 2 or data.n_classes < 2:
        raise ValueError("need at least 2 rows and 2 classes")
    rng = np.random.default_rng(seed)
    model = MlpModel.init_random([data.d, *hidden, data.n_classes], rng, init_scale)
    loss = float("nan")
    # divergence is reported below, not through numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(int(epochs)):
            loss, gW, gb = model.loss_and_grads(X, y)
            for W, b, dW, db in zip(model.weights, model.biases, gW, gb):
                W -= learning_rate * dW
                b -= learning_rate * db
            if not np.isfinite(loss) or (epoch % 100 == 0 and not np.all(np.isfinite(model.get_params()))):
                raise TrainingError(f"training diverged at epoch {epoch} (loss={loss}); lower the learning rate")
    if not np.all(np.isfinite(model.get_params())):
        raise TrainingError("training produced non-finite parameters")
    acc = float(np.mean(model.predict(X) == y))
    model.metadata = {
        "seed": int(seed),
        "epochs": int(epochs),
        "learning_rate": float(learning_rate),
        "init_scale": float(init_scale),
        "final_loss": loss,
        "train_accuracy": acc,
    }
    log.info("trained MLP %s: loss %.4f, accuracy %.4f", model.layer_sizes, loss, acc)
    return model


def predict_proba(model, x):
    """Validated ``model.predict_proba`` for a single d-vector."""
    p = np.asarray(model.predict_proba(np.asarray(x, dtype=np.float64)), dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("predictor returned an invalid probability vector")
    return p


class CallablePredictor:
    """Adapts a plain function returning class probabilities.

    ``fn`` receives an (n, d) array and must return (n, C) probabilities.
    """

    def __init__(self, fn, n_features, n_classes):
        self.fn = fn
        self.n_features = int(n_features)
        self.n_classes = int(n_classes)

    def predict_proba(self, X):
        X2, single = _check_input(X, self.n_features)
        P = np.asarray(self.fn(X2), dtype=np.float64).reshape(X2.shape[0], self.n_classes)
        return P[0] if single else P


class ProbabilityTable:
    """Precomputed probabilities for known rows (e.g. read from a CSV).

    Lookups are by exact feature-vector match; unseen inputs raise ``KeyError``.
    """

    def __init__(self, features, probabilities):
        X = np.asarray(features, dtype=np.float64)
        P = np.asarray(probabilities, dtype=np.float64)
        if X.shape[0] != P.shape[0]:
            raise ValueError("one probability row per feature row is required")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("probability rows must be nonnegative and sum to 1")
        self.n_features = X.shape[1]
        self.n_classes = P.shape[1]
        self._rows = {row.tobytes(): p for row, p in zip(X, P)}

    def predict_proba(self, X):
        X2, single = _check_input(X, self.n_features)
        try:
            P = np.array([self._rows[np.ascontiguousarray(r).tobytes()] for r in X2])
        except KeyError:
            raise KeyError("input is not one of the tabulated rows") from None
        return P[0] if single else P
