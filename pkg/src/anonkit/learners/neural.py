"""Feed-forward softmax networks trained with Adam on mini-batches.

Logistic regression is the same network without hidden layers.  Inputs are
standardized with training means and deviations stored in the model.  The MLP
returns raw logits from ``predict_scores``; logistic regression returns softmax
probabilities.
"""
from __future__ import annotations

import numpy as np

from anonkit.learners.base import LOGISTIC_REGRESSION, MLP, ClassificationModel, LearnerConfig

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return 1.0 / (1.0 + np.exp(-z))


def _activation_grad(a: np.ndarray, name: str) -> np.ndarray:
    """Derivative expressed through the activation output ``a``."""
    if name == "relu":
        return (a > 0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a**2
    return a * (1.0 - a)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(weights, biases, X: np.ndarray, activation: str) -> list[np.ndarray]:
    """Activations of every layer; the last entry is the logits."""
    acts = [X]
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ W + b
        acts.append(z if i == len(weights) - 1 else _activate(z, activation))
    return acts


def loss_and_grad(weights, biases, X, y, activation: str, l2: float = 0.0):
    """Mean cross-entropy (plus ``l2/2 * sum W^2 / n``) and its gradients."""
    n = X.shape[0]
    acts = forward(weights, biases, X, activation)
    logits = acts[-1]
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[np.arange(n), y]))
    loss += 0.5 * l2 * sum(float((W**2).sum()) for W in weights) / n
    delta = softmax(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gw, gb = [None] * len(weights), [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta + l2 * weights[i] / n
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * _activation_grad(acts[i], activation)
    return loss, gw, gb


def init_params(sizes: list[int], rng: np.random.Generator):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


class NeuralNet(ClassificationModel):
    def __init__(self, config, n_classes, column_map, mean, scale, weights, biases, constant_class=None):
        super().__init__(config, n_classes, column_map)
        self.kind = LOGISTIC_REGRESSION if config.kind == LOGISTIC_REGRESSION else MLP
        self.mean = mean
        self.scale = scale
        self.weights = weights
        self.biases = biases
        self.constant_class = constant_class

    @classmethod
    def fit(cls, config: LearnerConfig, X: np.ndarray, y: np.ndarray, n_classes: int, column_map) -> "NeuralNet":
        n, width = X.shape
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        hidden = list(config.hidden_layers) if config.kind == MLP else []
        rng = np.random.default_rng(config.seed)
        weights, biases = init_params([width] + hidden + [n_classes], rng)
        present = np.unique(y)
        if present.size == 1:
            return cls(config, n_classes, column_map, mean, scale, weights, biases, int(present[0]))
        Xs = (X - mean) / scale
        params = weights + biases
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        step = 0
        batch = min(config.batch_size, n)
        for _ in range(config.epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                _, gw, gb = loss_and_grad(weights, biases, Xs[idx], y[idx], config.activation, config.l2)
                step += 1
                lr = config.learning_rate * np.sqrt(1 - ADAM_BETA2**step) / (1 - ADAM_BETA1**step)
                for i, g in enumerate(gw + gb):
                    m[i] = ADAM_BETA1 * m[i] + (1 - ADAM_BETA1) * g
                    v[i] = ADAM_BETA2 * v[i] + (1 - ADAM_BETA2) * g * g
                    params[i] -= lr * m[i] / (np.sqrt(v[i]) + ADAM_EPS)
        return cls(config, n_classes, column_map, mean, scale, weights, biases)

    def logits(self, X: np.ndarray) -> np.ndarray:
        if self.constant_class is not None:
            out = np.zeros((len(X), self.n_classes))
            out[:, self.constant_class] = 1.0
            return out
        return forward(self.weights, self.biases, (X - self.mean) / self.scale, self.config.activation)[-1]

    def _scores(self, X: np.ndarray) -> np.ndarray:
        z = self.logits(X)
        if self.kind == LOGISTIC_REGRESSION and self.constant_class is None:
            return softmax(z)
        return z

    def probabilities(self, X) -> np.ndarray:
        X = self._matrix(X)
        if self.constant_class is not None:
            return self.logits(X)
        return softmax(self.logits(X))

    def _params(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "constant_class": self.constant_class,
        }

    @classmethod
    def _from_params(cls, config, n_classes, column_map, params) -> "NeuralNet":
        weights = [np.array(W, dtype=np.float64) for W in params["weights"]]
        return cls(
            config,
            n_classes,
            column_map,
            np.array(params["mean"], dtype=np.float64),
            np.array(params["scale"], dtype=np.float64),
            weights,
            [np.array(b, dtype=np.float64) for b in params["biases"]],
            params["constant_class"],
        )
