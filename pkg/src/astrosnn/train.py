"""Supervised linear readout over hidden spike-count features.

Softmax cross-entropy minimized with Adam (bias-corrected first/second
moments), full-batch, with early stopping on validation loss. Everything
is deterministic given (data, params, seed): the only randomness is the
seeded train/validation shuffle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AdamParams:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.beta1 < 1:
            raise ValueError("beta1 must lie in (0, 1)")
        if not 0 < self.beta2 < 1:
            raise ValueError("beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class EarlyStopSpec:
    """Stop once `patience` consecutive epochs fail to improve the monitored
    validation loss by at least min_delta (patience=0 stops at the first
    non-improving epoch)."""

    patience: int = 10
    min_delta: float = 0.0

    def __post_init__(self) -> None:
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if self.min_delta < 0:
            raise ValueError("min_delta must be non-negative")


class EarlyStopper:
    """Wait-counter early stopping, drivable by any scalar loss sequence."""

    def __init__(self, spec: EarlyStopSpec):
        self.spec = spec
        self.best = float("inf")
        self.wait = 0
        self.best_epoch: int | None = None

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch's monitored loss; True means stop now."""
        if loss < self.best - self.spec.min_delta:
            self.best = loss
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= max(self.spec.patience, 1)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0


@dataclass
class ReadoutModel:
    """Linear classifier: prediction = argmax(features @ weights + bias)."""

    weights: np.ndarray
    bias: np.ndarray
    classes: np.ndarray
    history: TrainHistory
    train_indices: np.ndarray
    val_indices: np.ndarray

    def scores(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.scores(features), axis=1)]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy_loss(
    weights: np.ndarray, bias: np.ndarray, features: np.ndarray, onehot: np.ndarray
) -> float:
    probs = softmax(features @ weights + bias)
    eps = 1e-12
    return float(-np.mean(np.sum(onehot * np.log(probs + eps), axis=1)))


def cross_entropy_grad(
    weights: np.ndarray, bias: np.ndarray, features: np.ndarray, onehot: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the mean softmax cross-entropy."""
    n = features.shape[0]
    delta = softmax(features @ weights + bias) - onehot
    return features.T @ delta / n, delta.mean(axis=0)


class Adam:
    """Standard Adam over a list of parameter arrays (updated in place)."""

    def __init__(self, params: list[np.ndarray], hp: AdamParams):
        self.params = params
        self.hp = hp
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        hp = self.hp
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = hp.beta1 * self.m[i] + (1 - hp.beta1) * g
            self.v[i] = hp.beta2 * self.v[i] + (1 - hp.beta2) * g * g
            m_hat = self.m[i] / (1 - hp.beta1**self.t)
            v_hat = self.v[i] / (1 - hp.beta2**self.t)
            p -= hp.learning_rate * m_hat / (np.sqrt(v_hat) + hp.epsilon)


def _onehot(labels: np.ndarray, classes: np.ndarray) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes.tolist())}
    out = np.zeros((len(labels), len(classes)))
    for row, label in enumerate(labels.tolist()):
        out[row, index[label]] = 1.0
    return out


def train_readout(
    features: np.ndarray,
    labels: np.ndarray,
    adam: AdamParams = AdamParams(),
    stop: EarlyStopSpec = EarlyStopSpec(),
    max_epochs: int = 200,
    seed: int = 0,
    val_split: float = 0.2,
) -> ReadoutModel:
    """Fit the readout on spike-count features with a seeded 80/20 split.

    The validation slice drives early stopping; the returned weights are
    those of the best validation epoch. History records losses and
    accuracies per epoch plus the stopping and best epochs.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    if features.ndim != 2:
        raise ValueError("features must be trials x n_features")
    if len(features) != len(labels):
        raise ValueError(f"{len(features)} feature rows vs {len(labels)} labels")
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least two classes to train")
    if not 0 < val_split < 1:
        raise ValueError("val_split must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(features))
    n_val = max(1, int(round(len(features) * val_split)))
    if n_val >= len(features):
        raise ValueError("validation split leaves no training data")
    val_idx = order[:n_val]
    train_idx = order[n_val:]
    x_train, y_train = features[train_idx], labels[train_idx]
    x_val, y_val = features[val_idx], labels[val_idx]
    y_train_1h = _onehot(y_train, classes)
    y_val_1h = _onehot(y_val, classes)

    weights = np.zeros((features.shape[1], len(classes)))
    bias = np.zeros(len(classes))
    optimizer = Adam([weights, bias], adam)
    stopper = EarlyStopper(stop)
    history = TrainHistory()
    best_weights, best_bias = weights.copy(), bias.copy()

    def accuracy(x, y):
        pred = classes[np.argmax(x @ weights + bias, axis=1)]
        return float(np.mean(pred == y))

    epoch = 0
    for epoch in range(1, max_epochs + 1):
        grad_w, grad_b = cross_entropy_grad(weights, bias, x_train, y_train_1h)
        optimizer.step([grad_w, grad_b])
        train_loss = cross_entropy_loss(weights, bias, x_train, y_train_1h)
        val_loss = cross_entropy_loss(weights, bias, x_val, y_val_1h)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.train_accuracy.append(accuracy(x_train, y_train))
        history.val_accuracy.append(accuracy(x_val, y_val))
        should_stop = stopper.update(epoch, val_loss)
        if stopper.wait == 0:
            best_weights, best_bias = weights.copy(), bias.copy()
        if should_stop:
            break
    history.stopped_epoch = epoch
    history.best_epoch = stopper.best_epoch or epoch
    return ReadoutModel(
        weights=best_weights,
        bias=best_bias,
        classes=classes,
        history=history,
        train_indices=train_idx,
        val_indices=val_idx,
    )


def evaluate(model: ReadoutModel, features: np.ndarray, labels: np.ndarray) -> dict[str, float]:
    """Accuracy, precision, and recall on an evaluation set.

    Binary problems report the positive class (the larger label); multiclass
    problems macro-average, with classes never predicted contributing
    precision 0.
    """
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("evaluation set must not be empty")
    predictions = model.predict(features)
    accuracy = float(np.mean(predictions == labels))
    classes = model.classes
    per_class_precision = []
    per_class_recall = []
    for c in classes:
        tp = int(np.sum((predictions == c) & (labels == c)))
        fp = int(np.sum((predictions == c) & (labels != c)))
        fn = int(np.sum((predictions != c) & (labels == c)))
        per_class_precision.append(tp / (tp + fp) if tp + fp else 0.0)
        per_class_recall.append(tp / (tp + fn) if tp + fn else 0.0)
    if len(classes) == 2:
        precision = per_class_precision[-1]
        recall = per_class_recall[-1]
    else:
        precision = float(np.mean(per_class_precision))
        recall = float(np.mean(per_class_recall))
    return {"accuracy": accuracy, "precision": precision, "recall": recall}
