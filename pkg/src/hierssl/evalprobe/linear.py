"""Ridge and L2 logistic regression on train-fold standardized inputs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        sd = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(sd > 1e-12, sd, 1.0))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass
class RidgeModel:
    w: np.ndarray
    b: float
    scaler: Standardizer | None

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = self.scaler(x) if self.scaler is not None else np.asarray(x, dtype=np.float64)
        return x @ self.w + self.b


def ridge(x: np.ndarray, y: np.ndarray, lam: float = 1.0, standardize: bool = True) -> RidgeModel:
    """argmin |y - Xw - b|^2 + lam |w|^2 (intercept unpenalized), closed form."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    scaler = Standardizer.fit(x) if standardize else None
    xs = scaler(x) if scaler is not None else x
    xm = xs.mean(axis=0)
    ym = y.mean()
    xc = xs - xm
    a = xc.T @ xc + lam * np.eye(x.shape[1])
    w = np.linalg.solve(a, xc.T @ (y - ym))
    return RidgeModel(w=w, b=float(ym - xm @ w), scaler=scaler)


@dataclass
class LogisticModel:
    w: np.ndarray           # (d, C)
    b: np.ndarray           # (C,)
    classes: np.ndarray
    scaler: Standardizer
    iterations: int
    grad_norm: float

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.scaler(x) @ self.w + self.b

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x), axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.logits(x), axis=1)]

    def decision(self, x: np.ndarray) -> np.ndarray:
        """Positive-class log-odds for two classes."""
        z = self.logits(x)
        return z[:, -1] - z[:, 0]


def logistic(x: np.ndarray, y: np.ndarray, c: float = 1.0, tol: float = 1e-6,
             max_iter: int = 5000) -> LogisticModel:
    """Multinomial logistic regression, objective mean CE + |W|^2 / (2 c n).

    Full-batch accelerated gradient descent with step 1/L until the gradient
    norm drops below ``tol`` or ``max_iter`` iterations.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y).ravel()
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("logistic regression needs at least two classes")
    scaler = Standardizer.fit(x)
    xs = scaler(x)
    n, d = xs.shape
    k = len(classes)
    onehot = (y[:, None] == classes[None, :]).astype(np.float64)
    reg = 1.0 / (c * n)
    xa = np.hstack([xs, np.ones((n, 1))])
    lip = 0.5 * np.linalg.norm(xa, 2) ** 2 / n + reg
    step = 1.0 / lip
    theta = np.zeros((d + 1, k))
    mask = np.ones((d + 1, 1))
    mask[-1] = 0.0              # intercept unpenalized

    def grad(th):
        p = softmax(xa @ th, axis=1)
        return xa.T @ (p - onehot) / n + reg * mask * th

    prev = theta.copy()
    gnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        look = theta + ((it - 1) / (it + 2)) * (theta - prev)
        g = grad(look)
        prev = theta
        theta = look - step * g
        gnorm = float(np.linalg.norm(grad(theta))) if it % 10 == 0 else np.inf
        if gnorm < tol:
            break
    gnorm = float(np.linalg.norm(grad(theta)))
    return LogisticModel(w=theta[:-1], b=theta[-1], classes=classes, scaler=scaler,
                         iterations=it, grad_norm=gnorm)


def logistic_loss(model: LogisticModel, x, y, c: float = 1.0) -> float:
    xs = model.scaler(x)
    onehot = (np.asarray(y)[:, None] == model.classes[None, :])
    lp = log_softmax(xs @ model.w + model.b, axis=1)
    return float(-lp[onehot].mean() + np.sum(model.w ** 2) / (2 * c * len(xs)))
