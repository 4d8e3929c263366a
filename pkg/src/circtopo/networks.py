"""Two small MLPs (policy scorer and value head) with hand-written gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PolicyParams:
    """Per-candidate scorer ``w2 . tanh(w1 x + b1) + b2 + eta * omega``.

    ``eta`` is a fixed prior coefficient, not trained.
    """

    w1: np.ndarray  # (H, 3)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H,)
    b2: float
    eta: float

    TRAINABLE = ("w1", "b1", "w2", "b2")

    @classmethod
    def init(cls, hidden: int, eta: float, rng: np.random.Generator) -> "PolicyParams":
        return cls(
            w1=rng.normal(0.0, 1.0 / np.sqrt(3.0), size=(hidden, 3)),
            b1=np.zeros(hidden),
            w2=rng.normal(0.0, 0.1 / np.sqrt(hidden), size=hidden),
            b2=0.0,
            eta=float(eta),
        )

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2, self.eta)


@dataclass
class ValueParams:
    """Scalar value head over the 2-vector ``[omega_t, g_t]``."""

    v1: np.ndarray  # (H, 2)
    c1: np.ndarray  # (H,)
    v2: np.ndarray  # (H,)
    c2: float

    TRAINABLE = ("v1", "c1", "v2", "c2")

    @classmethod
    def init(cls, hidden: int, rng: np.random.Generator) -> "ValueParams":
        return cls(
            v1=rng.normal(0.0, 1.0 / np.sqrt(2.0), size=(hidden, 2)),
            c1=np.zeros(hidden),
            v2=rng.normal(0.0, 0.1 / np.sqrt(hidden), size=hidden),
            c2=0.0,
        )

    def copy(self) -> "ValueParams":
        return ValueParams(self.v1.copy(), self.c1.copy(), self.v2.copy(), self.c2)


def policy_hidden(params: PolicyParams, features: np.ndarray) -> np.ndarray:
    return np.tanh(features @ params.w1.T + params.b1)


def policy_logits(params: PolicyParams, features: np.ndarray) -> np.ndarray:
    """Logits for every row of ``features`` (columns: omega, index, step)."""
    h = policy_hidden(params, features)
    return h @ params.w2 + params.b2 + params.eta * features[:, 0]


def masked_softmax(logits: np.ndarray, selected: np.ndarray) -> np.ndarray:
    """Softmax over entries where ``selected`` is False; zero elsewhere."""
    selected = np.asarray(selected, dtype=bool)
    if selected.all():
        raise ValueError("every candidate is masked")
    z = np.where(selected, -np.inf, logits)
    z = z - z[~selected].max()
    e = np.exp(z)
    return e / e.sum()


def value_forward(params: ValueParams, inputs: np.ndarray) -> np.ndarray:
    """``inputs`` is ``(B, 2)``; returns ``(B,)``."""
    h = np.tanh(inputs @ params.v1.T + params.c1)
    return h @ params.v2 + params.c2


def value_loss_and_grad(params: ValueParams, inputs: np.ndarray, targets: np.ndarray):
    h = np.tanh(inputs @ params.v1.T + params.c1)
    pred = h @ params.v2 + params.c2
    err = pred - targets
    loss = float(np.mean(err**2))
    d = 2.0 * err / len(err)
    dz = np.outer(d, params.v2) * (1.0 - h**2)
    grads = {
        "v1": dz.T @ inputs,
        "c1": dz.sum(axis=0),
        "v2": h.T @ d,
        "c2": float(d.sum()),
    }
    return loss, grads


@dataclass
class Adam:
    """Plain Adam over a params dataclass with a ``TRAINABLE`` field list."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads: dict, maximize: bool = False) -> None:
        self.t += 1
        sign = 1.0 if maximize else -1.0
        for name in params.TRAINABLE:
            g = np.asarray(grads[name], dtype=np.float64)
            m = self.beta1 * self.m.get(name, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(name, 0.0) + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            mhat = m / (1 - self.beta1**self.t)
            vhat = v / (1 - self.beta2**self.t)
            upd = sign * self.lr * mhat / (np.sqrt(vhat) + self.eps)
            cur = getattr(params, name)
            if np.ndim(cur) == 0:
                setattr(params, name, float(cur + upd))
            else:
                setattr(params, name, cur + upd)

