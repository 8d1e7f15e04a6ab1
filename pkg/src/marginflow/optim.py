"""Optimizer steppers over the empirical loss L(w) = sum_n ell(w'x_n),
with geometric checkpointing and convergence diagnostics.

Long full-batch runs (gd / momentum / adam with the built-in exp or
logistic losses) go through a compiled kernel; everything else runs the
plain numpy loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from numba import njit

from .data import Dataset
from .errors import InputError, OverflowError_
from .losses import (
    LOSS_TAG_EXP,
    LOSS_TAG_LOGISTIC,
    LossSpec,
    smoothness_budget,
)

VARIANT_GD = 0
VARIANT_MOMENTUM = 1
VARIANT_ADAM = 2
_VARIANTS = {"gd": VARIANT_GD, "momentum": VARIANT_MOMENTUM, "sgd": None, "adam": VARIANT_ADAM}

CHECKPOINT_RATIO = 1.2
CHECKPOINT_START = 10


@dataclass(frozen=True)
class OptimConfig:
    variant: str = "gd"
    step_size: float | None = None  # default 1 / sigma_max(X)^2
    momentum_coeff: float = 0.9
    batch_size: int = 1
    adam_params: tuple[float, float, float] = (0.9, 0.999, 1e-8)
    max_iter: int = 10_000
    init: np.ndarray | None = None
    seed: int = 0
    checkpoint_ratio: float = CHECKPOINT_RATIO
    checkpoint_start: int = CHECKPOINT_START
    step_warn_override: bool = False  # proceed past the smoothness step bound

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise InputError(f"unknown variant '{self.variant}'")
        if self.step_size is not None and self.step_size < 0:
            raise InputError("step_size must be >= 0")
        if not (0.0 <= self.momentum_coeff < 1.0):
            raise InputError("momentum_coeff must lie in [0, 1)")
        b1, b2, eps = self.adam_params
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0 and eps > 0.0):
            raise InputError("invalid adam parameters")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # checkpoint iterations, strictly increasing
    iterates: np.ndarray  # len(times) x d
    losses: np.ndarray
    grad_norms: np.ndarray
    config: dict  # config echo, serialization-ready
    truncated_at: int | None = None  # step index where the run overflowed

    @property
    def final(self):
        return int(self.times[-1]), self.iterates[-1]

    def to_csv(self, path) -> None:
        d = self.iterates.shape[1]
        header = "t," + ",".join(f"w_{i+1}" for i in range(d)) + ",loss,grad_norm"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for k, t in enumerate(self.times):
                ws = ",".join(repr(float(v)) for v in self.iterates[k])
                fh.write(f"{int(t)},{ws},{repr(float(self.losses[k]))},{repr(float(self.grad_norms[k]))}\n")

    def to_json(self, path) -> None:
        doc = {
            "kind": "trajectory",
            "config": self.config,
            "truncated_at": self.truncated_at,
            "checkpoints": [
                {
                    "t": int(t),
                    "w": [float(v) for v in self.iterates[k]],
                    "loss": float(self.losses[k]),
                    "grad_norm": float(self.grad_norms[k]),
                }
                for k, t in enumerate(self.times)
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)


def checkpoint_times(max_iter: int, ratio: float = CHECKPOINT_RATIO, start: int = CHECKPOINT_START) -> np.ndarray:
    """Geometric schedule (uniform in log t) plus both endpoints."""
    if max_iter < 1:
        raise InputError("max_iter must be >= 1")
    ts = {0, max_iter}
    t = float(start)
    while t < max_iter:
        ts.add(int(round(t)))
        t *= ratio
    return np.array(sorted(ts), dtype=np.int64)


def full_gradient(loss: LossSpec, data: Dataset, w) -> np.ndarray:
    """sum_n ell'(w'x_n) x_n. Per-term underflow to zero is benign."""
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise InputError("non-finite iterate")
    margins = w @ data.points
    with np.errstate(over="ignore"):  # overflow is reported as an error below
        terms = loss.derivative(margins)
    if not np.all(np.isfinite(terms)):
        bad = int(np.where(~np.isfinite(terms))[0][0])
        raise OverflowError_(f"gradient term overflowed at sample {bad}")
    return data.points @ terms


def total_loss(loss: LossSpec, data: Dataset, w) -> float:
    return float(np.sum(loss.value(np.asarray(w, dtype=float) @ data.points)))


def gd_step(loss: LossSpec, data: Dataset, w, eta: float) -> np.ndarray:
    if eta < 0:
        raise InputError("step size must be >= 0")
    return np.asarray(w, dtype=float) - eta * full_gradient(loss, data, w)


def momentum_step(state, loss: LossSpec, data: Dataset, eta: float, gamma: float):
    """Heavy ball: v <- gamma v - eta grad, w <- w + v."""
    w, v = state
    v = gamma * np.asarray(v, dtype=float) - eta * full_gradient(loss, data, w)
    return np.asarray(w, dtype=float) + v, v


def sgd_step(state, loss: LossSpec, data: Dataset, eta: float, batch_size: int, rng):
    """Without-replacement mini-batch gradient scaled by N/batch_size.

    Batch indices are sorted so batch_size = N reproduces the full-batch
    sum order bit for bit.
    """
    if not (1 <= batch_size <= data.count):
        raise InputError("batch_size must lie in [1, N]")
    w = np.asarray(state, dtype=float)
    idx = np.sort(rng.choice(data.count, size=batch_size, replace=False))
    cols = data.points[:, idx]
    terms = loss.derivative(w @ cols)
    grad = cols @ terms * (data.count / batch_size)
    return w - eta * grad


def adam_step(state, loss: LossSpec, data: Dataset, eta: float, b1: float, b2: float, eps: float):
    """Bias-corrected first/second moment update."""
    w, m, v, t = state
    g = full_gradient(loss, data, w)
    t = t + 1
    m = b1 * m + (1.0 - b1) * g
    v = b2 * v + (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    w = np.asarray(w, dtype=float) - eta * m_hat / (np.sqrt(v_hat) + eps)
    return w, m, v, t


@njit(cache=True)
def _loss_and_grad_terms(margins, tag):
    n = margins.shape[0]
    loss = 0.0
    terms = np.empty(n)
    for i in range(n):
        u = margins[i]
        if tag == 0:  # exp
            e = np.exp(-u)
            loss += e
            terms[i] = -e
        else:  # logistic
            if u >= 0.0:
                e = np.exp(-u)
                loss += np.log1p(e)
                terms[i] = -e / (1.0 + e)
            else:
                e = np.exp(u)
                loss += -u + np.log1p(e)
                terms[i] = -1.0 / (1.0 + e)
    return loss, terms


@njit(cache=True)
def _run_kernel(X, eta, w0, cps, loss_tag, variant, gamma, b1, b2, eps):
    d, n = X.shape
    ncp = cps.shape[0]
    W = np.zeros((ncp, d))
    losses = np.zeros(ncp)
    gnorms = np.zeros(ncp)
    w = w0.copy()
    v = np.zeros(d)
    m1 = np.zeros(d)
    m2 = np.zeros(d)
    grad = np.zeros(d)
    margins = np.empty(n)
    k = 0
    t = 0
    T = cps[ncp - 1]
    failed_at = -1
    while True:
        for i in range(n):
            s = 0.0
            for j in range(d):
                s += w[j] * X[j, i]
            margins[i] = s
        loss, terms = _loss_and_grad_terms(margins, loss_tag)
        for j in range(d):
            s = 0.0
            for i in range(n):
                s += X[j, i] * terms[i]
            grad[j] = s
        gsq = 0.0
        ok = True
        for j in range(d):
            gsq += grad[j] * grad[j]
            if not np.isfinite(grad[j]):
                ok = False
        if not ok or not np.isfinite(loss):
            failed_at = t
            break
        while k < ncp and cps[k] == t:
            for j in range(d):
                W[k, j] = w[j]
            losses[k] = loss
            gnorms[k] = np.sqrt(gsq)
            k += 1
        if t >= T:
            break
        if variant == 0:  # gd
            for j in range(d):
                w[j] = w[j] - eta * grad[j]
        elif variant == 1:  # heavy-ball momentum
            for j in range(d):
                v[j] = gamma * v[j] - eta * grad[j]
                w[j] = w[j] + v[j]
        else:  # adam
            tt = t + 1
            c1 = 1.0 - b1**tt
            c2 = 1.0 - b2**tt
            for j in range(d):
                m1[j] = b1 * m1[j] + (1.0 - b1) * grad[j]
                m2[j] = b2 * m2[j] + (1.0 - b2) * grad[j] * grad[j]
                w[j] = w[j] - eta * (m1[j] / c1) / (np.sqrt(m2[j] / c2) + eps)
        t += 1
    return W, losses, gnorms, k, failed_at


def default_step_size(data: Dataset) -> float:
    """1 / sigma_max(X)^2, the reference experiments' learning rate."""
    return 1.0 / float(np.linalg.norm(data.points, 2)) ** 2


def run(config: OptimConfig, loss: LossSpec, data: Dataset) -> Trajectory:
    """Execute the configured variant for max_iter steps, recording
    (t, w, loss, ||grad||) on the geometric checkpoint schedule."""
    d = data.dim
    w0 = np.zeros(d) if config.init is None else np.asarray(config.init, dtype=float)
    if w0.shape != (d,):
        raise InputError("init dimension mismatch")
    if config.step_size is not None:
        eta = config.step_size
    elif config.variant == "adam":
        eta = 1e-3  # conventional default; the 1/sigma_max^2 rule targets plain GD
    else:
        eta = default_step_size(data)

    step_warning = None
    if config.variant == "gd":
        _, max_step = smoothness_budget(loss, data, w0)
        if eta >= max_step:
            step_warning = f"step size {eta} exceeds smoothness bound {max_step}"
            if not config.step_warn_override:
                raise InputError(step_warning + " (set step_warn_override to proceed)")

    echo = asdict(config)
    echo["init"] = [float(v) for v in w0]
    echo["step_size"] = float(eta)
    echo["loss"] = loss.name
    echo["dataset"] = {"provenance": data.provenance, "dim": d, "count": data.count}
    if step_warning:
        echo["step_warning"] = step_warning

    cps = checkpoint_times(config.max_iter, config.checkpoint_ratio, config.checkpoint_start)

    # full-batch sgd is exactly gd; run it on the same path so the two are
    # bit-identical
    variant = config.variant
    if variant == "sgd" and config.batch_size == data.count:
        variant = "gd"
    fast = (
        variant in ("gd", "momentum", "adam")
        and loss.kernel_tag in (LOSS_TAG_EXP, LOSS_TAG_LOGISTIC)
    )
    if fast:
        b1, b2, eps = config.adam_params
        W, losses, gnorms, k, failed_at = _run_kernel(
            np.ascontiguousarray(data.points),
            float(eta),
            w0,
            cps,
            int(loss.kernel_tag),
            _VARIANTS[variant],
            float(config.momentum_coeff),
            float(b1),
            float(b2),
            float(eps),
        )
        truncated = None if failed_at < 0 else int(failed_at)
        return Trajectory(
            times=cps[:k].copy(),
            iterates=W[:k],
            losses=losses[:k],
            grad_norms=gnorms[:k],
            config=echo,
            truncated_at=truncated,
        )
    return _run_python(config, loss, data, w0, eta, cps, echo)


def _run_python(config, loss, data, w0, eta, cps, echo) -> Trajectory:
    rng = np.random.default_rng(config.seed)
    w = w0.copy()
    v = np.zeros_like(w)
    m = np.zeros_like(w)
    s2 = np.zeros_like(w)
    adam_t = 0
    rows, losses, gnorms, times = [], [], [], []
    truncated = None
    k = 0
    for t in range(int(cps[-1]) + 1):
        try:
            g = full_gradient(loss, data, w)
            lval = total_loss(loss, data, w)
        except OverflowError_:
            truncated = t
            break
        if k < len(cps) and cps[k] == t:
            rows.append(w.copy())
            losses.append(lval)
            gnorms.append(float(np.linalg.norm(g)))
            times.append(t)
            k += 1
        if t >= cps[-1]:
            break
        if config.variant == "gd":
            w = w - eta * g
        elif config.variant == "momentum":
            v = config.momentum_coeff * v - eta * g
            w = w + v
        elif config.variant == "sgd":
            w = sgd_step(w, loss, data, eta, config.batch_size, rng)
        else:
            b1, b2, eps = config.adam_params
            (w, m, s2, adam_t) = adam_step((w, m, s2, adam_t), loss, data, eta, b1, b2, eps)
    return Trajectory(
        times=np.array(times, dtype=np.int64),
        iterates=np.array(rows),
        losses=np.array(losses),
        grad_norms=np.array(gnorms),
        config=echo,
        truncated_at=truncated,
    )
