"""Monotone decreasing, smooth losses with exponential tails.

Each loss is a scalar function ell(u) > 0 with ell'(u) < 0, and the
negative derivative -ell'(u) is sandwiched for large u between
c*(1 - exp(-mu_minus*u))*exp(-a*u) and c*(1 + exp(-mu_plus*u))*exp(-a*u).
The exponential and logistic losses satisfy this with a = c = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import log_ndtr

from .errors import InputError

LOSS_TAG_EXP = 0
LOSS_TAG_LOGISTIC = 1


@dataclass(frozen=True)
class TailParams:
    """Envelope parameters for the tail of -ell'. Normalized to a = c = 1."""

    a: float = 1.0
    c: float = 1.0
    mu_plus: float = 1.0
    mu_minus: float = 1.0
    u_plus: float = 0.0
    u_minus: float = 0.0

    def __post_init__(self):
        if self.mu_plus <= 0 or self.mu_minus <= 0:
            raise InputError("tail correction exponents mu_plus, mu_minus must be > 0")
        if not (self.a == 1.0 and self.c == 1.0):
            raise InputError("tail parameters must be normalized to a = c = 1")


@dataclass(frozen=True)
class LossSpec:
    """A scalar loss, its derivative, a smoothness constant, and tail parameters.

    ``beta`` is a Lipschitz constant for ell' (None for the exponential
    loss, which has no global smoothness constant; see
    :func:`local_beta`).
    """

    name: str
    value: Callable[[float], float]
    derivative: Callable[[float], float]
    beta: float | None
    tail: TailParams = field(default_factory=TailParams)
    kernel_tag: int | None = None  # fast-path id for the compiled steppers


def _exp_value(u):
    return np.exp(-np.asarray(u, dtype=float))


def _exp_derivative(u):
    return -np.exp(-np.asarray(u, dtype=float))


def _logistic_value(u):
    # log(1 + e^-u), split at 0 so the exponent is always <= 0
    u = np.asarray(u, dtype=float)
    return np.where(u >= 0, np.log1p(np.exp(-np.abs(u))), -u + np.log1p(np.exp(-np.abs(u))))


def _logistic_derivative(u):
    # -1 / (1 + e^u), again keeping exponents non-positive
    u = np.asarray(u, dtype=float)
    e = np.exp(-np.abs(u))
    return np.where(u >= 0, -e / (1.0 + e), -1.0 / (1.0 + e))


def _probit_value(u):
    return -log_ndtr(np.asarray(u, dtype=float))


def _probit_derivative(u):
    u = np.asarray(u, dtype=float)
    log_phi = -0.5 * u * u - 0.5 * math.log(2 * math.pi)
    return -np.exp(log_phi - log_ndtr(u))


def _probit_beta():
    # max |ell''| sampled once on a wide grid; ell'' -> 1 as u -> -inf
    grid = np.linspace(-40.0, 40.0, 20001)
    d = _probit_derivative(grid)
    return float(np.max(np.abs(np.diff(d) / np.diff(grid))))


_PROBIT_BETA_CACHE: list[float] = []


def exp_loss() -> LossSpec:
    return LossSpec(
        name="exp",
        value=_exp_value,
        derivative=_exp_derivative,
        beta=None,
        tail=TailParams(mu_plus=1.0, mu_minus=1.0, u_plus=0.0, u_minus=0.0),
        kernel_tag=LOSS_TAG_EXP,
    )


def logistic_loss() -> LossSpec:
    # ell'' = sigmoid(u) * sigmoid(-u) <= 1/4
    return LossSpec(
        name="logistic",
        value=_logistic_value,
        derivative=_logistic_derivative,
        beta=0.25,
        tail=TailParams(mu_plus=1.0, mu_minus=1.0, u_plus=0.0, u_minus=0.0),
        kernel_tag=LOSS_TAG_LOGISTIC,
    )


def probit_loss(tail: TailParams | None = None) -> LossSpec:
    """Probit loss -log Phi(u). Tail parameters are caller-declared; verify
    them with :func:`tail_sandwich_check` (the gaussian tail is not
    exponential-tight with a=1)."""
    if not _PROBIT_BETA_CACHE:
        _PROBIT_BETA_CACHE.append(_probit_beta())
    return LossSpec(
        name="probit",
        value=_probit_value,
        derivative=_probit_derivative,
        beta=_PROBIT_BETA_CACHE[0],
        tail=tail if tail is not None else TailParams(),
    )


def custom_loss(name, value, derivative, beta, tail=None) -> LossSpec:
    return LossSpec(
        name=name,
        value=value,
        derivative=derivative,
        beta=beta,
        tail=tail if tail is not None else TailParams(),
    )


_BUILTIN = {"exp": exp_loss, "logistic": logistic_loss, "probit": probit_loss}


def loss_by_name(name: str, tail: TailParams | None = None) -> LossSpec:
    if name not in _BUILTIN:
        raise InputError(f"unknown loss '{name}' (expected one of {sorted(_BUILTIN)})")
    if name == "probit":
        return probit_loss(tail)
    return _BUILTIN[name]()


def loss_value(spec: LossSpec, u) -> float:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InputError("loss argument must be finite")
    return float(spec.value(u)) if u.ndim == 0 else spec.value(u)


def loss_derivative(spec: LossSpec, u) -> float:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InputError("loss argument must be finite")
    return float(spec.derivative(u)) if u.ndim == 0 else spec.derivative(u)


def tail_sandwich_check(spec: LossSpec, grid) -> list[dict]:
    """Check c*(1 -/+ e^{-mu u}) e^{-a u} envelopes on -ell' at each grid point.

    An ok=False entry means the declared TailParams do not hold there.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InputError("empty grid")
    t = spec.tail
    report = []
    for u in grid:
        lower = t.c * (1.0 - math.exp(-t.mu_minus * u)) * math.exp(-t.a * u)
        upper = t.c * (1.0 + math.exp(-t.mu_plus * u)) * math.exp(-t.a * u)
        neg = -float(spec.derivative(u))
        # allow for roundoff right at the envelope
        ok = lower - 1e-15 <= neg <= upper + 1e-15
        report.append({"u": float(u), "lower": lower, "neg_deriv": neg, "upper": upper, "ok": ok})
    return report


def local_beta(spec: LossSpec, data, w0=None) -> float:
    """Smoothness constant of the scalar loss, valid near the start point.

    The exponential loss has no global bound on ell''; following the
    run-start convention we use max_n exp(-w0'x_n), which upper bounds
    ell'' on the margins the iterates visit once every margin is
    non-decreasing.
    """
    if spec.beta is not None:
        return float(spec.beta)
    if spec.name != "exp":
        raise InputError(f"loss '{spec.name}' declares no smoothness constant")
    if w0 is None:
        return 1.0
    margins = np.asarray(w0, dtype=float) @ data.points
    return float(np.max(np.exp(-margins)))


def smoothness_budget(spec: LossSpec, data, w0=None) -> tuple[float, float]:
    """Global smoothness of the empirical objective and the safe step bound.

    Returns (beta * sigma_max(X)^2, 2 / that).
    """
    sigma_max = float(np.linalg.norm(data.points, 2))
    if sigma_max == 0.0:
        raise InputError("degenerate input: zero data matrix")
    global_beta = local_beta(spec, data, w0) * sigma_max**2
    return global_beta, 2.0 / global_beta
