"""Convergence diagnostics for a recorded trajectory: direction / angle /
margin gaps against the max-margin vector, scaled loss, the log-growth
residuals (including the iterated-log chain), validation-loss slope, and
decade-supremum boundedness verdicts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InputError, NotApplicableError
from .losses import LossSpec
from .margin import DegenerateChain, MaxMarginSolution, ResidualOffset
from .optim import Trajectory

FIT_KAPPA = 1.5
FIT_SLACK = 0.1

TRANSFORMS = ("raw", "times_logt", "times_log2t", "times_t")


@dataclass(frozen=True)
class RateSeries:
    """Per-checkpoint diagnostic scalars; entries outside a quantity's
    domain (e.g. iterated logs below 1) are NaN."""

    times: np.ndarray
    direction_gap: np.ndarray
    angle_gap: np.ndarray
    margin_gap: np.ndarray
    scaled_loss: np.ndarray
    norm_minus_log: np.ndarray
    residual_norm: np.ndarray | None = None
    chain_residual_norm: np.ndarray | None = None

    def to_csv(self, path) -> None:
        names = ["direction_gap", "angle_gap", "margin_gap", "scaled_loss", "norm_minus_log"]
        cols = [self.direction_gap, self.angle_gap, self.margin_gap, self.scaled_loss, self.norm_minus_log]
        if self.residual_norm is not None:
            names.append("residual_norm")
            cols.append(self.residual_norm)
        if self.chain_residual_norm is not None:
            names.append("chain_residual_norm")
            cols.append(self.chain_residual_norm)
        with open(path, "w") as fh:
            fh.write("t," + ",".join(names) + "\n")
            for i, t in enumerate(self.times):
                fh.write(f"{int(t)}," + ",".join(repr(float(c[i])) for c in cols) + "\n")


@dataclass(frozen=True)
class FitResult:
    quantity: str
    transform: str
    sup_first_decade: float
    sup_last_decade: float
    bounded: bool
    kappa: float = FIT_KAPPA
    slack: float = FIT_SLACK


@dataclass(frozen=True)
class RateReport:
    fits: tuple[FitResult, ...]
    verdicts: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self, path) -> None:
        doc = {
            "kind": "rate_report",
            "fits": [
                {
                    "quantity": f.quantity,
                    "transform": f.transform,
                    "sup_first_decade": f.sup_first_decade,
                    "sup_last_decade": f.sup_last_decade,
                    "bounded": bool(f.bounded),
                    "kappa": f.kappa,
                    "slack": f.slack,
                }
                for f in self.fits
            ],
            "verdicts": {k: bool(v) for k, v in self.verdicts.items()},
            "all_pass": bool(self.all_pass),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)


def direction_gap(w, w_hat) -> float:
    """|| w/||w|| - w_hat/||w_hat|| ||, in [0, 2]."""
    w = np.asarray(w, dtype=float)
    w_hat = np.asarray(w_hat, dtype=float)
    nw = np.linalg.norm(w)
    if nw == 0.0:
        raise InputError("direction gap undefined at w = 0")
    return float(np.linalg.norm(w / nw - w_hat / np.linalg.norm(w_hat)))


def angle_gap(w, w_hat) -> float:
    """1 - cos(w, w_hat), in [0, 2]."""
    w = np.asarray(w, dtype=float)
    w_hat = np.asarray(w_hat, dtype=float)
    nw = np.linalg.norm(w)
    if nw == 0.0:
        raise InputError("angle gap undefined at w = 0")
    return float(1.0 - (w @ w_hat) / (nw * np.linalg.norm(w_hat)))


def margin_gap(w, data: Dataset, w_hat) -> float:
    """Max-margin value 1/||w_hat|| minus the normalized margin of w."""
    w = np.asarray(w, dtype=float)
    nw = np.linalg.norm(w)
    if nw == 0.0:
        raise InputError("margin gap undefined at w = 0")
    return float(1.0 / np.linalg.norm(w_hat) - np.min(w @ data.points) / nw)


def scaled_loss(t, loss_value) -> float:
    if t < 1:
        raise InputError("scaled loss defined for t >= 1")
    return float(t) * float(loss_value)


def iterated_log(t: float, depth: int) -> float:
    """log applied depth times; NaN once any inner value drops to <= 1
    (outside the asymptotic regime)."""
    v = float(t)
    for _ in range(depth):
        if v <= 1.0:
            return math.nan
        v = math.log(v)
    return v


def residual_series(
    traj: Trajectory,
    sol: MaxMarginSolution,
    data: Dataset,
    offset: ResidualOffset | None = None,
    chain: DegenerateChain | None = None,
) -> RateSeries:
    """All per-checkpoint diagnostics for t >= 1 (t = 0 is dropped)."""
    if traj.iterates.shape[1] != sol.w_hat.shape[0]:
        raise InputError("trajectory / solution dimension mismatch")
    keep = traj.times >= 1
    ts = traj.times[keep].astype(float)
    W = traj.iterates[keep]
    losses = traj.losses[keep]
    w_hat = sol.w_hat
    logts = np.log(ts)

    dgap = np.array([direction_gap(w, w_hat) for w in W])
    agap = np.array([angle_gap(w, w_hat) for w in W])
    mgap = np.array([margin_gap(w, data, w_hat) for w in W])
    sloss = ts * losses
    nml = np.linalg.norm(W, axis=1) - np.linalg.norm(w_hat) * logts

    res = None
    if offset is not None:
        res = np.linalg.norm(W - logts[:, None] * w_hat[None, :] - offset.w_tilde[None, :], axis=1)

    chain_res = None
    if chain is not None:
        w_hats = chain.w_hats()
        chain_res = np.full(len(ts), np.nan)
        for i, t in enumerate(ts):
            pred = np.zeros_like(w_hat)
            ok = True
            for m, wm in enumerate(w_hats, start=1):
                lm = iterated_log(t, m)
                if math.isnan(lm):
                    ok = False
                    break
                pred = pred + lm * wm
            if ok:
                chain_res[i] = np.linalg.norm(W[i] - pred)

    return RateSeries(
        times=ts,
        direction_gap=dgap,
        angle_gap=agap,
        margin_gap=mgap,
        scaled_loss=sloss,
        norm_minus_log=nml,
        residual_norm=res,
        chain_residual_norm=chain_res,
    )


def fit_bounded(
    times,
    values,
    transform: str = "raw",
    kappa: float = FIT_KAPPA,
    slack: float = FIT_SLACK,
    quantity: str = "series",
) -> FitResult:
    """Decade-supremum boundedness test: after the transform, the supremum
    over the last decade of t must not exceed kappa * (first-decade
    supremum) + slack. NaN entries are outside the quantity's domain and
    are ignored."""
    if transform not in TRANSFORMS:
        raise InputError(f"unknown transform '{transform}'")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise InputError("times / values length mismatch")
    keep = np.isfinite(values) & (times >= 1)
    times, values = times[keep], values[keep]
    if len(times) < 10:
        raise InputError("need at least 10 finite points")
    t_min, t_max = float(times.min()), float(times.max())
    if t_max < 100.0 * t_min:
        raise InputError("series must span at least 2 decades")

    if transform == "times_logt":
        values = values * np.log(np.maximum(times, 1.0 + 1e-12))
    elif transform == "times_log2t":
        values = values * np.log(np.maximum(times, 1.0 + 1e-12)) ** 2
    elif transform == "times_t":
        values = values * times

    first = values[times <= 10.0 * t_min]
    last = values[times >= t_max / 10.0]
    sup_first = float(np.max(np.abs(first)))
    sup_last = float(np.max(np.abs(last)))
    return FitResult(
        quantity=quantity,
        transform=transform,
        sup_first_decade=sup_first,
        sup_last_decade=sup_last,
        bounded=sup_last <= kappa * sup_first + slack,
        kappa=kappa,
        slack=slack,
    )


def last_decades_slope(times, values, decades: int = 2) -> float:
    """Least-squares slope of values against log t over the final decades."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (times >= 1)
    times, values = times[keep], values[keep]
    t_max = float(times.max())
    sel = times >= t_max / 10.0**decades
    if np.sum(sel) < 3:
        raise InputError("too few points in the regression window")
    slope, _ = np.polyfit(np.log(times[sel]), values[sel], 1)
    return float(slope)


def validation_loss_slope(
    traj: Trajectory, val_data: Dataset, loss: LossSpec, w_hat
) -> tuple[float, float]:
    """Slope of the validation loss against log t over the last two decades,
    plus the worst folded validation margin under w_hat.

    When every validation point has w_hat'x > 0 the loss decreases instead
    and the slope is not a growth rate: not-applicable."""
    w_hat = np.asarray(w_hat, dtype=float)
    val_margins = w_hat @ val_data.points
    worst = float(np.min(val_margins))
    if worst >= 0.0:
        raise NotApplicableError("all validation points classified correctly by w_hat")
    keep = traj.times >= 1
    ts = traj.times[keep].astype(float)
    losses = np.array([float(np.sum(loss.value(w @ val_data.points))) for w in traj.iterates[keep]])
    return last_decades_slope(ts, losses), worst


def rate_report(
    series: RateSeries,
    kappa: float = FIT_KAPPA,
    slack: float = FIT_SLACK,
) -> RateReport:
    """Boundedness verdicts for the rate-law quantities that apply to the
    series at hand.

    A chain residual marks the degenerate regime: there the norm and angle
    carry an extra iterated-log factor, so their generic fits are replaced
    by the chain residual and the direction gap scaled by
    log t / log log t."""
    degenerate = series.chain_residual_norm is not None
    fits = [
        fit_bounded(series.times, series.scaled_loss, "raw", kappa, slack, "scaled_loss"),
        fit_bounded(series.times, series.margin_gap, "times_logt", kappa, slack, "margin_gap"),
    ]
    if degenerate:
        logts = np.log(series.times)
        loglog = np.where(logts > 1.0, np.log(logts), np.nan)
        scaled_direction = series.direction_gap * logts / loglog
        fits.append(
            fit_bounded(series.times, series.chain_residual_norm, "raw", kappa, slack, "chain_residual_norm")
        )
        fits.append(
            fit_bounded(series.times, scaled_direction, "raw", kappa, slack, "direction_gap_degenerate")
        )
    else:
        fits.append(fit_bounded(series.times, series.angle_gap, "times_log2t", kappa, slack, "angle_gap"))
        fits.append(fit_bounded(series.times, series.direction_gap, "times_logt", kappa, slack, "direction_gap"))
        fits.append(fit_bounded(series.times, series.norm_minus_log, "raw", kappa, slack, "norm_minus_log"))
        if series.residual_norm is not None:
            fits.append(fit_bounded(series.times, series.residual_norm, "raw", kappa, slack, "residual_norm"))
    verdicts = {f.quantity: f.bounded for f in fits}
    return RateReport(fits=tuple(fits), verdicts=verdicts)
