"""Softmax cross-entropy on K linear predictors, the pairwise block
transform reducing the K-class margin problem to a binary one in K*d
dimensions, and the per-class log-growth residual check.

The flat parameter vector concatenates the rows of W: block k of w_flat
is the predictor w_k for class k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .data import Dataset
from .errors import InputError, OverflowError_
from .margin import MaxMarginSolution, solve_hard_margin
from .optim import OptimConfig, Trajectory, checkpoint_times
from .rates import FitResult, fit_bounded


@dataclass(frozen=True)
class MulticlassProblem:
    """Unfolded points with labels in 1..K."""

    points: np.ndarray  # d x N
    labels: np.ndarray  # values in 1..K
    n_classes: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels, dtype=int)
        if self.n_classes < 2:
            raise InputError("need at least 2 classes")
        if labels.shape != (pts.shape[1],):
            raise InputError("labels must match the number of points")
        if labels.min() < 1 or labels.max() > self.n_classes:
            raise InputError("labels must lie in 1..K")
        pts.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.points.shape[0]

    @property
    def count(self) -> int:
        return self.points.shape[1]

    @property
    def flat_dim(self) -> int:
        return self.n_classes * self.dim


@dataclass(frozen=True)
class KClassSVMSolution:
    W_hat: np.ndarray  # K x d, rows w_hat_k
    support_pairs: tuple  # (n, k) pairs active at the pairwise margin
    alpha: dict  # (n, k) -> coefficient
    kkt_residual: float
    binary: MaxMarginSolution  # the underlying flat-space solution


def unflatten(problem: MulticlassProblem, w_flat) -> np.ndarray:
    w_flat = np.asarray(w_flat, dtype=float)
    if w_flat.shape != (problem.flat_dim,):
        raise InputError("flat parameter dimension mismatch")
    return w_flat.reshape(problem.n_classes, problem.dim)


def pairwise_transform(problem: MulticlassProblem, n: int, k: int) -> np.ndarray:
    """The K*d vector with +x_n in the label block and -x_n in block k, so
    <w_flat, out> = (w_{y_n} - w_k)' x_n."""
    if not (0 <= n < problem.count):
        raise InputError("sample index out of range")
    if not (1 <= k <= problem.n_classes):
        raise InputError("class index out of range")
    y = int(problem.labels[n])
    if k == y:
        raise InputError("pairwise transform requires k != y_n")
    d = problem.dim
    out = np.zeros(problem.flat_dim)
    out[(y - 1) * d : y * d] = problem.points[:, n]
    out[(k - 1) * d : k * d] = -problem.points[:, n]
    return out


def transformed_dataset(problem: MulticlassProblem) -> Dataset:
    """All N(K-1) pairwise vectors as columns, ordered by (n, then k)."""
    cols = []
    pairs = []
    for n in range(problem.count):
        for k in range(1, problem.n_classes + 1):
            if k == int(problem.labels[n]):
                continue
            cols.append(pairwise_transform(problem, n, k))
            pairs.append((n, k))
    data = Dataset(np.array(cols).T, provenance="custom", meta={"pairs": pairs})
    return data


def _scores(problem: MulticlassProblem, W) -> np.ndarray:
    return np.asarray(W, dtype=float) @ problem.points  # K x N


def ce_loss(problem: MulticlassProblem, w_flat) -> float:
    """sum_n [logsumexp_k(w_k'x_n) - w_{y_n}'x_n], stable for large scores."""
    s = _scores(problem, unflatten(problem, w_flat))
    if not np.all(np.isfinite(s)):
        raise OverflowError_("non-finite class score")
    smax = s.max(axis=0)
    lse = smax + np.log(np.sum(np.exp(s - smax), axis=0))
    picked = s[problem.labels - 1, np.arange(problem.count)]
    return float(np.sum(lse - picked))


def ce_gradient(problem: MulticlassProblem, w_flat) -> np.ndarray:
    """Block k of the gradient is sum_n (softmax_k(s_n) - [k = y_n]) x_n."""
    s = _scores(problem, unflatten(problem, w_flat))
    if not np.all(np.isfinite(s)):
        raise OverflowError_("non-finite class score")
    p = np.exp(s - s.max(axis=0))
    p /= p.sum(axis=0)
    p[problem.labels - 1, np.arange(problem.count)] -= 1.0
    return (p @ problem.points.T).reshape(-1)


def default_multiclass_step(problem: MulticlassProblem) -> float:
    """1 / (4 sigma_max(X~)^2) over the stacked pairwise vectors; the
    softmax curvature is bounded by the logistic constant 1/4 there."""
    xt = transformed_dataset(problem)
    return 1.0 / (4.0 * float(np.linalg.norm(xt.points, 2)) ** 2)


def solve_kclass_svm(problem: MulticlassProblem) -> KClassSVMSolution:
    """Minimum-total-norm W with pairwise unit margins, solved as a binary
    hard-margin problem over the pairwise vectors."""
    xt = transformed_dataset(problem)
    sol = solve_hard_margin(xt)
    pairs = xt.meta["pairs"]
    W_hat = sol.w_hat.reshape(problem.n_classes, problem.dim)
    support_pairs = tuple(pairs[i] for i in sol.support)
    alpha = {pairs[i]: float(sol.alpha[i]) for i in range(len(pairs)) if sol.alpha[i] != 0.0}
    return KClassSVMSolution(
        W_hat=W_hat,
        support_pairs=support_pairs,
        alpha=alpha,
        kkt_residual=sol.kkt_residual,
        binary=sol,
    )


def from_binary(data: Dataset) -> MulticlassProblem:
    """Mirror a label-folded binary dataset as a 2-class problem (every
    folded point as class 1); the pairwise vectors are (x, -x) and the
    K-class solution splits the binary one as (w/2, -w/2)."""
    return MulticlassProblem(points=data.points, labels=np.ones(data.count, dtype=int), n_classes=2)


def make_three_class(seed: int = 0, jitter: float = 0.3) -> MulticlassProblem:
    """Nine planar points, three per class clustered around directions 120
    degrees apart; separable for any jitter below the cluster spacing."""
    rng = np.random.default_rng(seed)
    angles = np.array([np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3])
    pts = []
    labels = []
    for k, ang in enumerate(angles, start=1):
        center = 2.0 * np.array([np.cos(ang), np.sin(ang)])
        for _ in range(3):
            pts.append(center + rng.uniform(-jitter, jitter, size=2))
            labels.append(k)
    return MulticlassProblem(points=np.array(pts).T, labels=np.array(labels), n_classes=3)


@njit(cache=True)
def _ce_kernel(X, labels0, K, eta, w0, cps):
    d, n = X.shape
    kd = K * d
    ncp = cps.shape[0]
    Wcp = np.zeros((ncp, kd))
    losses = np.zeros(ncp)
    gnorms = np.zeros(ncp)
    w = w0.copy()
    grad = np.zeros(kd)
    s = np.zeros(K)
    p = np.zeros(K)
    k_idx = 0
    t = 0
    T = cps[ncp - 1]
    failed_at = -1
    while True:
        loss = 0.0
        for j in range(kd):
            grad[j] = 0.0
        for i in range(n):
            smax = -1e308
            for k in range(K):
                acc = 0.0
                for j in range(d):
                    acc += w[k * d + j] * X[j, i]
                s[k] = acc
                if acc > smax:
                    smax = acc
            z = 0.0
            for k in range(K):
                p[k] = np.exp(s[k] - smax)
                z += p[k]
            loss += smax + np.log(z) - s[labels0[i]]
            for k in range(K):
                coef = p[k] / z
                if k == labels0[i]:
                    coef -= 1.0
                for j in range(d):
                    grad[k * d + j] += coef * X[j, i]
        gsq = 0.0
        ok = True
        for j in range(kd):
            gsq += grad[j] * grad[j]
            if not np.isfinite(grad[j]):
                ok = False
        if not ok or not np.isfinite(loss):
            failed_at = t
            break
        while k_idx < ncp and cps[k_idx] == t:
            for j in range(kd):
                Wcp[k_idx, j] = w[j]
            losses[k_idx] = loss
            gnorms[k_idx] = np.sqrt(gsq)
            k_idx += 1
        if t >= T:
            break
        for j in range(kd):
            w[j] = w[j] - eta * grad[j]
        t += 1
    return Wcp, losses, gnorms, k_idx, failed_at


def run_multiclass(problem: MulticlassProblem, config: OptimConfig) -> Trajectory:
    """Full-batch gradient descent on the flat K*d parameter with the usual
    geometric checkpoint schedule. Only the gd variant is supported here."""
    if config.variant != "gd":
        raise InputError("multiclass runs support variant='gd' only")
    kd = problem.flat_dim
    w0 = np.zeros(kd) if config.init is None else np.asarray(config.init, dtype=float)
    if w0.shape != (kd,):
        raise InputError("init dimension mismatch")
    eta = config.step_size if config.step_size is not None else default_multiclass_step(problem)
    cps = checkpoint_times(config.max_iter, config.checkpoint_ratio, config.checkpoint_start)
    Wcp, losses, gnorms, k, failed_at = _ce_kernel(
        np.ascontiguousarray(problem.points),
        np.ascontiguousarray(problem.labels - 1),
        int(problem.n_classes),
        float(eta),
        w0,
        cps,
    )
    echo = {
        "variant": "gd",
        "loss": "cross_entropy",
        "step_size": float(eta),
        "max_iter": int(config.max_iter),
        "init": [float(v) for v in w0],
        "n_classes": int(problem.n_classes),
        "dim": int(problem.dim),
        "count": int(problem.count),
    }
    truncated = None if failed_at < 0 else int(failed_at)
    return Trajectory(
        times=cps[:k].copy(),
        iterates=Wcp[:k],
        losses=losses[:k],
        grad_norms=gnorms[:k],
        config=echo,
        truncated_at=truncated,
    )


def multiclass_bias_check(
    traj: Trajectory, svm: KClassSVMSolution, kappa: float = 1.5, slack: float = 0.1
) -> tuple[np.ndarray, np.ndarray, list[FitResult]]:
    """Per-class residual ||w_k(t) - w_hat_k log t|| over the checkpoints,
    with a boundedness verdict per class.

    Returns (times, K x len(times) residual matrix, fits)."""
    K, d = svm.W_hat.shape
    if traj.iterates.shape[1] != K * d:
        raise InputError("trajectory / solution dimension mismatch")
    keep = traj.times >= 1
    ts = traj.times[keep].astype(float)
    W = traj.iterates[keep]
    logts = np.log(ts)
    residuals = np.zeros((K, len(ts)))
    fits = []
    for k in range(K):
        blocks = W[:, k * d : (k + 1) * d]
        residuals[k] = np.linalg.norm(blocks - logts[:, None] * svm.W_hat[k][None, :], axis=1)
        fits.append(fit_bounded(ts, residuals[k], "raw", kappa, slack, f"class_{k + 1}_residual"))
    return ts, residuals, fits
