"""Hard-margin SVM at desk scale: exact solve, KKT certification, dual
analysis, the residual-offset solver, and the degenerate recursive chain.

The primal is min ||w||^2 s.t. w'x_n >= 1. For small N the solver
enumerates candidate support subsets and solves the equality system
X_S'X_S alpha = 1 for each; for larger N it runs accelerated projected
gradient on the dual and polishes with the active set. Either way the
output is certified through its KKT residual, never trusted from solver
internals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls

from .data import Dataset
from .errors import (
    DegenerateCaseError,
    InfeasibleError,
    InputError,
    NonConvergenceError,
    NotApplicableError,
)

MARGIN_TOL = 1e-7  # |w'x_n - 1| below this marks a margin point
DUAL_ZERO_TOL = 1e-9  # max feasible alpha_n below this marks a zero-coefficient point
KKT_TOL = 1e-8
ENUMERATION_LIMIT = 16  # N above this switches to the dual ascent path
PINV_CUTOFF = 1e-10  # relative singular-value cutoff for pseudoinverses


@dataclass(frozen=True)
class MaxMarginSolution:
    w_hat: np.ndarray
    support: tuple[int, ...]  # margin points, sorted
    alpha: np.ndarray  # full-length dual vector, zero off the support
    theta: float | None  # min margin over non-support points (> 1), None if all support
    margin: float  # 1 / ||w_hat||
    degenerate: bool
    kkt_residual: float
    near_tolerance: tuple[int, ...] = ()  # margin points within 10x of the zero-dual tolerance


@dataclass(frozen=True)
class ResidualOffset:
    w_tilde: np.ndarray
    # the component of w_tilde outside span(X_S) equals that of w0
    span_constraint: str = "complement-of-support-span pinned to w(0)"


@dataclass(frozen=True)
class ChainLevel:
    m: int
    w_hat: np.ndarray
    support: tuple[int, ...]  # S_m: margin points with a strictly positive dual
    zero_support: tuple[int, ...]  # S-bar_m: margin points forced to zero dual
    nonsupport: tuple[int, ...]  # S+_m: strictly off-margin points at this level
    p_bar: np.ndarray  # orthogonal projection annihilating supports up to level m


@dataclass(frozen=True)
class DegenerateChain:
    levels: tuple[ChainLevel, ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def w_hats(self) -> np.ndarray:
        return np.stack([lv.w_hat for lv in self.levels])


def _feasible_witness(X: np.ndarray) -> np.ndarray | None:
    """LP feasibility of w'x_n >= 1; returns some feasible w or None."""
    d, n = X.shape
    res = linprog(
        c=np.zeros(d),
        A_ub=-X.T,
        b_ub=-np.ones(n),
        bounds=[(None, None)] * d,
        method="highs",
    )
    return res.x if res.status == 0 else None


def _candidate_from_subset(X: np.ndarray, subset: tuple[int, ...]) -> np.ndarray | None:
    """Solve the margin equality system on a subset; None if inconsistent."""
    Xs = X[:, subset]
    gram = Xs.T @ Xs
    ones = np.ones(len(subset))
    try:
        alpha = np.linalg.solve(gram, ones)
    except np.linalg.LinAlgError:
        alpha = np.linalg.pinv(gram, rcond=PINV_CUTOFF) @ ones
        if not np.allclose(gram @ alpha, ones, atol=1e-9):
            return None
    if np.any(alpha < -1e-10):
        return None
    return Xs @ alpha


def _solve_by_enumeration(X: np.ndarray) -> np.ndarray:
    d, n = X.shape
    best = None
    best_sq = np.inf
    max_size = min(d, n)
    for size in range(1, max_size + 1):
        for subset in itertools.combinations(range(n), size):
            w = _candidate_from_subset(X, subset)
            if w is None:
                continue
            if np.min(X.T @ w) < 1.0 - 1e-9:
                continue
            sq = float(w @ w)
            if sq < best_sq - 1e-14:
                best_sq = sq
                best = w
    if best is None:
        raise InfeasibleError("no feasible KKT candidate: data is not separable")
    return best


def _solve_by_dual_ascent(X: np.ndarray, max_iter=200_000, tol=1e-12) -> np.ndarray:
    """Nesterov-accelerated projected gradient on the dual
    max sum(alpha) - 0.5 ||X alpha||^2 s.t. alpha >= 0, with restarts."""
    n = X.shape[1]
    L = np.linalg.norm(X, 2) ** 2
    alpha = np.zeros(n)
    y = alpha.copy()
    theta_prev = 1.0
    last_obj = -np.inf
    for it in range(max_iter):
        grad = 1.0 - X.T @ (X @ y)
        alpha_new = np.maximum(y + grad / L, 0.0)
        theta = (1.0 + np.sqrt(1.0 + 4.0 * theta_prev**2)) / 2.0
        y = alpha_new + (theta_prev - 1.0) / theta * (alpha_new - alpha)
        if (alpha_new - alpha) @ grad < 0:  # restart on non-ascent
            y = alpha_new
            theta = 1.0
        alpha, theta_prev = alpha_new, theta
        if it % 200 == 0:
            w = X @ alpha
            obj = alpha.sum() - 0.5 * w @ w
            kkt = np.max(np.abs(alpha * (X.T @ w - 1.0))) + max(0.0, np.max(1.0 - X.T @ w))
            if kkt < tol:
                break
            if abs(obj - last_obj) < 1e-16 and it > 10_000:
                break
            last_obj = obj
    w = X @ alpha
    # active-set polish: re-solve the equality system on the near-margin set
    margins = X.T @ w
    active = np.where(margins <= 1.0 + 1e-4)[0]
    if active.size:
        w_polish = _candidate_from_subset(X, tuple(active))
        if w_polish is not None and np.min(X.T @ w_polish) >= 1.0 - 1e-9:
            w = w_polish
    if np.min(X.T @ w) < 1.0 - 1e-6:
        raise NonConvergenceError("dual ascent did not reach feasibility", best=w)
    return w


def _group_duplicate_columns(X: np.ndarray, idx: np.ndarray) -> list[list[int]]:
    """Group indices whose columns coincide exactly (duplicated folded
    points share one dual coefficient, split equally)."""
    groups: list[list[int]] = []
    for i in idx:
        for g in groups:
            if np.array_equal(X[:, i], X[:, g[0]]):
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def _dual_vector(X: np.ndarray, w: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Minimum-norm dual on the margin set: alpha_S = pinv(X_S'X_S) 1,
    with an NNLS fallback if the pinv solution leaves the cone."""
    alpha = np.zeros(X.shape[1])
    Xs = X[:, support]
    gram = Xs.T @ Xs
    a = np.linalg.pinv(gram, rcond=PINV_CUTOFF) @ np.ones(len(support))
    if np.any(a < -1e-10) or np.linalg.norm(Xs @ a - w) > 1e-7:
        a, _ = nnls(Xs, w)
    alpha[support] = a
    return alpha


def _max_face_alpha(X: np.ndarray, w: np.ndarray, margin_set: np.ndarray, n: int) -> float:
    """Max alpha_n over the dual optimal face {alpha >= 0 supported on the
    margin set with X alpha = w} (small LP)."""
    k = margin_set.size
    c = np.zeros(k)
    c[np.where(margin_set == n)[0][0]] = -1.0
    res = linprog(
        c=c,
        A_eq=X[:, margin_set],
        b_eq=w,
        bounds=[(0, None)] * k,
        method="highs",
    )
    if res.status != 0:
        return 0.0
    return float(-res.fun)


def solve_hard_margin(data: Dataset) -> MaxMarginSolution:
    """Exact max-margin vector with certified KKT conditions.

    Raises InfeasibleError on non-separable data.
    """
    X = data.points
    if _feasible_witness(X) is None:
        raise InfeasibleError("data is not linearly separable")
    if data.count <= ENUMERATION_LIMIT:
        w = _solve_by_enumeration(X)
    else:
        w = _solve_by_dual_ascent(X)

    margins = X.T @ w
    support = np.where(np.abs(margins - 1.0) <= MARGIN_TOL)[0]
    alpha = _dual_vector(X, w, support)

    # zero-coefficient detection on the dual optimal face
    zero_support: list[int] = []
    near_tol: list[int] = []
    if np.min(alpha[support]) <= DUAL_ZERO_TOL * 10:
        for n in support:
            amax = _max_face_alpha(X, w, support, int(n))
            if amax <= DUAL_ZERO_TOL:
                zero_support.append(int(n))
            elif amax <= 10 * DUAL_ZERO_TOL:
                near_tol.append(int(n))
    degenerate = bool(zero_support)

    nonsupport = np.setdiff1d(np.arange(data.count), support)
    theta = float(np.min(margins[nonsupport])) if nonsupport.size else None

    sol = MaxMarginSolution(
        w_hat=w,
        support=tuple(int(i) for i in support),
        alpha=alpha,
        theta=theta,
        margin=1.0 / float(np.linalg.norm(w)),
        degenerate=degenerate,
        kkt_residual=0.0,
        near_tolerance=tuple(near_tol),
    )
    res = kkt_certificate(sol, data)
    object.__setattr__(sol, "kkt_residual", res)
    return sol


def kkt_certificate(sol: MaxMarginSolution, data: Dataset) -> float:
    """Max of primal violation, dual negativity, stationarity gap and
    complementary-slackness gap."""
    X = data.points
    margins = X.T @ sol.w_hat
    primal = max(0.0, float(np.max(1.0 - margins)))
    dual_neg = max(0.0, float(-np.min(sol.alpha)))
    stationarity = float(np.linalg.norm(sol.w_hat - X @ sol.alpha))
    slackness = float(np.max(np.abs(sol.alpha * (margins - 1.0))))
    return max(primal, dual_neg, stationarity, slackness)


def nonsupport_theta(sol: MaxMarginSolution, data: Dataset) -> float:
    """Minimum margin over non-support points; strictly > 1."""
    nonsupport = np.setdiff1d(np.arange(data.count), np.asarray(sol.support))
    if nonsupport.size == 0:
        raise NotApplicableError("every point is a support vector")
    theta = float(np.min(data.points[:, nonsupport].T @ sol.w_hat))
    if theta <= 1.0 + 1e-10:
        raise InputError(f"non-support margin {theta} is not strictly above 1")
    return theta


def dual_positivity_check(sol: MaxMarginSolution, data: Dataset) -> tuple[bool, float]:
    """Whether alpha restricted to the support is the unique solution of
    X_S'X_S alpha = 1, and its minimum entry.

    Exactly coincident folded points are grouped first (their combined
    coefficient is what the system determines; the solver splits it
    equally among the duplicates).
    """
    X = data.points
    support = np.asarray(sol.support)
    groups = _group_duplicate_columns(X, support)
    reps = [g[0] for g in groups]
    Xs = X[:, reps]
    gram = Xs.T @ Xs
    svals = np.linalg.svd(gram, compute_uv=False)
    unique = bool(svals[-1] > PINV_CUTOFF * max(svals[0], 1.0))
    return unique, float(np.min(sol.alpha[support]))


def _support_frame(X_s: np.ndarray, w_hat: np.ndarray) -> np.ndarray:
    """Orthonormal basis [u_1 .. u_K] of span(X_S) with u_1 = w_hat/||w_hat||."""
    rank = np.linalg.matrix_rank(X_s, tol=PINV_CUTOFF * np.linalg.norm(X_s, 2))
    u1 = w_hat / np.linalg.norm(w_hat)
    basis = np.hstack([u1[:, None], X_s])
    q, r = np.linalg.qr(basis)
    # keep the columns that actually carry the span, starting from u_1
    cols = [0]
    for j in range(1, q.shape[1]):
        if abs(r[j, j]) > 1e-12 * abs(r[0, 0]) and len(cols) < rank:
            cols.append(j)
    U = q[:, cols]
    U[:, 0] = u1  # QR may flip the sign
    return U


def solve_w_tilde(
    sol: MaxMarginSolution, data: Dataset, eta: float, w0=None, tol: float = 1e-14
) -> ResidualOffset:
    """Residual offset: the unique w-tilde with
    eta * exp(-x_n' w_tilde) = alpha_n on the support, its span component
    fixed by Newton descent on the strictly convex exponential surrogate in
    the support frame, and its complement pinned to w(0)."""
    if sol.degenerate:
        raise DegenerateCaseError("degenerate solution: use degenerate_chain instead")
    support = np.asarray(sol.support)
    if np.any(sol.alpha[support] <= 0):
        raise DegenerateCaseError("zero dual coefficient on the margin: use degenerate_chain")
    X = data.points
    d = X.shape[0]
    w0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float)

    Xs = X[:, support]
    w_hat = sol.w_hat
    U = _support_frame(Xs, w_hat)
    K = U.shape[1]
    V = U.T @ Xs  # K x |S| coordinates of the support vectors
    norm_w = float(np.linalg.norm(w_hat))

    # minimize E(s_2..s_K) = eta * sum_n exp(-sum_j s_j V[j,n]) by Newton
    s_tail = np.zeros(K - 1)
    Vt = V[1:, :]  # rows 2..K
    for _ in range(200):
        e = eta * np.exp(-Vt.T @ s_tail)
        grad = -Vt @ e
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        hess = (Vt * e[None, :]) @ Vt.T
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = -grad / max(np.max(np.abs(np.diag(hess))), 1e-12)
        # backtracking on E
        E0 = float(e.sum())
        tstep = 1.0
        for _bt in range(60):
            cand = s_tail + tstep * step
            if eta * np.exp(-Vt.T @ cand).sum() < E0:
                break
            tstep *= 0.5
        s_tail = s_tail + tstep * step
    else:
        raise NonConvergenceError(
            f"offset solver stalled (gradient norm {gnorm:.3e})", best=s_tail
        )

    e_min = eta * np.exp(-Vt.T @ s_tail)
    s1 = norm_w * np.log(float(e_min.sum()) / norm_w**2)
    s = np.concatenate([[s1], s_tail])
    w_tilde = U @ s
    # component outside span(X_S): P-bar_1 (w_tilde - w0) = 0
    w_tilde = w_tilde + (w0 - U @ (U.T @ w0))

    rel = np.abs(eta * np.exp(-Xs.T @ w_tilde) / sol.alpha[support] - 1.0)
    if np.max(rel) > 1e-8:
        raise NonConvergenceError(
            f"offset equations not satisfied (max relative residual {np.max(rel):.3e})",
            best=w_tilde,
        )
    return ResidualOffset(w_tilde=w_tilde)


def degenerate_chain(data: Dataset) -> DegenerateChain:
    """Recursive max-margin decomposition for degenerate instances.

    Level m solves the hard-margin problem for the level-(m-1) projected
    zero-coefficient support vectors; the recursion stops once no margin
    point is forced to a zero dual coefficient. Non-degenerate data yields
    a single level.
    """
    X = data.points
    d, N = X.shape
    p_bar = np.eye(d)
    remaining = np.arange(N)
    levels: list[ChainLevel] = []
    m = 0
    while remaining.size:
        m += 1
        proj_pts = p_bar @ X[:, remaining]
        sub = Dataset(proj_pts, provenance=f"{data.provenance}/chain-level-{m}")
        sol_m = solve_hard_margin(sub)
        w_m = sol_m.w_hat
        margins = proj_pts.T @ w_m

        margin_local = np.where(np.abs(margins - 1.0) <= MARGIN_TOL)[0]
        plus_local = np.setdiff1d(np.arange(remaining.size), margin_local)
        s_m_local, s_bar_local = [], []
        for j in margin_local:
            amax = _max_face_alpha(proj_pts, w_m, margin_local, int(j))
            (s_bar_local if amax <= DUAL_ZERO_TOL else s_m_local).append(int(j))

        s_m = remaining[s_m_local]
        s_bar = remaining[s_bar_local]
        s_plus = remaining[plus_local]

        # shrink the projection by the span of this level's supports
        Z = p_bar @ X[:, s_m]
        if Z.size:
            p_bar = p_bar - Z @ np.linalg.pinv(Z, rcond=PINV_CUTOFF)
            p_bar = 0.5 * (p_bar + p_bar.T)  # keep it exactly symmetric

        levels.append(
            ChainLevel(
                m=m,
                w_hat=w_m,
                support=tuple(int(i) for i in s_m),
                zero_support=tuple(int(i) for i in s_bar),
                nonsupport=tuple(int(i) for i in s_plus),
                p_bar=p_bar.copy(),
            )
        )
        if s_bar.size == 0:
            break
        remaining = s_bar
    return DegenerateChain(levels=tuple(levels))
