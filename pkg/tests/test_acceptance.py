"""End-to-end acceptance suite: one test per criterion, each printing a
single pass/fail line. Expensive runs are shared through module-scoped
fixtures; timed criteria measure the runs themselves (kernels are warmed
by the session fixture in conftest)."""

import itertools
import time

import numpy as np
import pytest

import marginflow as mf
from marginflow.data import make_degenerate3d, make_random_separable
from marginflow.multiclass import from_binary
from marginflow.optim import default_step_size
from marginflow.rates import last_decades_slope

SEED = 3


def report(name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def fig1m():
    return mf.generate("figure1", seed=SEED)


@pytest.fixture(scope="module")
def fig1m_sol(fig1m):
    return mf.solve_hard_margin(fig1m)


@pytest.fixture(scope="module")
def single_run():
    data = mf.Dataset(np.array([[1.0], [0.0]]))
    cfg = mf.OptimConfig(variant="gd", step_size=1.0, max_iter=100_000, step_warn_override=True)
    start = time.perf_counter()
    traj = mf.run(cfg, mf.exp_loss(), data)
    return data, traj, time.perf_counter() - start


@pytest.fixture(scope="module")
def fig1_run(fig1m):
    cfg = mf.OptimConfig(variant="gd", max_iter=1_000_000)
    start = time.perf_counter()
    traj = mf.run(cfg, mf.logistic_loss(), fig1m)
    return traj, time.perf_counter() - start


@pytest.fixture(scope="module")
def degenerate_run():
    data = make_degenerate3d()
    cfg = mf.OptimConfig(variant="gd", max_iter=10_000_000)
    start = time.perf_counter()
    traj = mf.run(cfg, mf.exp_loss(), data)
    return data, traj, time.perf_counter() - start


@pytest.fixture(scope="module")
def scaled_runs():
    data = mf.generate("figure1_scaled", seed=SEED)
    sol = mf.solve_hard_margin(data)
    gd = mf.run(mf.OptimConfig(variant="gd", max_iter=1_000_000), mf.logistic_loss(), data)
    adam = mf.run(mf.OptimConfig(variant="adam", max_iter=1_000_000), mf.logistic_loss(), data)
    return data, sol, gd, adam


def test_criterion_01_max_margin_exactness(fig1m):
    start = time.perf_counter()
    sol = mf.solve_hard_margin(fig1m)
    elapsed = time.perf_counter() - start
    direction = sol.w_hat / np.linalg.norm(sol.w_hat)
    margin_err = abs(sol.margin - np.sqrt(2.0))
    dir_err = np.max(np.abs(direction - np.array([1.0, 1.0]) / np.sqrt(2.0)))
    ok = margin_err <= 1e-8 and dir_err <= 1e-8 and elapsed < 1.0
    report(
        "criterion 1 (max-margin exactness)",
        ok,
        f"margin err {margin_err:.2e}, direction err {dir_err:.2e}, {elapsed:.3f}s",
    )


def test_criterion_02_oracle_equivalence():
    def oracle(X):
        d, n = X.shape
        best_w, best_sq = None, np.inf
        for size in range(1, min(d + 1, n) + 1):
            for subset in itertools.combinations(range(n), size):
                Xs = X[:, subset]
                gram = Xs.T @ Xs
                coeff, *_ = np.linalg.lstsq(gram, np.ones(size), rcond=None)
                if np.max(np.abs(gram @ coeff - 1.0)) > 1e-8 or np.min(coeff) < -1e-9:
                    continue
                w = Xs @ coeff
                if np.min(X.T @ w) < 1.0 - 1e-8:
                    continue
                if w @ w < best_sq - 1e-12:
                    best_sq, best_w = w @ w, w
        return best_w

    start = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for i in range(25):
        d = int(rng.integers(2, 4))
        n = int(rng.integers(4, 9))
        data = make_random_separable(d, n, seed=int(rng.integers(1_000_000)))
        w_oracle = oracle(data.points)
        sol = mf.solve_hard_margin(data)
        err = float(np.max(np.abs(sol.w_hat - w_oracle)))
        worst = max(worst, err)
        support_oracle = tuple(
            int(j) for j in np.where(np.abs(data.points.T @ w_oracle - 1.0) <= 1e-7)[0]
        )
        assert sol.support == support_oracle
        assert abs(sol.margin - 1.0 / np.linalg.norm(w_oracle)) <= 1e-8
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 10.0
    report(
        "criterion 2 (oracle equivalence, 25 instances)",
        ok,
        f"max w_hat err {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_03_analytic_trajectory(single_run):
    _, traj, elapsed = single_run
    keep = traj.times >= 10
    ts = traj.times[keep].astype(float)
    err = np.max(np.abs(traj.iterates[keep][:, 0] - np.log(ts + 1.0)))
    w2_exact = np.all(traj.iterates[:, 1] == 0.0)
    ok = err <= 0.5 and w2_exact and elapsed < 1.0
    report(
        "criterion 3 (single-point analytic trajectory)",
        ok,
        f"max |w1 - log(t+1)| = {err:.3f}, w2 == 0: {w2_exact}, {elapsed:.3f}s",
    )


def test_criterion_04_residual_offset(fig1m, fig1m_sol, fig1_run):
    traj, elapsed = fig1_run
    offset = mf.solve_w_tilde(fig1m_sol, fig1m, eta=traj.config["step_size"])
    series = mf.residual_series(traj, fig1m_sol, fig1m, offset=offset)
    ts = series.times
    res = series.residual_norm
    first = res[ts <= 10.0 * ts[0]]
    last = res[ts >= ts[-1] / 10.0]
    sup_ok = last.max() <= first.max() + 0.1
    osc = float(last.max() - last.min())
    ok = sup_ok and osc < 0.05 and elapsed < 30.0
    report(
        "criterion 4 (log-growth residual settles at the offset)",
        ok,
        f"sup first {first.max():.3f} -> last {last.max():.3f}, oscillation {osc:.4f}, {elapsed:.1f}s",
    )


def test_criterion_05_rate_laws(fig1m, fig1m_sol, fig1_run):
    traj, _ = fig1_run
    series = mf.residual_series(traj, fig1m_sol, fig1m)
    span = np.log10(series.times[-1] / series.times[0])
    checks = {
        "scaled_loss": mf.fit_bounded(series.times, series.scaled_loss, "raw"),
        "margin_gap*logt": mf.fit_bounded(series.times, series.margin_gap, "times_logt"),
        "angle_gap*log2t": mf.fit_bounded(series.times, series.angle_gap, "times_log2t"),
        "norm_minus_log": mf.fit_bounded(series.times, series.norm_minus_log, "raw"),
    }
    ok = span >= 3.0 and all(fit.bounded for fit in checks.values())
    detail = ", ".join(f"{k}: {'ok' if v.bounded else 'UNBOUNDED'}" for k, v in checks.items())
    report("criterion 5 (rate laws bounded)", ok, f"{detail} over {span:.1f} decades")


def test_criterion_06_degenerate_chain(degenerate_run):
    data, traj, elapsed = degenerate_run
    sol = mf.solve_hard_margin(data)
    chain = mf.degenerate_chain(data)
    assert chain.depth == 2
    series = mf.residual_series(traj, sol, data, chain=chain)
    fit = mf.fit_bounded(series.times, series.chain_residual_norm, "raw")
    keep = traj.times >= 1
    ts = traj.times[keep].astype(float)
    w3 = traj.iterates[keep][:, 2]
    sel = ts >= ts.max() / 100.0
    slope = float(np.polyfit(np.log(np.log(ts[sel])), w3[sel], 1)[0])
    ok = fit.bounded and abs(slope - 1.0) <= 0.3 and elapsed < 60.0
    report(
        "criterion 6 (degenerate iterated-log chain)",
        ok,
        f"chain residual bounded: {fit.bounded}, w3-vs-loglog slope {slope:.3f}, {elapsed:.1f}s",
    )


def test_criterion_07_validation_loss_growth(fig1m_sol, fig1_run):
    traj, _ = fig1_run
    val = mf.Dataset(np.array([[-0.5], [-0.5]]))
    worst_margin = float(fig1m_sol.w_hat @ val.points[:, 0])
    assert worst_margin == pytest.approx(-0.5, abs=1e-8)
    slope, _ = mf.validation_loss_slope(traj, val, mf.logistic_loss(), fig1m_sol.w_hat)
    ok = 0.35 <= slope <= 0.65
    report(
        "criterion 7 (validation loss grows with log t)",
        ok,
        f"slope {slope:.3f} for a point at margin {worst_margin}",
    )


def test_criterion_08_descent_properties(single_run, fig1_run, degenerate_run):
    # the theory-verification GD runs; the scaled-dataset contrast run is
    # excluded because its step size (1/sigma_max^2 with sigma 45x larger)
    # leaves eta*T ~ 45 at T = 1e6, far short of the asymptotic regime the
    # absolute thresholds assume
    runs = {
        "single-point": single_run[1],
        "figure-1": fig1_run[0],
        "degenerate": degenerate_run[1],
    }
    details = []
    ok = True
    for name, traj in runs.items():
        ts = traj.times
        last_decade = ts >= ts[-1] / 10
        loss_ok = traj.losses[-1] < 1e-4
        norms = np.linalg.norm(traj.iterates[last_decade], axis=1)
        norm_ok = bool(np.all(np.diff(norms) > 0))
        grad_increment = float(np.sum(traj.grad_norms[last_decade] ** 2))
        grad_ok = grad_increment < 1e-6
        ok = ok and loss_ok and norm_ok and grad_ok
        details.append(f"{name}: loss {traj.losses[-1]:.1e}, grad-sq inc {grad_increment:.1e}")
    report("criterion 8 (descent and gradient-sum properties)", ok, "; ".join(details))


def test_criterion_09_multiclass(fig1m, fig1m_sol):
    start = time.perf_counter()
    problem = mf.make_three_class(seed=1)
    svm = mf.solve_kclass_svm(problem)
    traj = mf.run_multiclass(problem, mf.OptimConfig(max_iter=1_000_000))
    _, _, fits = mf.multiclass_bias_check(traj, svm)
    elapsed = time.perf_counter() - start

    svm2 = mf.solve_kclass_svm(from_binary(fig1m))
    reduction_err = float(
        max(
            np.max(np.abs(svm2.W_hat[0] - fig1m_sol.w_hat / 2.0)),
            np.max(np.abs(svm2.W_hat[1] + fig1m_sol.w_hat / 2.0)),
        )
    )
    ok = (
        all(f.bounded for f in fits)
        and svm.kkt_residual <= 1e-8
        and reduction_err <= 1e-8
        and elapsed < 60.0
    )
    report(
        "criterion 9 (multiclass residuals, KKT, binary reduction)",
        ok,
        f"kkt {svm.kkt_residual:.1e}, reduction err {reduction_err:.1e}, "
        f"bounded {[f.bounded for f in fits]}, {elapsed:.1f}s",
    )


def test_criterion_10_optimizer_contrast(fig1m, fig1m_sol, fig1_run, scaled_runs):
    gd_traj, _ = fig1_run
    momentum = mf.run(mf.OptimConfig(variant="momentum", max_iter=1_000_000), mf.logistic_loss(), fig1m)
    gd_gap = mf.direction_gap(gd_traj.final[1], fig1m_sol.w_hat)
    mo_gap = mf.direction_gap(momentum.final[1], fig1m_sol.w_hat)
    ratio_gm = max(gd_gap, mo_gap) / min(gd_gap, mo_gap)

    _, sol_s, gd_s, adam_s = scaled_runs
    gap_gd = mf.direction_gap(gd_s.final[1], sol_s.w_hat)
    gap_adam = mf.direction_gap(adam_s.final[1], sol_s.w_hat)
    ratio_adam = gap_adam / gap_gd

    ok = ratio_gm <= 2.0 and ratio_adam >= 5.0
    report(
        "criterion 10 (optimizer contrast, qualitative)",
        ok,
        f"gd/momentum gap ratio {ratio_gm:.2f} (<= 2), adam/gd gap ratio {ratio_adam:.1f} (>= 5)",
    )


def test_criterion_11_gradient_correctness():
    h = 1e-5
    worst_ce = 0.0
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        K = int(rng.integers(2, 5))
        d = int(rng.integers(1, 4))
        n = int(rng.integers(2, 6))
        problem = mf.MulticlassProblem(
            points=rng.normal(size=(d, n)),
            labels=rng.integers(1, K + 1, size=n),
            n_classes=K,
        )
        w = rng.normal(size=problem.flat_dim)
        g = mf.ce_gradient(problem, w)
        for j in range(problem.flat_dim):
            e = np.zeros(problem.flat_dim)
            e[j] = h
            fd = (mf.ce_loss(problem, w + e) - mf.ce_loss(problem, w - e)) / (2 * h)
            worst_ce = max(worst_ce, abs(float(g[j]) - fd))

    worst_full = 0.0
    loss = mf.logistic_loss()
    for seed in range(10):
        rng = np.random.default_rng(2000 + seed)
        d = int(rng.integers(1, 5))
        n = int(rng.integers(2, 7))
        data = mf.Dataset(rng.normal(size=(d, n)))
        w = rng.normal(size=d)
        g = mf.full_gradient(loss, data, w)

        def total(wv):
            return float(np.sum(loss.value(wv @ data.points)))

        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            fd = (total(w + e) - total(w - e)) / (2 * h)
            worst_full = max(worst_full, abs(float(g[j]) - fd))

    ok = worst_ce <= 1e-6 and worst_full <= 1e-6
    report(
        "criterion 11 (gradients match central differences)",
        ok,
        f"ce max err {worst_ce:.2e}, full max err {worst_full:.2e}",
    )
