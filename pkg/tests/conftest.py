import numpy as np
import pytest

import marginflow as mf


@pytest.fixture(scope="session")
def fig1():
    return mf.generate("figure1", seed=3)


@pytest.fixture(scope="session")
def fig1_sol(fig1):
    return mf.solve_hard_margin(fig1)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted steppers once so timed tests measure the runs."""
    sp = mf.Dataset(np.array([[1.0], [0.0]]))
    for loss_name in ("exp", "logistic"):
        for variant in ("gd", "momentum", "adam"):
            mf.run(
                mf.OptimConfig(variant=variant, step_size=1e-3, max_iter=12, step_warn_override=True),
                mf.loss_by_name(loss_name),
                sp,
            )
    mf.run_multiclass(mf.make_three_class(seed=0), mf.OptimConfig(max_iter=12))
