import numpy as np
import pytest

import nyskoop as nk


@pytest.fixture(scope="session")
def lorenz_traj():
    """One long Lorenz trajectory shared by tests that slice segments."""
    return nk.simulate(nk.Lorenz63(), x0=(1.0, 1.0, 1.0), steps=4000, seed=0)


@pytest.fixture(scope="session")
def rbf35():
    return nk.KernelSpec("rbf", bandwidth=3.5)


def lorenz_pairs(traj, start, n, lag=1):
    sub = nk.TrajectoryDataset(states=traj.states[start : start + n + lag], dt=0.01)
    return nk.build_pairs(sub, lag)


@pytest.fixture(scope="session")
def ar1_traj():
    return nk.simulate(nk.AR1(a=0.9, noise_std=0.4), steps=6000, seed=11)
