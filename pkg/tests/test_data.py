import numpy as np
import pytest

import nyskoop as nk
from nyskoop.data import philox_generator, sample_without_replacement


def _traj(rows):
    return nk.TrajectoryDataset(states=np.asarray(rows, dtype=float))


def test_build_pairs_lag_one():
    traj = _traj([[1.0], [2.0], [3.0]])
    pairs = nk.build_pairs(traj, 1)
    np.testing.assert_array_equal(pairs.X, [[1.0], [2.0]])
    np.testing.assert_array_equal(pairs.Y, [[2.0], [3.0]])


def test_build_pairs_lag_two_count():
    traj = _traj(np.arange(5.0)[:, None])
    pairs = nk.build_pairs(traj, 2)
    assert pairs.n == 3
    np.testing.assert_array_equal(pairs.Y[:, 0], [2.0, 3.0, 4.0])


def test_build_pairs_lag_too_large():
    traj = _traj(np.arange(5.0)[:, None])
    with pytest.raises(nk.InputError):
        nk.build_pairs(traj, 5)
    with pytest.raises(nk.InputError):
        nk.build_pairs(traj, 0)


def test_build_pairs_multi_excludes_boundaries():
    t1 = _traj([[0.0], [1.0], [2.0]])
    t2 = _traj([[10.0], [11.0]])
    pairs = nk.build_pairs_multi([t1, t2], 1)
    assert pairs.n == 3
    # no pair crosses from 2.0 to 10.0
    np.testing.assert_array_equal(pairs.X[:, 0], [0.0, 1.0, 10.0])
    np.testing.assert_array_equal(pairs.Y[:, 0], [1.0, 2.0, 11.0])


def test_trajectory_validation():
    with pytest.raises(nk.InputError):
        _traj([[1.0]])  # too short
    with pytest.raises(nk.InputError):
        _traj([[1.0], [np.nan]])
    with pytest.raises(nk.InputError):
        nk.TrajectoryDataset(states=np.ones((3, 1)), dt=-1.0)


def _pairs(n, d=2, seed=0):
    rng = np.random.default_rng(seed)
    states = rng.normal(size=(n + 1, d))
    return nk.build_pairs(nk.TrajectoryDataset(states=states), 1)


def test_sample_all_is_permutation():
    pairs = _pairs(12)
    spec = nk.KernelSpec("rbf")
    centers = nk.sample_centers(pairs, spec, m=12, seed=4)
    assert sorted(centers.x_indices.tolist()) == list(range(12))


def test_sample_pinned_regression_triple():
    # frozen draw of the documented Philox + Fisher-Yates scheme
    assert sample_without_replacement(10, 3, philox_generator(0)).tolist() == [0, 1, 6]
    assert sample_without_replacement(10, 3, philox_generator(42)).tolist() == [3, 8, 4]


def test_sample_m_too_large():
    pairs = _pairs(10)
    spec = nk.KernelSpec("rbf")
    with pytest.raises(nk.InputError):
        nk.sample_centers(pairs, spec, m=11, seed=0)
    with pytest.raises(nk.InputError):
        nk.sample_centers(pairs, spec, m=0, seed=0)


def test_sample_determinism():
    pairs = _pairs(30)
    spec = nk.KernelSpec("rbf", bandwidth=1.5)
    a = nk.sample_centers(pairs, spec, m=7, seed=123)
    b = nk.sample_centers(pairs, spec, m=7, seed=123)
    np.testing.assert_array_equal(a.x_indices, b.x_indices)
    np.testing.assert_array_equal(a.k_xn, b.k_xn)
    np.testing.assert_array_equal(a.k_xy, b.k_xy)


def test_sample_uniformity():
    counts = np.zeros(10)
    for seed in range(10000):
        idx = sample_without_replacement(10, 1, philox_generator(seed))
        counts[idx[0]] += 1
    freqs = counts / 10000
    assert np.all(np.abs(freqs - 0.1) <= 0.02)


def test_shared_and_independent_centers():
    pairs = _pairs(40)
    spec = nk.KernelSpec("rbf")
    shared = nk.sample_centers(pairs, spec, m=10, seed=5, shared=True)
    assert shared.shared
    np.testing.assert_array_equal(shared.x_indices, shared.y_indices)
    indep = nk.sample_centers(pairs, spec, m=10, seed=5, shared=False)
    assert not np.array_equal(indep.x_indices, indep.y_indices)
    np.testing.assert_array_equal(indep.x_indices, shared.x_indices)


def test_cached_blocks_match_gram():
    pairs = _pairs(25, d=3)
    spec = nk.KernelSpec("rbf", bandwidth=0.7)
    c = nk.sample_centers(pairs, spec, m=6, seed=9)
    np.testing.assert_array_equal(c.k_xx, nk.gram(spec, c.x_centers, c.x_centers))
    np.testing.assert_array_equal(c.k_yy, nk.gram(spec, c.y_centers, c.y_centers))
    np.testing.assert_array_equal(c.k_xn, nk.gram(spec, c.x_centers, pairs.X))
    np.testing.assert_array_equal(c.k_yn, nk.gram(spec, c.y_centers, pairs.Y))
    np.testing.assert_array_equal(c.k_xy, nk.gram(spec, c.x_centers, c.y_centers))


def test_duplicate_indices_rejected():
    pairs = _pairs(10)
    spec = nk.KernelSpec("rbf")
    with pytest.raises(nk.InputError):
        nk.centers_from_indices(pairs, spec, [0, 0, 1])


def test_csv_round_trip(tmp_path):
    traj = _traj(np.random.default_rng(0).normal(size=(20, 3)))
    path = tmp_path / "t.csv"
    nk.save_trajectory_csv(path, traj)
    back = nk.load_trajectory_csv(path)
    np.testing.assert_allclose(back.states, traj.states, rtol=0, atol=0)


def test_csv_header_detected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("x0,x1\n1.0,2.0\n3.0,4.0\n")
    back = nk.load_trajectory(path)
    np.testing.assert_array_equal(back.states, [[1.0, 2.0], [3.0, 4.0]])


def test_binary_round_trip_bit_exact(tmp_path):
    traj = _traj(np.random.default_rng(1).normal(size=(50, 4)))
    path = tmp_path / "t.bin"
    nk.save_trajectory_bin(path, traj)
    back = nk.load_trajectory(path)
    assert np.array_equal(back.states, traj.states)


def test_binary_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"KOOPTRAJ" + b"\x00" * 10)
    with pytest.raises(nk.DataError):
        nk.load_trajectory_bin(path)
    path2 = tmp_path / "bad2.csv"
    path2.write_text("1.0,2.0\nfoo,bar\n")
    with pytest.raises(nk.DataError):
        nk.load_trajectory_csv(path2)


def test_missing_file_is_data_error():
    with pytest.raises(nk.DataError):
        nk.load_trajectory("/nonexistent/file.csv")
