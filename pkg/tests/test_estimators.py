import numpy as np
import pytest
import scipy.linalg

import nyskoop as nk
from conftest import lorenz_pairs


def scalar_fixture(lam=1.0):
    traj = nk.TrajectoryDataset(states=np.array([[0.7], [0.7]]))
    pairs = nk.build_pairs(traj, 1)
    spec = nk.KernelSpec("rbf", bandwidth=1.0)
    centers = nk.sample_centers(pairs, spec, m=1, seed=0)
    return pairs, spec, centers


# ---------------------------------------------------------------------------
# independent dense oracles


def krr_oracle_forecast(pairs, spec, lam, queries, g_values):
    """Classical kernel ridge solution (Kxx + n lam I)^-1 applied directly."""
    n = pairs.n
    k_xx = nk.gram(spec, pairs.X, pairs.X)
    alpha = scipy.linalg.solve(k_xx + n * lam * np.eye(n), g_values, assume_a="pos")
    return nk.gram(spec, queries, pairs.X) @ alpha


def pcr_oracle_w(pairs, spec, r):
    """Kernel-DMD middle matrix U_r S_r^-1 U_r^T from one dense eigensolve."""
    k_xx = nk.gram(spec, pairs.X, pairs.X)
    w, v = scipy.linalg.eigh(k_xx)
    idx = np.argsort(w)[::-1][:r]
    return (v[:, idx] / w[idx]) @ v[:, idx].T


# ---------------------------------------------------------------------------
# scalar closed forms


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_scalar_krr_closed_form(lam):
    pairs, spec, centers = scalar_fixture()
    est = nk.fit_nys_krr(pairs, centers, lam)
    assert est.w[0, 0] == pytest.approx(1.0 / (1.0 + lam), rel=1e-12)


def test_scalar_pcr_is_one():
    pairs, spec, centers = scalar_fixture()
    est = nk.fit_nys_pcr(pairs, centers, 1)
    assert est.w[0, 0] == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_scalar_rrr_matches_krr(lam):
    pairs, spec, centers = scalar_fixture()
    est = nk.fit_nys_rrr(pairs, centers, lam, 1)
    assert est.w[0, 0] == pytest.approx(1.0 / (1.0 + lam), rel=1e-12)


def test_exact_krr_single_pair():
    traj = nk.TrajectoryDataset(states=np.array([[0.4], [0.4]]))
    pairs = nk.build_pairs(traj, 1)
    est = nk.fit_exact_krr(pairs, nk.KernelSpec("rbf"), 2.0)
    assert est.w[0, 0] == pytest.approx(1.0 / 3.0, rel=1e-12)


# ---------------------------------------------------------------------------
# oracle equivalence


def test_krr_matches_dense_oracle(lorenz_traj, rbf35):
    lam = 1e-4
    pairs = lorenz_pairs(lorenz_traj, 500, 150)
    est = nk.fit_exact_krr(pairs, rbf35, lam)
    queries = lorenz_traj.states[2000:2030]
    got = nk.forecast(est, nk.identity_observable(est), queries)
    want = krr_oracle_forecast(pairs, rbf35, lam, queries, pairs.Y)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-7 * np.abs(want).max())


def test_pcr_matches_kernel_dmd_oracle(lorenz_traj, rbf35):
    pairs = lorenz_pairs(lorenz_traj, 700, 120)
    r = 8
    est = nk.fit_exact_pcr(pairs, rbf35, r)
    w_oracle = pcr_oracle_w(pairs, rbf35, r)
    queries = lorenz_traj.states[2500:2520]
    got = nk.forecast(est, nk.identity_observable(est), queries)
    want = nk.gram(rbf35, queries, pairs.X) @ (w_oracle.T @ pairs.Y)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-7 * np.abs(want).max())


def test_pcr_eigenvalues_match_kernel_dmd_oracle(lorenz_traj, rbf35):
    pairs = lorenz_pairs(lorenz_traj, 700, 120)
    r = 6
    est = nk.fit_exact_pcr(pairs, rbf35, r)
    lam_est = np.sort_complex(nk.decompose(est).eigenvalues)
    # oracle spectrum: nonzero eigenvalues of W_oracle @ Kxy on the data span
    w_oracle = pcr_oracle_w(pairs, rbf35, r)
    k_xy = nk.gram(rbf35, pairs.X, pairs.Y)
    full = np.linalg.eigvals(w_oracle @ k_xy)
    lam_oracle = np.sort_complex(full[np.argsort(np.abs(full))[::-1][:r]])
    np.testing.assert_allclose(lam_est, lam_oracle, atol=1e-6)


@pytest.mark.parametrize("n", [50, 200])
def test_nystrom_equals_exact_at_full_m(lorenz_traj, rbf35, n):
    lam = 1e-4
    pairs = lorenz_pairs(lorenz_traj, 300, n)
    centers = nk.sample_centers(pairs, rbf35, m=n, seed=7)
    queries = lorenz_traj.states[1500:1520]
    cases = [
        (nk.fit_nys_krr(pairs, centers, lam), nk.fit_exact_krr(pairs, rbf35, lam)),
        (nk.fit_nys_pcr(pairs, centers, 10), nk.fit_exact_pcr(pairs, rbf35, 10)),
        (nk.fit_nys_rrr(pairs, centers, lam, 10), nk.fit_exact_rrr(pairs, rbf35, lam, 10)),
    ]
    for nys, exact in cases:
        p1 = nk.forecast(nys, nk.identity_observable(nys), queries)
        p2 = nk.forecast(exact, nk.identity_observable(exact), queries)
        assert np.max(np.abs(p1 - p2)) <= 1e-6 * np.abs(p2).max()
        r1, r2 = nk.empirical_risk(nys), nk.empirical_risk(exact)
        assert abs(r1 - r2) <= 1e-6 * abs(r2)


def test_huge_lambda_shrinks_forecasts(lorenz_traj, rbf35):
    pairs = lorenz_pairs(lorenz_traj, 100, 80)
    centers = nk.sample_centers(pairs, rbf35, m=30, seed=1)
    est = nk.fit_nys_krr(pairs, centers, 1e9)
    queries = lorenz_traj.states[200:220]
    pred = nk.forecast(est, nk.identity_observable(est), queries)
    assert np.abs(pred).max() <= 1e-5
    # Tikhonov limit: training risk approaches the zero-predictor risk 1
    assert nk.empirical_risk(est) == pytest.approx(1.0, abs=1e-3)


def test_krr_training_risk_monotone_in_lambda(lorenz_traj, rbf35):
    pairs = lorenz_pairs(lorenz_traj, 900, 150)
    centers = nk.sample_centers(pairs, rbf35, m=40, seed=3)
    lams = [1e-6, 1e-4, 1e-2, 1.0, 1e2]
    risks = [nk.empirical_risk(nk.fit_nys_krr(pairs, centers, lam)) for lam in lams]
    assert all(risks[i] <= risks[i + 1] + 1e-12 for i in range(len(risks) - 1))


def test_rank_bound_pcr_rrr(lorenz_traj, rbf35):
    pairs = lorenz_pairs(lorenz_traj, 1200, 200)
    centers = nk.sample_centers(pairs, rbf35, m=50, seed=5)
    for r in (3, 7):
        for est in (nk.fit_nys_pcr(pairs, centers, r),
                    nk.fit_nys_rrr(pairs, centers, 1e-5, r)):
            assert nk.effective_rank(est) <= r


def test_rank_deficiency_reports_achievable():
    # constant trajectory: every Gram block has rank 1
    traj = nk.TrajectoryDataset(states=np.full((6, 2), 0.3))
    pairs = nk.build_pairs(traj, 1)
    spec = nk.KernelSpec("rbf")
    centers = nk.sample_centers(pairs, spec, m=4, seed=0)
    with pytest.raises(nk.RankDeficiencyError) as exc:
        nk.fit_nys_pcr(pairs, centers, 3)
    assert exc.value.achievable == 1
    with pytest.raises(nk.RankDeficiencyError):
        nk.fit_nys_rrr(pairs, centers, 1e-3, 3)


def test_rank_out_of_bounds_rejected(lorenz_traj, rbf35):
    pairs = lorenz_pairs(lorenz_traj, 0, 30)
    centers = nk.sample_centers(pairs, rbf35, m=10, seed=0)
    with pytest.raises(nk.InputError):
        nk.fit_nys_pcr(pairs, centers, 11)
    with pytest.raises(nk.InputError):
        nk.fit_nys_rrr(pairs, centers, 1e-3, 0)
    with pytest.raises(nk.InputError):
        nk.fit_nys_krr(pairs, centers, 0.0)


def test_degenerate_zero_blocks_rejected():
    traj = nk.TrajectoryDataset(states=np.zeros((5, 2)))
    pairs = nk.build_pairs(traj, 1)
    spec = nk.KernelSpec("linear")
    centers = nk.sample_centers(pairs, spec, m=2, seed=0)
    with pytest.raises(nk.NumericError):
        nk.fit_nys_krr(pairs, centers, 1e-3)


def test_exact_refuses_large_n():
    rng = np.random.default_rng(0)
    traj = nk.TrajectoryDataset(states=rng.normal(size=(60, 1)))
    pairs = nk.build_pairs(traj, 1)
    with pytest.raises(nk.InputError, match="n_max"):
        nk.fit_exact_krr(pairs, nk.KernelSpec("rbf"), 1e-3, n_max=50)


# ---------------------------------------------------------------------------
# empirical risk


def test_risk_near_interpolation_scalar():
    pairs, spec, centers = scalar_fixture()
    est = nk.fit_nys_krr(pairs, centers, 1e-12)
    assert nk.empirical_risk(est) <= 1e-6


def test_risk_explicit_feature_map_oracle():
    # degree-2 polynomial kernel in d=2 has the explicit feature map
    # phi(x) = [x1^2, x2^2, sqrt2 x1 x2, sqrt(2c) x1, sqrt(2c) x2, c]
    c = 1.0
    spec = nk.KernelSpec("poly", degree=2, offset=c)

    def phi(pts):
        x1, x2 = pts[:, 0], pts[:, 1]
        return np.column_stack([
            x1**2, x2**2, np.sqrt(2) * x1 * x2,
            np.sqrt(2 * c) * x1, np.sqrt(2 * c) * x2,
            np.full(len(pts), c),
        ])

    rng = np.random.default_rng(12)
    states = rng.normal(size=(25, 2))
    pairs = nk.build_pairs(nk.TrajectoryDataset(states=states), 1)
    centers = nk.sample_centers(pairs, spec, m=8, seed=2)
    est = nk.fit_nys_rrr(pairs, centers, 1e-3, 4)

    feats_y = phi(pairs.Y)
    feats_cy = phi(est.y_centers)
    u = nk.gram(spec, est.x_centers, pairs.X)
    resid = feats_y - (est.w @ u).T @ feats_cy
    explicit = np.mean(np.sum(resid**2, axis=1))
    assert nk.empirical_risk(est, pairs.X, pairs.Y) == pytest.approx(explicit, rel=1e-9)


def test_risk_dimension_mismatch():
    pairs, spec, centers = scalar_fixture()
    est = nk.fit_nys_krr(pairs, centers, 1.0)
    with pytest.raises(nk.InputError):
        nk.empirical_risk(est, np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(nk.InputError):
        nk.empirical_risk(est, np.zeros((3, 1)), np.zeros((4, 1)))


# ---------------------------------------------------------------------------
# RRR optimality


def test_exact_rrr_beats_random_rank_r_candidates():
    rng = np.random.default_rng(21)
    n, d, r, lam = 100, 2, 4, 1e-3
    states = np.cumsum(rng.normal(size=(n + 1, d)), axis=0) * 0.1
    pairs = nk.build_pairs(nk.TrajectoryDataset(states=states), 1)
    spec = nk.KernelSpec("rbf", bandwidth=1.0)
    est = nk.fit_exact_rrr(pairs, spec, lam, r)
    k_xx, k_yy = est.k_xx, est.k_yy
    kyy_diag = nk.gram_diag(spec, pairs.Y)

    def objective(w_mid):
        # risk + lam * ||A||_HS^2 for A = Phi_y w_mid Phi_x^* over all pairs
        wu = w_mid @ k_xx
        cross = np.einsum("ij,ij->j", k_yy, wu)
        quad = np.einsum("ij,ij->j", wu, k_yy @ wu)
        risk = float(np.mean(kyy_diag - 2 * cross + quad))
        hs = float(np.sum(w_mid * (k_yy @ w_mid @ k_xx)))
        return risk + lam * hs

    best = objective(est.w)
    assert best == pytest.approx(
        nk.empirical_risk(est) + lam * nk.hs_norm_sq(est), rel=1e-9
    )
    scale = np.abs(est.w).max()
    for trial in range(100):
        if trial < 50:
            cand = rng.normal(size=(n, r)) @ rng.normal(size=(r, n)) * scale / n
        else:
            du = rng.normal(size=(n, r)) * 0.03 * scale
            dv = rng.normal(size=(n, r)) * 0.03 * scale
            cand = (est.u_r + du) @ (est.v_r + dv).T
        assert objective(cand) >= best - 1e-9 * abs(best)


def test_exact_pcr_full_rank_interpolates():
    rng = np.random.default_rng(31)
    states = rng.normal(size=(21, 2))
    pairs = nk.build_pairs(nk.TrajectoryDataset(states=states), 1)
    spec = nk.KernelSpec("rbf", bandwidth=1.0)
    est = nk.fit_exact_pcr(pairs, spec, pairs.n)
    assert nk.empirical_risk(est) <= 1e-8


# ---------------------------------------------------------------------------
# serialization


def test_model_round_trip_bit_exact(tmp_path, lorenz_traj, rbf35):
    pairs = lorenz_pairs(lorenz_traj, 50, 60)
    centers = nk.sample_centers(pairs, rbf35, m=15, seed=8)
    est = nk.fit_nys_rrr(pairs, centers, 1e-4, 5)
    path = tmp_path / "model.bin"
    nk.save_model(path, est)
    loaded = nk.load_model(path)
    assert loaded.kind == est.kind
    assert np.array_equal(loaded.u_r, est.u_r)
    assert np.array_equal(loaded.v_r, est.v_r)
    assert np.array_equal(loaded.x_centers, est.x_centers)
    path2 = tmp_path / "model2.bin"
    nk.save_model(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()
    queries = lorenz_traj.states[100:110]
    g = nk.identity_observable(est)
    assert np.array_equal(
        nk.forecast(est, g, queries), nk.forecast(loaded, g, queries)
    )


def test_model_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"KOOPMODL" + b"\x01" * 8)
    with pytest.raises(nk.DataError):
        nk.load_model(path)
