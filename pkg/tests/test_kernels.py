import numpy as np
import pytest
import scipy.linalg

import nyskoop as nk
from nyskoop.kernels import _CHUNK


def test_rbf_self_similarity_is_one():
    spec = nk.KernelSpec("rbf", bandwidth=1.0)
    x = np.array([0.3, -1.2])
    assert nk.eval_kernel(spec, x, x) == 1.0


def test_rbf_closed_form():
    spec = nk.KernelSpec("rbf", bandwidth=1.0)
    val = nk.eval_kernel(spec, np.array([0.0]), np.array([2.0]))
    assert val == pytest.approx(np.exp(-2.0), rel=1e-15)


def test_linear_dot_product():
    spec = nk.KernelSpec("linear")
    assert nk.eval_kernel(spec, np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0


def test_poly_closed_form():
    spec = nk.KernelSpec("poly", degree=3, offset=0.5)
    x, y = np.array([1.0, -1.0]), np.array([2.0, 0.5])
    assert nk.eval_kernel(spec, x, y) == pytest.approx((x @ y + 0.5) ** 3, rel=1e-15)


def test_gram_single_point():
    spec = nk.KernelSpec("rbf", bandwidth=1.0)
    np.testing.assert_array_equal(nk.gram(spec, [[0.0]], [[0.0]]), [[1.0]])


def test_gram_two_points_closed_form():
    spec = nk.KernelSpec("rbf", bandwidth=1.0)
    pts = np.array([[0.0], [2.0]])
    expected = np.array([[1.0, np.exp(-2)], [np.exp(-2), 1.0]])
    np.testing.assert_allclose(nk.gram(spec, pts, pts), expected, rtol=1e-15)


@pytest.mark.parametrize("family,kw", [
    ("rbf", {"bandwidth": 0.7}),
    ("linear", {}),
    ("poly", {"degree": 2, "offset": 1.0}),
])
def test_gram_psd_random_points(family, kw):
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 3))
    spec = nk.KernelSpec(family, **kw)
    k = nk.gram(spec, pts, pts)
    np.testing.assert_allclose(k, k.T, atol=0)
    eigs = scipy.linalg.eigvalsh(k)
    assert eigs.min() >= -1e-10 * np.trace(k)


def test_gram_entries_match_eval_exactly():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(7, 4))
    b = rng.normal(size=(9, 4))
    for spec in [
        nk.KernelSpec("rbf", bandwidth=0.9),
        nk.KernelSpec("linear"),
        nk.KernelSpec("poly", degree=2, offset=0.3),
    ]:
        k = nk.gram(spec, a, b)
        for i in range(a.shape[0]):
            for j in range(b.shape[0]):
                assert k[i, j] == nk.eval_kernel(spec, a[i], b[j])


def test_gram_chunking_bit_identical():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(_CHUNK + 13, 3))
    b = rng.normal(size=(17, 3))
    spec = nk.KernelSpec("rbf", bandwidth=1.3)
    k = nk.gram(spec, a, b)
    rows = np.vstack([nk.gram(spec, a[i : i + 1], b) for i in range(a.shape[0])])
    assert np.array_equal(k, rows)


def test_kernel_symmetry_in_arguments():
    rng = np.random.default_rng(7)
    for spec in [nk.KernelSpec("rbf", bandwidth=2.0), nk.KernelSpec("linear"),
                 nk.KernelSpec("poly", degree=4, offset=2.0)]:
        for _ in range(20):
            x, y = rng.normal(size=4), rng.normal(size=4)
            assert nk.eval_kernel(spec, x, y) == nk.eval_kernel(spec, y, x)


def test_gram_diag_matches_eval():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(12, 3))
    for spec in [nk.KernelSpec("rbf", bandwidth=0.8), nk.KernelSpec("linear"),
                 nk.KernelSpec("poly", degree=2, offset=0.5)]:
        d = nk.gram_diag(spec, pts)
        expected = [nk.eval_kernel(spec, p, p) for p in pts]
        np.testing.assert_allclose(d, expected, rtol=1e-15)


def test_dimension_mismatch_rejected():
    spec = nk.KernelSpec("rbf")
    with pytest.raises(nk.InputError):
        nk.eval_kernel(spec, np.zeros(2), np.zeros(3))


def test_non_finite_rejected():
    spec = nk.KernelSpec("rbf")
    with pytest.raises(nk.InputError):
        nk.eval_kernel(spec, np.array([np.nan]), np.array([0.0]))
    with pytest.raises(nk.InputError):
        nk.gram(spec, np.array([[np.inf]]), np.array([[0.0]]))


def test_empty_sets_rejected():
    spec = nk.KernelSpec("rbf")
    with pytest.raises(nk.InputError):
        nk.gram(spec, np.zeros((0, 2)), np.zeros((3, 2)))


def test_invalid_spec_rejected():
    with pytest.raises(nk.InputError):
        nk.KernelSpec("rbf", bandwidth=0.0)
    with pytest.raises(nk.InputError):
        nk.KernelSpec("poly", degree=0)
    with pytest.raises(nk.InputError):
        nk.KernelSpec("matern")
