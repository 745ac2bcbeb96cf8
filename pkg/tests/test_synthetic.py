import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from adlbr.operator import ScalarField
from adlbr.synthetic import (
    SyntheticCase,
    error_norms,
    make_inputs,
    profile,
    reference_solution,
    run_benchmark,
)
from adlbr.tensor import condition_numbers


def tridiagonal_profile(ell, n=100_000, lo=-2.0, hi=3.0):
    """u - ell^2 u'' = 1_{y < 1/2} by second differences on [lo, hi], u' = 0 at the ends.

    Nodes sit at cell centres so y = 1/2 falls midway between two of them.
    """
    h = (hi - lo) / n
    y = lo + (np.arange(n) + 0.5) * h
    r = ell * ell / (h * h)
    main = np.full(n, 1 + 2 * r)
    main[[0, -1]] = 1 + r
    A = sp.diags([np.full(n - 1, -r), main, np.full(n - 1, -r)], [-1, 0, 1], format="csc")
    return y, spla.spsolve(A, (y < 0.5).astype(float))


def test_case_validation():
    for kw in ({"kappa": 0.5, "n": 16}, {"kappa": 2, "n": 4}, {"kappa": 2, "n": 16, "lam": 0}):
        with pytest.raises(ValueError):
            SyntheticCase(**kw)
    c = SyntheticCase(2.0, 100)
    assert c.h == 0.01 and c.decay_length == pytest.approx(math.sqrt(1e-3) / 2)


def test_isotropic_inputs():
    v, t = make_inputs(SyntheticCase(1.0, 16, alpha=0.0))
    np.testing.assert_array_equal(t.values, np.broadcast_to(np.eye(2), t.values.shape))
    y = (np.arange(16) + 0.5) / 16
    np.testing.assert_array_equal(v.values, np.broadcast_to(y < 0.5, (16, 16)).astype(float))
    assert v.boundary == t.boundary == "neumann"


@pytest.mark.parametrize("kappa", [1.0, 3.0, 10.0])
def test_determinant(kappa):
    _, t = make_inputs(SyntheticCase(kappa, 32))
    np.testing.assert_allclose(np.linalg.det(t.values), kappa**-2, rtol=1e-10)


def test_max_anisotropy_closed_form():
    # [[1, s], [s, s^2 + k^-2]] has trace 1 + s^2 + k^-2 and determinant k^-2,
    # so its anisotropy ratio grows like kappa (1 + s^2), not kappa sqrt(1 + s^2)
    kappa, c = 10.0, SyntheticCase(10.0, 400)
    _, t = make_inputs(c)
    s = 2 * math.pi * c.alpha
    tr, det = 1 + s * s + kappa**-2, kappa**-2
    want = (tr + math.sqrt(tr * tr - 4 * det)) / (2 * math.sqrt(det))
    assert condition_numbers(t).max() == pytest.approx(want, rel=1e-3)
    assert want == pytest.approx(kappa * (1 + s * s), rel=5e-3)


def test_profile_values():
    ell = 0.02
    assert profile(0.5, ell) == 0.5
    assert profile(0.5 - 5 * ell, ell) == pytest.approx(1 - 0.5 * math.exp(-5), abs=1e-15)
    assert profile(0.5 + 5 * ell, ell) == pytest.approx(0.5 * math.exp(-5), abs=1e-15)
    y = np.linspace(-1, 2, 1001)
    u = profile(y, ell)
    assert (u >= 0).all() and (u <= 1).all()
    assert np.all(np.diff(u) <= 0)


def test_profile_matches_tridiagonal_oracle():
    ell = SyntheticCase(2.0, 100).decay_length
    y, u = tridiagonal_profile(ell)
    assert np.abs(profile(y, ell) - u).max() <= 1e-6


def test_profile_matches_extrapolated_oracle():
    # at kappa = 10 the decay length is ~60 cells of the 1e5 grid, and the
    # oracle's own O(h^2) error is ~1e-5; cell centres of n and 3n nest, so
    # one Richardson step removes it
    ell = SyntheticCase(10.0, 100).decay_length
    y, coarse = tridiagonal_profile(ell)
    _, fine = tridiagonal_profile(ell, n=300_000)
    u = (9 * fine[1::3] - coarse) / 8
    assert np.abs(profile(y, ell) - u).max() <= 1e-6


def test_reference_in_unit_interval():
    u = reference_solution(SyntheticCase(5.0, 64)).values
    assert u.min() >= 0 and u.max() <= 1


def test_error_norm_identities(rng):
    ref = ScalarField(rng.uniform(0, 1, (10, 12)))
    assert error_norms(ref, ref) == (0.0, 0.0)
    l2, h1 = error_norms(ref.replace(ref.values + 0.3), ref)
    assert h1 == pytest.approx(0.0, abs=1e-15)
    assert error_norms(ref.replace(2 * ref.values), ref)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        error_norms(ScalarField(np.zeros((10, 11))), ref)


@pytest.mark.parametrize("scheme", ["adlbr", "ann", "fd"])
def test_isotropic_separable_case(scheme):
    r = run_benchmark(SyntheticCase(1.0, 200, alpha=0.0), scheme)
    assert r.l2_rel <= 2e-2
    assert r.scheme == scheme and r.n == 200 and r.wall_ms > 0


def test_inputs_shared_across_schemes():
    c = SyntheticCase(4.0, 40)
    a, b = make_inputs(c), make_inputs(c)
    assert np.array_equal(a[0].values, b[0].values) and np.array_equal(a[1].values, b[1].values)


@pytest.mark.slow
@pytest.mark.parametrize("kappa", [2.0, 5.0, 10.0])
def test_error_decreases_with_resolution(kappa):
    errs = [run_benchmark(SyntheticCase(kappa, n), "adlbr").l2_rel for n in (100, 200, 400)]
    for coarse, fine in zip(errs, errs[1:]):
        assert fine <= 1.05 * coarse
