import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adlbr.operator import ScalarField, TensorField
from adlbr.tensor import (
    StructureParams,
    ced_tensor,
    condition_numbers,
    eed_tensor,
    eigen_sym,
    gaussian_blur,
    gaussian_kernel,
    gradient,
    structure_tensor,
)
from conftest import random_rotation


def _grid(G):
    J = np.einsum("kij,klj->kil", G, G)
    d = J.shape[-1]
    # lay the tensors out on a 2D or 3D grid of the right dimension
    shape = (J.shape[0],) + (1,) * (d - 1)
    return J.reshape(*shape, d, d)


def test_params_validation():
    for kw in ({"alpha": 0.0}, {"alpha": 1.0}, {"C": 0.0}, {"sigma": -1.0}, {"rho": -0.1}):
        with pytest.raises(ValueError):
            StructureParams(**kw)


def test_kernel_normalised_and_radius():
    k = gaussian_kernel(1.2)
    assert k.size == 2 * math.ceil(3.6) + 1
    assert k.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(k, k[::-1])


def test_blur_identity_and_constants(rng):
    u = ScalarField(rng.standard_normal((9, 7)))
    assert np.array_equal(gaussian_blur(u, 0).values, u.values)
    c = ScalarField(np.full((6, 5, 4), 3.25))
    np.testing.assert_allclose(gaussian_blur(c, 1.5).values, 3.25, rtol=1e-12)
    with pytest.raises(ValueError):
        gaussian_blur(u, -1)


def test_blur_impulse():
    a = np.zeros((21, 21))
    a[10, 10] = 1.0
    out = gaussian_blur(ScalarField(a), 2.0).values
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(out, out[::-1], atol=1e-15)
    np.testing.assert_allclose(out, out.T, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 4.0))
def test_blur_preserves_mean(seed, s):
    rng = np.random.default_rng(seed)
    u = ScalarField(rng.standard_normal((11, 13)))
    assert gaussian_blur(u, s).values.mean() == pytest.approx(u.values.mean(), rel=1e-12, abs=1e-14)


def test_gradient_of_linear_function():
    n = 8
    x = np.arange(n, dtype=float)
    u = ScalarField(np.add.outer(2 * x, -3 * x), h=0.5)
    g = gradient(u)
    np.testing.assert_allclose(g[1:-1, 1:-1, 0], 4.0)
    np.testing.assert_allclose(g[1:-1, 1:-1, 1], -6.0)


def test_structure_tensor_trivial_cases():
    p = StructureParams(sigma=1.0, rho=1.0)
    assert not structure_tensor(ScalarField(np.full((8, 8), 2.0)), p).values.any()
    x = np.arange(16, dtype=float)
    J = structure_tensor(ScalarField(np.repeat(x[:, None], 16, axis=1)), StructureParams(sigma=0, rho=0)).values
    inner = J[1:-1, 1:-1]
    np.testing.assert_allclose(inner[..., 0, 0], 1.0)
    assert not inner[..., 0, 1].any() and not inner[..., 1, 1].any()


@pytest.mark.parametrize("shape", [(10, 12), (6, 7, 5)])
def test_structure_tensor_psd(shape, rng):
    J = structure_tensor(ScalarField(rng.standard_normal(shape)), StructureParams(sigma=0.7, rho=1.5)).values
    w = np.linalg.eigvalsh(J)
    tr = np.trace(J, axis1=-2, axis2=-1)
    assert (w[..., 0] >= -1e-12 * tr).all()


def test_eigen_sym_cases(rng):
    w, V = eigen_sym(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(w, [3, 1])
    np.testing.assert_allclose(np.abs(V), np.eye(2), atol=1e-15)
    for d, vals in ((2, [2.0, -0.5]), (3, [2.0, 1.0, 0.0])):
        R = random_rotation(rng, d)
        m = (R * vals) @ R.T
        w, V = eigen_sym(m)
        np.testing.assert_allclose(w, sorted(vals, reverse=True), atol=1e-12)
        np.testing.assert_allclose(V.T @ V, np.eye(d), atol=1e-10)
        assert np.linalg.norm((V * w) @ V.T - m) <= 1e-10 * np.linalg.norm(m)
    w, V = eigen_sym(np.eye(3))
    np.testing.assert_allclose((V * w) @ V.T, np.eye(3), atol=1e-12)
    with pytest.raises(ValueError):
        eigen_sym(np.eye(4))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eigen_sym_random_3x3(seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((3, 3))
    m = G + G.T
    w, V = eigen_sym(m)
    assert np.all(np.diff(w) <= 0)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(m)[::-1], atol=1e-10 * np.linalg.norm(m))
    np.testing.assert_allclose(V.T @ V, np.eye(3), atol=1e-10)


@pytest.mark.parametrize("d", [2, 3])
def test_ced_limits(d):
    p = StructureParams(alpha=0.05, C=1e-5)
    zero = TensorField(np.zeros((3,) * d + (d, d)))
    np.testing.assert_allclose(ced_tensor(zero, p).values, 0.05 * np.broadcast_to(np.eye(d), zero.values.shape))
    strong = np.zeros((1,) * d + (d, d))
    strong[..., 0, 0] = 1e3
    want = np.diag([0.05] + [1.0] * (d - 1))
    np.testing.assert_allclose(ced_tensor(TensorField(strong), p).values[(0,) * d], want, atol=1e-12)


def test_eed_limits():
    p = StructureParams(C=1e-5)
    zero = TensorField(np.zeros((2, 2, 2, 3, 3)))
    np.testing.assert_allclose(eed_tensor(zero, p).values, np.broadcast_to(np.eye(3), zero.values.shape))
    J = np.zeros((1, 1, 1, 3, 3))
    J[..., 2, 2] = 1e2
    D = eed_tensor(TensorField(J), p).values[0, 0, 0]
    assert D[2, 2] == pytest.approx(1e-9, rel=1e-6)
    np.testing.assert_allclose(D[:2, :2], np.eye(2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_ced_anisotropy_bound(seed, d):
    rng = np.random.default_rng(seed)
    p = StructureParams(alpha=1e-2, C=rng.uniform(1e-6, 1e-1))
    J = TensorField(_grid(rng.standard_normal((1000, d, d)) * 0.3))
    D = ced_tensor(J, p)
    assert condition_numbers(D).max() <= 1 / math.sqrt(p.alpha) + 1e-9
    assert np.linalg.eigvalsh(D.values)[..., 0].min() > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eed_eigenvalues_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    J = TensorField(_grid(rng.standard_normal((500, 3, 3)) * np.exp(rng.uniform(-4, 1))))
    w = np.linalg.eigvalsh(eed_tensor(J, StructureParams(C=1e-3)).values)
    assert (w > 0).all() and (w <= 1 + 1e-12).all()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["ced2", "ced3", "eed3"]))
def test_maps_commute_with_rotation(seed, which):
    rng = np.random.default_rng(seed)
    d = int(which[-1])
    fn = ced_tensor if which.startswith("ced") else eed_tensor
    p = StructureParams(C=1e-2)
    G = rng.standard_normal((d, d)) * 0.5  # J = G G^T, rotated J = (RG)(RG)^T
    R = random_rotation(rng, d)
    lhs = fn(TensorField(_grid((R @ G)[None])), p).values.reshape(d, d)
    rhs = R @ fn(TensorField(_grid(G[None])), p).values.reshape(d, d) @ R.T
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_rejects_indefinite_input():
    J = np.zeros((3, 3, 2, 2))
    J[1, 1] = [[1.0, 0.0], [0.0, -0.5]]
    with pytest.raises(ValueError, match="positive semi-definite"):
        ced_tensor(TensorField(J), StructureParams())
