import logging

import numpy as np
import pytest

from adlbr.diffusion import diffusion_tensor, evolve, radial_phantom
from adlbr.errors import InstabilityError
from adlbr.operator import ScalarField
from adlbr.tensor import StructureParams


def test_phantom_definition():
    clean, noisy = radial_phantom(8, noise_sd=0.0)
    x = (np.arange(8) + 0.5) / 8
    r = np.sqrt(x[0] ** 2 + x[0] ** 2 + x[3] ** 2)
    assert clean.values[0, 0, 3] == pytest.approx(np.cos(2 * (r / 0.5) ** 3))
    assert np.array_equal(clean.values, noisy.values)
    assert clean.h == 1.0 and clean.boundary == "neumann"


def test_phantom_noise_is_seeded():
    a = radial_phantom(10, seed=7)[1].values
    b = radial_phantom(10, seed=7)[1].values
    c = radial_phantom(10, seed=8)[1].values
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    resid = a - radial_phantom(10, noise_sd=0.0)[0].values
    assert resid.std() == pytest.approx(0.5, rel=0.1)
    with pytest.raises(ValueError):
        radial_phantom(2)
    with pytest.raises(ValueError):
        radial_phantom(8, noise_sd=-1)


def test_unknown_map():
    with pytest.raises(ValueError, match="unknown"):
        diffusion_tensor(ScalarField(np.zeros((4, 4))), StructureParams(), "pm")


def test_zero_steps_is_identity(rng):
    u = ScalarField(rng.uniform(0, 1, (8, 8)))
    res = evolve(u, StructureParams(), 0.02, 0)
    assert np.array_equal(res.u.values, u.values) and res.steps == 0


def test_rebuild_cadence(rng):
    u = ScalarField(rng.uniform(0, 1, (8, 8)))
    assert evolve(u, StructureParams(), 0.02, 6, rebuild_every=1).rebuilds == 6
    assert evolve(u, StructureParams(), 0.02, 6, rebuild_every=4).rebuilds == 2
    assert evolve(u, StructureParams(), 0.02, 6, rebuild_every=4, track_eigen=False).rebuilds == 2
    with pytest.raises(ValueError):
        evolve(u, StructureParams(), 0.0, 1)
    with pytest.raises(ValueError):
        evolve(u, StructureParams(), 0.1, 1, rebuild_every=0)


def test_maximum_principle_2d(rng):
    u = ScalarField(rng.uniform(0, 1, (24, 24)))
    res = evolve(u, StructureParams(), 0.02, 10)
    assert res.lambda_max0 * 0.02 <= 2
    assert res.u.values.min() >= u.values.min() - 1e-12
    assert res.u.values.max() <= u.values.max() + 1e-12


@pytest.mark.parametrize("kind", ["ced", "eed"])
def test_maximum_principle_3d(kind):
    _, u = radial_phantom(12)
    res = evolve(u, StructureParams(C=1e-3), 1e-3, 5, kind=kind, track_eigen=False)
    assert res.u.values.min() >= u.values.min() - 1e-12
    assert res.u.values.max() <= u.values.max() + 1e-12


def test_instability_detected(rng, caplog):
    u = ScalarField(rng.uniform(0, 1, (12, 12)))
    p = StructureParams(rho=0.0, C=1e-12)
    with caplog.at_level(logging.WARNING), pytest.raises(InstabilityError, match="smaller dt"):
        evolve(u, p, 5.0, 60)
    assert "may be unstable" in caplog.text
