import numpy as np
import pytest

from mather_lab.currents import (
    CurrentDescriptor,
    ExactForm,
    boundary_check,
    current_distance,
    mean_action_consistency,
    measure_of_field,
    moment_breakdown,
    random_test_forms,
    slope_of_current,
    translation_check,
)
from mather_lab.fields import Field, grid_for
from mather_lab.lagrangian import LagrangianModel
from mather_lab.mather_functions import BetaConfig, beta
from mather_lab.periodic_minimizer import minimize
from mather_lab.slope_lattice import RationalSlope, parse_slope

PEND = LagrangianModel.pendulum(0.1)


@pytest.fixture(scope="module")
def slope_one_minimizer():
    rho = parse_slope("1")
    return minimize(PEND, rho, grid_for(rho, 256), seed=0, random_starts=2)[0]


def test_linear_graph_moments():
    rho = parse_slope("1/2")
    d = measure_of_field(Field.affine(rho, grid_for(rho, 32)), K=4)
    for k in range(-4, 5):
        for j in range(-4, 5):
            expect = 1.0 if j == -2 * k else 0.0
            assert abs(d.moment(k, j) - expect) <= 1e-13


def test_zero_field_moments():
    rho = RationalSlope.zero(1)
    d = measure_of_field(Field.affine(rho, grid_for(rho, 16)), K=3)
    for k in range(-3, 4):
        for j in range(-3, 4):
            assert abs(d.moment(k, j) - (1.0 if k == 0 else 0.0)) <= 1e-13


def test_structural_moment_properties(slope_one_minimizer):
    rho = parse_slope("1/2 1/3")
    rng = np.random.default_rng(0)
    fields = [slope_one_minimizer.field,
              Field(rho, grid_for(rho, 8), rng.normal(size=(8, 8)))]
    for f in fields:
        d = measure_of_field(f, K=3)
        centre = d.moments[d.moments.shape[0] // 2, d.K]
        assert centre == 1.0
        assert np.array_equal(d.moments[::-1, ::-1], d.moments.conj())
        assert np.max(np.abs(d.moments)) <= 1 + 1e-12


def test_translation_examples(slope_one_minimizer):
    rho = parse_slope("1/2")
    f = Field.affine(rho, grid_for(rho, 32))
    assert translation_check(f, (0,), 1) <= 1e-13
    for z in range(-3, 4):
        assert translation_check(f, (z,), 2) <= 1e-12
    g = slope_one_minimizer.field
    for z in range(-3, 4):
        assert translation_check(g, (z,), -1) <= 1e-8


def test_translation_n2():
    rho = parse_slope("1/2 1/3")
    rng = np.random.default_rng(3)
    f = Field(rho, grid_for(rho, 12), 0.2 * rng.normal(size=(12, 12)))
    for z in [(1, 0), (0, 1), (-3, 2), (3, 3)]:
        assert translation_check(f, z, 1, K=4) <= 1e-8


def test_slope_telescoping(slope_one_minimizer):
    rho = parse_slope("1/2 1/3")
    f = Field(rho, grid_for(rho, 10), np.random.default_rng(1).normal(size=(10, 10)))
    assert np.max(np.abs(slope_of_current(measure_of_field(f, 2)) - [0.5, 1 / 3, 1.0])) <= 1e-12
    lin = Field.affine(rho, grid_for(rho, 10))
    assert np.array_equal(slope_of_current(measure_of_field(lin, 2)), np.array([0.5, 1 / 3, 1.0]))
    s = slope_of_current(measure_of_field(slope_one_minimizer.field, 2))
    assert np.max(np.abs(s - [1.0, 1.0])) <= 1e-12


def test_boundary_examples(slope_one_minimizer):
    rho = parse_slope("1/2")
    const = ExactForm((0,), 0, 0, 1, 1.3, 0.4)
    f = slope_one_minimizer.field
    assert boundary_check(f, [const]) == 0.0
    lin = Field.affine(rho, grid_for(rho, 64))
    sine = ExactForm((1,), 0, 0, 1, 1.0, -np.pi / 2)
    assert boundary_check(lin, [sine]) <= 1e-13
    forms = random_test_forms(1, 20, seed=0)
    assert boundary_check(f, forms) <= 1e-4


def test_boundary_refines_quadratically():
    rho = parse_slope("1")
    forms = random_test_forms(1, 20, seed=0)
    errs = []
    for N in (128, 256, 512):
        r = minimize(PEND, rho, grid_for(rho, N), seed=0, random_starts=1)[0]
        errs.append(boundary_check(r.field, forms))
    for a, b in zip(errs, errs[1:]):
        assert 2.0 <= a / b <= 8.0


def test_boundary_rejects_bad_forms():
    rho = parse_slope("0")
    f = Field.affine(rho, grid_for(rho, 8))
    with pytest.raises(ValueError):
        boundary_check(f, [ExactForm((0,), 1, 0, 0)])
    with pytest.raises(ValueError):
        boundary_check(f, [ExactForm((3,), 1, 0, 1)], K=2)


def test_random_forms_deterministic():
    assert random_test_forms(2, 5, seed=4) == random_test_forms(2, 5, seed=4)


def test_distance_examples():
    rho = RationalSlope.zero(1)
    g = grid_for(rho, 16)
    a = measure_of_field(Field.affine(rho, g, 0.0))
    b = measure_of_field(Field.affine(rho, g, 0.5))
    assert current_distance(a, a) == 0.0
    assert current_distance(a, b) == pytest.approx(2.0, abs=1e-12)
    top = moment_breakdown(a, b, top=1)[0]
    assert top["j"] % 2 == 1 and top["abs_diff"] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        current_distance(a, measure_of_field(Field.affine(rho, g), K=3))


def test_same_class_minimizers_are_close():
    rho = RationalSlope.zero(1)
    res = minimize(PEND, rho, grid_for(rho, 64), seed=0, random_starts=6)
    ds = [measure_of_field(r.field) for r in res]
    assert max(current_distance(ds[0], d) for d in ds) <= 1e-6


def test_descriptor_json_roundtrip(tmp_path):
    rho = parse_slope("1/2 1/3")
    f = Field(rho, grid_for(rho, 6), np.random.default_rng(2).normal(size=(6, 6)))
    d = measure_of_field(f, K=2)
    path = d.save(tmp_path / "d.json")
    import json

    back = CurrentDescriptor.from_json(json.loads(path.read_text()))
    assert np.array_equal(back.moments, d.moments) and back.rho == rho


def test_mean_action_consistency_examples(slope_one_minimizer):
    rho = parse_slope("1/3")
    free = LagrangianModel.free(1)
    s = beta(free, rho, BetaConfig(N=32))
    assert mean_action_consistency(free, s.best.field, 0.5 / 9) <= 1e-10
    z = RationalSlope.zero(1)
    s0 = beta(PEND, z, BetaConfig(N=32))
    assert mean_action_consistency(PEND, s0.best.field, s0.value) == 0.0
    s1 = beta(PEND, parse_slope("1"), BetaConfig(N=256, random_starts=2))
    assert mean_action_consistency(PEND, slope_one_minimizer.field, s1.value) <= 1e-6
