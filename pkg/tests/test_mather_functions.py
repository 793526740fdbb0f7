import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from mather_lab.lagrangian import LagrangianModel
from mather_lab.mather_functions import (
    BetaConfig,
    BoundaryArgmaxWarning,
    beta,
    beta_table,
    c_box_grid,
    convexity_excess,
    double_conjugate,
    farey_points,
    flats,
    legendre,
    lc_minimizer,
    mode_locking_measure,
    senn_check,
    slope_grid,
    table_from_json,
    table_from_values,
)
from mather_lab.slope_lattice import RationalSlope, parse_slope

from oracles import farey, kink_half_width, pendulum_beta_quadrature

PEND = LagrangianModel.pendulum(0.1)
FAST = BetaConfig(N=64, random_starts=1, max_shifts=2, resolution="unit")


def quiet_legendre(table, C):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryArgmaxWarning)
        return legendre(table, C)


@pytest.fixture(scope="module")
def pendulum_table():
    return beta_table(PEND, 8, -1, 1, FAST)


@pytest.fixture(scope="module")
def pendulum_alpha(pendulum_table):
    return quiet_legendre(pendulum_table, c_box_grid(-1, 1, 801))


def test_beta_examples():
    free = LagrangianModel.free(2)
    s = beta(free, parse_slope("1/2 1/3"), BetaConfig(N=16))
    assert s.value == pytest.approx(0.5 * (1 / 4 + 1 / 9), abs=1e-10)
    assert beta(PEND, RationalSlope.zero(1), FAST).value == pytest.approx(0.0, abs=1e-12)
    b1 = beta(PEND, parse_slope("1"), BetaConfig(N=512, random_starts=2)).value
    assert 0.5 <= b1 <= 0.6
    assert abs(b1 - pendulum_beta_quadrature(1.0, 0.1)) < 1e-4


def test_beta_config_validation():
    with pytest.raises(ValueError):
        BetaConfig(N=1)
    with pytest.raises(ValueError):
        BetaConfig(resolution="spectral")
    assert BetaConfig(N=32).doubled().N == 64
    assert BetaConfig(N=32, resolution="unit").grid_N(parse_slope("1/3")) == 96


def test_farey_points_and_grid():
    assert farey_points(4, -1, 1) == sorted(farey(4, -1, 1))
    assert len(slope_grid(2, 0, 1, n=2)) == 9
    with pytest.raises(ValueError, match="empty slope range"):
        slope_grid(3, 1, 0)


def test_free_table_is_quadratic():
    t = beta_table(LagrangianModel.free(1), 4, -1, 1, BetaConfig(N=16))
    for s, v in zip(t.slopes, t.values):
        assert v == pytest.approx(0.5 * float(s.components[0]) ** 2, abs=1e-12)
    assert not t.flagged


def test_pendulum_table_convex_and_symmetric(pendulum_table):
    t = pendulum_table
    assert not t.flagged
    assert np.max(convexity_excess(t.points, t.values)) <= 1e-9
    for i, s in enumerate(t.slopes):
        j = t.index_of(-s)
        assert abs(t.values[i] - t.values[j]) <= 1e-9


def test_convexity_audit_flags_dent():
    pts = np.linspace(-1, 1, 9)
    vals = 0.5 * pts**2
    vals[4] += 0.05
    exc = convexity_excess(pts.reshape(-1, 1), vals)
    # hull chord between the neighbours at +-1/4 sits at 1/32
    assert np.argmax(exc) == 4 and exc[4] == pytest.approx(0.05 - 1 / 32, abs=1e-12)


def test_table_json_roundtrip(pendulum_table):
    back = table_from_json(pendulum_table.to_json())
    assert back.slopes == pendulum_table.slopes
    assert np.array_equal(back.values, pendulum_table.values)


def test_csv_rows_carry_provenance(pendulum_table, tmp_path):
    path = pendulum_table.to_csv(tmp_path / "b.csv")
    header = path.read_text().splitlines()[0].split(",")
    for key in ("N", "tol", "seed", "residual", "classes"):
        assert key in header


def test_legendre_quadratic():
    Q = 40
    xs = farey_points(Q, -2, 2)
    t = table_from_values(xs, [0.5 * float(x) ** 2 for x in xs])
    C = c_box_grid(-1, 1, 201)
    a = legendre(t, C)
    gap = max(float(b - a) for a, b in zip(xs, xs[1:]))
    assert np.max(np.abs(a.values - 0.5 * C[:, 0] ** 2)) <= gap**2


def test_legendre_absolute_value_and_flat():
    xs = farey_points(6, -1, 1)
    t = table_from_values(xs, [abs(float(x)) for x in xs])
    C = c_box_grid(-1, 1, 101)
    a = legendre(t, C, warn=False)
    assert np.allclose(a.values, 0.0, atol=1e-15)
    zero = t.index_of(RationalSlope.zero(1))
    assert all(zero in am for am in a.argmax)
    # lowest denominator wins ties
    assert np.all(a.support == zero) or np.all(a.support[1:-1] == zero)
    fl = flats(a, RationalSlope.zero(1))
    assert fl.interval[0] == pytest.approx(-1.0) and fl.interval[1] == pytest.approx(1.0)
    assert fl.dimension == 1


def test_boundary_argmax_warns():
    xs = farey_points(2, -1, 1)
    t = table_from_values(xs, [0.5 * float(x) ** 2 for x in xs])
    with pytest.warns(BoundaryArgmaxWarning):
        legendre(t, c_box_grid(-3, 3, 7))


def test_fenchel_young(pendulum_table, pendulum_alpha):
    t, a = pendulum_table, pendulum_alpha
    S = a.points @ t.points.T - t.values
    assert np.all(a.values[:, None] + 1e-15 >= S)
    for r, idx in enumerate(a.argmax):
        for i in idx:
            assert abs(a.values[r] - S[r, i]) <= 1e-6 * (1 + abs(t.values[i]))


def test_double_conjugate(pendulum_table, pendulum_alpha):
    t = pendulum_table
    rec = double_conjugate(pendulum_alpha)
    inner = np.abs(t.points[:, 0]) < 1
    assert np.all(rec[inner] <= t.values[inner] + 1e-12)
    assert np.max(np.abs(rec[inner] - t.values[inner])) <= 1e-2


def test_alpha_symmetric(pendulum_alpha):
    a = pendulum_alpha.values
    assert np.max(np.abs(a - a[::-1])) <= 1e-9


def test_free_flats_are_points():
    xs = farey_points(8, -1, 1)
    t = table_from_values(xs, [0.5 * float(x) ** 2 for x in xs])
    a = legendre(t, c_box_grid(-0.9, 0.9, 721), warn=False)
    for s in t.slopes:
        if abs(s.components[0]) < F(1):
            fl = flats(a, s)
            assert fl.width <= 0.9 * 2 / 720 + 1e-12
            rep = senn_check(fl)
            assert rep.passed
    ml = mode_locking_measure(a, 8)
    assert ml.fraction <= len(t.slopes) * 2 / 721


def test_pendulum_zero_flat(pendulum_alpha):
    fl = flats(pendulum_alpha, RationalSlope.zero(1))
    c_star = kink_half_width(0.1)
    assert c_star == pytest.approx(4 * np.sqrt(0.1) / np.pi, rel=1e-10)
    half = 0.5 * (fl.interval[1] - fl.interval[0])
    assert abs(half - c_star) <= 0.05 * c_star
    members = pendulum_alpha.values[fl.member_index]
    assert np.max(np.abs(members)) <= 1e-6
    rep = senn_check(fl)
    assert rep.passed and rep.dim_flat == 1 == rep.dim_rat
    assert not rep.foliation


def test_pendulum_mode_locking_q1(pendulum_alpha):
    ml = mode_locking_measure(pendulum_alpha, 1)
    assert ml.fraction >= 0.20


def test_windows_grow_with_eps():
    widths = []
    for eps in (0.05, 0.1):
        t = beta_table(LagrangianModel.pendulum(eps), 8, -1, 1, FAST)
        ml = mode_locking_measure(quiet_legendre(t, c_box_grid(-1, 1, 801)), 8)
        widths.append(ml.widths)
    for k, w in widths[0].items():
        assert widths[1][k] >= w - 1e-9


def test_flat_membership_homogeneity():
    xs = farey_points(6, -1, 1)
    vals = np.array([abs(float(x)) + 0.5 * float(x) ** 2 for x in xs])
    C = c_box_grid(-1.5, 1.5, 61)
    for lam in (2.0, 0.5):
        a1 = legendre(table_from_values(xs, vals), C, warn=False)
        a2 = legendre(table_from_values(xs, lam * vals), lam * C, warn=False)
        for s in a1.source.slopes:
            f1, f2 = flats(a1, s), flats(a2, s)
            assert np.array_equal(f1.member_index, f2.member_index)


def test_senn_n2_pendulum():
    model = LagrangianModel.pendulum(0.1, n=2)
    t = beta_table(model, 2, F(-1, 2), F(1, 2), BetaConfig(N=16, random_starts=1, max_shifts=2), n=2)
    a = quiet_legendre(t, c_box_grid(-0.5, 0.5, 21, n=2))
    fl = flats(a, RationalSlope.zero(2))
    rep = senn_check(fl)
    assert rep.passed and rep.dim_flat == 2 and rep.dim_rat == 2
    assert np.max(np.abs(fl.lifted()[:, 2] - fl.lifted()[0, 2])) <= 1e-6


def test_lc_minimizer_examples(pendulum_table):
    res = lc_minimizer(PEND, [0.1], pendulum_table, FAST)
    assert res.rho == RationalSlope.zero(1)
    assert res.identity_error <= 1e-9
    assert np.max(np.abs(res.result.field.v - np.round(res.result.field.v))) <= 1e-6

    xs = farey_points(8, -2, 2)
    free = LagrangianModel.free(1)
    t = beta_table(free, 8, -2, 2, BetaConfig(N=16))
    res = lc_minimizer(free, [0.3], t, BetaConfig(N=16))
    assert abs(float(res.rho.components[0]) - 0.3) <= 1 / 16
    assert res.identity_error <= 1e-12
