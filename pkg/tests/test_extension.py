import numpy as np
import pytest
from scipy.special import gamma

from fraclap import (
    build_grid,
    codim_ball_check,
    default_ymax,
    dtn_apply,
    dtn_constant,
    extension_energy,
    extension_energy_constant,
    frac_apply,
    mode_energy_quadrature,
    mode_profile,
    mode_profile_derivative,
    mode_profile_quadrature,
    poisson_extend,
    profile_normalization_quadrature,
    trace,
    trace_averaging_diagnostic,
    vertical_modulus,
)
from fraclap.errors import (
    DegenerateFirstCell,
    EmptySubset,
    GridThetaMismatch,
    InvalidParams,
    RadiusExceedsGrid,
    TailNotConverged,
)
from fraclap.quadrature import QuadratureSpec


# -- grid


def test_grid_unweighted_case_weights_are_lengths():
    grid = build_grid(0.5, 4.0, 8, layout="uniform")
    assert np.allclose(grid.cellweights, np.diff(grid.ys), atol=1e-15)


def test_grid_weight_sum_identity():
    # sum of exact cell weights telescopes to Ymax^(1+a)/(1+a)
    for theta, ymax in ((0.25, 3.0), (0.75, 7.5)):
        grid = build_grid(theta, ymax, 32)
        a = 1 - 2 * theta
        assert grid.cellweights.sum() == pytest.approx(
            ymax ** (1 + a) / (1 + a), rel=1e-12
        )
        assert grid.a == a


def test_grid_minimum_resolution():
    with pytest.raises(InvalidParams):
        build_grid(0.5, 1.0, 4)


def test_grid_geometric_clusters_at_zero():
    grid = build_grid(0.5, 8.0, 16)
    assert grid.ys[0] == 0.0
    assert grid.ys[1] == pytest.approx(8.0 * 0.5**15)
    assert np.all(np.diff(grid.ys) > 0)


# -- mode profile


def test_profile_normalization_matches_closed_form():
    # 1/C_a computed by quadrature against 4^theta Gamma(theta)
    for theta in (0.25, 0.5, 0.75):
        a = 1 - 2 * theta
        got = profile_normalization_quadrature(a, QuadratureSpec())
        assert got == pytest.approx(4.0**theta * gamma(theta), rel=1e-9)


def test_profile_zero_frequency_is_one():
    for y in (0.0, 0.3, 10.0):
        assert mode_profile(0.0, 0.4, y) == 1.0


def test_profile_boundary_value_is_one():
    assert mode_profile(3.0, 0.25, 0.0) == 1.0


def test_profile_halfpower_is_exponential():
    for y in (0.1, 1.0, 4.0):
        assert mode_profile(1.0, 0.5, y) == pytest.approx(np.exp(-y), abs=1e-8)
        assert mode_profile_derivative(1.0, 0.5, y) == pytest.approx(-np.exp(-y), abs=1e-8)


@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_profile_quadrature_oracle(theta, lam):
    # production values against the kernel-integral quadrature at two budgets
    spec = QuadratureSpec()
    for y in (0.05, 0.7, 3.0):
        production = mode_profile(lam, theta, y)
        coarse = mode_profile_quadrature(lam, theta, y, spec)
        fine = mode_profile_quadrature(lam, theta, y, spec.refined())
        assert abs(coarse - fine) <= 1e-7
        assert production == pytest.approx(fine, abs=1e-7)


def test_profile_monotone_and_bounded():
    ys = np.linspace(0.0, 6.0, 40)
    for theta in (0.25, 0.75):
        vals = [mode_profile(1.7, theta, y) for y in ys]
        assert all(0 < v <= 1 for v in vals)
        assert all(a > b for a, b in zip(vals, vals[1:]))


# -- poisson extension


def test_extend_constant_stays_constant(p3, p3_dec):
    grid = build_grid(0.5, 10.0, 16)
    u = poisson_extend(p3_dec, 0.5, np.full(3, 2.5), grid)
    assert np.allclose(u.values, 2.5, atol=1e-12)


def test_extend_k2_single_mode_profile(k2, k2_dec):
    grid = build_grid(0.5, 13.0, 32)
    u = poisson_extend(k2_dec, 0.5, np.array([1.0, -1.0]), grid)
    for j in (0, 5, 20, 32):
        y = grid.ys[j]
        assert u.values[0, j] == pytest.approx(np.exp(-np.sqrt(2) * y), abs=1e-9)
        assert u.values[1, j] == pytest.approx(-np.exp(-np.sqrt(2) * y), abs=1e-9)


def test_extend_boundary_row_exact(path8, path8_dec):
    f = np.random.default_rng(1).standard_normal(8)
    grid = build_grid(0.3, 20.0, 16)
    u = poisson_extend(path8_dec, 0.3, f, grid)
    assert np.array_equal(u.values[:, 0], f)
    assert np.array_equal(trace(u), f)


def test_extend_grid_theta_mismatch(p3_dec):
    grid = build_grid(0.5, 10.0, 16)
    with pytest.raises(GridThetaMismatch):
        poisson_extend(p3_dec, 0.25, np.zeros(3), grid)


def test_extend_first_row_l2_convergence(path8, path8_dec):
    # || u(., y_1) - f || -> 0 as the first node drops toward the boundary
    f = np.random.default_rng(5).standard_normal(8)
    errs = []
    for m in (8, 12, 16):
        grid = build_grid(0.5, 10.0, m)
        u = poisson_extend(path8_dec, 0.5, f, grid)
        errs.append(np.sqrt(np.sum((u.values[:, 1] - f) ** 2 * path8.mu)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-3 * np.sqrt(np.sum(f**2 * path8.mu))


# -- weighted normal derivative


def test_dtn_constant_values():
    assert dtn_constant(0.5) == pytest.approx(1.0, abs=1e-15)
    # reciprocal pairing with the energy constant
    for theta in (0.25, 0.5, 0.75):
        assert dtn_constant(theta) * extension_energy_constant(theta) == pytest.approx(
            1.0, abs=1e-14
        )
    assert dtn_constant(0.25) == pytest.approx(
        2.0 ** (-0.5) * gamma(0.25) / gamma(0.75), abs=1e-14
    )


def test_dtn_k2_analytic_limit(k2_dec):
    f = np.array([1.0, -1.0])
    grid = build_grid(0.5, 13.0, 24)
    u = poisson_extend(k2_dec, 0.5, f, grid)
    assert np.allclose(dtn_apply(u), np.sqrt(2) * f, atol=1e-6)


def test_dtn_constant_data_gives_zero(p3_dec):
    grid = build_grid(0.5, 10.0, 16)
    u = poisson_extend(p3_dec, 0.5, np.full(3, 4.0), grid)
    # roundoff in the spectral synthesis is amplified by the boundary quotient
    assert np.allclose(dtn_apply(u), 0.0, atol=1e-10 * 4.0)


@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75])
def test_dtn_converges_with_order_at_least_one(path8, path8_dec, theta):
    f = np.random.default_rng(3).standard_normal(8)
    target = frac_apply(path8_dec, theta, f)
    ymax = default_ymax(path8_dec)
    y1s, errs = [], []
    for m in (8, 10, 12, 14):
        grid = build_grid(theta, ymax, m)
        u = poisson_extend(path8_dec, theta, f, grid)
        y1s.append(grid.ys[1])
        errs.append(np.max(np.abs(dtn_apply(u) - target)))
    slope = np.polyfit(np.log(y1s), np.log(errs), 1)[0]
    assert slope >= 0.9


def test_dtn_rejects_unresolvable_first_cell(k2_dec):
    grid = build_grid(0.25, 13.0, 128)  # y_1 ~ 1e-36: below double resolution
    u = poisson_extend(k2_dec, 0.25, np.array([1.0, -1.0]), grid)
    with pytest.raises(DegenerateFirstCell):
        dtn_apply(u)


# -- extension energy


@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_per_mode_energy_identity(theta, lam):
    got = mode_energy_quadrature(lam, theta)
    assert got == pytest.approx(extension_energy_constant(theta) * lam**theta, abs=1e-4)


def test_per_mode_energy_exact_case():
    # theta = 1/2, lam = 1: g = e^-y and the integral is exactly 1
    assert mode_energy_quadrature(1.0, 0.5) == pytest.approx(1.0, abs=1e-8)


def test_extension_energy_k2(k2, k2_dec):
    f = np.array([1.0, -1.0])
    grid = build_grid(0.5, 13.0, 64)
    u = poisson_extend(k2_dec, 0.5, f, grid)
    res = extension_energy(u, k2)
    # single mode lam = 2, coefficient^2 = 2: energy = sqrt(2) * 2
    assert abs(res.value - 2 * np.sqrt(2)) <= res.quadrature_tolerance
    assert res.tail_bound <= 1e-8


def test_extension_energy_constant_data_zero(p3, p3_dec):
    grid = build_grid(0.5, 10.0, 16)
    u = poisson_extend(p3_dec, 0.5, np.full(3, 9.0), grid)
    res = extension_energy(u, p3)
    assert res.value == pytest.approx(0.0, abs=1e-14)


def test_extension_energy_tail_guard(k2, k2_dec):
    grid = build_grid(0.5, 0.5, 8)  # far too short for the slowest mode
    u = poisson_extend(k2_dec, 0.5, np.array([1.0, -1.0]), grid)
    with pytest.raises(TailNotConverged):
        extension_energy(u, k2)


# -- vertical modulus


def test_modulus_unweighted_uniform_grid_exact(p3):
    grid = build_grid(0.5, 2.0, 16, layout="uniform")
    out = vertical_modulus(p3, np.ones(3, dtype=bool), 1.0, 0.5, grid)
    assert out["numeric"] == pytest.approx(3.0, rel=1e-12)
    assert out["exact"] == pytest.approx(3.0, rel=1e-12)


def test_modulus_quarter_power_closed_form(k2):
    # a = 1/2, mu(A) = 1 column, h = 1: exact = (1 - a) = 1/2
    grid = build_grid(0.25, 1.0, 4096, layout="uniform")
    out = vertical_modulus(k2, [0], 1.0, 0.25, grid)
    assert out["exact"] == pytest.approx(0.5, abs=1e-14)
    assert out["numeric"] >= out["exact"]


def test_modulus_closed_form_column_identity(p3):
    # the numeric value IS mu(A) / sum(dy^2 / w): recompute independently
    theta = 0.75
    grid = build_grid(theta, 1.0, 64, layout="uniform")
    out = vertical_modulus(p3, [0, 2], 1.0, theta, grid)
    resistance = float(np.sum(np.diff(grid.ys) ** 2 / grid.cellweights))
    assert out["numeric"] == pytest.approx(2.0 / resistance, rel=1e-14)


@pytest.mark.parametrize("theta,a", [(0.75, -0.5), (0.5, 0.0), (0.25, 0.5)])
def test_modulus_refinement_limit(p3, theta, a):
    h = 1.5
    vals = []
    for m in (2048, 4096, 8192, 16384):
        grid = build_grid(theta, h, m, layout="uniform")
        vals.append(vertical_modulus(p3, np.ones(3, dtype=bool), h, theta, grid)["numeric"])
    exact = 3.0 * (1 - a) / h ** (1 - a)
    upper = 3.0 / ((1 + a) * h ** (1 - a))
    # within the bracket at every resolution, and extrapolating to the optimum
    for v in vals:
        assert exact - 1e-12 <= v <= upper + 1e-12
    limit = _richardson(vals, [1 - a, min(2.0, 2 - 2 * a)])
    assert limit == pytest.approx(exact, abs=1e-6)


def _richardson(vals, exponents):
    vals = list(map(float, vals))
    for p in exponents:
        r = 2.0**p
        if abs(r - 1.0) < 1e-12:
            continue
        vals = [(r * b - a) / (r - 1.0) for a, b in zip(vals[:-1], vals[1:])]
    return vals[-1]


def test_modulus_empty_subset(p3):
    grid = build_grid(0.5, 1.0, 16, layout="uniform")
    with pytest.raises(EmptySubset):
        vertical_modulus(p3, np.zeros(3, dtype=bool), 1.0, 0.5, grid)


def test_modulus_height_exceeding_grid(p3):
    grid = build_grid(0.5, 1.0, 16, layout="uniform")
    with pytest.raises(RadiusExceedsGrid):
        vertical_modulus(p3, [0], 2.0, 0.5, grid)


# -- co-dimension identity


def test_codim_k2_hand_values(k2):
    out = codim_ball_check(k2, build_grid(0.5, 2.0, 16), 0, 1.0)
    assert out["lhs"] == pytest.approx(2.0, abs=1e-14)
    assert out["rhs"] == pytest.approx(2.0, abs=1e-14)
    out = codim_ball_check(k2, build_grid(0.25, 2.0, 16), 0, 1.0)
    assert out["rhs"] == pytest.approx(4.0 / 3.0, abs=1e-14)


def test_codim_exact_agreement_sampled(path8, grid44):
    for sp in (path8, grid44):
        for theta in (0.25, 0.5, 0.75):
            grid = build_grid(theta, sp.diameter + 1.0, 32)
            for x in range(0, sp.n, 3):
                for r in (0.25, 1.0, float(sp.diameter)):
                    out = codim_ball_check(sp, grid, x, r)
                    scale = max(1.0, abs(out["rhs"]))
                    assert abs(out["lhs"] - out["rhs"]) <= 1e-12 * scale


def test_codim_small_radius_vanishes(k2):
    grid = build_grid(0.5, 2.0, 16)
    out = codim_ball_check(k2, grid, 0, 1e-9)
    assert out["lhs"] == pytest.approx(0.0, abs=1e-9)
    assert out["rhs"] == pytest.approx(0.0, abs=1e-9)


def test_codim_radius_guard(k2):
    grid = build_grid(0.5, 2.0, 16)
    with pytest.raises(RadiusExceedsGrid):
        codim_ball_check(k2, grid, 0, 3.0)
    with pytest.raises(RadiusExceedsGrid):
        codim_ball_check(k2, grid, 0, 0.0)


# -- trace


def test_trace_returns_boundary_exactly(path8, path8_dec):
    f = np.random.default_rng(9).standard_normal(8)
    grid = build_grid(0.5, 10.0, 16)
    u = poisson_extend(path8_dec, 0.5, f, grid)
    assert np.array_equal(trace(u), f)


def test_trace_averages_converge_k2(k2, k2_dec):
    u = poisson_extend(k2_dec, 0.5, np.array([1.0, -1.0]), build_grid(0.5, 13.0, 32))
    diag = trace_averaging_diagnostic(u, k2)
    devs = diag["max_deviation"]
    assert devs[-1] < devs[0]
    # analytic averaging of e^{-sqrt(2) y} over (0, r) misses 1 at first order
    r_fin = diag["radii"][-1]
    assert diag["finest_deviation"] <= np.sqrt(2) * r_fin


def test_trace_constant_field(p3, p3_dec):
    u = poisson_extend(p3_dec, 0.5, np.full(3, 1.5), build_grid(0.5, 10.0, 16))
    diag = trace_averaging_diagnostic(u, p3)
    assert diag["finest_deviation"] <= 1e-12


def test_field_csv_rows(p3, p3_dec):
    from fraclap import field_to_csv_rows

    grid = build_grid(0.5, 10.0, 8)
    u = poisson_extend(p3_dec, 0.5, np.array([1.0, 0.0, -1.0]), grid)
    rows = field_to_csv_rows(u)
    assert rows[0] == ("x_index", "y", "value")
    assert len(rows) == 1 + 3 * 9
    assert rows[1] == (0, 0.0, 1.0)
