import math

import numpy as np
import pytest

from robinlayer import oracles
from robinlayer.assembly import assemble_operators, build_grid
from robinlayer.model import BoundaryCoupling, Corrector, HypothesisViolation, theorem_constants
from robinlayer.resolvent_study import (GridPolicy, ResolventPair, apply_diff_L2, apply_diff_W1,
                                        estimate_theorem_norms, fit_rate, rate_sweep, refine,
                                        truncation_sensitivity,
                                        richardson_margin, wnorm)

ZERO = BoundaryCoupling.constant(0.0)


def _ops(coupling, eps=0.1, n_trans=12, L=3.0, n_lat=31):
    return assemble_operators(build_grid(2, L, n_lat, eps, n_trans), coupling)


def test_zero_coupling_cancels_on_constants():
    ops = _ops(ZERO)
    lat, _ = ops.grid.dof_coordinates()
    f = np.exp(-lat[:, 0] ** 2) + 0j
    out = apply_diff_L2(ops, f)
    assert wnorm(ops.M_L2, out) <= 1e-8 * wnorm(ops.M_L2, f)


def test_zero_coupling_first_transverse_mode():
    ops = _ops(ZERO, eps=0.1, n_trans=12)
    pair = ResolventPair(ops)
    lat, xd = ops.grid.dof_coordinates()
    f = np.cos(np.pi * xd / ops.grid.epsilon) * np.exp(-lat[:, 0] ** 2) + 0j
    out = apply_diff_L2(ops, f, pair)
    np.testing.assert_allclose(out, pair.r_layer(f), atol=1e-13)
    # discrete Neumann gap sits slightly below (pi/eps)^2: factor ~1.0034 at 12 nodes
    ratio = wnorm(ops.M_W1, out) / wnorm(ops.M_L2, f)
    assert ratio <= ops.grid.epsilon / math.pi * 1.01


def test_corrector_vanishes_without_coupling():
    ops = _ops(ZERO)
    f = np.random.default_rng(0).standard_normal(ops.grid.n_dof) + 0j
    np.testing.assert_array_equal(apply_diff_W1(ops, Corrector(ZERO), f), apply_diff_L2(ops, f))


def test_corrector_must_match(bench):
    ops = _ops(bench)
    with pytest.raises(ValueError):
        apply_diff_W1(ops, Corrector(ZERO), np.ones(ops.grid.n_dof))


def test_constant_data_within_bound():
    c = BoundaryCoupling.constant(1.0)
    ops = _ops(c, eps=0.05, n_trans=8)
    lat, _ = ops.grid.dof_coordinates()
    f = np.exp(-lat[:, 0] ** 2) + 0j
    out = apply_diff_W1(ops, Corrector(c), f)
    k = theorem_constants(c, 0.05)
    assert wnorm(ops.M_W1, out) <= k.C_eps * 0.05 * wnorm(ops.M_L2, f)


def test_adjoints_are_consistent(bench):
    ops = _ops(bench)
    pair = ResolventPair(ops)
    rng = np.random.default_rng(1)
    n = ops.grid.n_dof
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    for fwd, adj in [(pair.diff, pair.diff_adj),
                     (lambda v: pair.diff(v, True), lambda v: pair.diff_adj(v, True)),
                     (pair.lemma21, pair.lemma21_adj)]:
        assert np.vdot(g, fwd(f)) == pytest.approx(np.vdot(adj(g), f), rel=1e-10)


def test_norm_matches_dense_oracle(bench):
    grid = build_grid(2, 2.0, 9, 0.2, 4)
    ops = assemble_operators(grid, bench)
    pair = ResolventPair(ops)
    n = grid.n_dof
    T = np.column_stack([pair.diff(e) for e in np.eye(n, dtype=complex)])
    Tc = np.column_stack([pair.diff(e, True) for e in np.eye(n, dtype=complex)])
    rep = estimate_theorem_norms(grid, bench, probes=3, seed=0, method="lanczos")
    M, W = ops.M_L2.toarray(), ops.M_W1.toarray()
    assert rep.norm_L2 == pytest.approx(oracles.dense_weighted_norm(T, M, M), rel=1e-8)
    assert rep.norm_W1_corrected == pytest.approx(oracles.dense_weighted_norm(Tc, M, W), rel=1e-8)
    assert rep.norm_W1_uncorrected == pytest.approx(oracles.dense_weighted_norm(T, M, W), rel=1e-8)


def test_zero_coupling_norm_below_projection_bound():
    grid = build_grid(2, 3.0, 31, 0.1, 12)
    rep = estimate_theorem_norms(grid, ZERO, probes=5, seed=0)
    assert rep.norm_L2 <= 0.1 / math.pi + 1e-6
    assert rep.lemma21_ratio <= 0.1 / math.pi * 1.01


def test_report_deterministic(bench):
    grid = build_grid(2, 3.0, 31, 0.1, 6)
    a = estimate_theorem_norms(grid, bench, probes=5, seed=4)
    b = estimate_theorem_norms(grid, bench, probes=5, seed=4)
    assert a == b


def test_corrected_beats_uncorrected(bench):
    rep = estimate_theorem_norms(build_grid(2, 6.0, 121, 0.05, 6), bench, probes=0)
    assert rep.norm_W1_corrected < rep.norm_W1_uncorrected
    assert rep.norm_L2 <= rep.bound_L2


def test_sharp_step_rejected():
    with pytest.raises(HypothesisViolation):
        estimate_theorem_norms(build_grid(2, 3.0, 31, 0.1, 4), BoundaryCoupling.step(1.0, 0.5))


def test_refine_halves_spacing():
    g = build_grid(2, 3.0, 31, 0.1, 6)
    f = refine(g)
    assert f.h_lat == pytest.approx(g.h_lat / 2) and f.h_trans == pytest.approx(g.h_trans / 2)
    p = build_grid(2, 3.0, 30, 0.1, 6, "periodic")
    assert refine(p).h_lat == pytest.approx(p.h_lat / 2)


def test_richardson_margin():
    assert richardson_margin(1.0, 1.3) == pytest.approx(0.3 / 3 / 1.3)
    assert richardson_margin(2.0, 2.0) == 0.0


def test_fit_rate_exact_power_law():
    eps = [0.2, 0.1, 0.05, 0.025]
    fit = fit_rate(eps, [3.0 * e**1.5 for e in eps])
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert 0.0 <= fit.r_squared <= 1.0


def test_fit_rate_skips_zero_norms():
    fit = fit_rate([0.2, 0.1, 0.05], [0.2, 0.1, 0.0])
    assert fit.slope == pytest.approx(1.0) and fit.excluded == [0.05]


def test_rate_sweep_needs_four_points(bench):
    with pytest.raises(ValueError):
        rate_sweep(bench, [0.1, 0.05, 0.025], probes=0)


def test_rate_independent_of_coupling_size():
    # alpha0 = 0 keeps the effective potential minimum fixed while sup|alpha| doubles
    policy = GridPolicy(L=6.0, n_lat=121)
    eps = [0.2, 0.1, 0.05, 0.025]
    _, small = rate_sweep(BoundaryCoupling.gauss(0.0, 0.5, 1.0), eps, policy, probes=0)
    _, big = rate_sweep(BoundaryCoupling.gauss(0.0, 1.0, 1.0), eps, policy, probes=0)
    assert big["L2"].intercept > small["L2"].intercept
    assert abs(big["L2"].slope - small["L2"].slope) <= 0.1


def test_zero_coupling_first_order_channel():
    _, fits = rate_sweep(ZERO, [0.2, 0.1, 0.05, 0.025], GridPolicy(L=6.0, n_lat=61), probes=5)
    assert fits["W1"].slope == pytest.approx(1.0, abs=0.05)
    # the L2 difference is governed by the resolvent of the first transverse mode, ~ (eps/pi)^2
    assert fits["L2"].slope == pytest.approx(2.0, abs=0.05)


def test_threaded_sweep_matches_serial(bench):
    policy = GridPolicy(L=4.0, n_lat=41)
    eps = [0.2, 0.1, 0.05, 0.025]
    a, _ = rate_sweep(bench, eps, policy, probes=2, threads=1)
    b, _ = rate_sweep(bench, eps, policy, probes=2, threads=3)
    for x, y in zip(a, b):
        assert x.norm_L2 == pytest.approx(y.norm_L2, rel=1e-12)


def test_truncation_sensitivity_small_for_localized_coupling(bench):
    s = truncation_sensitivity(build_grid(2, 8.0, 81, 0.1, 6), bench)
    assert 0.0 <= s < 0.05
