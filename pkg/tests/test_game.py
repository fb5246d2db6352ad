import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import netmimo_overlay.game as game
from netmimo_overlay import schedule_scenario
from netmimo_overlay.core import ScenarioError
from netmimo_overlay.game import (SolverConfig, best_response_dynamics, best_response_step,
                                  centralized_oracle, local_anchors, solve_local_anchor,
                                  solve_ne, solve_theta_for_target, verify_ne)
from netmimo_overlay.scheduling import UserSets
from netmimo_overlay.throughput import OverlayModel

from conftest import make_scenario, random_overlay


def single_bs(s_db, c_db, w_priv, w_common, noise_dbm=-97.0):
    """BS with one private MS (SNR ``s_db``) and one common MS (SNR ``c_db``) at 30 dBm."""
    gains = [[s_db - 127.0], [c_db - 127.0]]
    sc = make_scenario(gains, [w_priv, w_common], noise_dbm=noise_dbm)
    return OverlayModel(sc, UserSets((1,), (2,)))


def sic_bound_split(s, w, cw):
    # cw*log2((1+s)/x) = w*log2(x) with x = 1 + s(1-theta)
    x = (1.0 + s) ** (cw / (cw + w))
    return 1.0 - (x - 1.0) / s


@pytest.mark.parametrize("s_db,w,wc", [(10.0, 1.0, 1.0), (20.0, 2.0, 1.0), (5.0, 1.0, 2.0),
                                       (30.0, 1.0, 1.0)])
def test_single_bs_closed_form(s_db, w, wc):
    # the common MS is 10 dB stronger, so the cancellation constraint binds
    model = single_bs(s_db, s_db + 10.0, w, wc)
    # one common MS carries both streams, share 1
    assert model.common_weight == pytest.approx(wc)
    want = sic_bound_split(10 ** (s_db / 10), w, wc)
    tr = solve_ne(model)
    assert tr.converged
    assert tr.ne[0] == pytest.approx(want, abs=1e-9)
    assert solve_local_anchor(0, model) == pytest.approx(want, abs=1e-12)
    assert tr.n_iterations <= 2
    assert best_response_step(0, tr.ne, model) == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("s_db,c_db", [(20.0, 0.0), (15.0, 5.0), (25.0, 10.0)])
def test_single_bs_matches_grid_scan(s_db, c_db):
    model = single_bs(s_db, c_db, 1.0, 2.0)
    tr = solve_ne(model)
    th = np.linspace(0, 1, 200_001)[:, None]
    pay = model.payoff(th)[:, 0]
    best = th[int(np.argmax(pay)), 0]
    assert tr.ne[0] == pytest.approx(best, abs=1e-5)
    assert best_response_step(0, [0.3], model) == pytest.approx(best, abs=1e-5)
    assert verify_ne(tr.ne, model)
    assert float(centralized_oracle(model, 0.001)[0]) == pytest.approx(best, abs=1e-3)


def test_fig3_equilibrium(fig3_model):
    tr = solve_ne(fig3_model)
    assert tr.converged
    np.testing.assert_allclose(tr.ne, [0.98786, 0.98650, 0.98381], atol=5e-5)
    f1, f2 = fig3_model.f1(tr.ne), fig3_model.f2(tr.ne)
    assert np.max(np.abs(f1 - f2)) <= 1e-6
    assert np.all(tr.ne >= tr.anchor)
    assert tr.objective == pytest.approx(float(fig3_model.objective(tr.ne)))


def test_fig3_matches_grid_oracle(fig3_model):
    tr = solve_ne(fig3_model)
    grid = centralized_oracle(fig3_model, 0.01)
    # the grid optimum sits next to the equilibrium in every coordinate
    assert np.max(np.abs(grid - tr.ne)) <= 0.01 + 1e-12
    obj = float(fig3_model.objective(grid))
    assert abs(obj - tr.objective) <= 0.01 * tr.objective


def test_trace_invariants(fig3_model):
    tr = solve_ne(fig3_model, SolverConfig(tol_a=1e-8))
    lo, hi = tr.initial_bracket
    assert lo <= hi
    widths = [r.bracket_width for r in tr.iterations]
    assert all(b < a for a, b in zip(widths, widths[1:]))
    for a, b in zip(widths, widths[1:]):
        assert b == pytest.approx(a / 2)
    eta = tr.anchor
    for r in tr.iterations:
        lo, hi = r.bracket
        assert lo <= r.a_target <= hi
        assert np.all(r.theta >= eta)
        # the bracket always holds the fixed point: g1(theta(lo)) >= lo, g1(theta(hi)) <= hi
        assert float(fig3_model.g1(game._theta_at(lo, eta, fig3_model))) >= lo - 1e-12
        assert float(fig3_model.g1(game._theta_at(hi, eta, fig3_model))) <= hi + 1e-12
    rows = tr.rows()
    assert list(rows[0]) == ["i", "a_target", "a_achieved", "theta_1", "theta_2", "theta_3",
                             "bracket_width"]


def test_tighter_tolerance_needs_no_fewer_iterations(fig3_model):
    a = solve_ne(fig3_model, SolverConfig(tol_a=1e-4))
    b = solve_ne(fig3_model, SolverConfig(tol_a=1e-5))
    assert b.n_iterations >= a.n_iterations
    np.testing.assert_allclose(a.ne, b.ne, atol=1e-4)


def test_iteration_cap_reports_non_convergence(fig3_model):
    tr = solve_ne(fig3_model, SolverConfig(max_iter=2))
    assert not tr.converged and tr.n_iterations == 2


def test_theta_for_target_inverts_private_term(fig3_model):
    for k in range(3):
        for a in (0.0, 0.1, 0.4):
            th = solve_theta_for_target(k, a, fig3_model)
            val = fig3_model.w_private[k] * math.log2(
                1 + fig3_model.s_private[k] * (1 - th) * fig3_model.r_p[k])
            assert val == pytest.approx(a, abs=1e-12)
    with pytest.raises(ValueError):
        solve_theta_for_target(0, -1.0, fig3_model)


def test_anchor_balances_cancellation_and_private_terms(fig3_model):
    eta = local_anchors(fig3_model)
    np.testing.assert_allclose(fig3_model.g2(eta), fig3_model.f2(eta), rtol=1e-12)
    np.testing.assert_allclose(local_anchors(fig3_model, order=[2, 0, 1]), eta)


def test_symmetric_two_bs_equal_splits():
    rows = [[-110.0, -140.0], [-140.0, -110.0], [-133.0, -133.0]]
    sc = make_scenario(rows, [1.0, 1.0, 2.0])
    model = OverlayModel(sc, schedule_scenario(sc))
    tr = solve_ne(model)
    assert tr.ne[0] == pytest.approx(tr.ne[1], abs=1e-12)


def test_no_common_set_is_trivial():
    rows = [[-110.0, -140.0], [-140.0, -110.0]]
    sc = make_scenario(rows, [1.0, 1.0])
    model = OverlayModel(sc, schedule_scenario(sc))
    tr = solve_ne(model)
    assert tr.converged and np.all(tr.ne == 0.0)
    assert best_response_step(0, [0.5, 0.5], model) == 0.0
    assert solve_local_anchor(1, model) == 0.0


def test_bs_without_private_ms_is_pinned_to_one():
    rows = [[-110.0, -140.0, -142.0], [-141.0, -112.0, -143.0], [-131.0, -132.0, -131.5]]
    sc = make_scenario(rows, [1.0, 1.0, 1.0])
    model = OverlayModel(sc, schedule_scenario(sc))
    assert not model.has_private[2]
    tr = solve_ne(model)
    assert tr.ne[2] == 1.0
    assert best_response_step(2, [0.5] * 3, model) == 1.0
    assert verify_ne(tr.ne, model)
    f1, f2 = model.f1(tr.ne), model.f2(tr.ne)
    assert np.nanmax(np.abs((f1 - f2)[:2])) <= 1e-6


def test_uniform_split_is_not_an_equilibrium(fig3_model):
    assert not verify_ne([0.5, 0.5, 0.5], fig3_model)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(2, 4), J=st.integers(1, 3))
def test_equilibrium_properties_random(seed, K, J):
    rng = np.random.default_rng(seed)
    _, _, model = random_overlay(rng, K=K, n_common=J)
    tr = solve_ne(model)
    assert tr.converged
    assert verify_ne(tr.ne, model)
    for k in range(K):
        assert best_response_step(k, tr.ne, model) == pytest.approx(tr.ne[k], abs=1e-6)
    assert np.max(np.abs(model.f1(tr.ne) - model.f2(tr.ne))) <= 1e-6


def test_oracle_guards_and_refinement():
    rng = np.random.default_rng(2)
    _, _, big = random_overlay(rng, K=5, n_common=1)
    with pytest.raises(ScenarioError, match="coordinate-descent"):
        centralized_oracle(big, 0.1)
    _, _, model = random_overlay(rng, K=2, n_common=2)
    with pytest.raises(ValueError):
        centralized_oracle(model, 0.3)
    coarse = float(model.objective(centralized_oracle(model, 0.01)))
    fine = float(model.objective(centralized_oracle(model, 0.005)))
    assert fine >= coarse


def test_oracle_breaks_ties_toward_smaller_profile():
    # no private MS anywhere: objective depends only on the common code and is flat at theta=1
    rows = [[-131.0, -132.0], [-132.0, -131.0]]
    sc = make_scenario(rows, [1.0, 1.0], xi_p=40.0)
    sets = schedule_scenario(sc)
    model = OverlayModel(sc, sets)
    th = centralized_oracle(model, 0.5)
    vals = {(a, b): float(model.objective([a, b])) for a in (0, .5, 1) for b in (0, .5, 1)}
    best = max(vals.values())
    first = min(p for p, v in vals.items() if v == best)
    assert tuple(th) == first


def test_best_response_dynamics_converges_on_fig3(fig3_model):
    res = best_response_dynamics(fig3_model, n_steps=30, tol=1e-10)
    assert res.converged and not res.cycling
    np.testing.assert_allclose(res.theta, solve_ne(fig3_model).ne, atol=1e-8)
    seq = best_response_dynamics(fig3_model, n_steps=30, tol=1e-10, simultaneous=False)
    assert seq.converged


def test_best_response_dynamics_flags_cycles(fig3_model, monkeypatch):
    def fake(k, theta, model, cfg=None):
        return 0.2 if theta[0] > 0.5 else 0.8

    monkeypatch.setattr(game, "best_response_step", fake)
    res = best_response_dynamics(fig3_model, theta0=[0.8, 0.8, 0.8], n_steps=10)
    assert res.cycling and not res.converged
    assert len(res.history) == 3


def test_solver_config_validation():
    for bad in (dict(tol_a=0.0), dict(tol_a=0.5), dict(root_tol=-1.0), dict(max_iter=0),
                dict(grid_step=0.0)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
