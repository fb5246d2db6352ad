import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netmimo_overlay import schedule_scenario
from netmimo_overlay.core import ScenarioError
from netmimo_overlay.throughput import (OverlayModel, as_power_split,
                                        common_rate_at_common_ms, common_rate_at_private_ms,
                                        min_weighted_throughput, payoff_components,
                                        private_throughput, snr_term)

from conftest import FIG3_GAINS_DB, FIG3_WEIGHTS, make_scenario, random_overlay


def hand_objective(gains_db, weights, private, common, theta, p_w=1.0, noise_w=10 ** -12.7,
                   rp=1.0, rc=1.0, d_total=2):
    """Scalar re-derivation: common code rate is the minimum over every decoder."""
    s = [[p_w * 10 ** (g / 10) / noise_w for g in row] for row in gains_db]
    K = len(theta)
    out = {}
    code = math.inf
    for j in common:
        sig = sum(s[j][k] * theta[k] * rc for k in range(K))
        intf = sum(s[j][k] * (1 - theta[k]) * rp for k in range(K))
        code = min(code, math.log2(1 + sig / (1 + intf)))
    for k, m in enumerate(private):
        if m is None:
            continue
        x = s[m][k]
        if common:
            code = min(code, math.log2(1 + x * theta[k] * rc / (1 + x * (1 - theta[k]) * rp)))
        out[m] = weights[m] * math.log2(1 + x * (1 - theta[k]) * rp)
    base, extra = divmod(d_total, len(common)) if common else (0, 0)
    for i, j in enumerate(sorted(common)):
        share = (base + (1 if i < extra else 0)) / d_total
        out[j] = weights[j] * share * code
    return min(out.values()), out


def test_fig3_snr_terms(fig3):
    # 30 dBm, noise -97 dBm: s = 10**((L + 127)/10)
    assert snr_term(0, 1, fig3) == pytest.approx(10 ** ((-118.30 + 127) / 10))
    assert snr_term(2, 5, fig3) == pytest.approx(10 ** ((-134.94 + 127) / 10))


@pytest.mark.parametrize("theta", [[0.5, 0.5, 0.5], [0.9, 0.95, 0.99], [0.0, 0.3, 1.0],
                                   [1.0, 1.0, 1.0]])
def test_fig3_objective_matches_hand_evaluator(fig3, fig3_model, theta):
    want, per = hand_objective(FIG3_GAINS_DB, FIG3_WEIGHTS, [0, 1, 2], [3, 4], theta)
    assert float(fig3_model.objective(theta)) == pytest.approx(want, rel=1e-12)
    rep = fig3_model.report(theta)
    for idx, val in per.items():
        assert rep.weighted[idx + 1] == pytest.approx(val, rel=1e-12)
    assert rep.min_weighted == pytest.approx(want, rel=1e-12)


def test_uniform_split_value_fig3(fig3_model):
    # at theta = 1/2 the binding MS is the common MS 4 through the shared code rate
    rep = fig3_model.report([0.5] * 3)
    assert rep.binding_ms == 4
    assert rep.min_weighted == pytest.approx(0.11539595, rel=1e-6)


def test_wrappers_agree_with_model(fig3, fig3_model):
    sets = fig3_model.sets
    th = np.array([0.7, 0.8, 0.9])
    cc = [common_rate_at_common_ms(j, th, fig3, sets) for j in sets.common]
    np.testing.assert_allclose(cc, fig3_model.common_rates(th), rtol=1e-13)
    cp = [common_rate_at_private_ms(m, k, th[k], fig3) for k, m in enumerate(sets.private)]
    np.testing.assert_allclose(cp, fig3_model.sic_rates(th), rtol=1e-13)
    pv = [private_throughput(m, k, th[k], fig3) for k, m in enumerate(sets.private)]
    np.testing.assert_allclose(pv, fig3_model.private_rates(th), rtol=1e-13)
    assert min_weighted_throughput(th, fig3, sets).min_weighted == pytest.approx(
        float(fig3_model.objective(th)))
    with pytest.raises(ValueError):
        common_rate_at_common_ms(1, th, fig3, sets)


def test_payoff_components_and_modes(fig3, fig3_model):
    th = [0.6, 0.6, 0.6]
    c = payoff_components(1, th, fig3, fig3_model.sets)
    assert c.mode is None
    assert c.f1 == pytest.approx(min(c.g1, c.g2))
    assert c.payoff == pytest.approx(min(c.f1, c.f2))
    assert c.payoff == pytest.approx(fig3_model.payoff(th)[1])


def test_private_free_bs_payoff_is_g1():
    # BS 3 has no private MS
    rows = [[-110, -140, -142], [-141, -112, -143], [-131, -132, -131.5]]
    sc = make_scenario(rows, [1, 1, 1])
    sets = schedule_scenario(sc)
    assert sets.private[2] is None
    model = OverlayModel(sc, sets)
    th = [0.8, 0.7, 0.4]
    c = model.components(2, th)
    assert c.mode == "private-free"
    assert c.payoff == pytest.approx(float(model.g1(th)))


def test_common_free_objective():
    rows = [[-110, -140], [-141, -112]]
    sc = make_scenario(rows, [1, 2])
    model = OverlayModel(sc, schedule_scenario(sc))
    assert not model.has_common
    c = model.components(0, [0.0, 0.0])
    assert c.mode == "common-free" and c.payoff == pytest.approx(c.f2)
    want = min(math.log2(1 + 10 ** (17 / 10)), 2 * math.log2(1 + 10 ** (15 / 10)))
    assert float(model.objective([0.0, 0.0])) == pytest.approx(want)


def test_empty_schedule_objective_raises():
    # 15 dB gaps miss the private test and 7.5 dB deviations miss the common one
    rows = [[-110, -125], [-140, -125]]
    sc = make_scenario(rows, [1, 1], xi_p=40.0)
    model = OverlayModel(sc, schedule_scenario(sc))
    assert model.sets.scheduled == []
    with pytest.raises(ScenarioError):
        model.objective([0.5, 0.5])


def test_theta_validation(fig3_model):
    with pytest.raises(ValueError):
        as_power_split([0.5, 1.2, 0.3], 3)
    with pytest.raises(ValueError):
        as_power_split([0.5, 0.5], 3)
    np.testing.assert_allclose(as_power_split(0.25, 3), [0.25] * 3)


def test_grid_evaluation_matches_pointwise():
    rng = np.random.default_rng(4)
    _, _, model = random_overlay(rng, K=3, n_common=2)
    axes = [np.linspace(0, 1, 7), np.linspace(0, 1, 5), np.linspace(0.2, 0.9, 4)]
    grid = model.objective_on_grid(axes, chunk=9)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    np.testing.assert_allclose(grid, model.objective(mesh), rtol=1e-13)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(2, 4), J=st.integers(1, 3))
def test_random_objective_matches_hand_evaluator(seed, K, J):
    rng = np.random.default_rng(seed)
    sc, sets, model = random_overlay(rng, K=K, n_common=J)
    theta = rng.uniform(0, 1, size=K)
    gains = sc.gain_map.gains_db.tolist()
    w = [m.weight for m in sc.mobiles]
    priv = [sc.ms_index(m) for m in sets.private]
    comm = [sc.ms_index(m) for m in sets.common]
    want, _ = hand_objective(gains, w, priv, comm, theta.tolist(), d_total=sc.rates.d_total,
                             p_w=float(sc.bs_power_w[0]), noise_w=sc.gain_map.noise_power_w)
    assert float(model.objective(theta)) == pytest.approx(want, rel=1e-11)


def test_throughput_nondecreasing_in_power():
    rng = np.random.default_rng(9)
    for _ in range(20):
        sc, sets, model = random_overlay(rng)
        th = rng.uniform(0, 1, 3)
        lo = float(model.objective(th))
        hi = float(OverlayModel(sc.with_power_dbm(40.0), sets).objective(th))
        assert hi >= lo
