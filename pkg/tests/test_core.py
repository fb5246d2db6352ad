import math

import numpy as np
import pytest

from netmimo_overlay.core import (GainMap, MsState, OstbcRates, Scenario, ScenarioError,
                                  Thresholds, Topology, build_gain_map, db_to_linear,
                                  dbm_to_watts, draw_shadowing, hexagonal_positions,
                                  linear_to_db, path_gain_db, step_mobility, watts_to_dbm)


def test_unit_conversions():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(-3.0) == pytest.approx(0.501187, rel=1e-6)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(-97.0) == pytest.approx(10 ** -12.7)
    assert watts_to_dbm(0.001) == pytest.approx(0.0)
    x = np.array([-120.0, 0.0, 17.5])
    np.testing.assert_allclose(linear_to_db(db_to_linear(x)), x)


def test_unit_conversion_errors():
    with pytest.raises(ValueError):
        db_to_linear(np.inf)
    with pytest.raises(ValueError):
        db_to_linear([0.0, np.nan])
    with pytest.raises(ValueError):
        linear_to_db(0.0)


def test_path_gain():
    assert path_gain_db(1.0) == pytest.approx(-130.19)
    assert path_gain_db(10.0) == pytest.approx(-130.19 - 37.6)
    # 5 km: -130.19 - 37.6*log10(5)
    assert path_gain_db(5.0) == pytest.approx(-156.4713, abs=1e-3)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            path_gain_db(bad)


def test_shadowing_statistics():
    rng = np.random.default_rng(1)
    x = draw_shadowing(rng, 8.0, size=200_000)
    assert abs(x.mean()) < 0.1
    assert x.std() == pytest.approx(8.0, rel=0.01)
    assert draw_shadowing(rng, 0.0) == 0.0
    with pytest.raises(ValueError):
        draw_shadowing(rng, -1.0)


def test_hexagonal_layout_geometry():
    R = 2.0
    pos = hexagonal_positions(7, R)
    np.testing.assert_allclose(pos[0], [0.0, 0.0])
    # first ring at the inter-site distance sqrt(3) R
    d = np.linalg.norm(pos[1:], axis=1)
    np.testing.assert_allclose(d, math.sqrt(3) * R)
    # three cells are mutually adjacent
    tri = hexagonal_positions(3, R)
    dd = [np.linalg.norm(tri[i] - tri[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    np.testing.assert_allclose(dd, math.sqrt(3) * R)
    assert len(hexagonal_positions(19, R)) == 19
    assert len({tuple(np.round(p, 9)) for p in hexagonal_positions(19, R)}) == 19


def test_topology_contains_and_sampling():
    topo = Topology.hexagonal(3, 1.0)
    assert topo.contains(np.array([0.0, 0.0]))
    assert not topo.contains(np.array([10.0, 10.0]))
    rng = np.random.default_rng(3)
    pts = topo.sample_positions(rng, 500)
    assert pts.shape == (500, 2)
    assert np.all(topo.contains(pts))
    dmin = np.min(np.linalg.norm(pts[:, None] - topo.bs_positions[None], axis=-1), axis=1)
    assert np.all(dmin >= 0.035)


def test_topology_validation():
    with pytest.raises(ScenarioError):
        Topology(np.zeros((1, 2)), 1.0, n_t=4, n_t_p=1, n_t_c=2)
    with pytest.raises(ScenarioError):
        Topology(np.zeros((1, 2)), 0.0)
    with pytest.raises(ScenarioError):
        Topology(np.zeros((1, 3)), 1.0)


def test_ms_validation():
    with pytest.raises(ScenarioError):
        MsState(1, (0, 0), weight=0.0)
    with pytest.raises(ScenarioError):
        MsState(1, (0, 0), speed_kmh=-1)
    with pytest.raises(ScenarioError):
        MsState(1, (0, 0, 0))


def test_build_gain_map_without_shadowing_matches_path_gain():
    topo = Topology.hexagonal(3, 1.0)
    ms = [MsState(1, (0.5, 0.0)), MsState(2, (0.0, 0.0))]
    gm = build_gain_map(topo, ms, 0.0, np.random.default_rng(0))
    d = np.linalg.norm(np.array([[0.5, 0.0]]) - topo.bs_positions, axis=1)
    np.testing.assert_allclose(gm.gains_db[0], -130.19 - 37.6 * np.log10(d))
    # MS on top of BS 1 is clamped to the minimum distance
    assert gm.gains_db[1, 0] == pytest.approx(path_gain_db(0.035))
    assert gm.noise_power_w == pytest.approx(10 ** -12.7)


def test_gain_map_rejects_nonpositive():
    with pytest.raises(ScenarioError):
        GainMap(np.array([[1e-12, 0.0]]))
    with pytest.raises(ScenarioError):
        GainMap(np.array([[1e-12]]), noise_power_w=0.0)


def test_mobility_stays_in_coverage_and_moves_expected_distance():
    topo = Topology.hexagonal(3, 1.0)
    rng = np.random.default_rng(5)
    ms = [MsState(i, tuple(p), speed_kmh=120.0) for i, p in
          enumerate(topo.sample_positions(rng, 50))]
    for _ in range(50):
        new = step_mobility(ms, 1.0, rng, topo)
        step = [np.linalg.norm(np.subtract(a.position, b.position)) for a, b in zip(ms, new)]
        # 120 km/h for one second is 1/30 km; reflected or frozen steps are allowed
        assert all(s == pytest.approx(120 / 3600) or s == 0.0 for s in step)
        ms = new
    assert np.all(topo.contains(np.array([m.position for m in ms])))
    with pytest.raises(ValueError):
        step_mobility(ms, 0.0, rng, topo)


def test_thresholds_relation_enforced():
    Thresholds.uniform(3, 20.0, 5.0)
    Thresholds.uniform(3, 10 / 3, 5.0)  # boundary of xi_p >= (K-1)/K xi_c
    with pytest.raises(ScenarioError):
        Thresholds.uniform(3, 3.0, 5.0)
    with pytest.raises(ScenarioError):
        Thresholds.uniform(2, 20.0, 5.0, m_c_max=0)


def test_guarantees_disjoint_flag():
    assert Thresholds.uniform(3, 20.0, 5.0).guarantees_disjoint
    assert Thresholds.uniform(3, 7.5, 5.0).guarantees_disjoint
    assert not Thresholds.uniform(3, 3.5, 5.0).guarantees_disjoint


def test_ostbc_stream_split():
    r = OstbcRates.alamouti(3, d_total=3)
    s = r.for_common([9, 4])
    assert s.d_m == {4: 2, 9: 1}
    assert s.share(4) == pytest.approx(2 / 3)
    assert OstbcRates.alamouti(3).for_common([4, 5]).share(5) == 0.5
    assert r.for_common([]).d_m == {}
    with pytest.raises(ScenarioError):
        OstbcRates.alamouti(3, d_total=2).for_common([1, 2, 3])
    with pytest.raises(ScenarioError):
        OstbcRates(np.array([1.2]))
    with pytest.raises(ScenarioError):
        OstbcRates(np.ones(2), d_total=2, d_m={1: 1})


def test_scenario_validation():
    topo = Topology.hexagonal(2, 1.0)
    ms = [MsState(1), MsState(2)]
    gm = GainMap.from_db(np.full((2, 2), -120.0))
    ok = dict(topology=topo, mobiles=ms, gain_map=gm, bs_power_w=np.ones(2),
              rates=OstbcRates.alamouti(2), thresholds=Thresholds.uniform(2))
    sc = Scenario(**ok)
    assert sc.ms_ids == [1, 2] and sc.ms_index(2) == 1
    assert sc.with_power_dbm(40.0).bs_power_w == pytest.approx([10.0, 10.0])
    bad = [dict(bs_power_w=np.ones(3)), dict(bs_power_w=np.array([1.0, 0.0])),
           dict(mobiles=[MsState(1)]), dict(mobiles=[MsState(1), MsState(1)]),
           dict(rates=OstbcRates.alamouti(3)),
           dict(thresholds=Thresholds.uniform(2, m_c_max=3))]
    for b in bad:
        with pytest.raises(ScenarioError):
            Scenario(**dict(ok, **b))
