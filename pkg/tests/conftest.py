import numpy as np
import pytest

from netmimo_overlay import fig3_scenario, schedule_scenario
from netmimo_overlay.core import (GainMap, MsState, OstbcRates, Scenario, Thresholds,
                                  Topology, dbm_to_watts)
from netmimo_overlay.throughput import OverlayModel

# Long-term gains (dB) of the bundled three-BS, five-MS scenario.
FIG3_GAINS_DB = np.array([
    [-118.30, -140.14, -139.29],
    [-145.11, -115.56, -143.23],
    [-147.78, -139.65, -116.35],
    [-135.24, -136.08, -135.35],
    [-135.16, -135.91, -134.94],
])
FIG3_WEIGHTS = [2.0, 1.0, 1.0, 1.0, 2.0]


@pytest.fixture(scope="session")
def fig3():
    return fig3_scenario()


@pytest.fixture(scope="session")
def fig3_model(fig3):
    return OverlayModel(fig3, schedule_scenario(fig3))


def make_scenario(gains_db, weights, power_dbm=30.0, r_p=1.0, d_total=2,
                  xi_p=20.0, xi_c=5.0, m_c_max=2, noise_dbm=-97.0):
    gains_db = np.atleast_2d(np.asarray(gains_db, dtype=float))
    n, K = gains_db.shape
    topo = Topology(np.zeros((K, 2)) + np.arange(K)[:, None], 1.0)
    mobiles = [MsState(i + 1, (0.0, 0.0), float(w)) for i, w in enumerate(weights)]
    power = np.broadcast_to(np.asarray(power_dbm, dtype=float), (K,))
    return Scenario(topo, mobiles, GainMap.from_db(gains_db, float(dbm_to_watts(noise_dbm))),
                    dbm_to_watts(power), OstbcRates(np.full(K, r_p), 1.0, d_total),
                    Thresholds.uniform(K, xi_p, xi_c, m_c_max))


def random_overlay(rng, K=3, n_common=2, power_dbm=30.0):
    """A scheduled scenario with one private MS per BS and ``n_common`` common MSs.

    Gains are drawn so that every labelling test passes by a clear margin
    (private gaps of at least 16 dB against a 12 dB threshold). Needs K >= 2.
    """
    rows = []
    for k in range(K):
        row = rng.uniform(-150.0, -138.0, size=K)
        row[k] = rng.uniform(-122.0, -108.0)
        rows.append(row)
    for _ in range(n_common):
        base = rng.uniform(-138.0, -128.0)
        rows.append(base + rng.uniform(-1.5, 1.5, size=K))
    weights = rng.choice([1.0, 2.0], size=len(rows))
    sc = make_scenario(rows, weights, power_dbm=power_dbm, d_total=max(2, n_common),
                       xi_p=12.0, m_c_max=max(2, n_common))
    sets = schedule_scenario(sc)
    assert all(m is not None for m in sets.private) and len(sets.common) == n_common
    return sc, sets, OverlayModel(sc, sets)


# -- acceptance reporting ------------------------------------------------------
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record a numbered acceptance result; printed again in the terminal summary."""
    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
