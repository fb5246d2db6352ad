"""How the private and common thresholds shape the user sets."""

import numpy as np

from netmimo_overlay import GainMap, Thresholds, schedule_users

rng = np.random.default_rng(1)
gains = GainMap.from_db(rng.uniform(-150, -105, size=(200, 3)))
for xi_p, xi_c in ((10, 2), (20, 5), (30, 8)):
    th = Thresholds(np.full(3, float(xi_p)), float(xi_c), m_c_max=200)
    sets = schedule_users(gains, th, np.random.default_rng(0))
    print(f"xi_p={xi_p:2d} dB xi_c={xi_c} dB: {len(sets.common):3d} common candidates, "
          f"private per BS {sets.private}, disjoint guaranteed={th.guarantees_disjoint}")
