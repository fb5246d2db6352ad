"""A short power sweep comparing the equilibrium with the three baselines."""

from netmimo_overlay.harness import CampaignConfig, run_campaign

cfg = CampaignConfig(n_drops=10, grid_step=0.01)
res = run_campaign(cfg, jobs=None)
for a in res.aggregates:
    print(f"{a['sweep_value']:4.0f} dBm {a['scheme']:9s} mean={a['mean']:.4f} "
          f"±{a['ci95']:.4f} (n={a['n']}, infeasible={a['n_infeasible']})")
print("violations:", res.violations)
