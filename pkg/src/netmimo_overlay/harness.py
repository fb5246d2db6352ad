"""Drop-based experiment campaigns and the two reference schemes.

A campaign draws ``n_drops`` independent MS layouts over a hexagonal
network, schedules each one and scores every requested scheme at every
point of one or more sweeps (transmit power, private threshold, common
threshold). A drop's layout and shadowing depend only on ``(seed, drop_id)``,
so the same drop is reused across all values of a sweep.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import (DEFAULT_NOISE_DBM, MsState, OstbcRates, Scenario, ScenarioError,
                   Thresholds, Topology, build_gain_map, dbm_to_watts)
from .game import MAX_ORACLE_BS, SolverConfig, centralized_oracle, solve_ne, verify_ne
from .scheduling import schedule_scenario
from .throughput import OverlayModel, ThroughputReport

__all__ = [
    "SCHEMES",
    "AXES",
    "PLOT_SCHEMA_VERSION",
    "CampaignConfig",
    "CampaignResult",
    "drop_scenario",
    "evaluate_baseline1",
    "evaluate_baseline2",
    "best_tau",
    "score_schemes",
    "evaluate_drop",
    "run_campaign",
    "campaign_config_from_dict",
    "emit_plot_data",
]

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "baseline1", "baseline2", "baseline3")
AXES = ("power", "xi_p", "xi_c")
PLOT_SCHEMA_VERSION = 1
ROW_FIELDS = ("axis", "sweep_value", "drop_id", "scheme", "feasible", "n_private",
              "n_common", "min_weighted_throughput", "iterations")


@dataclass(frozen=True)
class CampaignConfig:
    """Desk-scale campaign settings.

    ``axes`` lists the sweeps to run. Each axis varies one parameter over its
    ``*_sweep`` list while the others stay at their ``*_fixed`` values
    (``power_fixed_dbm`` only applies to the threshold sweeps).
    """

    n_cells: int = 3
    cell_radius_km: float = 1.0
    n_ms_type1: int = 10
    n_ms_type2: int = 10
    weights: tuple = (1.0, 2.0)
    power_sweep_dbm: tuple = (30.0, 35.0, 40.0)
    xi_p_sweep_db: tuple = (10.0, 15.0, 20.0, 25.0, 30.0)
    xi_c_sweep_db: tuple = (2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    power_fixed_dbm: float = 35.0
    xi_p_fixed_db: float = 20.0
    xi_c_fixed_db: float = 5.0
    m_c_max: int = 2
    d_total: int = 2
    n_drops: int = 100
    schemes: tuple = SCHEMES
    axes: tuple = ("power",)
    tau: float = 0.5
    seed: int = 0
    noise_power_dbm: float = DEFAULT_NOISE_DBM
    sigma_shadow_db: float = 8.0
    n_t: int = 4
    n_t_p: int = 2
    n_t_c: int = 2
    n_r: int = 2
    grid_step: float = 0.005
    tol_a: float = 1e-10

    def __post_init__(self):
        for name in ("weights", "power_sweep_dbm", "xi_p_sweep_db", "xi_c_sweep_db",
                     "schemes", "axes"):
            val = getattr(self, name)
            object.__setattr__(self, name, tuple(val if not isinstance(val, str) else [val]))
        if self.n_drops < 1:
            raise ValueError("n_drops must be >= 1")
        if self.n_cells < 1 or self.n_ms_type1 < 0 or self.n_ms_type2 < 0:
            raise ValueError("need n_cells >= 1 and non-negative MS counts")
        if len(self.weights) != 2:
            raise ValueError("weights must be a (type1, type2) pair")
        bad = set(self.schemes) - set(SCHEMES)
        if bad or not self.schemes:
            raise ValueError(f"schemes must be a non-empty subset of {SCHEMES}")
        bad = set(self.axes) - set(AXES)
        if bad or not self.axes:
            raise ValueError(f"axes must be a non-empty subset of {AXES}")
        for axis in self.axes:
            if not self.sweep_values(axis):
                raise ValueError(f"sweep for axis {axis!r} is empty")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")

    def sweep_values(self, axis: str) -> tuple:
        return {"power": self.power_sweep_dbm, "xi_p": self.xi_p_sweep_db,
                "xi_c": self.xi_c_sweep_db}[axis]

    def operating_point(self, axis: str, value: float) -> tuple:
        """``(power_dbm, xi_p_db, xi_c_db)`` for one sweep point."""
        if axis == "power":
            return float(value), self.xi_p_fixed_db, self.xi_c_fixed_db
        if axis == "xi_p":
            return self.power_fixed_dbm, float(value), self.xi_c_fixed_db
        return self.power_fixed_dbm, self.xi_p_fixed_db, float(value)


@dataclass
class CampaignResult:
    config: CampaignConfig
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    convergence: list = field(default_factory=list)
    notices: list = field(default_factory=list)
    violations: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"config": _jsonable(asdict(self.config)), "aggregates": self.aggregates,
                "notices": self.notices, "violations": self.violations}

    def rows_csv(self) -> str:
        return _csv(ROW_FIELDS, self.rows)

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Drops
# ---------------------------------------------------------------------------
def _drop_rng(config, drop_id, stream):
    return np.random.default_rng(np.random.SeedSequence([config.seed, drop_id, stream]))


def drop_scenario(config: CampaignConfig, drop_id: int, power_dbm=None,
                  xi_p_db=None, xi_c_db=None) -> Scenario:
    """Scenario of one drop at the given operating point.

    Positions and shadowing depend only on ``(config.seed, drop_id)``.
    """
    power_dbm = config.power_fixed_dbm if power_dbm is None else power_dbm
    xi_p_db = config.xi_p_fixed_db if xi_p_db is None else xi_p_db
    xi_c_db = config.xi_c_fixed_db if xi_c_db is None else xi_c_db
    rng = _drop_rng(config, drop_id, 0)
    topo = Topology.hexagonal(config.n_cells, config.cell_radius_km,
                              config.n_t, config.n_t_p, config.n_t_c)
    n = config.n_ms_type1 + config.n_ms_type2
    pos = topo.sample_positions(rng, n)
    mobiles = [MsState(i + 1, tuple(pos[i]),
                       config.weights[0] if i < config.n_ms_type1 else config.weights[1],
                       n_r=config.n_r) for i in range(n)]
    noise = float(dbm_to_watts(config.noise_power_dbm))
    gains = build_gain_map(topo, mobiles, config.sigma_shadow_db, rng, noise_power_w=noise)
    K = topo.n_bs
    return Scenario(topo, mobiles, gains, np.full(K, float(dbm_to_watts(power_dbm))),
                    OstbcRates.alamouti(K, config.d_total),
                    Thresholds.uniform(K, xi_p_db, xi_c_db, config.m_c_max),
                    rng_seed=int(config.seed))


# ---------------------------------------------------------------------------
# Reference schemes
# ---------------------------------------------------------------------------
def evaluate_baseline1(model: OverlayModel, tau: float = 0.5) -> ThroughputReport:
    """Orthogonal division: common code alone for a ``tau`` share, private codes otherwise.

    The common code is sent at full power by every BS (no private
    interference, no cancellation constraint) and must be decodable by all
    common MSs; each private MS gets its interference-free rate.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    per_ms, weighted = {}, {}
    full = np.log2(1.0 + model.s_private * model.r_p)
    for k, m in enumerate(model.private_ids):
        if m is not None:
            per_ms[m] = float((1 - tau) * full[k])
            weighted[m] = float(model.w_private[k] * per_ms[m])
    if model.has_common:
        code = float(np.min(np.log2(1.0 + model.s_common.sum(axis=1) * model.r_c)))
        for j, m in enumerate(model.common_ids):
            per_ms[m] = float(tau * model.share[j] * code)
            weighted[m] = float(model.w_common[j] * per_ms[m])
    if not per_ms:
        raise ScenarioError("no scheduled MS: objective undefined")
    binding = min(weighted, key=lambda m: (weighted[m], m))
    return ThroughputReport(per_ms, weighted, weighted[binding], binding)


def evaluate_baseline2(model: OverlayModel) -> ThroughputReport:
    """Overlay with every BS splitting its power evenly."""
    return model.report(np.full(model.n_bs, 0.5))


def best_tau(model: OverlayModel, n_points: int = 99) -> tuple[float, float]:
    """Scan ``tau`` on an interior grid; returns ``(tau, objective)`` of the best point."""
    taus = np.arange(1, n_points + 1) / (n_points + 1)
    vals = [evaluate_baseline1(model, t).min_weighted for t in taus]
    i = int(np.argmax(vals))
    return float(taus[i]), float(vals[i])


# ---------------------------------------------------------------------------
# Campaign
# ---------------------------------------------------------------------------
def score_schemes(model: OverlayModel, schemes=SCHEMES, cfg: SolverConfig | None = None,
                  tau: float = 0.5) -> dict:
    """Objective of each scheme on one scheduled scenario.

    Returns ``{scheme: {"value", "feasible", "iterations"}}`` plus the key
    ``"_trace"`` holding the equilibrium solver trace when ``"proposed"`` ran.
    Schemes are infeasible without a common set; the exhaustive search is
    also skipped (infeasible) above ``MAX_ORACLE_BS`` BSs.
    """
    cfg = SolverConfig() if cfg is None else cfg
    feasible = model.has_common and bool(model.sets.scheduled)
    out = {"_trace": None}
    for scheme in schemes:
        res = {"value": float("nan"), "feasible": feasible, "iterations": None}
        out[scheme] = res
        if scheme == "baseline3" and model.n_bs > MAX_ORACLE_BS:
            res["feasible"] = False
        if not res["feasible"]:
            continue
        if scheme == "proposed":
            tr = solve_ne(model, cfg)
            res["value"] = tr.objective
            res["iterations"] = tr.n_iterations
            res["feasible"] = tr.converged
            out["_trace"] = tr
        elif scheme == "baseline1":
            res["value"] = evaluate_baseline1(model, tau).min_weighted
        elif scheme == "baseline2":
            res["value"] = evaluate_baseline2(model).min_weighted
        else:
            res["value"] = float(model.objective(centralized_oracle(model, cfg.grid_step)))
    return out


def evaluate_drop(config: CampaignConfig, drop_id: int, axis: str) -> dict:
    """Score every scheme on one drop at every point of ``axis``.

    Returns ``{"rows": [...], "violations": {...}, "trace": rows|None}``.
    """
    cfg = SolverConfig(tol_a=config.tol_a, grid_step=config.grid_step)
    rows, trace_rows = [], None
    viol = {"proposed_below_baseline2": 0, "baseline3_below_grid_corner": 0}
    for value in config.sweep_values(axis):
        power, xi_p, xi_c = config.operating_point(axis, value)
        sc = drop_scenario(config, drop_id, power, xi_p, xi_c)
        sets = schedule_scenario(sc, _drop_rng(config, drop_id, 1))
        model = OverlayModel(sc, sets)
        scored = score_schemes(model, config.schemes, cfg, config.tau)
        base = {"axis": axis, "sweep_value": float(value), "drop_id": drop_id,
                "n_private": int(np.sum(model.has_private)), "n_common": model.n_common}
        for scheme in config.schemes:
            r = scored[scheme]
            rows.append(dict(base, scheme=scheme, feasible=r["feasible"],
                             min_weighted_throughput=r["value"],
                             iterations="" if r["iterations"] is None else r["iterations"]))
        tr = scored["_trace"]
        if tr is None or not scored["proposed"]["feasible"]:
            continue
        if trace_rows is None:
            trace_rows = tr.rows()
        p = tr.objective
        b2 = scored.get("baseline2")
        if b2 and b2["feasible"] and verify_ne(tr.ne, model, cfg=cfg):
            if p < b2["value"] - cfg.root_tol * (1 + abs(p)):
                viol["proposed_below_baseline2"] += 1
                log.warning("drop %d (%s=%g): proposed below uniform split", drop_id, axis, value)
        b3 = scored.get("baseline3")
        if b3 and b3["feasible"]:
            # the grid maximum is at least the best corner of the grid cell around the NE
            if b3["value"] < _corner_objective(model, tr.ne, config.grid_step) - 1e-12:
                viol["baseline3_below_grid_corner"] += 1
    return {"rows": rows, "violations": viol, "trace": trace_rows}


def _corner_objective(model, theta, step):
    """Best objective over the grid points of the cell that contains ``theta``."""
    n = int(round(1.0 / step))
    lo = np.floor(np.asarray(theta) * n) / n
    hi = np.minimum(lo + 1.0 / n, 1.0)
    corners = np.array(np.meshgrid(*np.stack([lo, hi], axis=1), indexing="ij"))
    corners = corners.reshape(model.n_bs, -1).T
    return float(np.max(model.objective(corners)))


def _evaluate_task(args):
    return evaluate_drop(*args)


def _mean_ci(values):
    n = len(values)
    if n == 0:
        return float("nan"), float("nan")
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if n == 1:
        return mean, float("nan")
    return mean, float(1.96 * arr.std(ddof=1) / math.sqrt(n))


def _aggregate(rows, config):
    out = []
    for axis in config.axes:
        for value in config.sweep_values(axis):
            for scheme in config.schemes:
                sel = [r for r in rows if r["axis"] == axis and r["scheme"] == scheme
                       and r["sweep_value"] == float(value)]
                ok = [r["min_weighted_throughput"] for r in sel if r["feasible"]]
                mean, ci = _mean_ci(ok)
                out.append({"axis": axis, "sweep_value": float(value), "scheme": scheme,
                            "n": len(ok), "n_infeasible": len(sel) - len(ok),
                            "mean": mean, "ci95": ci})
    return out


def run_campaign(config: CampaignConfig, jobs: int | None = 1) -> CampaignResult:
    """Run every drop of every requested sweep.

    Drops are independent and are farmed out to ``jobs`` worker processes
    (``None`` means all cores). Results are merged in drop order, so the
    output does not depend on ``jobs``.
    """
    tasks = [(config, d, axis) for axis in config.axes for d in range(config.n_drops)]
    jobs = os.cpu_count() or 1 if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(tasks) == 1:
        parts = [_evaluate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_evaluate_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    res = CampaignResult(config)
    viol = {}
    for part in parts:
        res.rows.extend(part["rows"])
        for key, n in part["violations"].items():
            viol[key] = viol.get(key, 0) + n
        if not res.convergence and part["trace"]:
            res.convergence = part["trace"]
    res.violations = viol
    res.aggregates = _aggregate(res.rows, config)
    if "baseline3" in config.schemes and config.n_cells > MAX_ORACLE_BS:
        res.notices.append(f"baseline3 skipped: exhaustive search needs n_cells <= {MAX_ORACLE_BS}")
    return res


# ---------------------------------------------------------------------------
# Configuration from a scenario-style file
# ---------------------------------------------------------------------------
_FIELD_NAMES = {f.name for f in fields(CampaignConfig)}
# scenario-file keys that carry over to a campaign
_SCENARIO_KEYS = {"rng_seed": "seed", "n_bs": "n_cells", "cell_radius_km": "cell_radius_km",
                  "noise_power_dbm": "noise_power_dbm", "sigma_shadow_db": "sigma_shadow_db",
                  "n_r": "n_r", "n_t": "n_t", "n_t_p": "n_t_p", "n_t_c": "n_t_c",
                  "bs_power_dbm": "power_fixed_dbm"}
_THRESHOLD_KEYS = {"xi_p_db": "xi_p_fixed_db", "xi_c_db": "xi_c_fixed_db", "m_c_max": "m_c_max"}


def campaign_config_from_dict(data: dict, overrides: dict | None = None) -> CampaignConfig:
    """Build a :class:`CampaignConfig` from a parsed file plus ``key=value`` overrides.

    Campaign settings live in a ``[campaign]`` table named after the
    :class:`CampaignConfig` fields; a few scenario keys (``rng_seed``,
    ``n_bs``, ``cell_radius_km``, ``[thresholds]`` ...) are accepted too.
    Override keys are campaign field names, optionally prefixed ``campaign.``.
    Unknown keys raise ``KeyError``.
    """
    kw = {}
    for key, value in data.items():
        if key == "campaign":
            for k, v in value.items():
                if k not in _FIELD_NAMES:
                    raise KeyError(f"unknown campaign key {k!r}")
                kw[k] = v
        elif key == "thresholds":
            for k, v in value.items():
                if k not in _THRESHOLD_KEYS:
                    raise KeyError(f"unknown key [thresholds].{k}")
                kw[_THRESHOLD_KEYS[k]] = v
        elif key in _SCENARIO_KEYS:
            kw[_SCENARIO_KEYS[key]] = value
        else:
            raise KeyError(f"unknown key {key!r} in campaign file")
    for key, value in (overrides or {}).items():
        name = key[len("campaign."):] if key.startswith("campaign.") else key
        if name not in _FIELD_NAMES:
            raise KeyError(f"unknown campaign key {key!r}")
        kw[name] = value
    return CampaignConfig(**kw)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------
def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _csv(columns, rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def plot_tables(result: CampaignResult) -> dict:
    """Per-figure CSV texts keyed by file name.

    Axes that were not swept still get a file with only the header.
    """
    out = {}
    cols = ("sweep_value", "scheme", "n", "n_infeasible", "mean", "ci95")
    for axis in AXES:
        rows = [a for a in result.aggregates if a["axis"] == axis]
        out[f"fig_{axis}.csv"] = _csv(cols, rows, f"schema_version={PLOT_SCHEMA_VERSION} figure={axis}")
    conv = result.convergence
    cols = list(conv[0]) if conv else ["i", "a_target", "a_achieved", "bracket_width"]
    out["fig_convergence.csv"] = _csv(cols, conv,
                                      f"schema_version={PLOT_SCHEMA_VERSION} figure=convergence")
    return out


def emit_plot_data(result: CampaignResult, directory, write=None) -> list:
    """Write the per-figure CSVs into ``directory``; returns the paths written.

    ``write(path, text)`` defaults to a plain text write.
    """
    if write is None:
        def write(path, text):
            with open(path, "w", newline="") as fh:
                fh.write(text)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, text in plot_tables(result).items():
        path = os.path.join(directory, name)
        write(path, text)
        paths.append(path)
    return paths
