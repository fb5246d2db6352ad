"""Scenario files (TOML) and ``key=value`` overrides.

A scenario file looks like::

    rng_seed = 7
    layout = "hexagonal"          # or "explicit" with bs_positions
    n_bs = 3
    cell_radius_km = 1.5
    n_t = 4
    n_t_p = 2
    n_t_c = 2
    n_r = 2
    bs_power_dbm = 30.0           # scalar or one value per BS
    noise_power_dbm = -97.0
    sigma_shadow_db = 8.0
    gains_db = [[...], ...]       # optional explicit long-term gains

    [[mobiles]]
    id = 1
    position = [0.4, 0.1]
    weight = 2.0
    speed_kmh = 120.0

    [thresholds]
    xi_p_db = 20.0                # scalar or per BS
    xi_c_db = 5.0
    m_c_max = 2

    [rates]
    r_p = 1.0                     # scalar or per BS
    r_c = 1.0
    d_total = 2

Unknown keys raise :class:`ConfigError`.
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import (DEFAULT_NOISE_DBM, GainMap, MsState, OstbcRates, Scenario,
                   ScenarioError, Thresholds, Topology, build_gain_map, dbm_to_watts)

__all__ = ["ConfigError", "TOP_KEYS", "load_scenario", "scenario_from_dict",
           "parse_overrides", "apply_overrides", "fig3_scenario", "fig3_path"]

TOP_KEYS = {
    "rng_seed", "layout", "n_bs", "bs_positions", "cell_radius_km", "n_t", "n_t_p",
    "n_t_c", "n_r", "bs_power_dbm", "noise_power_dbm", "sigma_shadow_db", "gains_db",
    "mobiles", "thresholds", "rates",
}
MOBILE_KEYS = {"id", "position", "weight", "n_r", "speed_kmh"}
THRESHOLD_KEYS = {"xi_p_db", "xi_c_db", "m_c_max"}
RATE_KEYS = {"r_p", "r_c", "d_total"}
_TABLES = {"thresholds": THRESHOLD_KEYS, "rates": RATE_KEYS}


class ConfigError(ValueError):
    """Malformed scenario file or override (a usage error)."""


def _check_keys(d, allowed, where):
    bad = sorted(set(d) - allowed)
    if bad:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(bad)}")


def _per_bs(value, K, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(K, float(arr[0]))
    if arr.size != K:
        raise ConfigError(f"{name} needs 1 or {K} values, got {arr.size}")
    return arr


def scenario_from_dict(data: dict) -> Scenario:
    """Build a :class:`Scenario` from a parsed configuration mapping."""
    _check_keys(data, TOP_KEYS, "scenario")
    for tbl, keys in _TABLES.items():
        if tbl in data:
            _check_keys(data[tbl], keys, f"[{tbl}]")
    seed = int(data.get("rng_seed", 0))
    rng = np.random.default_rng(seed)
    layout = data.get("layout", "hexagonal" if "bs_positions" not in data else "explicit")
    radius = float(data.get("cell_radius_km", 5.0))
    ant = dict(n_t=int(data.get("n_t", 4)), n_t_p=int(data.get("n_t_p", 2)),
               n_t_c=int(data.get("n_t_c", 2)))
    if layout == "hexagonal":
        if "n_bs" not in data:
            raise ConfigError("hexagonal layout needs n_bs")
        topo = Topology.hexagonal(int(data["n_bs"]), radius, **ant)
    elif layout == "explicit":
        if "bs_positions" not in data:
            raise ConfigError("explicit layout needs bs_positions")
        topo = Topology(np.asarray(data["bs_positions"], dtype=float), radius, layout="explicit", **ant)
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    K = topo.n_bs

    n_r = int(data.get("n_r", 2))
    mobiles = []
    for i, m in enumerate(data.get("mobiles", [])):
        _check_keys(m, MOBILE_KEYS, f"mobiles[{i}]")
        mobiles.append(MsState(id=int(m.get("id", i + 1)),
                               position=tuple(m.get("position", (0.0, 0.0))),
                               weight=float(m.get("weight", 1.0)),
                               n_r=int(m.get("n_r", n_r)),
                               speed_kmh=float(m.get("speed_kmh", 0.0))))
    noise_w = float(dbm_to_watts(float(data.get("noise_power_dbm", DEFAULT_NOISE_DBM))))
    if "gains_db" in data:
        g = np.asarray(data["gains_db"], dtype=float)
        if g.ndim != 2 or g.shape != (len(mobiles), K):
            raise ConfigError(f"gains_db must be a {len(mobiles)}x{K} matrix")
        gain_map = GainMap.from_db(g, noise_w)
    else:
        gain_map = build_gain_map(topo, mobiles, float(data.get("sigma_shadow_db", 8.0)),
                                  rng, noise_power_w=noise_w)

    power = dbm_to_watts(_per_bs(data.get("bs_power_dbm", 30.0), K, "bs_power_dbm"))
    th = data.get("thresholds", {})
    thresholds = Thresholds(_per_bs(th.get("xi_p_db", 20.0), K, "xi_p_db"),
                            float(th.get("xi_c_db", 5.0)), int(th.get("m_c_max", 2)))
    rt = data.get("rates", {})
    rates = OstbcRates(_per_bs(rt.get("r_p", 1.0), K, "r_p"), float(rt.get("r_c", 1.0)),
                       int(rt.get("d_total", max(2, thresholds.m_c_max))))
    return Scenario(topo, mobiles, gain_map, np.atleast_1d(power), rates, thresholds, seed)


def parse_overrides(items) -> dict:
    """Parse ``key=value`` strings; values are TOML literals (bare words become strings).

    Dotted keys address tables, e.g. ``thresholds.xi_c_db=4``.
    """
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw.strip()
        out[key] = value
    return out


def apply_overrides(data: dict, overrides: dict) -> dict:
    data = copy.deepcopy(data)
    for key, value in overrides.items():
        parts = key.split(".")
        if len(parts) == 1:
            if key not in TOP_KEYS or key in _TABLES or key == "mobiles":
                raise ConfigError(f"unknown override key {key!r}")
            data[key] = value
        elif len(parts) == 2 and parts[0] in _TABLES and parts[1] in _TABLES[parts[0]]:
            data.setdefault(parts[0], {})[parts[1]] = value
        else:
            raise ConfigError(f"unknown override key {key!r}")
    return data


def read_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    data = apply_overrides(read_toml(path), overrides or {})
    try:
        return scenario_from_dict(data)
    except (TypeError, KeyError, ScenarioError) as exc:
        # an invalid value in the file is a usage error, not a domain failure
        raise ConfigError(f"{path}: {exc}") from exc


def fig3_path() -> Path:
    """Path of the bundled three-BS convergence scenario."""
    return Path(str(resources.files("netmimo_overlay") / "data" / "fig3.toml"))


def fig3_scenario(**overrides) -> Scenario:
    """The bundled three-BS, five-MS scenario with explicit gains."""
    return load_scenario(fig3_path(), overrides)

