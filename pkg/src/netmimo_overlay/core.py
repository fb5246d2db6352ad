"""Units, geometry, mobility and long-term channel statistics.

Everything downstream consumes a :class:`GainMap`: the matrix of linear
long-term power gains ``L[m, k]`` (path gain times log-normal shadowing)
between mobile ``m`` and base station ``k``, plus the receiver noise power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "ScenarioError",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
    "path_gain_db",
    "draw_shadowing",
    "hexagonal_positions",
    "Topology",
    "MsState",
    "GainMap",
    "Thresholds",
    "OstbcRates",
    "Scenario",
    "build_gain_map",
    "step_mobility",
    "MIN_DISTANCE_KM",
    "DEFAULT_NOISE_DBM",
]

#: BS-MS distances are clamped to this value before evaluating path loss.
MIN_DISTANCE_KM = 0.035

#: Thermal noise over 10 MHz (-104 dBm) plus a 7 dB receiver noise figure.
DEFAULT_NOISE_DBM = -97.0


class ScenarioError(ValueError):
    """Raised when a scenario or one of its parts is inconsistent."""


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------
def db_to_linear(x):
    """Convert a power ratio in dB to linear scale, ``10**(x/10)``.

    Works elementwise on arrays. Non-finite input raises ``ValueError``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("db_to_linear requires finite input")
    out = np.power(10.0, x / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    """Convert a positive linear power ratio to dB."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("linear_to_db requires finite, positive input")
    out = 10.0 * np.log10(x)
    return float(out) if out.ndim == 0 else out


def dbm_to_watts(x):
    """dBm to watts (30 dBm is 1 W)."""
    return db_to_linear(np.asarray(x, dtype=float) - 30.0)


def watts_to_dbm(x):
    return linear_to_db(x) + 30.0


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------
def path_gain_db(distance_km):
    """Distance-dependent path gain ``-130.19 - 37.6 log10(d)`` in dB.

    Parameters
    ----------
    distance_km : float or array_like
        BS-MS distance in km. Must be strictly positive.
    """
    d = np.asarray(distance_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("path_gain_db requires distance_km > 0")
    out = -130.19 - 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def draw_shadowing(rng: np.random.Generator, sigma_db: float, size=None):
    """Zero-mean Gaussian shadowing sample(s) in dB with std ``sigma_db``."""
    if sigma_db < 0:
        raise ValueError("sigma_db must be >= 0")
    if sigma_db == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma_db, size=size)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------
def _axial_to_xy(q, r, radius):
    # flat-top hexagons, circumradius `radius`, inter-site distance sqrt(3)*radius
    return np.array([1.5 * radius * q, math.sqrt(3.0) * radius * (r + q / 2.0)])


def hexagonal_positions(n_cells: int, radius_km: float) -> np.ndarray:
    """Centres of ``n_cells`` hexagonal cells, filled ring by ring.

    The first cell is at the origin; ring cells are taken counter-clockwise
    starting at 30 degrees, so three cells form an equilateral triangle.
    """
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    cells = []
    ring = 0
    while len(cells) < n_cells:
        ring_cells = []
        for q in range(-ring, ring + 1):
            for r in range(-ring, ring + 1):
                s = -q - r
                if max(abs(q), abs(r), abs(s)) != ring:
                    continue
                xy = _axial_to_xy(q, r, radius_km)
                # nudge so the 30-degree neighbour sorts first
                ang = (math.atan2(xy[1], xy[0]) - math.radians(30) + 1e-9) % (2 * math.pi)
                ring_cells.append((ang, xy))
        ring_cells.sort(key=lambda t: t[0])
        cells.extend(xy for _, xy in ring_cells)
        ring += 1
    return np.array(cells[:n_cells])


def _in_hexagon(points, centre, radius):
    d = np.abs(np.asarray(points, dtype=float) - centre)
    x, y = d[..., 0], d[..., 1]
    half_h = math.sqrt(3.0) / 2.0 * radius
    return (y <= half_h + 1e-12) & (math.sqrt(3.0) * x + y <= math.sqrt(3.0) * radius + 1e-12)


@dataclass(frozen=True)
class Topology:
    """Base-station placement and antenna configuration.

    ``n_t_p`` antennas carry each BS's private code and ``n_t_c`` antennas
    carry the common code; they must add up to ``n_t``.
    """

    bs_positions: np.ndarray
    cell_radius_km: float
    n_t: int = 4
    n_t_p: int = 2
    n_t_c: int = 2
    layout: str = "explicit"

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.bs_positions, dtype=float))
        if pos.shape[-1] != 2 or pos.shape[0] < 1:
            raise ScenarioError("bs_positions must be a non-empty list of 2-D points")
        object.__setattr__(self, "bs_positions", pos)
        if not self.cell_radius_km > 0:
            raise ScenarioError("cell_radius_km must be > 0")
        if self.n_t < 2 or self.n_t_p < 1 or self.n_t_c < 1:
            raise ScenarioError("need n_t >= 2, n_t_p >= 1, n_t_c >= 1")
        if self.n_t_p + self.n_t_c != self.n_t:
            raise ScenarioError("n_t_p + n_t_c must equal n_t")
        if self.layout not in ("hexagonal", "explicit"):
            raise ScenarioError(f"unknown layout {self.layout!r}")

    @classmethod
    def hexagonal(cls, n_cells: int, cell_radius_km: float, n_t=4, n_t_p=2, n_t_c=2):
        return cls(hexagonal_positions(n_cells, cell_radius_km), cell_radius_km,
                   n_t, n_t_p, n_t_c, layout="hexagonal")

    @property
    def n_bs(self) -> int:
        return self.bs_positions.shape[0]

    def contains(self, points) -> np.ndarray:
        """Boolean mask: which points lie in the served region (union of cells)."""
        points = np.asarray(points, dtype=float)
        inside = np.zeros(points.shape[:-1], dtype=bool)
        for c in self.bs_positions:
            inside |= _in_hexagon(points, c, self.cell_radius_km)
        return inside

    def sample_positions(self, rng: np.random.Generator, n: int,
                         min_distance_km: float = MIN_DISTANCE_KM) -> np.ndarray:
        """Uniform drop of ``n`` points over the served region.

        Points closer than ``min_distance_km`` to any BS are redrawn.
        """
        out = np.empty((n, 2))
        filled = 0
        r = self.cell_radius_km
        while filled < n:
            cell = rng.integers(self.n_bs, size=2 * (n - filled) + 4)
            offs = rng.uniform(-r, r, size=(cell.size, 2))
            pts = self.bs_positions[cell] + offs
            ok = _in_hexagon(pts, self.bs_positions[cell], r)
            dmin = np.min(np.linalg.norm(pts[:, None, :] - self.bs_positions[None], axis=-1), axis=1)
            ok &= dmin >= min_distance_km
            pts = pts[ok][: n - filled]
            out[filled: filled + len(pts)] = pts
            filled += len(pts)
        return out


@dataclass(frozen=True)
class MsState:
    """A mobile station. ``weight`` is the static QoS weight ``w_m``."""

    id: int
    position: tuple = (0.0, 0.0)
    weight: float = 1.0
    n_r: int = 2
    speed_kmh: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if len(self.position) != 2:
            raise ScenarioError("MS position must be a 2-D point")
        if not self.weight > 0:
            raise ScenarioError(f"MS {self.id}: weight must be > 0")
        if self.n_r < 1:
            raise ScenarioError(f"MS {self.id}: n_r must be >= 1")
        if self.speed_kmh < 0:
            raise ScenarioError(f"MS {self.id}: speed must be >= 0")


@dataclass(frozen=True)
class GainMap:
    """Linear long-term gains ``gains[m, k]`` and receiver noise power (W)."""

    gains: np.ndarray
    noise_power_w: float = float(dbm_to_watts(DEFAULT_NOISE_DBM))

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gains, dtype=float))
        if g.size and (not np.all(np.isfinite(g)) or np.any(g <= 0)):
            raise ScenarioError("gain map entries must be finite and > 0")
        if not self.noise_power_w > 0:
            raise ScenarioError("noise_power_w must be > 0")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @classmethod
    def from_db(cls, gains_db, noise_power_w=None):
        g = db_to_linear(np.atleast_2d(np.asarray(gains_db, dtype=float)))
        if noise_power_w is None:
            return cls(g)
        return cls(g, noise_power_w)

    @property
    def gains_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.gains)

    @property
    def n_ms(self) -> int:
        return self.gains.shape[0]

    @property
    def n_bs(self) -> int:
        return self.gains.shape[1]


def build_gain_map(topology: Topology, mobiles: Sequence[MsState], sigma_db: float,
                   rng: np.random.Generator, noise_power_w: float | None = None,
                   min_distance_km: float = MIN_DISTANCE_KM) -> GainMap:
    """Path gain plus i.i.d. log-normal shadowing for every (MS, BS) pair."""
    if len(mobiles) == 0:
        gains_db = np.zeros((0, topology.n_bs))
    else:
        pos = np.array([ms.position for ms in mobiles])
        d = np.linalg.norm(pos[:, None, :] - topology.bs_positions[None, :, :], axis=-1)
        d = np.maximum(d, min_distance_km)
        gains_db = path_gain_db(d) + draw_shadowing(rng, sigma_db, size=d.shape)
    noise = float(dbm_to_watts(DEFAULT_NOISE_DBM)) if noise_power_w is None else noise_power_w
    return GainMap(db_to_linear(gains_db) if gains_db.size else gains_db, noise)


def step_mobility(mobiles: Sequence[MsState], dt_s: float, rng: np.random.Generator,
                  topology: Topology) -> list[MsState]:
    """Advance a reflected random walk by ``dt_s`` seconds.

    Each MS moves ``speed * dt`` along a uniformly drawn heading. A step that
    would leave the served region is reflected (taken in the opposite
    direction); if that also leaves the region the MS stays put.
    """
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    if not mobiles:
        return []
    heading = rng.uniform(0.0, 2.0 * math.pi, size=len(mobiles))
    out = []
    for ms, phi in zip(mobiles, heading):
        step_km = ms.speed_kmh * dt_s / 3600.0
        p = np.array(ms.position)
        v = step_km * np.array([math.cos(phi), math.sin(phi)])
        for cand in (p + v, p - v, p):
            if topology.contains(cand):
                break
        out.append(replace(ms, position=tuple(cand)))
    return out


# ---------------------------------------------------------------------------
# Scheduling thresholds and code rates (scenario-level configuration)
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Thresholds:
    """Private-set thresholds ``xi_p_db`` (one per BS), common threshold, and M^c.

    The constructor enforces ``xi_p >= (K-1)/K * xi_c`` for every BS.
    """

    xi_p_db: np.ndarray
    xi_c_db: float = 5.0
    m_c_max: int = 2

    def __post_init__(self):
        xp = np.atleast_1d(np.asarray(self.xi_p_db, dtype=float))
        object.__setattr__(self, "xi_p_db", xp)
        if self.m_c_max < 1:
            raise ScenarioError("m_c_max must be >= 1")
        K = xp.size
        if np.any(xp < (K - 1) / K * self.xi_c_db - 1e-12):
            raise ScenarioError("private thresholds must satisfy xi_p >= (K-1)/K * xi_c")

    @classmethod
    def uniform(cls, n_bs: int, xi_p_db: float = 20.0, xi_c_db: float = 5.0, m_c_max: int = 2):
        return cls(np.full(n_bs, float(xi_p_db)), xi_c_db, m_c_max)

    @property
    def guarantees_disjoint(self) -> bool:
        """True when no gain row can meet both the private and common tests.

        A private row has ``L_k - mean(L) > (K-1)/K * xi_p``, so the two
        tests exclude each other once ``xi_p >= K/(K-1) * xi_c``.
        """
        K = self.xi_p_db.size
        if K == 1:
            return False
        return bool(np.all(self.xi_p_db >= K / (K - 1) * self.xi_c_db))


@dataclass(frozen=True)
class OstbcRates:
    """OSTBC encoding rates and stream bookkeeping for the common code.

    ``d_m`` maps common-MS id to its number of streams; an empty map means
    "not yet assigned" and is filled by :meth:`for_common`.
    """

    r_p: np.ndarray
    r_c: float = 1.0
    d_total: int = 2
    d_m: dict = field(default_factory=dict)

    def __post_init__(self):
        rp = np.atleast_1d(np.asarray(self.r_p, dtype=float))
        object.__setattr__(self, "r_p", rp)
        if np.any(~((rp > 0) & (rp <= 1))) or not 0 < self.r_c <= 1:
            raise ScenarioError("encoding rates must lie in (0, 1]")
        if self.d_total < 1:
            raise ScenarioError("d_total must be >= 1")
        if self.d_m:
            if any(int(v) < 1 for v in self.d_m.values()):
                raise ScenarioError("every common MS needs at least one stream")
            if sum(self.d_m.values()) != self.d_total:
                raise ScenarioError("stream counts must add up to d_total")

    @classmethod
    def alamouti(cls, n_bs: int, d_total: int = 2):
        return cls(np.ones(n_bs), 1.0, d_total)

    def for_common(self, common_ids: Sequence[int]) -> "OstbcRates":
        """Rates with streams of the common code split evenly over ``common_ids``.

        Leftover streams go to the lowest ids. Existing assignments that
        already cover exactly ``common_ids`` are kept.
        """
        ids = sorted(int(i) for i in common_ids)
        if self.d_m and sorted(self.d_m) == ids:
            return self
        if not ids:
            return replace(self, d_m={})
        if len(ids) > self.d_total:
            raise ScenarioError("more common MSs than streams in the common code")
        base, extra = divmod(self.d_total, len(ids))
        d_m = {m: base + (1 if i < extra else 0) for i, m in enumerate(ids)}
        return replace(self, d_m=d_m)

    def share(self, ms_id: int) -> float:
        """Stream share ``D_m / D`` of a common MS."""
        return self.d_m[ms_id] / self.d_total


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Scenario:
    topology: Topology
    mobiles: tuple
    gain_map: GainMap
    bs_power_w: np.ndarray
    rates: OstbcRates
    thresholds: Thresholds
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mobiles", tuple(self.mobiles))
        p = np.atleast_1d(np.asarray(self.bs_power_w, dtype=float))
        object.__setattr__(self, "bs_power_w", p)
        K = self.topology.n_bs
        if p.size != K or np.any(~(p > 0)):
            raise ScenarioError("need one positive transmit power per BS")
        if self.gain_map.n_bs != K and self.gain_map.n_ms:
            raise ScenarioError("gain map column count must equal number of BSs")
        if self.gain_map.n_ms != len(self.mobiles):
            raise ScenarioError("gain map row count must equal number of mobiles")
        if self.rates.r_p.size != K or self.thresholds.xi_p_db.size != K:
            raise ScenarioError("per-BS rate/threshold vectors must have length K")
        if self.thresholds.m_c_max > self.rates.d_total:
            raise ScenarioError("m_c_max cannot exceed the common-code stream count")
        ids = [ms.id for ms in self.mobiles]
        if len(set(ids)) != len(ids):
            raise ScenarioError("MS ids must be unique")

    @property
    def n_bs(self) -> int:
        return self.topology.n_bs

    @property
    def ms_ids(self) -> list[int]:
        return [ms.id for ms in self.mobiles]

    def ms_index(self, ms_id: int) -> int:
        for i, ms in enumerate(self.mobiles):
            if ms.id == ms_id:
                return i
        raise KeyError(f"no MS with id {ms_id}")

    def mobile(self, ms_id: int) -> MsState:
        return self.mobiles[self.ms_index(ms_id)]

    def with_power_dbm(self, power_dbm) -> "Scenario":
        p = dbm_to_watts(np.broadcast_to(np.asarray(power_dbm, dtype=float), (self.n_bs,)))
        return replace(self, bs_power_w=np.atleast_1d(p))

    def with_thresholds(self, thresholds: Thresholds) -> "Scenario":
        return replace(self, thresholds=thresholds)
