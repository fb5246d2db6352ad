"""Long-term throughput of the private/common overlay and the game payoffs.

All rates are in bits/s/Hz (log base 2). ``s[m, k] = P_k L_mk / N0`` is the
long-term SNR of the link from BS ``k`` to MS ``m``. With ``theta`` the
per-BS fraction of power spent on the common code:

* common MS ``j`` decodes the common code at
  ``log2(1 + sum_k s_jk theta_k Rc / (1 + sum_k s_jk (1 - theta_k) Rp_k))``;
* the private MS ``l`` of BS ``k`` must also decode (and cancel) the common
  code, which it can do up to
  ``log2(1 + s_lk theta_k Rc / (1 + s_lk (1 - theta_k) Rp_k))``;
* after cancellation it gets ``log2(1 + s_lk (1 - theta_k) Rp_k)``.

The common code is sent at the smallest of these decodable rates and each
common MS receives its stream share ``D_m / D`` of it.

:class:`OverlayModel` precomputes the arrays once per scheduled scenario and
evaluates everything with numpy broadcasting over a trailing ``K`` axis, so
the same code serves single profiles and whole grids of profiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OstbcRates, Scenario, ScenarioError
from .scheduling import UserSets

__all__ = [
    "OverlayModel",
    "PayoffComponents",
    "ThroughputReport",
    "as_power_split",
    "snr_term",
    "common_rate_at_common_ms",
    "common_rate_at_private_ms",
    "private_throughput",
    "payoff_components",
    "min_weighted_throughput",
]

COMMON_FREE = "common-free"
PRIVATE_FREE = "private-free"


def as_power_split(theta, n_bs: int) -> np.ndarray:
    """Validate a common-power split vector ``theta_c`` (each entry in [0, 1])."""
    th = np.broadcast_to(np.asarray(theta, dtype=float), (n_bs,)).copy()
    if np.any(~((th >= 0) & (th <= 1))):
        raise ValueError("power split entries must lie in [0, 1]")
    return th


def snr_term(k: int, m: int, scenario: Scenario) -> float:
    """Long-term SNR ``P_k L_mk / N0`` of MS ``m`` (by id) from BS ``k``."""
    i = scenario.ms_index(m)
    gm = scenario.gain_map
    return float(scenario.bs_power_w[k] * gm.gains[i, k] / gm.noise_power_w)


@dataclass(frozen=True)
class PayoffComponents:
    """Pieces of BS ``k``'s payoff ``min(f1, f2)`` with ``f1 = min(g1, g2)``.

    ``mode`` is ``None`` normally, ``"common-free"`` when there is no common
    set (payoff is ``f2``) and ``"private-free"`` when BS ``k`` has no private
    MS (payoff is ``g1``). Undefined components are ``nan``.
    """

    g1: float
    g2: float
    f1: float
    f2: float
    mode: str | None = None

    @property
    def payoff(self) -> float:
        if self.mode == COMMON_FREE:
            return self.f2
        if self.mode == PRIVATE_FREE:
            return self.g1
        return min(self.f1, self.f2)


@dataclass(frozen=True)
class ThroughputReport:
    per_ms: dict
    weighted: dict
    min_weighted: float
    binding_ms: int

    def rows(self) -> list[dict]:
        return [{"ms_id": m, "weighted": self.weighted[m], "raw": self.per_ms[m],
                 "binding": m == self.binding_ms} for m in self.per_ms]


class OverlayModel:
    """Vectorised throughput model of one scheduled scenario.

    Parameters
    ----------
    scenario : Scenario
    sets : UserSets
        Output of the scheduler for ``scenario``.
    rates : OstbcRates, optional
        Defaults to ``scenario.rates``; streams are split over the common set
        if not already assigned.
    """

    def __init__(self, scenario: Scenario, sets: UserSets, rates: OstbcRates | None = None):
        rates = (scenario.rates if rates is None else rates).for_common(sets.common)
        K = scenario.n_bs
        if sets.n_bs != K:
            raise ScenarioError("user sets do not match the number of BSs")
        snr = (scenario.gain_map.gains * scenario.bs_power_w[None, :]
               / scenario.gain_map.noise_power_w)
        self.n_bs = K
        self.sets = sets
        self.rates = rates
        self.private_ids = sets.private
        self.common_ids = sets.common
        self.has_private = np.array([m is not None for m in sets.private], dtype=bool)
        self.s_private = np.zeros(K)
        self.w_private = np.zeros(K)
        for k, m in enumerate(sets.private):
            if m is not None:
                i = scenario.ms_index(m)
                self.s_private[k] = snr[i, k]
                self.w_private[k] = scenario.mobiles[i].weight
        idx = [scenario.ms_index(j) for j in sets.common]
        self.s_common = snr[idx, :] if idx else np.zeros((0, K))
        self.w_common = np.array([scenario.mobiles[i].weight for i in idx], dtype=float)
        self.share = np.array([rates.share(j) for j in sets.common], dtype=float)
        self.r_p = rates.r_p.copy()
        self.r_c = float(rates.r_c)
        self.common_weight = (float(np.min(self.w_common * self.share))
                              if idx else float("nan"))

    # -- structure ---------------------------------------------------------
    @property
    def n_common(self) -> int:
        return len(self.common_ids)

    @property
    def has_common(self) -> bool:
        return self.n_common > 0

    def check_theta(self, theta) -> np.ndarray:
        return as_power_split(theta, self.n_bs)

    # -- per-link rates (broadcast over a trailing K axis) -----------------
    def private_rates(self, theta) -> np.ndarray:
        """Post-cancellation private rate at each BS, shape ``(..., K)``."""
        theta = np.asarray(theta, dtype=float)
        return np.log2(1.0 + self.s_private * (1.0 - theta) * self.r_p)

    def sic_rates(self, theta) -> np.ndarray:
        """Rate up to which each private MS can decode the common code."""
        theta = np.asarray(theta, dtype=float)
        sig = self.s_private * theta * self.r_c
        intf = self.s_private * (1.0 - theta) * self.r_p
        return np.log2(1.0 + sig / (1.0 + intf))

    def common_rates(self, theta) -> np.ndarray:
        """Decodable common-code rate at each common MS, shape ``(..., J)``."""
        theta = np.asarray(theta, dtype=float)
        sig = theta @ (self.s_common * self.r_c).T
        intf = (1.0 - theta) @ (self.s_common * self.r_p[None, :]).T
        return np.log2(1.0 + sig / (1.0 + intf))

    # -- game payoff components -------------------------------------------
    def g1(self, theta) -> np.ndarray:
        """``min_j w_j (D_j/D) C_j^c``, the common-set term shared by all players."""
        if not self.has_common:
            raise ScenarioError("g1 is undefined without a common set")
        return np.min(self.w_common * self.share * self.common_rates(theta), axis=-1)

    def g2(self, theta) -> np.ndarray:
        """``min_j(w_j D_j/D) * C_l^p`` per BS (``nan`` without a private MS)."""
        val = self.common_weight * self.sic_rates(theta)
        return np.where(self.has_private, val, np.nan)

    def f2(self, theta) -> np.ndarray:
        """Weighted private throughput per BS (``nan`` without a private MS)."""
        return np.where(self.has_private, self.w_private * self.private_rates(theta), np.nan)

    def f1(self, theta) -> np.ndarray:
        g1 = self.g1(theta)
        g2 = self.g2(theta)
        return np.where(self.has_private, np.minimum(g1[..., None], g2), g1[..., None])

    def payoff(self, theta) -> np.ndarray:
        """Each player's payoff at ``theta``, shape ``(..., K)``."""
        if not self.has_common:
            return self.f2(theta)
        f1 = self.f1(theta)
        return np.where(self.has_private, np.minimum(f1, self.f2(theta)), f1)

    def components(self, k: int, theta) -> PayoffComponents:
        th = self.check_theta(theta)
        nan = float("nan")
        if not self.has_common:
            return PayoffComponents(nan, nan, nan, float(self.f2(th)[k]), COMMON_FREE)
        g1 = float(self.g1(th))
        if not self.has_private[k]:
            return PayoffComponents(g1, nan, g1, nan, PRIVATE_FREE)
        g2 = float(self.g2(th)[k])
        return PayoffComponents(g1, g2, min(g1, g2), float(self.f2(th)[k]))

    # -- global objective ---------------------------------------------------
    def objective(self, theta) -> np.ndarray:
        """Minimum weighted throughput over all scheduled MSs, shape ``(...)``."""
        theta = np.asarray(theta, dtype=float)
        terms = []
        if np.any(self.has_private):
            f2 = self.w_private * self.private_rates(theta)
            terms.append(np.min(f2[..., self.has_private], axis=-1))
        if self.has_common:
            code_rate = np.min(self.common_rates(theta), axis=-1)
            if np.any(self.has_private):
                sic = self.sic_rates(theta)[..., self.has_private]
                code_rate = np.minimum(code_rate, np.min(sic, axis=-1))
            terms.append(self.common_weight * code_rate)
        if not terms:
            raise ScenarioError("no scheduled MS: objective undefined")
        out = terms[0]
        for t in terms[1:]:
            out = np.minimum(out, t)
        return out

    def objective_on_grid(self, axes, chunk: int = 1 << 20) -> np.ndarray:
        """Objective on the Cartesian grid ``axes[0] x ... x axes[K-1]``.

        Private and cancellation terms are separable per BS and evaluated on
        the 1-D axes; only the common-MS terms are formed on the full grid,
        in slabs along the first axis to bound memory.
        """
        axes = [np.asarray(a, dtype=float) for a in axes]
        K = self.n_bs
        shape = tuple(a.size for a in axes)

        def bcast(k, v):
            sh = [1] * K
            sh[k] = v.size
            return v.reshape(sh)

        sep = np.full((1,) * K, np.inf)
        any_priv = bool(np.any(self.has_private))
        for k in range(K):
            if not self.has_private[k]:
                continue
            a = axes[k]
            f2 = self.w_private[k] * np.log2(1 + self.s_private[k] * (1 - a) * self.r_p[k])
            sep = np.minimum(sep, bcast(k, f2))
            if self.has_common:
                sig = self.s_private[k] * a * self.r_c
                sic = np.log2(1 + sig / (1 + self.s_private[k] * (1 - a) * self.r_p[k]))
                sep = np.minimum(sep, bcast(k, self.common_weight * sic))
        if not self.has_common:
            if not any_priv:
                raise ScenarioError("no scheduled MS: objective undefined")
            return np.broadcast_to(sep, shape).copy()

        out = np.empty(shape)
        inner = int(np.prod(shape[1:])) if K > 1 else 1
        step = max(1, chunk // max(inner, 1))
        for start in range(0, shape[0], step):
            sl = slice(start, min(start + step, shape[0]))
            sub = [axes[0][sl]] + axes[1:]
            code = np.full((sub[0].size,) + shape[1:], np.inf)
            for j in range(self.n_common):
                sig = 0.0
                intf = 1.0
                for k in range(K):
                    sig = sig + bcast(k, self.s_common[j, k] * self.r_c * sub[k])
                    intf = intf + bcast(k, self.s_common[j, k] * self.r_p[k] * (1 - sub[k]))
                code = np.minimum(code, np.log2(1 + sig / intf))
            blk = self.common_weight * code
            sep_blk = sep[sl] if sep.shape[0] > 1 else sep
            out[sl] = np.minimum(blk, sep_blk)
        return out

    def report(self, theta) -> ThroughputReport:
        """Per-MS throughputs at one profile and the binding MS."""
        th = self.check_theta(theta)
        per_ms, weighted = {}, {}
        priv = self.private_rates(th)
        for k, m in enumerate(self.private_ids):
            if m is not None:
                per_ms[m] = float(priv[k])
                weighted[m] = float(self.w_private[k] * priv[k])
        if self.has_common:
            code = float(np.min(self.common_rates(th)))
            if np.any(self.has_private):
                code = min(code, float(np.min(self.sic_rates(th)[self.has_private])))
            for j, m in enumerate(self.common_ids):
                per_ms[m] = float(self.share[j] * code)
                weighted[m] = float(self.w_common[j] * per_ms[m])
        if not per_ms:
            raise ScenarioError("no scheduled MS: objective undefined")
        binding = min(weighted, key=lambda m: (weighted[m], m))
        return ThroughputReport(per_ms, weighted, weighted[binding], binding)


# ---------------------------------------------------------------------------
# Scenario-level convenience wrappers
# ---------------------------------------------------------------------------
def _rp(rates, k):
    return float(rates.r_p[k])


def common_rate_at_common_ms(j: int, theta, scenario: Scenario, sets: UserSets,
                             rates: OstbcRates | None = None) -> float:
    """Decodable rate of the common code at common MS ``j`` (by id)."""
    if j not in sets.common:
        raise ValueError(f"MS {j} is not in the common set")
    rates = scenario.rates if rates is None else rates
    th = as_power_split(theta, scenario.n_bs)
    s = np.array([snr_term(k, j, scenario) for k in range(scenario.n_bs)])
    sig = np.sum(s * th * rates.r_c)
    intf = np.sum(s * (1 - th) * rates.r_p)
    return float(np.log2(1 + sig / (1 + intf)))


def common_rate_at_private_ms(l: int, k: int, theta_k_c: float, scenario: Scenario,
                              rates: OstbcRates | None = None) -> float:
    """Rate up to which private MS ``l`` of BS ``k`` can decode the common code."""
    rates = scenario.rates if rates is None else rates
    s = snr_term(k, l, scenario)
    return float(np.log2(1 + s * theta_k_c * rates.r_c / (1 + s * (1 - theta_k_c) * _rp(rates, k))))


def private_throughput(m: int, k: int, theta_k_c: float, scenario: Scenario,
                       rates: OstbcRates | None = None) -> float:
    """Throughput of private MS ``m`` of BS ``k`` after cancelling the common code."""
    rates = scenario.rates if rates is None else rates
    s = snr_term(k, m, scenario)
    return float(np.log2(1 + s * (1 - theta_k_c) * _rp(rates, k)))


def payoff_components(k: int, theta, scenario: Scenario, sets: UserSets,
                      rates: OstbcRates | None = None) -> PayoffComponents:
    return OverlayModel(scenario, sets, rates).components(k, theta)


def min_weighted_throughput(theta, scenario: Scenario, sets: UserSets,
                            rates: OstbcRates | None = None) -> ThroughputReport:
    return OverlayModel(scenario, sets, rates).report(theta)
