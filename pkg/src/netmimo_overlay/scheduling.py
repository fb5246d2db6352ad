"""Long-term user scheduling into private and common MS sets.

Each MS labels itself from its own long-term gains (in dB):

* private member of BS ``k`` if ``L_k - L_j > xi_p[k]`` for every ``j != k``;
* common member if ``|L_k - mean(L)| <= xi_c`` for every ``k``;
* neither otherwise.

Each BS then picks one of its private candidates at random and the common
set is truncated to ``m_c_max`` members by random selection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import GainMap, Scenario, Thresholds

__all__ = [
    "Label",
    "UserSets",
    "private_candidate",
    "is_common_candidate",
    "label_ms",
    "schedule_users",
    "schedule_scenario",
]

PRIVATE = "private"
COMMON = "common"
NEITHER = "neither"


class Label(NamedTuple):
    kind: str
    bs: int | None = None


def private_candidate(row_db, xi_p_db) -> int | None:
    """Index of the BS whose private test the row passes, or ``None``.

    With a single BS the test is vacuous and BS 0 is returned.
    """
    row = np.asarray(row_db, dtype=float)
    xi = np.broadcast_to(np.asarray(xi_p_db, dtype=float), row.shape)
    K = row.size
    if K == 1:
        return 0
    for k in range(K):
        # strict inequality: equality at the threshold is not private
        if np.all(row[k] - np.delete(row, k) > xi[k]):
            return k
    return None


def is_common_candidate(row_db, xi_c_db: float) -> bool:
    row = np.asarray(row_db, dtype=float)
    return bool(np.all(np.abs(row - row.mean()) <= xi_c_db))


def label_ms(row_db, thresholds: Thresholds) -> Label:
    """Label one MS from its row of long-term gains in dB.

    The private test takes precedence over the common test.

    Examples
    --------
    >>> th = Thresholds.uniform(3, xi_p_db=20.0, xi_c_db=5.0)
    >>> label_ms([-118.30, -140.14, -139.29], th)
    Label(kind='private', bs=0)
    >>> label_ms([-135.24, -136.08, -135.35], th)
    Label(kind='common', bs=None)
    """
    k = private_candidate(row_db, thresholds.xi_p_db)
    if k is not None:
        return Label(PRIVATE, k)
    if is_common_candidate(row_db, thresholds.xi_c_db):
        return Label(COMMON)
    return Label(NEITHER)


@dataclass(frozen=True)
class UserSets:
    """Scheduling result.

    ``private[k]`` is the id of BS ``k``'s private MS (or ``None``),
    ``common`` the sorted ids of the common set, ``unassigned`` the rest.
    """

    private: tuple
    common: tuple
    unassigned: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "private", tuple(self.private))
        object.__setattr__(self, "common", tuple(sorted(self.common)))
        object.__setattr__(self, "unassigned", tuple(sorted(self.unassigned)))
        pv = [m for m in self.private if m is not None]
        groups = pv + list(self.common) + list(self.unassigned)
        if len(groups) != len(set(groups)):
            raise ValueError("an MS appears in more than one set")

    @property
    def n_bs(self) -> int:
        return len(self.private)

    @property
    def scheduled(self) -> list[int]:
        return [m for m in self.private if m is not None] + list(self.common)

    def serving_bs(self, ms_id: int) -> int | None:
        for k, m in enumerate(self.private):
            if m == ms_id:
                return k
        return None

    def label_of(self, ms_id: int) -> str:
        if ms_id in self.common:
            return COMMON
        if self.serving_bs(ms_id) is not None:
            return PRIVATE
        return NEITHER

    def records(self, ms_ids: Sequence[int]) -> list[dict]:
        """One record per MS: id, label and serving BS (``None`` for common/unassigned)."""
        rows = []
        for m in ms_ids:
            lab = self.label_of(m)
            if lab == NEITHER:
                lab = "unassigned"
            rows.append({"id": int(m), "label": lab, "serving_bs": self.serving_bs(m)})
        return rows


def schedule_users(gain_map: GainMap, thresholds: Thresholds,
                   rng: np.random.Generator, ms_ids: Sequence[int] | None = None) -> UserSets:
    """Form the private sets and the common set from long-term gains.

    Candidates are sorted by id before any random pick, so the result does
    not depend on the order of rows for a fixed seed.
    """
    K = gain_map.n_bs if gain_map.n_ms else thresholds.xi_p_db.size
    ids = list(range(gain_map.n_ms)) if ms_ids is None else [int(m) for m in ms_ids]
    if len(ids) != gain_map.n_ms:
        raise ValueError("ms_ids length must match the gain map")
    gains_db = gain_map.gains_db if gain_map.n_ms else np.zeros((0, K))

    priv_cand: list[list[int]] = [[] for _ in range(K)]
    common_cand: list[int] = []
    for m, row in zip(ids, gains_db):
        lab = label_ms(row, thresholds)
        if lab.kind == PRIVATE:
            priv_cand[lab.bs].append(m)
        elif lab.kind == COMMON:
            common_cand.append(m)

    private = []
    for cand in priv_cand:
        cand.sort()
        private.append(int(cand[rng.integers(len(cand))]) if cand else None)

    common_cand.sort()
    if len(common_cand) > thresholds.m_c_max:
        pick = rng.choice(len(common_cand), size=thresholds.m_c_max, replace=False)
        common = sorted(common_cand[i] for i in pick)
    else:
        common = common_cand
    chosen = set(common) | {m for m in private if m is not None}
    unassigned = [m for m in ids if m not in chosen]
    return UserSets(tuple(private), tuple(common), tuple(unassigned))


def schedule_scenario(scenario: Scenario, rng: np.random.Generator | None = None) -> UserSets:
    """Schedule a scenario with its own seeded generator unless one is given."""
    if rng is None:
        rng = np.random.default_rng(scenario.rng_seed)
    return schedule_users(scenario.gain_map, scenario.thresholds, rng, scenario.ms_ids)
