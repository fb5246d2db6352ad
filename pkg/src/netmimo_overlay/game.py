"""Distributive long-term power allocation game and its solvers.

Player ``k`` (a BS) picks the fraction ``theta_k`` of its power spent on the
common code to maximise ``min(g1(theta), g2_k(theta_k), f2_k(theta_k))``.
``g1`` and ``g2_k`` grow with ``theta_k`` and ``f2_k`` shrinks, so every
player's best reply sits where the increasing part meets ``f2_k``.

:func:`solve_ne` finds the unique equilibrium by bisection on the common-set
level ``A = g1(theta)``: for a trial level each BS sets
``theta_k(A) = max(xi_k(A), eta_k)``, where ``xi_k(A)`` solves
``f2_k = A`` in closed form and ``eta_k`` (the local anchor) solves
``g2_k = f2_k``. ``g1(theta(A))`` is nonincreasing in ``A``, so the fixed
point ``A = g1(theta(A))`` is bracketed and found by halving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import ScenarioError
from .roots import bisect_increasing
from .throughput import OverlayModel

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "SolverTrace",
    "InconsistentScenarioError",
    "solve_local_anchor",
    "local_anchors",
    "solve_theta_for_target",
    "solve_ne",
    "best_response_step",
    "best_response_dynamics",
    "BestResponseResult",
    "verify_ne",
    "centralized_oracle",
    "MAX_ORACLE_BS",
]

log = logging.getLogger(__name__)

MAX_ORACLE_BS = 4


class InconsistentScenarioError(ScenarioError):
    """The bisection could not be initialised with a valid bracket."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances for the equilibrium solver.

    ``tol_a`` is the relative stopping gap ``|A - g1(theta(A))| <= tol_a (1 + g1)``;
    ``root_tol`` is the acceptance tolerance for scalar roots and NE checks.
    Scalar roots themselves are bisected to floating-point resolution.
    """

    tol_a: float = 1e-10
    max_iter: int = 200
    root_tol: float = 1e-9
    grid_step: float = 0.005

    def __post_init__(self):
        if not 0 < self.tol_a <= 1e-2 or not 0 < self.root_tol <= 1e-2:
            raise ValueError("tol_a and root_tol must lie in (0, 1e-2]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.grid_step <= 1:
            raise ValueError("grid_step must lie in (0, 1]")


@dataclass(frozen=True)
class IterationRecord:
    i: int
    a_target: float
    theta: np.ndarray
    a_achieved: float
    bracket: tuple

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]


@dataclass
class SolverTrace:
    """History of one equilibrium solve.

    ``anchor`` holds the local anchors ``eta``; ``initial_bracket`` the
    ``(A_min, A_max)`` pair from initialisation; each record's ``bracket`` is
    the interval whose midpoint was tried at that iteration.
    """

    iterations: list = field(default_factory=list)
    converged: bool = False
    ne: np.ndarray | None = None
    anchor: np.ndarray | None = None
    initial_bracket: tuple | None = None
    objective: float = float("nan")

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    def rows(self) -> list[dict]:
        out = []
        for rec in self.iterations:
            row = {"i": rec.i, "a_target": rec.a_target, "a_achieved": rec.a_achieved}
            for k, t in enumerate(rec.theta):
                row[f"theta_{k + 1}"] = float(t)
            row["bracket_width"] = rec.bracket_width
            out.append(row)
        return out


# ---------------------------------------------------------------------------
# Local quantities
# ---------------------------------------------------------------------------
def _unit(k, model):
    e = np.zeros(model.n_bs)
    e[k] = 1.0
    return e


def solve_local_anchor(k: int, model: OverlayModel, cfg: SolverConfig | None = None) -> float:
    """Split ``eta_k`` at which BS ``k``'s cancellation term meets its private term.

    Returns 1 for a BS without a private MS and 0 without a common set.
    """
    if not model.has_private[k]:
        return 1.0
    if not model.has_common:
        return 0.0
    s, w, rp, rc, cw = (model.s_private[k], model.w_private[k], model.r_p[k],
                        model.r_c, model.common_weight)

    def h(x):
        g2 = cw * np.log2(1 + s * x * rc / (1 + s * (1 - x) * rp))
        f2 = w * np.log2(1 + s * (1 - x) * rp)
        return g2 - f2

    return float(bisect_increasing(h, 0.0, 1.0))


def local_anchors(model: OverlayModel, cfg: SolverConfig | None = None, order=None) -> np.ndarray:
    """Anchors for every BS, computed in ``order`` (they are independent)."""
    eta = np.empty(model.n_bs)
    for k in (range(model.n_bs) if order is None else order):
        eta[k] = solve_local_anchor(k, model, cfg)
    return eta


def solve_theta_for_target(k: int, a_target: float, model: OverlayModel) -> float:
    """Split at which BS ``k``'s weighted private throughput equals ``a_target``.

    Closed form ``1 - (2**(a/w) - 1) / (s Rp)``; may be negative (callers
    clamp with the local anchor). A BS without a private MS returns 1.
    """
    if a_target < 0:
        raise ValueError("a_target must be >= 0")
    if not model.has_private[k]:
        return 1.0
    w, s, rp = model.w_private[k], model.s_private[k], model.r_p[k]
    with np.errstate(over="ignore"):
        return float(1.0 - np.expm1(a_target / w * np.log(2.0)) / (s * rp))


def _theta_at(a, eta, model):
    xi = np.array([solve_theta_for_target(k, a, model) for k in range(model.n_bs)])
    return np.maximum(xi, eta)


# ---------------------------------------------------------------------------
# Equilibrium solver
# ---------------------------------------------------------------------------
def solve_ne(model: OverlayModel, cfg: SolverConfig | None = None, anchor_order=None) -> SolverTrace:
    """Bisection on the common-set level to the unique Nash equilibrium.

    Raises
    ------
    InconsistentScenarioError
        If the initial bracket is inverted (``A_max < A_min``).
    """
    cfg = SolverConfig() if cfg is None else cfg
    trace = SolverTrace()
    if not model.has_common:
        # no common code: every BS serves its private MS at full power
        trace.ne = np.zeros(model.n_bs)
        trace.anchor = np.zeros(model.n_bs)
        trace.converged = True
        trace.objective = float(model.objective(trace.ne))
        return trace

    eta = local_anchors(model, cfg, anchor_order)
    trace.anchor = eta
    a_min = float(model.g1(eta))
    theta1 = _theta_at(a_min, eta, model)
    a_max = float(model.g1(theta1))
    if a_max < a_min - 1e-12 * (1 + abs(a_min)):
        raise InconsistentScenarioError(
            f"inconsistent scenario: A_max={a_max!r} < A_min={a_min!r}")
    a_max = max(a_max, a_min)
    trace.initial_bracket = (a_min, a_max)

    lo, hi = a_min, a_max
    theta = theta1
    for i in range(1, cfg.max_iter + 1):
        a = 0.5 * (lo + hi)
        theta = _theta_at(a, eta, model)
        a_bar = float(model.g1(theta))
        trace.iterations.append(IterationRecord(i, a, theta, a_bar, (lo, hi)))
        if abs(a - a_bar) <= cfg.tol_a * (1 + abs(a_bar)):
            trace.converged = True
            break
        if a < a_bar:
            lo = a
        else:
            hi = a
    else:
        log.warning("equilibrium bisection stopped after %d iterations", cfg.max_iter)
    trace.ne = theta
    trace.objective = float(model.objective(theta))
    return trace


# ---------------------------------------------------------------------------
# Best response
# ---------------------------------------------------------------------------
def best_response_step(k: int, theta, model: OverlayModel, cfg: SolverConfig | None = None) -> float:
    """Maximiser of BS ``k``'s payoff given the other BSs' splits.

    The payoff is the minimum of increasing terms and the decreasing private
    term, so the maximiser is the largest of the individual crossings: each
    common MS's weighted rate against ``f2_k``, and the cancellation term
    against ``f2_k`` (the local anchor).
    """
    theta = model.check_theta(theta)
    if not model.has_common:
        return 0.0
    if not model.has_private[k]:
        return 1.0
    e = _unit(k, model)
    base = theta * (1 - e)
    s, w, rp = model.s_private[k], model.w_private[k], model.r_p[k]
    roots = [solve_local_anchor(k, model, cfg)]
    for j in range(model.n_common):
        wj = model.w_common[j] * model.share[j]

        def h(x, j=j, wj=wj):
            rate = model.common_rates(base + x * e)[j]
            return wj * rate - w * np.log2(1 + s * (1 - x) * rp)

        roots.append(bisect_increasing(h, 0.0, 1.0))
    return float(max(roots))


@dataclass
class BestResponseResult:
    history: list
    converged: bool
    cycling: bool

    @property
    def theta(self) -> np.ndarray:
        return self.history[-1]


def best_response_dynamics(model: OverlayModel, theta0=None, n_steps: int = 50,
                           tol: float = 1e-9, simultaneous: bool = True,
                           cfg: SolverConfig | None = None) -> BestResponseResult:
    """Iterate best replies from ``theta0`` for up to ``n_steps`` rounds.

    Carries no convergence guarantee. ``cycling`` is set when a profile
    revisits an earlier (non-adjacent) one within ``tol``.
    """
    theta = model.check_theta(0.5 if theta0 is None else theta0)
    history = [theta.copy()]
    converged = cycling = False
    for _ in range(n_steps):
        new = theta.copy()
        for k in range(model.n_bs):
            src = theta if simultaneous else new
            new[k] = best_response_step(k, src, model, cfg)
        history.append(new)
        if np.max(np.abs(new - theta)) <= tol:
            converged = True
            break
        if any(np.max(np.abs(new - h)) <= tol for h in history[:-2]):
            cycling = True
            break
        theta = new
    return BestResponseResult(history, converged, cycling)


# ---------------------------------------------------------------------------
# Checks and the centralised oracle
# ---------------------------------------------------------------------------
def verify_ne(theta, model: OverlayModel, n_deviations: int = 200,
              cfg: SolverConfig | None = None) -> bool:
    """True if no BS gains more than ``root_tol`` by deviating to a grid point."""
    cfg = SolverConfig() if cfg is None else cfg
    theta = model.check_theta(theta)
    base = model.payoff(theta)
    grid = np.linspace(0.0, 1.0, n_deviations)
    for k in range(model.n_bs):
        profiles = np.repeat(theta[None, :], grid.size, axis=0)
        profiles[:, k] = grid
        dev = model.payoff(profiles)[:, k]
        if np.any(dev > base[k] + cfg.root_tol):
            return False
    return True


def centralized_oracle(model: OverlayModel, grid_step: float = 0.005) -> np.ndarray:
    """Exhaustive grid maximiser of the minimum weighted throughput.

    Ties go to the lexicographically smallest profile.
    """
    if model.n_bs > MAX_ORACLE_BS:
        raise ScenarioError(
            f"centralized oracle limited to K <= {MAX_ORACLE_BS}; use a "
            "coordinate-descent search for larger networks")
    n = int(round(1.0 / grid_step))
    if n < 1 or abs(n * grid_step - 1.0) > 1e-9:
        raise ValueError("grid_step must divide 1")
    axis = np.arange(n + 1) / n
    vals = model.objective_on_grid([axis] * model.n_bs)
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return axis[list(idx)]

