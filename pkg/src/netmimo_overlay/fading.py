"""Monte-Carlo check of the long-term throughput approximation.

With unit-energy OSTBC symbols the codeword Gram matrix is ``S S^H = R T I``,
so every trace in the instantaneous SINR collapses to a squared Frobenius
norm of the fading matrix, e.g. ``Tr(H S S^H H^H) = R T ||H||_F^2``. The
noise trace is replaced by its mean ``N_r T`` and ``T`` cancels. The
closed-form rate ``log2(1 + E[num] / E[den])`` is then compared with the
sample mean of ``log2(1 + num / den)`` over i.i.d. Rayleigh draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelDraw",
    "draw_channels",
    "private_sinr_terms",
    "instantaneous_sinr_private",
    "common_sinr_terms",
    "instantaneous_sinr_common",
    "ApproxCheckConfig",
    "ApproxCheckResult",
    "approx_check",
]


@dataclass(frozen=True)
class ChannelDraw:
    """Fading seen through the private (``h1``) and common (``h2``) antenna groups.

    Arrays have shape ``(..., N_r, N_t^p)`` and ``(..., N_r, N_t^c)``; any
    leading axes index independent draws (and, for common MSs, the BS).
    """

    h1: np.ndarray
    h2: np.ndarray

    @property
    def n_r(self) -> int:
        return self.h1.shape[-2]

    @property
    def n_t_p(self) -> int:
        return self.h1.shape[-1]

    @property
    def n_t_c(self) -> int:
        return self.h2.shape[-1]


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def draw_channels(rng: np.random.Generator, n_r: int, n_t_p: int, n_t_c: int,
                  size=()) -> ChannelDraw:
    """i.i.d. CN(0, 1) entries for both antenna groups."""
    size = tuple(np.atleast_1d(size)) if size != () else ()
    return ChannelDraw(_cn(rng, size + (n_r, n_t_p)), _cn(rng, size + (n_r, n_t_c)))


def _fro2(h):
    return np.sum(h.real ** 2 + h.imag ** 2, axis=(-2, -1))


def private_sinr_terms(draw: ChannelDraw, snr, theta_c, r_p=1.0, r_c=1.0):
    """Numerator and denominator of the SINR at which a private MS decodes the common code."""
    num = snr * theta_c * (r_c / draw.n_t_c) * _fro2(draw.h2)
    den = snr * (1.0 - theta_c) * (r_p / draw.n_t_p) * _fro2(draw.h1) + draw.n_r
    return num, den


def instantaneous_sinr_private(draw: ChannelDraw, snr, theta_c, r_p=1.0, r_c=1.0):
    num, den = private_sinr_terms(draw, snr, theta_c, r_p, r_c)
    return num / den


def common_sinr_terms(draw: ChannelDraw, snr, theta_c, r_p=1.0, r_c=1.0, coherent=True):
    """Numerator and denominator of a common MS's SINR for the common code.

    ``draw`` carries a BS axis just before the antenna axes (shape
    ``(..., K, N_r, N_t)``); ``snr``, ``theta_c`` and ``r_p`` are length-K.
    All BSs transmit the same common codeword, so with ``coherent=True`` the
    signal is ``||sum_k sqrt(s_k theta_k Rc / N_t^c) H_k2||_F^2``. The
    incoherent mode drops the cross-BS terms per draw; both have the same
    mean because the channels are independent.
    """
    snr = np.asarray(snr, dtype=float)
    theta_c = np.asarray(theta_c, dtype=float)
    r_p = np.broadcast_to(np.asarray(r_p, dtype=float), snr.shape)
    amp = np.sqrt(snr * theta_c * r_c / draw.n_t_c)[:, None, None]
    if coherent:
        num = _fro2(np.sum(amp * draw.h2, axis=-3))
    else:
        num = np.sum(_fro2(amp * draw.h2), axis=-1)
    intf = snr * (1.0 - theta_c) * r_p / draw.n_t_p
    den = np.sum(intf * _fro2(draw.h1), axis=-1) + draw.n_r
    return num, den


def instantaneous_sinr_common(draw: ChannelDraw, snr, theta_c, r_p=1.0, r_c=1.0, coherent=True):
    num, den = common_sinr_terms(draw, snr, theta_c, r_p, r_c, coherent)
    return num / den


@dataclass(frozen=True)
class ApproxCheckConfig:
    n_t_p: int = 2
    n_t_c: int = 2
    n_r: int = 4
    snr_grid_db: tuple = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)
    theta: float = 0.5
    r_p: float = 1.0
    r_c: float = 1.0
    n_draws: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.n_draws < 1000:
            raise ValueError("n_draws must be >= 1000")
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")


@dataclass(frozen=True)
class ApproxCheckResult:
    snr_db: float
    mc_mean: float
    closed_form: float
    rel_error: float
    n_draws: int
    ci95_halfwidth: float
    moments: dict = field(default_factory=dict, compare=False)

    def row(self) -> dict:
        return {"snr_db": self.snr_db, "mc_mean": self.mc_mean, "ci95": self.ci95_halfwidth,
                "closed_form": self.closed_form, "rel_error": self.rel_error}


def approx_check(config: ApproxCheckConfig = ApproxCheckConfig()) -> list[ApproxCheckResult]:
    """Compare the sample mean rate with the closed form at each SNR point.

    Each SNR point draws from its own substream of ``config.seed`` so results
    do not depend on the order or number of points evaluated before it.
    """
    streams = np.random.SeedSequence(config.seed).spawn(len(config.snr_grid_db))
    out = []
    for snr_db, ss in zip(config.snr_grid_db, streams):
        rng = np.random.default_rng(ss)
        snr = 10.0 ** (snr_db / 10.0)
        draw = draw_channels(rng, config.n_r, config.n_t_p, config.n_t_c, size=config.n_draws)
        num, den = private_sinr_terms(draw, snr, config.theta, config.r_p, config.r_c)
        rate = np.log2(1.0 + num / den)
        mc = float(rate.mean())
        se = float(rate.std(ddof=1) / np.sqrt(rate.size))
        e_num = snr * config.theta * config.r_c * config.n_r
        e_den = snr * (1 - config.theta) * config.r_p * config.n_r + config.n_r
        closed = float(np.log2(1.0 + e_num / e_den))
        rel = abs(mc - closed) / max(mc, np.finfo(float).tiny)
        moments = {
            "num_mean": float(num.mean()), "num_se": float(num.std(ddof=1) / np.sqrt(num.size)),
            "num_expected": float(e_num),
            "den_mean": float(den.mean()), "den_se": float(den.std(ddof=1) / np.sqrt(den.size)),
            "den_expected": float(e_den),
        }
        out.append(ApproxCheckResult(float(snr_db), mc, closed, float(rel), config.n_draws,
                                     1.96 * se, moments))
    return out
