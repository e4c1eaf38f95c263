"""Uncertainty-type bounds for the bounded-memory protocol, and a discrimination oracle.

The trade-off being checked: for a fixed outcome ``xi`` the probability mass
of X-messages with complexity <= l_x plus that of Z-messages with complexity
<= l_z is at most ``1 + 2^((l_x + l_z + M - N)/2 + c)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .codebook import (
    DecoderFamily,
    build_P_hat,
    build_Q_hat,
    natural_family,
    operational_complexity,
    validate,
)
from .protocol import (
    ZERO_PROB,
    Basis,
    BobStrategy,
    conditional_table,
    joint_conditional_state,
    posterior_distribution,
)
from .qmath import ATOL, DensityOperator, DimensionError, as_matrix, is_projector, spectral_norm

DEFAULT_C_EXPONENT = 1.5
IDENTITY_ATOL = 1e-8
IDENTITY_HARD_LIMIT = 1e-6
PGM_CUTOFF = 1e-12

__all__ = [
    "CorollaryResult",
    "CrossNorm",
    "DEFAULT_C_EXPONENT",
    "IdentityMismatch",
    "LandauPollak",
    "SweepPoint",
    "TradeoffReport",
    "asymptotic_sweep",
    "corollary_min_lengths",
    "cross_norm_check",
    "helstrom_pgm_guess",
    "landau_pollak_check",
    "tradeoff_rhs",
    "posterior_mass",
    "tradeoff_check",
    "tradeoff_for_strategy",
]


class IdentityMismatch(RuntimeError):
    """Operator expectation and posterior sum disagree: an implementation bug."""


class LandauPollak(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


class CrossNorm(NamedTuple):
    norm: float
    bound: float
    holds: bool


class CorollaryResult(NamedTuple):
    total: float
    bound: float
    holds: bool


@dataclass(frozen=True)
class TradeoffReport:
    lhs_z: float
    lhs_x: float
    rhs: float
    n: int
    m: int
    l_x: int
    l_z: int
    c_exponent: float
    posterior_z: float | None = None
    posterior_x: float | None = None

    @property
    def lhs_total(self) -> float:
        return self.lhs_z + self.lhs_x

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs_total

    @property
    def holds(self) -> bool:
        return self.slack >= -ATOL

    @property
    def identity_residual(self) -> float:
        """Largest gap between operator expectations and posterior sums (0 if unchecked)."""
        gaps = [abs(a - b) for a, b in ((self.lhs_z, self.posterior_z), (self.lhs_x, self.posterior_x))
                if b is not None]
        return max(gaps, default=0.0)


@dataclass(frozen=True)
class SweepPoint:
    n: int
    m: int
    q: float
    p_x: float
    p_z: float
    l_x: int
    l_z: int
    lhs_total: float
    rhs: float
    epsilon: float
    c0: float
    worst_outcome: int

    @property
    def holds(self) -> bool:
        return self.lhs_total <= self.rhs + ATOL


def tradeoff_rhs(l_x: float, l_z: float, m: int, n: int, c_exponent: float = DEFAULT_C_EXPONENT) -> float:
    return 1.0 + 2.0 ** ((l_x + l_z + m - n) / 2 + c_exponent)


def landau_pollak_check(rho, projs: Sequence) -> LandauPollak:
    """Sum of tr(rho A_i) against 1 + (sum over ordered pairs i != j of ||A_i A_j||^2)^(1/2).

    Raises ``ValueError`` if some ``A_i`` is not a projector.
    """
    r = as_matrix(getattr(rho, "matrix", rho))
    ops = [as_matrix(a) for a in projs]
    for a in ops:
        if not is_projector(a):
            raise ValueError("landau_pollak_check needs projectors")
    lhs = float(sum(np.real(np.einsum("ij,ji->", r, a)) for a in ops))
    cross = sum(spectral_norm(ops[i] @ ops[j]) ** 2
                for i in range(len(ops)) for j in range(len(ops)) if i != j)
    rhs = 1.0 + math.sqrt(cross)
    return LandauPollak(lhs, rhs, lhs <= rhs + ATOL)


def cross_norm_check(q_s, p_t, m: int, n: int) -> CrossNorm:
    """||Q_s P_t|| against 2^((M - N)/2)."""
    q, p = as_matrix(q_s), as_matrix(p_t)
    dim = 2 ** (n + m)
    if q.shape != (dim, dim) or p.shape != (dim, dim):
        raise DimensionError(f"operators must be {dim}x{dim}, got {q.shape} and {p.shape}")
    norm = spectral_norm(q @ p)
    bound = 2.0 ** ((m - n) / 2)
    return CrossNorm(norm, bound, norm <= bound + ATOL)


def posterior_mass(family: DecoderFamily, posterior: Mapping[str, float], max_length: int) -> float:
    """Posterior probability of the messages whose operational complexity is <= max_length."""
    return float(sum(p for z, p in posterior.items()
                     if operational_complexity(z, family) <= max_length))


def tradeoff_check(theta: DensityOperator, z_family: DecoderFamily, x_family: DecoderFamily,
                   l_x: int, l_z: int, m: int, n: int,
                   c_exponent: float = DEFAULT_C_EXPONENT, *,
                   z_posterior: Mapping[str, float] | None = None,
                   x_posterior: Mapping[str, float] | None = None) -> TradeoffReport:
    """Evaluate both sides of the trade-off for one outcome.

    The left-hand side is computed as ``tr(Theta P_hat)`` and ``tr(Theta Q_hat)``.
    When posteriors are supplied the same quantities are recomputed as
    posterior sums over messages of low operational complexity and compared.

    Raises
    ------
    ValueError
        Families with the wrong basis or overlapping message sets.
    IdentityMismatch
        The two computations differ by more than 1e-6.
    """
    if l_x < 0 or l_z < 0:
        raise ValueError("l_x and l_z must be nonnegative")
    p_hat = build_P_hat(z_family, l_z, n, m)
    q_hat = build_Q_hat(x_family, l_x, n, m)
    if theta.dim != p_hat.shape[0]:
        raise DimensionError(f"Theta has dim {theta.dim}, operators {p_hat.shape[0]}")
    report = TradeoffReport(
        lhs_z=theta.expect(p_hat),
        lhs_x=theta.expect(q_hat),
        rhs=tradeoff_rhs(l_x, l_z, m, n, c_exponent),
        n=n, m=m, l_x=l_x, l_z=l_z, c_exponent=c_exponent,
        posterior_z=None if z_posterior is None else posterior_mass(z_family, z_posterior, l_z),
        posterior_x=None if x_posterior is None else posterior_mass(x_family, x_posterior, l_x),
    )
    if report.identity_residual > IDENTITY_HARD_LIMIT:
        raise IdentityMismatch(
            f"operator expectation vs posterior sum differ by {report.identity_residual:.3g}"
        )
    return report


def memory_states(strategy: BobStrategy, xi: int, basis) -> dict:
    table = conditional_table(strategy, basis)
    return {msg: row[xi].memory_state for msg, row in table.items() if xi in row}


def tradeoff_for_strategy(strategy: BobStrategy, xi: int, l_x: int, l_z: int,
                          c_exponent: float = DEFAULT_C_EXPONENT,
                          families: tuple[DecoderFamily, DecoderFamily] | None = None) -> TradeoffReport:
    """Validated trade-off check for one outcome of a strategy.

    ``families`` is a ``(z_family, x_family)`` pair; it defaults to the natural
    families of a keep-type built-in.
    """
    if families is None:
        families = (natural_family(strategy, xi, Basis.Z), natural_family(strategy, xi, Basis.X))
    z_family, x_family = families
    for fam, basis in ((z_family, Basis.Z), (x_family, Basis.X)):
        report = validate(fam, memory_states(strategy, xi, basis))
        if not report.ok:
            raise ValueError(f"invalid {basis.value} decoder family for outcome {xi}:\n{report}")
    _, theta = joint_conditional_state(strategy, xi)
    return tradeoff_check(
        theta, z_family, x_family, l_x, l_z, strategy.m, strategy.n, c_exponent,
        z_posterior=posterior_distribution(strategy, xi, Basis.Z),
        x_posterior=posterior_distribution(strategy, xi, Basis.X),
    )


def supported_outcomes(strategy: BobStrategy) -> list[int]:
    table = conditional_table(strategy, Basis.Z)
    return sorted({xi for row in table.values() for xi in row})


def asymptotic_sweep(strategy_family: Callable[[int], BobStrategy], q: float, p_x: float, p_z: float,
                     n_range: Iterable[int], c_exponent: float = DEFAULT_C_EXPONENT,
                     family_builder: Callable | None = None) -> list[SweepPoint]:
    """Worst-outcome trade-off per N against ``1 + C0 2^(-eps N)``.

    Uses ``l_x = floor(p_x N)``, ``l_z = floor(p_z N)``, ``C0 = 2^c_exponent``
    and ``eps = (1 - (q + p_x + p_z)) / 2``. ``family_builder(strategy, xi)``
    returns the ``(z_family, x_family)`` pair; natural families by default.

    Raises ``ValueError`` when ``q + p_x + p_z >= 1`` or a strategy has
    ``M > qN``.
    """
    if min(q, p_x, p_z) < 0 or max(q, p_x, p_z) > 1:
        raise ValueError("q, p_x, p_z must lie in [0, 1]")
    if q + p_x + p_z >= 1:
        raise ValueError(f"q + p_x + p_z = {q + p_x + p_z} >= 1; the trade-off needs it below 1")
    eps = (1 - (q + p_x + p_z)) / 2
    c0 = 2.0**c_exponent
    points = []
    for n in n_range:
        strategy = strategy_family(n)
        if strategy.n != n:
            raise ValueError(f"strategy family returned n={strategy.n} for N={n}")
        if strategy.m > q * n + 1e-12:
            raise ValueError(f"memory M={strategy.m} exceeds qN={q * n} at N={n}")
        l_x, l_z = math.floor(p_x * n + 1e-12), math.floor(p_z * n + 1e-12)
        worst, worst_xi = -math.inf, -1
        for xi in supported_outcomes(strategy):
            fams = family_builder(strategy, xi) if family_builder else None
            rep = tradeoff_for_strategy(strategy, xi, l_x, l_z, c_exponent, fams)
            if rep.lhs_total > worst:
                worst, worst_xi = rep.lhs_total, xi
        points.append(SweepPoint(n, strategy.m, q, p_x, p_z, l_x, l_z, worst,
                                 1 + c0 * 2.0 ** (-eps * n), eps, c0, worst_xi))
    return points


def corollary_min_lengths(z_family: DecoderFamily, x_family: DecoderFamily,
                          posteriors: tuple[Mapping[str, float], Mapping[str, float]],
                          m: int, n: int, c_exponent: float = DEFAULT_C_EXPONENT) -> CorollaryResult:
    """Max complexity over the X support plus over the Z support, against N - M - 2c.

    ``posteriors`` is ``(z_posterior, x_posterior)``. Both families must cover
    every message of positive posterior probability (``ValueError`` otherwise).
    """
    z_post, x_post = posteriors
    maxima = []
    for fam, post in ((z_family, z_post), (x_family, x_post)):
        support = [msg for msg, p in post.items() if p > ZERO_PROB]
        lengths = [operational_complexity(msg, fam) for msg in support]
        if any(math.isinf(v) for v in lengths):
            missing = [z for z, v in zip(support, lengths) if math.isinf(v)]
            raise ValueError(f"{fam.basis.value} family misses supported messages {missing[:4]}")
        maxima.append(max(lengths, default=0))
    total = float(sum(maxima))
    bound = n - m - 2 * c_exponent
    return CorollaryResult(total, bound, total >= bound - ATOL)


def helstrom_pgm_guess(states: Sequence, priors: Sequence[float]) -> float:
    """Success probability of the pretty good measurement.

    ``M_i = R p_i rho_i R`` with ``R`` the pseudo-inverse square root of the
    average state (eigenvalues below 1e-12 dropped). Optimal for two
    equiprobable pure states.
    """
    priors = np.asarray(priors, dtype=float)
    if len(priors) != len(states) or np.any(priors < 0) or abs(priors.sum() - 1) > ATOL:
        raise ValueError("priors must be a probability vector, one entry per state")
    mats = []
    for s in states:
        if hasattr(s, "amplitudes"):
            mats.append(s.projector())
        else:
            mats.append(as_matrix(getattr(s, "matrix", s)))
    dims = {a.shape for a in mats}
    if len(dims) != 1:
        raise DimensionError("states must share one dimension")
    avg = sum(p * r for p, r in zip(priors, mats))
    w, v = np.linalg.eigh((avg + avg.conj().T) / 2)
    inv_sqrt = np.where(w > PGM_CUTOFF, 1 / np.sqrt(np.clip(w, PGM_CUTOFF, None)), 0.0)
    r = (v * inv_sqrt) @ v.conj().T
    total = 0.0
    for p, rho in zip(priors, mats):
        meas = r @ (p * rho) @ r
        total += p * float(np.real(np.einsum("ij,ji->", meas, rho)))
    return total
