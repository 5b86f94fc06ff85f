"""Failure-probability aggregation and the composable security parameter.

A distillation run that silently fails with probability eps yields a key
that is sqrt(eps (2 - eps))-close in trace distance to an ideal one; that
conversion, the per-step budget bookkeeping, and the trivial guessing
lower bound live here. Per-step probabilities are carried in log2 form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qkdd.bounds import exp2


def _log1p_log2(x: float) -> float:
    return math.log1p(x) / math.log(2.0)


def composable_zeta(eps: float) -> float:
    """Trace-distance security parameter sqrt(eps (2 - eps)) for eps in [0,1]."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0,1], got {eps}")
    return math.sqrt(eps * (2.0 - eps))


def composable_zeta_log2(eps_log2: float) -> float:
    """log2 of the security parameter from log2(eps); safe for tiny eps.

    log2 zeta = (1 + log2 eps + log2(1 - eps/2)) / 2.
    """
    if eps_log2 > 0.0:
        raise ValueError("log2 of a probability cannot be positive")
    half_eps = exp2(eps_log2 - 1.0)
    return 0.5 * (1.0 + eps_log2 + _log1p_log2(-half_eps))


def compose_rounds(zeta_per_round: float, rounds: int) -> float:
    """Security parameter after composing many rounds: additive, capped at 1."""
    if zeta_per_round < 0.0 or rounds < 0:
        raise ValueError("inputs must be nonnegative")
    return min(1.0, rounds * zeta_per_round)


def failure_lower_bound(k_initial: int) -> float:
    """Guessing bound: any scheme spending k_initial secret bits fails with
    probability at least 2^-k_initial (0.0 once that underflows)."""
    if k_initial < 0:
        raise ValueError("k_initial must be nonnegative")
    try:
        return math.ldexp(1.0, -k_initial)
    except OverflowError:  # pragma: no cover
        return 0.0


def failure_lower_bound_log2(k_initial: int) -> float:
    if k_initial < 0:
        raise ValueError("k_initial must be nonnegative")
    return -float(k_initial)


def sum_log2(parts: list[float]) -> float:
    """log2 of a sum of probabilities given in log2 form (-inf entries ok)."""
    finite = [p for p in parts if p != float("-inf")]
    if not finite:
        return float("-inf")
    return float(np.logaddexp2.reduce(np.asarray(finite, dtype=float)))


@dataclass(frozen=True)
class FailureBudget:
    """Per-step failure contributions, log2 domain.

    eps_bs is the one-direction basis-sift failure; it enters the total
    twice (one authenticated message per direction).
    """

    eps_bs_log2: float
    eps_ev_log2: float
    eps_ph_log2: float
    eps_pa_log2: float

    @property
    def eps_total_log2(self) -> float:
        return sum_log2([self.eps_bs_log2 + 1.0, self.eps_ev_log2,
                         self.eps_ph_log2, self.eps_pa_log2])

    @property
    def eps3_log2(self) -> float:
        """Everything except estimation: 2 eps_bs + eps_ev + eps_pa."""
        return sum_log2([self.eps_bs_log2 + 1.0, self.eps_ev_log2,
                         self.eps_pa_log2])

    @property
    def eps_total(self) -> float:
        return min(1.0, exp2(self.eps_total_log2))

    @property
    def zeta(self) -> float:
        l = self.eps_total_log2
        if l >= 0.0:
            return 1.0
        return exp2(composable_zeta_log2(l))

    def as_dict(self) -> dict:
        return {
            "eps_bs_log2": self.eps_bs_log2,
            "eps_ev_log2": self.eps_ev_log2,
            "eps_ph_log2": self.eps_ph_log2,
            "eps_pa_log2": self.eps_pa_log2,
            "eps_total": self.eps_total,
            "eps_total_log2": self.eps_total_log2,
            "eps3_log2": self.eps3_log2,
            "zeta": self.zeta,
        }
