"""Closed-form statistical quantities for finite-size key distillation.

Everything that is a formula lives here: binary entropy, the sampling bound
on the unobserved error rate (with its exact hypergeometric oracle), the
Gaussian large-sample approximation, error-pattern counting, and the
Azuma-inequality alternative for mixed-basis analysis. Failure
probabilities are computed in the log2 domain throughout, since realistic
values (2^-100 and below) underflow doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp

LN2 = math.log(2.0)

# exact big-integer rationals below this population size, log-gamma above
_EXACT_N_MAX = 200


def exp2(x: float) -> float:
    """2**x with graceful underflow to 0.0 (math.exp2 needs Python 3.11)."""
    try:
        return 2.0 ** x
    except OverflowError:
        return math.inf if x > 0 else 0.0


def binary_entropy(x: float) -> float:
    """H(x) = -x log2 x - (1-x) log2(1-x), with H(0) = H(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0,1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def binary_entropy_prime(x: float) -> float:
    """H'(x) = log2((1-x)/x) for x in (0,1)."""
    if not 0.0 < x < 1.0:
        raise ValueError("derivative defined on (0,1)")
    return math.log2((1.0 - x) / x)


def xi(e_b: float, q: float, theta: float) -> float:
    """Exponent coefficient of the sampling bound.

    xi = H(e_b + theta - q*theta) - q H(e_b) - (1-q) H(e_b + theta);
    strictly positive for theta > 0 by strict concavity of H.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie strictly inside (0,1), got {q}")
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    if e_b + theta > 1.0:
        raise ValueError(f"e_b + theta = {e_b + theta} exceeds 1")
    return (binary_entropy(e_b + theta - q * theta)
            - q * binary_entropy(e_b)
            - (1.0 - q) * binary_entropy(e_b + theta))


def xi_taylor(e_b: float, q: float, theta: float) -> float:
    """Second-order expansion of xi around theta = 0 (small-theta regime)."""
    return q * (1.0 - q) * theta * theta / (2.0 * LN2 * e_b * (1.0 - e_b))


def phase_sampling_bound_log2(n_sample: int, n_target: int,
                              e_b: float, theta: float) -> float:
    """log2 of the bound on Pr{unobserved rate >= e_b + theta}.

    n_sample bits were measured with error rate e_b; n_target is the
    complementary part of the population. The bound is
    sqrt(N) / sqrt(e_b (1-e_b) n_sample n_target) * 2^(-N xi) with
    N = n_sample + n_target. e_b = 0 must be substituted by the caller
    (see SamplingInput.substituted).
    """
    if n_sample < 1 or n_target < 1:
        raise ValueError("both sample and target counts must be >= 1")
    if not 0.0 < e_b < 1.0:
        raise ValueError(
            f"e_b must lie strictly inside (0,1), got {e_b}; "
            "apply the zero-error substitution first")
    total = n_sample + n_target
    q = n_sample / total
    prefactor_log2 = 0.5 * (math.log2(total) - math.log2(e_b)
                            - math.log2(1.0 - e_b)
                            - math.log2(n_sample) - math.log2(n_target))
    return prefactor_log2 - total * xi(e_b, q, theta)


def hypergeometric_tail_exact(N: int, n: int, k: int, m: int) -> float:
    """Exact Pr{k | m, n, N} = C(m,k) C(N-m, n-k) / C(N,n).

    The exact oracle the sampling bound is checked against: big-integer
    rationals for small N, log-gamma evaluation above. Combinatorially
    impossible arguments give 0, not an error.
    """
    if not (0 <= k <= min(n, m) and 0 <= m <= N and 0 <= n <= N):
        raise ValueError("need 0 <= k <= min(n,m) and n, m <= N")
    if n - k > N - m:
        return 0.0
    if N <= _EXACT_N_MAX:
        val = Fraction(math.comb(m, k) * math.comb(N - m, n - k),
                       math.comb(N, n))
        return float(val)

    def logc(a: int, b: int) -> float:
        return (math.lgamma(a + 1) - math.lgamma(b + 1)
                - math.lgamma(a - b + 1))

    return math.exp(logc(m, k) + logc(N - m, n - k) - logc(N, n))


@dataclass(frozen=True)
class SamplingInput:
    """Realized sifting counts, per-basis error rates, and deviations.

    theta_x (deviation added to the X-basis rate to bound the other
    basis) is a multiple of 1/n_z, and theta_z of 1/n_x: the sampling
    argument only distinguishes integer error counts.
    """

    n_x: int
    n_z: int
    e_bx: float
    e_bz: float
    theta_x: float
    theta_z: float

    def __post_init__(self):
        if self.n_x < 1 or self.n_z < 1:
            raise ValueError("n_x and n_z must be >= 1")
        for e, theta, label in ((self.e_bx, self.theta_x, "x"),
                                (self.e_bz, self.theta_z, "z")):
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"e_b{label} outside [0,1]")
            if theta < 0.0:
                raise ValueError(f"theta_{label} negative")
            if e + theta > 1.0 + 1e-12:
                raise ValueError(f"e_b{label} + theta_{label} exceeds 1")
        for theta, grid, label in ((self.theta_x, self.n_z, "theta_x"),
                                   (self.theta_z, self.n_x, "theta_z")):
            steps = theta * grid
            if abs(steps - round(steps)) > 1e-6:
                raise ValueError(
                    f"{label} must be an integer multiple of 1/{grid}")

    @property
    def q_x(self) -> float:
        return self.n_x / (self.n_x + self.n_z)

    def substituted(self) -> "SamplingInput":
        """Zero-error singularity fix: e_b = 0 becomes one error in n."""
        out = self
        if out.e_bx == 0.0:
            out = replace(out, e_bx=1.0 / out.n_x)
        if out.e_bz == 0.0:
            out = replace(out, e_bz=1.0 / out.n_z)
        return out


def snap_theta(theta: float, n_target: int, mode: str = "nearest") -> float:
    """Round theta onto the 1/n_target grid ('nearest', 'up' or 'down')."""
    steps = theta * n_target
    if mode == "up":
        steps = math.ceil(steps - 1e-9)
    elif mode == "down":
        steps = math.floor(steps + 1e-9)
    else:
        steps = round(steps)
    return max(steps, 0) / n_target


def phase_failure_parts_log2(s: SamplingInput) -> tuple[float, float]:
    """log2 bounds for the two directions (X samples, then Z samples)."""
    s = s.substituted()
    lx = phase_sampling_bound_log2(s.n_x, s.n_z, s.e_bx, s.theta_x)
    lz = phase_sampling_bound_log2(s.n_z, s.n_x, s.e_bz, s.theta_z)
    return lx, lz


def phase_failure_total_log2(s: SamplingInput) -> float:
    """log2 of the combined estimation failure, clamped to probability 1."""
    lx, lz = phase_failure_parts_log2(s)
    return min(0.0, float(np.logaddexp2(lx, lz)))


def phase_failure_total(s: SamplingInput) -> float:
    """Combined estimation failure bound as a linear probability (<= 1)."""
    return exp2(phase_failure_total_log2(s))


def gaussian_approx_failure(n: int, e_b: float, theta: float) -> float:
    """Large-sample approximation in the balanced regime (n bits per basis):

    1 / (2 sqrt(2 n e (1-e))) * exp(-theta^2 n / (4 e (1-e))).
    """
    return exp2(gaussian_approx_failure_log2(n, e_b, theta))


def gaussian_approx_failure_log2(n: int, e_b: float, theta: float) -> float:
    if not 0.0 < e_b < 1.0:
        raise ValueError("e_b must lie strictly inside (0,1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    v = e_b * (1.0 - e_b)
    pre_log2 = -1.0 - 0.5 * math.log2(2.0 * n * v)
    return pre_log2 - theta * theta * n / (4.0 * v) / LN2


def phase_pattern_count_log2(n_bits: int, e_b: float, theta: float) -> float:
    """log2 of the number of candidate error patterns of rate < e_b + theta.

    That count is sum_{j <= ceil((e+theta) n - 1)} C(n, j). For
    e + theta < 1/3 the closed form n H(e + theta) upper-bounds it (the
    sum is dominated by the next binomial coefficient); otherwise the sum
    is evaluated directly in the log domain.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    x = e_b + theta
    if x < 0.0:
        raise ValueError("e_b + theta negative")
    top = min(math.ceil(x * n_bits - 1.0), n_bits)
    if top <= 0:
        return 0.0
    if x < 1.0 / 3.0:
        return n_bits * binary_entropy(x)
    js = np.arange(0, top + 1)
    logs = (gammaln(n_bits + 1) - gammaln(js + 1) - gammaln(n_bits - js + 1))
    return float(logsumexp(logs) / LN2)


def azuma_phase_bound(n: int, eps_az: float, alpha: float) -> tuple[float, float]:
    """Mixed-basis estimate via Azuma's inequality.

    Returns (deviation, probability): the combined rate deviates from
    alpha times the observed one by at least (1 + alpha) eps_az with
    probability at most 4 exp(-n eps_az^2). Vacuous values above 1 are
    returned as-is; callers clamp.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if eps_az < 0.0 or alpha < 1.0:
        raise ValueError("need eps_az >= 0 and alpha >= 1")
    return (1.0 + alpha) * eps_az, 4.0 * math.exp(-n * eps_az * eps_az)


def azuma_single_bound(n: int, eps_az: float) -> float:
    """One-variable form: Pr{|rate - probability| >= eps} <= 2 e^(-n eps^2 / 2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * math.exp(-n * eps_az * eps_az / 2.0)
