"""Operating-point optimization for the distillation pipeline.

Given a raw key size n, calibrated error rates, and a failure budget eps,
pick the basis bias and the two estimation deviations that maximize the
net key, then allocate the aggregate secret-bit cost k_3 across the
authenticated steps. The search treats the constraint eps_ph = eps by
splitting the budget between the two sampling directions and inverting
each bound for its deviation (the bounds are monotone in theta), leaving
two nested 1-D searches: the split, then the bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from qkdd.accounting import composable_zeta_log2, sum_log2
from qkdd.bounds import binary_entropy, exp2, phase_sampling_bound_log2, snap_theta

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def compression_entropy(x: float) -> float:
    """Per-bit compression needed against error patterns of rate below x.

    H(x) for x <= 1/2; beyond that the pattern count keeps growing toward
    2^n while H falls again, so the exponent saturates at 1 (no key left).
    """
    x = min(x, 1.0)
    return binary_entropy(x) if x <= 0.5 else 1.0


class InfeasibleError(Exception):
    """No parameter choice yields a positive net key under the constraints."""


def k3_simplified(eps: float, n: float) -> int:
    """Aggregate cost of the authenticated steps: -5 log2 eps + 4 log2 n + 50.

    The additive constant over-covers the exact optimum by design, which
    pins the non-estimation failure share below 1% of eps.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    if n < 2:
        raise ValueError("n must be >= 2")
    return math.ceil(-5.0 * math.log2(eps) + 4.0 * math.log2(n) + 50.0)


def epsilon3_log2(k_3: float, A: float) -> float:
    """log2 of the optimized non-estimation failure 5 A^(1/5) 2^(-(k3-4)/5)."""
    if A <= 0.0:
        raise ValueError("A must be positive")
    return math.log2(5.0) + math.log2(A) / 5.0 - (k_3 - 4.0) / 5.0


def cost_parameter(n: float, n_x: float, n_z: float, l: float) -> float:
    """A = n^2 (n_x + n_z)(n_x + n_z + l - 1), the allocation constant."""
    m = n_x + n_z
    return n * n * m * (m + l - 1.0)


def allocate_costs_real(k_3: float, n: float, n_x: float, n_z: float,
                        l: float) -> tuple[float, float, float, float]:
    """Real-valued AM-GM optimum (t_oe, k_bs, k_ev, k_pa) for a given k_3.

    At this point every failure component equals 2^-t_oe (the basis-sift
    pair contributes twice), so their sum collapses to 5 A^(1/5)
    2^(-(k3-4)/5).
    """
    m = n_x + n_z
    A = cost_parameter(n, n_x, n_z, l)
    t_oe = k_3 / 5.0 - 4.0 / 5.0 - math.log2(A) / 5.0
    k_bs = t_oe + 1.0 + math.log2(n)
    k_ev = t_oe + 1.0 + math.log2(m)
    k_pa = t_oe + 1.0 + math.log2(m + l - 1.0)
    return t_oe, k_bs, k_ev, k_pa


def allocated_failure_log2(n: float, n_x: float, n_z: float, l: float,
                           t_oe: float, k_bs: float, k_ev: float,
                           k_pa: float) -> tuple[float, float]:
    """(tag-failure sum, full sum incl. the 2^-t_oe compression term), log2."""
    m = n_x + n_z
    tags = sum_log2([
        math.log2(2.0 * n) + 1.0 - k_bs,       # both basis-sift directions
        math.log2(m) + 1.0 - k_ev,
        math.log2(m + l - 1.0) + 1.0 - k_pa,
    ])
    return tags, sum_log2([tags, -t_oe])


def allocate_costs(k_3: int, n: float, n_x: float, n_z: float,
                   l: float) -> tuple[int, int, int, int]:
    """Integer allocation (t_oe, k_bs, k_ev, k_pa) with 2k_bs+k_ev+k_pa+t_oe == k_3.

    Tag lengths are ceiled (never weaker than the real optimum), t_oe takes
    the integer remainder, and a small search over extra tag bits picks the
    assignment with the least recomputed failure sum.
    """
    t_real, kb_real, ke_real, kp_real = allocate_costs_real(k_3, n, n_x, n_z, l)
    if t_real <= 0.0:
        raise InfeasibleError(
            f"k_3 = {k_3} leaves no positive compression margin")
    base = (math.ceil(kb_real), math.ceil(ke_real), math.ceil(kp_real))
    best = None
    for db in range(4):
        for de in range(4):
            for dp in range(4):
                kb, ke, kp = base[0] + db, base[1] + de, base[2] + dp
                t = k_3 - 2 * kb - ke - kp
                if t < 1:
                    continue
                _, total = allocated_failure_log2(
                    n, n_x, n_z, l, t, kb, ke, kp)
                key = (total, db + de + dp, db, de, dp)
                if best is None or key < best[0]:
                    best = (key, (t, kb, ke, kp))
    if best is None:
        raise InfeasibleError(f"k_3 = {k_3} cannot cover the ceiled tag lengths")
    return best[1]


def pa_key_length(n_x: float, n_z: float, e_bx: float, e_bz: float,
                  theta_x: float, theta_z: float, t_oe: float,
                  include_x: bool = True, include_z: bool = True) -> int:
    """Final key length n_x[1-H(e_bz+theta_z)] + n_z[1-H(e_bx+theta_x)] - t_oe,
    floored; bases excluded from the key drop their term."""
    total = -t_oe
    if include_x:
        total += n_x * (1.0 - compression_entropy(e_bz + theta_z))
    if include_z:
        total += n_z * (1.0 - compression_entropy(e_bx + theta_x))
    return max(math.floor(total), 0)


def key_length_objective(n_x: float, n_z: float, e_bx: float, e_bz: float,
                         theta_x: float, theta_z: float, k_3: float,
                         f: float) -> float:
    """Net key length with per-basis exclusion of negative contributions:

    sum over bases of max(0, n_b [1 - f H(e_b) - H(e_other + theta_other)])
    minus k_3. A basis with a negative bracket is kept for estimation only.
    """
    cx = n_x * (1.0 - f * binary_entropy(e_bx)
                - compression_entropy(e_bz + theta_z))
    cz = n_z * (1.0 - f * binary_entropy(e_bz)
                - compression_entropy(e_bx + theta_x))
    return max(cx, 0.0) + max(cz, 0.0) - k_3


def asymptotic_key(n: float, e_bx: float, e_bz: float) -> float:
    """Infinite-size key length n [1 - H(e_bx) - H(e_bz)] (may be negative)."""
    return n * (1.0 - binary_entropy(e_bx) - binary_entropy(e_bz))


# ---------------------------------------------------------------------------
# search machinery


def solve_theta(n_sample: float, n_target: float, e_b: float,
                target_log2: float) -> float | None:
    """Smallest theta whose sampling bound is at most 2^target_log2.

    None when even theta = 1 - e_b cannot reach the target. The bound is
    strictly decreasing in theta, so plain bisection applies.
    """
    theta_max = 1.0 - e_b
    if theta_max <= 0.0:
        return None
    if phase_sampling_bound_log2(n_sample, n_target, e_b, theta_max) > target_log2:
        return None
    if phase_sampling_bound_log2(n_sample, n_target, e_b, 0.0) <= target_log2:
        return 0.0
    lo, hi = 0.0, theta_max
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if phase_sampling_bound_log2(n_sample, n_target, e_b, mid) <= target_log2:
            hi = mid
        else:
            lo = mid
    return hi


def _golden_max(fn, lo: float, hi: float, iters: int = 40):
    """Golden-section maximization of a unimodal fn on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass(frozen=True)
class _BiasPoint:
    """Best achievable point at one bias setting."""

    nr: float
    theta_x: float
    theta_z: float
    include_x: bool
    include_z: bool


def _solve_bias(n: float, e_bx: float, e_bz: float, eps_log2: float,
                f: float, k_3: int, p_x: float) -> _BiasPoint | None:
    """Optimize the budget split between the two sampling directions at
    fixed bias; returns None when no split is feasible.

    The split starts from the even division of the budget, then the X-side
    deviation is adjusted on its own grid with the Z-side re-solved from
    whatever budget remains. The net key is a staircase in the grid steps,
    so the polish is an explicit hill-climb with shrinking strides rather
    than a smooth line search.
    """
    n_x = n * p_x * p_x
    n_z = n * (1.0 - p_x) * (1.0 - p_x)
    if n_x < 1.0 or n_z < 1.0:
        return None
    grid_x = max(round(n_z), 1)   # theta_x lives on multiples of 1/n_z
    grid_z = max(round(n_x), 1)
    h_ex = binary_entropy(e_bx)
    h_ez = binary_entropy(e_bz)

    def eval_theta_x(theta_x: float) -> _BiasPoint | None:
        theta_x = min(snap_theta(theta_x, grid_x), 1.0 - e_bx)
        px_log2 = phase_sampling_bound_log2(n_x, n_z, e_bx, theta_x)
        if px_log2 >= eps_log2:
            return None
        # budget left for the Z-side bound: eps - P_x, in the log domain
        rest_log2 = eps_log2 + math.log2(-math.expm1(
            (px_log2 - eps_log2) * math.log(2.0)))
        theta_z = solve_theta(n_z, n_x, e_bz, rest_log2)
        if theta_z is None:
            return None
        theta_z = min(snap_theta(theta_z, grid_z, mode="up"), 1.0 - e_bz)
        cx = n_x * (1.0 - f * h_ex - compression_entropy(e_bz + theta_z))
        cz = n_z * (1.0 - f * h_ez - compression_entropy(e_bx + theta_x))
        return _BiasPoint(max(cx, 0.0) + max(cz, 0.0) - k_3,
                          theta_x, theta_z, cx > 0.0, cz > 0.0)

    # coarse sweep over the share of budget given to the X-side bound
    cands: list[_BiasPoint] = []
    for share_bits in np.linspace(1.0, 62.0, 24):
        theta_x = solve_theta(n_x, n_z, e_bx, eps_log2 - share_bits)
        if theta_x is None:
            continue
        pt = eval_theta_x(theta_x)
        if pt is not None:
            cands.append(pt)
    if not cands:
        return None
    best = max(cands, key=lambda pt: pt.nr)

    # deterministic polish on the theta_x grid
    quantum = 1.0 / grid_x
    for stride in (4096, 1024, 256, 64, 16, 4, 1):
        improved = True
        while improved:
            improved = False
            for sign in (1, -1):
                cand = eval_theta_x(best.theta_x + sign * stride * quantum)
                if cand is not None and cand.nr > best.nr:
                    best = cand
                    improved = True
    return best


@dataclass(frozen=True)
class OptimizedPlan:
    """Complete operating point: bias, deviations, integer cost allocation,
    key length and the recomputed failure budget."""

    n: float
    e_bx: float
    e_bz: float
    eps_target: float
    f: float
    p_x: float
    q_x: float
    n_x: float
    n_z: float
    theta_x: float
    theta_z: float
    k_3: int
    k_bs: int
    k_ev: int
    k_pa: int
    t_oe: int
    l: int
    k_ec_predicted: float
    nr: int
    include_x: bool
    include_z: bool
    eps_ph_log2: float
    eps3_log2: float
    eps_final_log2: float
    feasible: bool

    @property
    def eps_final(self) -> float:
        return exp2(self.eps_final_log2)

    @property
    def zeta(self) -> float:
        return exp2(composable_zeta_log2(min(self.eps_final_log2, 0.0)))

    def as_dict(self) -> dict:
        out = asdict(self)
        out["eps_final"] = self.eps_final
        out["zeta"] = self.zeta
        return out


def optimize(n: float, e_bx: float, e_bz: float, eps: float,
             f: float = 1.0) -> OptimizedPlan:
    """Full three-stage optimization.

    1. k_3 from the simplified closed form.
    2. Maximize the net key over (p_x, theta_x, theta_z) with the
       estimation failure pinned to eps.
    3. Re-derive the integer cost allocation and the final failure
       probability eps_3 + eps_ph.

    Deterministic; an everywhere-negative net key yields a plan flagged
    infeasible rather than an exception.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    if f < 1.0:
        raise ValueError("error-correction efficiency f must be >= 1")
    eps_log2 = math.log2(eps)
    k_3 = k3_simplified(eps, n)

    one_minus_p = np.geomspace(0.5, 5e-4, 26)
    cands: list[tuple[float, _BiasPoint]] = []
    for omp in one_minus_p:
        pt = _solve_bias(n, e_bx, e_bz, eps_log2, f, k_3, 1.0 - omp)
        if pt is not None:
            cands.append((1.0 - omp, pt))
    if not cands:
        raise InfeasibleError("no bias setting admits the failure budget")
    i_best = max(range(len(cands)), key=lambda i: cands[i][1].nr)
    p_lo = cands[max(i_best - 1, 0)][0]
    p_hi = cands[min(i_best + 1, len(cands) - 1)][0]

    cache: dict[float, _BiasPoint | None] = {}

    def nr_of_logq(u: float) -> float:
        p = 1.0 - math.exp(u)
        pt = _solve_bias(n, e_bx, e_bz, eps_log2, f, k_3, p)
        cache[p] = pt
        return pt.nr if pt is not None else -math.inf

    u_best, _ = _golden_max(nr_of_logq, math.log(1.0 - p_hi),
                            math.log(1.0 - p_lo), iters=40)
    p_x = 1.0 - math.exp(u_best)
    point = cache.get(p_x) or _solve_bias(n, e_bx, e_bz, eps_log2, f, k_3, p_x)
    if point is None or point.nr < cands[i_best][1].nr:
        p_x, point = cands[i_best]

    n_x = n * p_x * p_x
    n_z = n * (1.0 - p_x) * (1.0 - p_x)
    q_x = n_x / (n_x + n_z)

    # integer allocation; l and t_oe determine each other, so iterate
    def key_terms(t_oe: float) -> int:
        return pa_key_length(n_x, n_z, e_bx, e_bz, point.theta_x,
                             point.theta_z, t_oe,
                             point.include_x, point.include_z)

    feasible = True
    l = key_terms(k_3 / 5.0)
    t_oe = k_bs = k_ev = k_pa = 0
    if l <= 0:
        feasible = False
        l = 0
    else:
        try:
            for _ in range(10):
                t_oe, k_bs, k_ev, k_pa = allocate_costs(k_3, n, n_x, n_z, l)
                l_next = key_terms(t_oe)
                if l_next == l:
                    break
                l = l_next
                if l <= 0:
                    feasible = False
                    break
        except InfeasibleError:
            feasible = False

    lx = phase_sampling_bound_log2(
        n_x, n_z, e_bx if e_bx > 0 else 1.0 / n_x, point.theta_x)
    lz = phase_sampling_bound_log2(
        n_z, n_x, e_bz if e_bz > 0 else 1.0 / n_z, point.theta_z)
    eps_ph_log2 = min(0.0, float(np.logaddexp2(lx, lz)))

    if feasible:
        A = cost_parameter(n, n_x, n_z, l)
        eps3 = epsilon3_log2(k_3, A)
        k_ec_pred = f * (n_x * binary_entropy(e_bx) + n_z * binary_entropy(e_bz))
        nr = math.floor(l - 2 * k_bs - k_ev - k_pa - k_ec_pred)
        feasible = nr > 0
    else:
        eps3 = epsilon3_log2(k_3, cost_parameter(n, n_x, n_z, max(l, 1)))
        k_ec_pred = f * (n_x * binary_entropy(e_bx) + n_z * binary_entropy(e_bz))
        nr = 0

    return OptimizedPlan(
        n=n, e_bx=e_bx, e_bz=e_bz, eps_target=eps, f=f,
        p_x=p_x, q_x=q_x, n_x=n_x, n_z=n_z,
        theta_x=point.theta_x, theta_z=point.theta_z,
        k_3=k_3, k_bs=k_bs, k_ev=k_ev, k_pa=k_pa, t_oe=t_oe,
        l=l, k_ec_predicted=k_ec_pred, nr=max(nr, 0),
        include_x=point.include_x, include_z=point.include_z,
        eps_ph_log2=eps_ph_log2, eps3_log2=eps3,
        eps_final_log2=sum_log2([eps_ph_log2, eps3]),
        feasible=feasible,
    )


def plan_at_bias(n: float, e_bx: float, e_bz: float, eps: float, f: float,
                 q_x: float) -> tuple[float, float] | None:
    """Net key at a fixed bias ratio q_x (thetas still optimized).

    Returns (nr, p_x) or None when infeasible; used for bias-sweep curves.
    """
    r = math.sqrt(q_x / (1.0 - q_x)) if q_x < 1.0 else math.inf
    p_x = r / (1.0 + r) if math.isfinite(r) else 1.0
    k_3 = k3_simplified(eps, n)
    pt = _solve_bias(n, e_bx, e_bz, math.log2(eps), f, k_3, p_x)
    if pt is None:
        return None
    return pt.nr, p_x


def min_feasible_n(e_bx: float, e_bz: float, eps: float, f: float = 1.0,
                   n_hi: float = 1e9) -> int:
    """Smallest raw key size with a positive net key, by bisection."""

    def ok(n: float) -> bool:
        try:
            return optimize(n, e_bx, e_bz, eps, f).feasible
        except InfeasibleError:
            return False

    lo, hi = 64.0, 128.0
    while hi <= n_hi and not ok(hi):
        lo, hi = hi, hi * 2.0
    if hi > n_hi:
        raise InfeasibleError("no feasible n below the search cap")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1.0:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return math.ceil(hi)


def curve_generators(mode: str, grid, **fixed) -> list[dict]:
    """Tables behind the standard plots.

    rate_vs_n      rows (n, epsilon, rate, q_x, theta_x, theta_z)
    min_n_vs_eps   rows (epsilon, min_n)
    key_vs_bias    rows (q_x, key_length)
    optbias_vs_n   rows (n, q_x, p_x, key_length)
    """
    e_bx = fixed.get("e_bx", 0.04)
    e_bz = fixed.get("e_bz", 0.04)
    f = fixed.get("f", 1.0)
    rows: list[dict] = []
    if mode == "rate_vs_n":
        eps = fixed["eps"]
        for n in grid:
            plan = optimize(n, e_bx, e_bz, eps, f)
            rows.append({"n": n, "epsilon": eps,
                         "rate": plan.nr / n if plan.feasible else 0.0,
                         "q_x": plan.q_x, "theta_x": plan.theta_x,
                         "theta_z": plan.theta_z})
    elif mode == "min_n_vs_eps":
        for eps in grid:
            rows.append({"epsilon": eps,
                         "min_n": min_feasible_n(e_bx, e_bz, eps, f)})
    elif mode == "key_vs_bias":
        eps, n = fixed["eps"], fixed["n"]
        for q in grid:
            res = plan_at_bias(n, e_bx, e_bz, eps, f, q)
            rows.append({"q_x": q,
                         "key_length": max(res[0], 0.0) if res else 0.0})
    elif mode == "optbias_vs_n":
        eps = fixed["eps"]
        for n in grid:
            plan = optimize(n, e_bx, e_bz, eps, f)
            rows.append({"n": n, "q_x": plan.q_x, "p_x": plan.p_x,
                         "key_length": plan.nr})
    else:
        raise ValueError(f"unknown curve mode: {mode}")
    return rows
