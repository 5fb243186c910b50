"""Closed-form coding-delay upper bounds and the partition quantities behind them.

Every ``(1 + o(1))`` factor is evaluated as 1 and every asymptotic side
condition is instantiated as a finite inequality with implied constant 1
(scaled by ``BoundQuery.multiplier`` for the chunk-size thresholds).  The
results are leading-order evaluations, not finite-k guarantees; each
:class:`BoundValue` carries a note saying so.

Logarithms are base 2 except inside the Chernoff slack, which uses ``ln``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .traffic import TrafficSpec, equivalent_min_param

ASYMPTOTIC_NOTE = "o(1) terms set to leading form; side conditions use unit constants"

DENSE_REGIMES = ("dense-delay", "dense-avg", "dense-delay-unequal", "dense-avg-unequal")
CC_REGIMES = ("cc-delay", "cc-avg", "cc-delay-unequal", "cc-avg-unequal")
CCP_REGIMES = ("ccp-delay", "ccp-avg", "ccp-delay-unequal", "ccp-avg-unequal")
REGIMES = DENSE_REGIMES + CC_REGIMES + CCP_REGIMES

# growth functions for the unequal-parameter average regimes
F_K = {
    "log2": math.log2,
    "sqrt": math.sqrt,
    "loglog": lambda k: math.log2(max(math.log2(k), 2.0)),
}


def lg(x: float) -> float:
    return math.log2(x)


@dataclass(frozen=True)
class BoundQuery:
    regime: str
    k: int
    L: int
    epsilon: float
    p: float
    q: int = 1
    gamma_e: float | None = None
    gamma_a: float | None = None
    gamma_b: float | None = None
    gamma_c: float | None = None
    f_k: str = "log2"
    w: int | None = None
    multiplier: float = 1.0

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.k < 1 or self.L < 1 or self.q < 1:
            raise ValueError("k, L and q must be at least 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.f_k not in F_K:
            raise ValueError(f"unknown f_k {self.f_k!r}; choose from {sorted(F_K)}")
        if self.w is not None and self.w < 1:
            raise ValueError("w must be positive")
        if self.multiplier <= 0:
            raise ValueError("multiplier must be positive")
        if self.regime in DENSE_REGIMES and self.q != 1:
            raise ValueError(f"{self.regime} is a dense regime; q must be 1")
        if self.unequal and self.gamma_e is None:
            raise ValueError(f"{self.regime} needs gamma_e")
        if self.regime in CCP_REGIMES:
            for name in ("gamma_a", "gamma_b", "gamma_c"):
                g = getattr(self, name)
                if g is None:
                    raise ValueError(f"{self.regime} needs {name}")
                if not 0 <= g < 1:
                    raise ValueError(f"{name} = {g} outside (0, 1)")

    @property
    def unequal(self) -> bool:
        return self.regime.endswith("-unequal")

    @property
    def delta(self) -> float:
        return min(self.gamma_e / self.p, 1.0)

    @classmethod
    def from_traffic(cls, regime: str, k: int, traffic: TrafficSpec, epsilon: float, **kw) -> BoundQuery:
        """Query with ``p`` and ``gamma_e`` taken from a traffic spec."""
        eq = equivalent_min_param(traffic)
        kw.setdefault("gamma_e", eq.gamma_e)
        return cls(regime=regime, k=k, L=traffic.L, epsilon=epsilon, p=eq.p, **kw)


@dataclass(frozen=True)
class PartitionPlan:
    w: int
    w_T: int
    phi: float
    gamma_star: float
    r: int
    vacuous: bool
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class BoundValue:
    regime: str
    value: float
    w_used: int | None
    constraints_ok: bool
    violations: tuple[str, ...] = field(default_factory=tuple)
    asymptotic_note: str = ASYMPTOTIC_NOTE


def w_formula(qry: BoundQuery) -> float:
    """Unrounded partition count of the regime."""
    k, L, q, eps = qry.k, qry.L, qry.q, qry.epsilon
    base = lg(k * L / eps)
    kind = qry.regime.split("-", 1)[1]
    if kind in ("delay", "delay-unequal"):
        return (k * L * L / (q * base)) ** (1 / 3)
    if kind == "avg":
        return (k * L / (q * base)) ** 0.5
    if kind == "avg-unequal":
        return k / (q * F_K[qry.f_k](k) * base)
    raise AssertionError(kind)


def w_T(w: int, L: int) -> int:
    return L * (w - L + 1)


def gamma_star(phi: float, w_t: float, eps: float) -> tuple[float, int, bool]:
    """Chernoff slack ``sqrt((2/phi) ln(2 w_T / eps))`` and the packet floor ``r``.

    Returns ``(gamma, r, vacuous)``; when the slack reaches 1 the guarantee is
    vacuous, gamma is clamped to 1 and ``r`` is 0.
    """
    if phi <= 0 or w_t < 1 or not 0 < eps < 1:
        raise ValueError("need phi > 0, w_T >= 1 and 0 < eps < 1")
    g = math.sqrt(2 / phi * math.log(2 * w_t / eps))
    if g >= 1:
        return 1.0, 0, True
    return g, math.floor((1 - g) * phi), False


def partition_plan(qry: BoundQuery) -> PartitionPlan:
    """Partition count and per-partition quantities at the horizon ``N_T = k/p``."""
    if qry.regime in CCP_REGIMES:
        raise ValueError("CCP regimes have no closed-form partition count")
    violations = []
    if qry.w is not None:
        w = qry.w
    else:
        raw = w_formula(qry)
        w = round(raw)
        if w < qry.L:
            violations.append(f"w formula {raw:.3g} below L={qry.L}; clamped to L")
    w = max(w, qry.L)
    wt = w_T(w, qry.L)
    phi = qry.k / (w * qry.q)
    g, r, vac = gamma_star(phi, wt * qry.q, qry.epsilon)
    if vac:
        violations.append("Chernoff slack >= 1: per-partition floor is vacuous")
    return PartitionPlan(w, wt, phi, g, r, vac, tuple(violations))


def _side_conditions(qry: BoundQuery, w: int) -> list[str]:
    k, L, q, eps = qry.k, qry.L, qry.q, qry.epsilon
    out = []
    scale = qry.delta if qry.unequal else 1.0
    if qry.unequal and qry.gamma_e == 0:
        out.append("gamma_e = 0: parameters are not unequal")
    if qry.regime in DENSE_REGIMES:
        lhs = w * lg(w * L / eps)
        if lhs > scale * k:
            out.append(f"w log(wL/eps) = {lhs:.4g} > {scale:.3g} k = {scale * k:.4g}")
        if qry.regime == "dense-avg-unequal":
            cap = k / (L * lg(k * L / eps))
            fk = F_K[qry.f_k](k)
            if fk > cap:
                out.append(f"f(k) = {fk:.4g} > k/(L log(kL/eps)) = {cap:.4g}")
        return out
    qcap = scale * k / (L * lg(k * L / eps))
    if qry.regime == "cc-avg-unequal":
        qcap /= F_K[qry.f_k](k)
    if q > qcap:
        out.append(f"q = {q} > {qcap:.4g} (chunk-count condition)")
    if qry.regime in ("cc-delay", "cc-avg"):
        lhs = w * q * lg(w * L * q / eps)
        if lhs > k:
            out.append(f"wq log(wLq/eps) = {lhs:.4g} > k = {k}")
    return out


def delay_bound(qry: BoundQuery) -> BoundValue:
    """Dense and chunked-code bounds."""
    if qry.regime in CCP_REGIMES:
        raise ValueError(f"{qry.regime} is a CCP regime; use ccp_bound")
    plan = partition_plan(qry)
    w = plan.w
    k, L, q, eps = qry.k, qry.L, qry.q, qry.epsilon
    t = w * q * lg(w * q * L / eps)
    kind = qry.regime.split("-", 1)[1]
    extra = k * L / w
    if kind in ("delay", "delay-unequal"):
        extra += math.sqrt(k * t)
    if kind in ("delay", "avg"):
        extra += t
    violations = list(plan.violations) + _side_conditions(qry, w)
    return BoundValue(qry.regime, (k + extra) / qry.p, w, not violations, tuple(violations))


def alpha_threshold(
    regime: str,
    L: int,
    gamma_b: float,
    gamma_c: float,
    gamma_e: float | None = None,
    multiplier: float = 1.0,
) -> float:
    """Chunk size the CCP regime asks for, with unit implied constants."""
    if min(gamma_b, gamma_c) <= 0:
        return math.inf
    base = L / gamma_c**3 * lg(L / (gamma_b * gamma_c))
    if regime == "ccp-delay":
        t = max(base, L**4 * lg(L / gamma_b))
    elif regime == "ccp-avg":
        t = L / gamma_c * lg(L / (gamma_b * gamma_c))
    elif regime in ("ccp-delay-unequal", "ccp-avg-unequal"):
        if gamma_e is None:
            raise ValueError(f"{regime} needs gamma_e")
        if gamma_e <= 0:
            return math.inf
        if regime == "ccp-delay-unequal":
            t = max(base, L / gamma_e**3 * lg(L / (gamma_e * gamma_b)))
        else:
            t = L / (gamma_e**2 * gamma_c) * lg(L / (gamma_b * gamma_c))
    else:
        raise ValueError(f"{regime} is not a CCP regime")
    return multiplier * t


def ccp_bound(qry: BoundQuery) -> BoundValue:
    """Precoded chunked-code bound; the squared-gamma_b term is kept as gamma_b**2."""
    if qry.regime not in CCP_REGIMES:
        raise ValueError(f"{qry.regime} is not a CCP regime; use delay_bound")
    ga, gb, gc = qry.gamma_a, qry.gamma_b, qry.gamma_c
    value = (1 + gc) * (1 + (1 + ga) * gb + gb * gb) * qry.k / qry.p
    violations = []
    if min(ga, gb, gc) == 0:
        violations.append("gamma constants must be strictly positive; zero-gap limit evaluated")
    alpha = qry.k / qry.q
    need = alpha_threshold(qry.regime, qry.L, gb, gc, qry.gamma_e, qry.multiplier)
    if alpha < need:
        violations.append(f"alpha = {alpha:.4g} < {need:.4g} (chunk-size condition)")
    if qry.unequal and qry.gamma_e == 0:
        violations.append("gamma_e = 0: parameters are not unequal")
    if ga * gb > 0:
        lhs = alpha**2 / (ga * ga * gb * gb)
        rhs = qry.k / lg(1 / qry.epsilon)
        if lhs >= rhs:
            violations.append(f"alpha^2/(ga gb)^2 = {lhs:.4g} >= k/log(1/eps) = {rhs:.4g}")
    return BoundValue(qry.regime, value, None, not violations, tuple(violations))


def evaluate(qry: BoundQuery) -> BoundValue:
    if qry.regime in CCP_REGIMES:
        return ccp_bound(qry)
    return delay_bound(qry)
