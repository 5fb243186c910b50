"""Per-link transmission opportunities and Bernoulli losses.

Each link draws its opportunity times and its loss outcomes from its own
sub-stream, split off the caller's stream in link order.  The materialized
helpers (:func:`build_schedule`, :func:`apply_losses`) and the lazy merged
iterator used by the simulator therefore see identical events.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

REGULAR = "regular"
POISSON = "poisson"


@dataclass(frozen=True)
class TrafficSpec:
    """Traffic parameters of a line network.

    ``p[i]`` is the success probability of link ``i + 1``; ``lam`` holds the
    Poisson transmission rates and is required when ``kind == "poisson"``.
    """

    kind: str
    p: tuple[float, ...]
    lam: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if self.lam is not None:
            object.__setattr__(self, "lam", tuple(float(x) for x in self.lam))
        if self.kind not in (REGULAR, POISSON):
            raise ValueError(f"unknown traffic kind {self.kind!r}")
        if not self.p:
            raise ValueError("at least one link is required")
        for i, x in enumerate(self.p):
            if not 0 < x <= 1:
                raise ValueError(f"p[{i}] = {x} outside (0, 1]")
        if self.kind == POISSON and self.lam is None:
            raise ValueError("poisson traffic needs per-link rates")
        if self.lam is not None:
            if len(self.lam) != len(self.p):
                raise ValueError("lam and p have different lengths")
            for i, x in enumerate(self.lam):
                if not 0 < x <= 1:
                    raise ValueError(f"lam[{i}] = {x} outside (0, 1]")

    @property
    def L(self) -> int:
        return len(self.p)

    @classmethod
    def regular(cls, p: Sequence[float]) -> TrafficSpec:
        return cls(REGULAR, tuple(p))

    @classmethod
    def poisson(cls, lam: Sequence[float], p: Sequence[float]) -> TrafficSpec:
        return cls(POISSON, tuple(p), tuple(lam))

    def rates(self) -> tuple[float, ...]:
        """Equivalent per-link success rates (``p_i`` or ``lam_i * p_i``)."""
        if self.kind == REGULAR:
            return self.p
        return tuple(a * b for a, b in zip(self.lam, self.p))


@dataclass(frozen=True, slots=True)
class LinkEvent:
    link: int
    time: float
    success: bool | None = None


@dataclass(frozen=True)
class EquivalentParams:
    p: float
    gamma_e: float | None
    unequal: bool


def equivalent_min_param(spec: TrafficSpec) -> EquivalentParams:
    """Minimum equivalent rate, minimum adjacent gap, and pairwise distinctness.

    ``gamma_e`` is None for a single link.
    """
    r = spec.rates()
    gaps = [abs(r[i] - r[i - 1]) for i in range(1, len(r))]
    return EquivalentParams(
        p=min(r),
        gamma_e=min(gaps) if gaps else None,
        unequal=len(set(r)) == len(r),
    )


def _link_times(spec: TrafficSpec, link: int, horizon: float, rng: random.Random) -> Iterator[float]:
    if spec.kind == REGULAR:
        t = 1
        while t <= horizon:
            yield t
            t += 1
    else:
        lam = spec.lam[link - 1]
        t = rng.expovariate(lam)
        while t <= horizon:
            yield t
            t += rng.expovariate(lam)


def _split(rng: random.Random, n: int) -> list[random.Random]:
    return [random.Random(rng.getrandbits(64)) for _ in range(n)]


def build_schedule(spec: TrafficSpec, horizon: float, rng: random.Random) -> list[list[LinkEvent]]:
    """Opportunity times per link up to ``horizon``; success left undetermined."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    subs = _split(rng, spec.L)
    return [
        [LinkEvent(i, t) for t in _link_times(spec, i, horizon, subs[i - 1])]
        for i in range(1, spec.L + 1)
    ]


def _check_probs(p: Sequence[float]) -> None:
    for i, x in enumerate(p):
        if not 0 < x <= 1:
            raise ValueError(f"p[{i}] = {x} outside (0, 1]")


def apply_losses(
    schedule: Sequence[Sequence[LinkEvent]], p: Sequence[float], rng: random.Random
) -> list[list[LinkEvent]]:
    """Mark every opportunity of link ``i`` successful with probability ``p[i-1]``."""
    if len(schedule) != len(p):
        raise ValueError(f"{len(schedule)} links in schedule but {len(p)} probabilities")
    _check_probs(p)
    subs = _split(rng, len(p))
    return [
        [LinkEvent(ev.link, ev.time, subs[i].random() < p[i]) for ev in events]
        for i, events in enumerate(schedule)
    ]


def opportunities(
    spec: TrafficSpec,
    sched_rng: random.Random,
    loss_rng: random.Random,
    horizon: float = math.inf,
    upstream_first: bool = True,
) -> Iterator[tuple[float, int, bool]]:
    """Lazily merged ``(time, link, success)`` events in global time order.

    Simultaneous events are ordered by increasing link index, or decreasing
    when ``upstream_first`` is False.  Uses the same sub-stream split as
    :func:`build_schedule` / :func:`apply_losses` with the same two streams.
    """
    L = spec.L
    scheds = _split(sched_rng, L)
    losses = _split(loss_rng, L)
    p = spec.p
    order = range(1, L + 1) if upstream_first else range(L, 0, -1)
    if spec.kind == REGULAR:
        draws = [r.random for r in losses]
        t = 1
        while t <= horizon:
            for i in order:
                yield t, i, draws[i - 1]() < p[i - 1]
            t += 1
        return

    def tagged(i: int):
        key = i if upstream_first else -i
        draw = losses[i - 1].random
        pi = p[i - 1]
        for t in _link_times(spec, i, horizon, scheds[i - 1]):
            yield t, key, i, draw() < pi

    for t, _, i, ok in heapq.merge(*(tagged(i) for i in range(1, L + 1))):
        yield t, i, ok
