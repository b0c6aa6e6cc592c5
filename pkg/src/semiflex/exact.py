"""Polynomial-time exact solvers for the common-requirement case.

All applications share one CPU demand ``p`` and one memory demand ``q``.
Memory is reduced to slots first: a machine of capacity ``Q`` hosts at most
``Q // q`` instances, and the rest of the analysis runs on slot counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import (
    Application,
    Assignment,
    InfeasibleError,
    MachineConfig,
    ProblemInstance,
    StructuralError,
    to_load,
)


@dataclass(frozen=True)
class CommonCaseParams:
    n: int
    m: int
    p: Fraction
    q: int
    Q: int
    P: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "p", to_load(self.p))
        if self.P is not None:
            object.__setattr__(self, "P", to_load(self.P))
        if self.n < 1 or self.m < 1:
            raise StructuralError("n and m must be positive")
        if self.p <= 0 or self.q < 1 or self.Q < 1:
            raise StructuralError("p, q and Q must be positive")
        if self.q > self.Q:
            raise StructuralError(f"instance memory {self.q} exceeds machine memory {self.Q}")

    @property
    def slots(self) -> int:
        """Instances that fit on one machine."""
        return self.Q // self.q

    def app_ids(self) -> list[str]:
        width = len(str(self.n))
        return [f"app{i:0{width}d}" for i in range(1, self.n + 1)]

    def instance(self) -> ProblemInstance:
        apps = tuple(Application(i, self.p, self.q) for i in self.app_ids())
        return ProblemInstance(apps, MachineConfig(Q=self.Q, P=self.P), self.m)


def _check_feasible(params: CommonCaseParams) -> None:
    if params.m * params.slots < params.n:
        raise InfeasibleError(
            f"{params.n} applications cannot fit on {params.m} machines with {params.slots} slots each"
        )


def _load_level(n: int, m: int, p: Fraction, slots: int) -> Fraction:
    base, rest = divmod(n, m)
    if rest == 0 or slots > base + 1:
        return p * Fraction(n, m)
    return p * (base + Fraction(1, m // rest))


def optimal_max_load_common(params: CommonCaseParams) -> Fraction:
    """Smallest achievable maximum machine load on ``params.m`` machines.

    >>> optimal_max_load_common(CommonCaseParams(n=3, m=2, p=1, q=1, Q=2))
    Fraction(3, 2)
    """
    _check_feasible(params)
    return _load_level(params.n, params.m, params.p, params.slots)


def balance_common(params: CommonCaseParams) -> Assignment:
    """Build an assignment whose maximum load equals :func:`optimal_max_load_common`.

    Every machine first receives ``n // m`` whole applications. The
    ``n % m`` leftovers are either wrapped around the machines at level
    ``p * (n % m) / m`` (when each machine has at least two spare slots) or
    split into equal pieces, one piece per machine, with the apps that get
    more pieces going first.
    """
    _check_feasible(params)
    n, m, p = params.n, params.m, params.p
    ids = params.app_ids()
    base, rest = divmod(n, m)

    entries = []
    stack = iter(ids)
    for j in range(m):
        for _ in range(base):
            entries.append((next(stack), j, p))
    leftovers = list(stack)

    if rest and params.slots > base + 1:
        # wrap-around: each machine absorbs exactly `level` of leftover load
        level = p * Fraction(rest, m)
        j, room = 0, level
        for app in leftovers:
            remaining = p
            while remaining > 0:
                piece = min(remaining, room)
                entries.append((app, j, piece))
                remaining -= piece
                room -= piece
                if room == 0 and j + 1 < m:
                    j, room = j + 1, level
    elif rest:
        pieces, extra = divmod(m, rest)
        j = 0
        for k, app in enumerate(leftovers):
            count = pieces + 1 if k < extra else pieces
            for _ in range(count):
                entries.append((app, j, p / count))
                j += 1
    return Assignment.build(entries, m)


def _feasible_at(n: int, m: int, p: Fraction, slots: int, P: Fraction) -> bool:
    return m * slots >= n and _load_level(n, m, p, slots) <= P


def min_machines_bounds(n: int, p, q: int, P, Q: int) -> tuple[int, int]:
    p, P = to_load(p), to_load(P)
    slots = Q // q
    low = max(-(-n // slots), math.ceil(n * p / P))
    high = n * math.ceil(p / P)
    return low, high


def min_machines_common(n: int, p, q: int, P, Q: int) -> int:
    """Fewest machines whose optimal common-case load stays within ``P``.

    Binary search between the memory/CPU lower bound and ``n * ceil(p / P)``.
    """
    p, P = to_load(p), to_load(P)
    if q > Q or q < 1:
        raise StructuralError(f"instance memory {q} does not fit machine memory {Q}")
    slots = Q // q
    low, high = min_machines_bounds(n, p, q, P, Q)
    while high > low:
        mid = (low + high) // 2
        if _feasible_at(n, mid, p, slots, P):
            high = mid
        else:
            low = mid + 1
    return low


def min_machines_common_scan(n: int, p, q: int, P, Q: int) -> int:
    """Linear-scan counterpart of :func:`min_machines_common` (no monotonicity assumed)."""
    p, P = to_load(p), to_load(P)
    slots = Q // q
    m = 1
    while not _feasible_at(n, m, p, slots, P):
        m += 1
    return m


def min_machines_divisible(n: int, p, q: int, P, Q: int) -> int:
    """Machine count when ``p`` divides ``P``: pack whole applications greedily.

    Memory is first rounded down to a multiple of ``q``, so only the CPU
    divisibility is a real precondition.
    """
    p, P = to_load(p), to_load(P)
    if q > Q or q < 1:
        raise StructuralError(f"instance memory {q} does not fit machine memory {Q}")
    per_cpu = P / p
    if per_cpu.denominator != 1:
        raise StructuralError(f"p={p} does not divide P={P}")
    per_machine = min(int(per_cpu), Q // q)
    return -(-n // per_machine)
