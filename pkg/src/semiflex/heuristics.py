"""List heuristics for the packing objective.

Single-instanced baselines place each application whole (classic
two-dimensional bin packing). The multi-instanced heuristics binary-search
the machine count and, for each probed count, place whole applications
first and then split the ones that did not fit across the remaining CPU.

Internally all loads are scaled to integers by a common denominator so the
inner loops avoid Fraction arithmetic; results are converted back exactly.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import (
    Application,
    Assignment,
    InfeasibleError,
    PackingResult,
    ProblemInstance,
    StructuralError,
    lower_bound_machines,
    validate,
)


class FitRule(enum.Enum):
    FIRST_FIT = "ff"
    NEXT_FIT = "nf"
    WORST_FIT = "wf"


class MultiStrategy(enum.Enum):
    CPU_ORIENTED = "cpu"
    MEM_ORIENTED = "mem"


@dataclass(frozen=True)
class AppOrder:
    """Processing order for the single-instanced baselines.

    ``kind`` is one of ``mem-inc``, ``mem-dec``, ``cpu-inc``, ``cpu-dec``,
    ``ratio-inc``, ``ratio-dec`` or ``random``; ``seed`` only matters for
    ``random``.
    """

    kind: str
    seed: int = 0

    KINDS = ("mem-inc", "mem-dec", "cpu-inc", "cpu-dec", "ratio-inc", "ratio-dec", "random")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise StructuralError(f"unknown order {self.kind!r}")

    def arrange(self, apps):
        by_id = sorted(apps, key=lambda a: a.id)
        if self.kind == "random":
            random.Random(self.seed).shuffle(by_id)
            return by_id
        attr, direction = self.kind.split("-")
        if attr == "mem":
            key = lambda a: a.q  # noqa: E731
        elif attr == "cpu":
            key = lambda a: a.p  # noqa: E731
        else:
            key = lambda a: a.p / a.q  # noqa: E731
        # stable sort keeps id order among ties
        return sorted(by_id, key=key, reverse=direction == "dec")


MEM_INC, MEM_DEC = AppOrder("mem-inc"), AppOrder("mem-dec")
CPU_INC, CPU_DEC = AppOrder("cpu-inc"), AppOrder("cpu-dec")
RATIO_INC, RATIO_DEC = AppOrder("ratio-inc"), AppOrder("ratio-dec")


def RANDOM(seed: int) -> AppOrder:
    return AppOrder("random", seed)


def _scale(instance: ProblemInstance) -> int:
    P = instance.config.P
    return math.lcm(P.denominator, *(a.p.denominator for a in instance.apps))


class _Machines:
    """Free CPU/memory bookkeeping in scaled integer units."""

    def __init__(self, cpu: int, mem: int, count: int = 0):
        self.cpu_cap = cpu
        self.mem_cap = mem
        self.free_cpu = [cpu] * count
        self.free_mem = [mem] * count
        self.cursor = 0

    def __len__(self):
        return len(self.free_cpu)

    def open(self) -> int:
        self.free_cpu.append(self.cpu_cap)
        self.free_mem.append(self.mem_cap)
        return len(self.free_cpu) - 1

    def fits(self, j: int, p: int, q: int) -> bool:
        return self.free_cpu[j] >= p and self.free_mem[j] >= q

    def pick_whole(self, rule: FitRule, p: int, q: int) -> Optional[int]:
        count = len(self.free_cpu)
        if rule is FitRule.FIRST_FIT:
            for j in range(count):
                if self.fits(j, p, q):
                    return j
            return None
        if rule is FitRule.NEXT_FIT:
            for k in range(count):
                j = (self.cursor + k) % count
                if self.fits(j, p, q):
                    self.cursor = j
                    return j
            return None
        best = None
        for j in range(count):
            if self.fits(j, p, q) and (best is None or self.free_mem[j] > self.free_mem[best]):
                best = j
        return best

    def walk(self, rule: FitRule) -> list[int]:
        """Machine visiting order for splitting one application."""
        count = len(self.free_cpu)
        if rule is FitRule.FIRST_FIT:
            return list(range(count))
        if rule is FitRule.NEXT_FIT:
            return [(self.cursor + k) % count for k in range(count)]
        return sorted(range(count), key=lambda j: (-self.free_mem[j], j))

    def take(self, j: int, p: int, q: int) -> None:
        self.free_cpu[j] -= p
        self.free_mem[j] -= q


def _require_cap(instance: ProblemInstance):
    if instance.config.P is None:
        raise StructuralError("packing needs a CPU cap P")


def _finish(instance, entries, scale, machine_count, algorithm, probes=()) -> PackingResult:
    a = Assignment.build(((app, j, Fraction(r, scale)) for app, j, r in entries), machine_count).compacted()
    return PackingResult(a, validate(instance, a, enforce_cpu_cap=True), algorithm, list(probes))


def pack_single(instance: ProblemInstance, rule: FitRule, order: AppOrder) -> PackingResult:
    """Place every application whole; open a machine when nothing fits."""
    _require_cap(instance)
    P, Q = instance.config.P, instance.config.Q
    for a in instance.apps:
        if a.p > P or a.q > Q:
            raise InfeasibleError(f"application {a.id!r} does not fit a single machine")
    scale = _scale(instance)
    machines = _Machines(int(P * scale), Q)
    entries = []
    for a in order.arrange(instance.apps):
        p = int(a.p * scale)
        j = machines.pick_whole(rule, p, a.q)
        if j is None:
            j = machines.open()
            machines.cursor = j
        machines.take(j, p, a.q)
        entries.append((a.id, j, p))
    return _finish(instance, entries, scale, len(machines), f"single/{rule.value}/{order.kind}")


def _place(instance: ProblemInstance, m: int, strategy: MultiStrategy, rule: FitRule, scale: int):
    P, Q = instance.config.P, instance.config.Q
    machines = _Machines(int(P * scale), Q, m)
    by_id = sorted(instance.apps, key=lambda a: a.id)
    if strategy is MultiStrategy.CPU_ORIENTED:
        phase1 = sorted(by_id, key=lambda a: a.p)
    else:
        phase1 = sorted(by_id, key=lambda a: -a.q)

    entries = []
    deferred = []
    for a in phase1:
        p = int(a.p * scale)
        j = machines.pick_whole(rule, p, a.q)
        if j is None:
            deferred.append(a)
            continue
        machines.take(j, p, a.q)
        entries.append((a.id, j, p))

    if strategy is MultiStrategy.CPU_ORIENTED:
        deferred.sort(key=lambda a: -a.q)
    for a in deferred:
        remaining = int(a.p * scale)
        for j in machines.walk(rule):
            if machines.free_mem[j] < a.q or machines.free_cpu[j] <= 0:
                continue
            piece = min(remaining, machines.free_cpu[j])
            machines.take(j, piece, a.q)
            entries.append((a.id, j, piece))
            machines.cursor = j
            remaining -= piece
            if remaining == 0:
                break
        if remaining:
            return None
    return entries


def place_for_m(
    instance: ProblemInstance, m: int, strategy: MultiStrategy, rule: FitRule
) -> Optional[Assignment]:
    """Try to cover every application's load on ``m`` machines; ``None`` if the heuristic fails."""
    _require_cap(instance)
    if m < 1:
        raise StructuralError("m must be positive")
    scale = _scale(instance)
    entries = _place(instance, m, strategy, rule, scale)
    if entries is None:
        return None
    return Assignment.build(((app, j, Fraction(r, scale)) for app, j, r in entries), m)


def multi_bounds(instance: ProblemInstance) -> tuple[int, int]:
    P = instance.config.P
    low = lower_bound_machines(instance)
    high = sum(math.ceil(a.p / P) for a in instance.apps)
    return max(low, 1), max(high, low, 1)


def pack_multi(
    instance: ProblemInstance, strategy: MultiStrategy, rule: FitRule, scan: bool = False
) -> PackingResult:
    """Binary-search the machine count, keeping the smallest count the heuristic covers.

    Feasibility of the heuristic is not monotone in ``m``, so every probe is
    recorded on the result. ``scan=True`` walks up from the lower bound
    instead.
    """
    _require_cap(instance)
    algorithm = f"multi/{strategy.value}/{rule.value}"
    if not instance.apps:
        return PackingResult(Assignment((), 0), validate(instance, Assignment((), 0)), algorithm)
    scale = _scale(instance)
    low, high = multi_bounds(instance)
    probes: list[tuple[int, bool]] = []
    found: dict[int, list] = {}

    def probe(m: int) -> bool:
        entries = _place(instance, m, strategy, rule, scale)
        probes.append((m, entries is not None))
        if entries is not None:
            found[m] = entries
        return entries is not None

    if scan:
        m = low
        while not probe(m):
            m += 1
    else:
        lo, hi = low, high
        while lo < hi:
            mid = (lo + hi) // 2
            if probe(mid):
                hi = mid
            else:
                lo = mid + 1
        m = lo
        if m not in found:
            # the search can settle on an untested or failing count
            while not probe(m):
                m += 1
    return _finish(instance, found[m], scale, m, algorithm, probes)


def pack_dedicated(instance: ProblemInstance, rule: FitRule, order: AppOrder) -> PackingResult:
    """Give each oversized application ``p // P`` full machines up front, then pack the rest whole.

    A preprocessing shortcut that lets single-instanced baselines accept
    ``p > P``; it is not optimal in general.
    """
    _require_cap(instance)
    P = instance.config.P
    entries = []
    dedicated = 0
    residual = []
    for a in instance.apps:
        full, rest = divmod(a.p, P)
        for _ in range(int(full)):
            entries.append((a.id, dedicated, P))
            dedicated += 1
        if rest:
            residual.append(Application(a.id, rest, a.q))
    rest_result = pack_single(ProblemInstance(tuple(residual), instance.config), rule, order)
    for e in rest_result.assignment.entries:
        entries.append((e.app, dedicated + e.machine, e.reserved))
    total = dedicated + rest_result.assignment.machine_count
    a = Assignment.build(entries, total)
    return PackingResult(a, validate(instance, a), f"dedicated/{rule.value}/{order.kind}")


def algorithm_grid() -> list[str]:
    """All 27 algorithm ids: 7 orders x 3 rules single-instanced, 2 strategies x 3 rules multi."""
    ids = [f"single/{r.value}/{o}" for o in AppOrder.KINDS for r in FitRule]
    ids += [f"multi/{s.value}/{r.value}" for s in MultiStrategy for r in FitRule]
    return ids


def run_algorithm(instance: ProblemInstance, algorithm: str, seed: int = 0) -> PackingResult:
    """Dispatch an algorithm id such as ``single/wf/mem-dec`` or ``multi/mem/wf``."""
    parts = algorithm.split("/")
    try:
        if parts[0] == "single" and len(parts) == 3:
            return pack_single(instance, FitRule(parts[1]), AppOrder(parts[2], seed))
        if parts[0] == "multi" and len(parts) == 3:
            return pack_multi(instance, MultiStrategy(parts[1]), FitRule(parts[2]))
        if parts[0] == "dedicated" and len(parts) == 3:
            return pack_dedicated(instance, FitRule(parts[1]), AppOrder(parts[2], seed))
    except ValueError as exc:
        if isinstance(exc, (InfeasibleError, StructuralError)):
            raise
        raise StructuralError(f"unknown algorithm {algorithm!r}") from exc
    raise StructuralError(f"unknown algorithm {algorithm!r}")
