"""Brute-force exact solver for desk-scale instances.

A *support* fixes which machines each application runs on. For a fixed
support the best split of the load is given by a cut condition: the maximum
machine load is at least ``load(S) / |S|`` for every machine set ``S``,
where ``load(S)`` sums the applications whose whole support lies in ``S``,
and the maximum of those ratios is attained. Enumerating supports up to
machine relabelling then gives the exact optimum.

A second, independent route (:func:`flow_min_max_load`) computes the same
value by max-flow feasibility checks over candidate levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import networkx as nx

from .core import Assignment, InfeasibleError, ProblemInstance, StructuralError, lower_bound_machines

DEFAULT_MAX_APPS = 6
DEFAULT_MAX_MACHINES = 4


class OracleTooLarge(ValueError):
    """Instance exceeds the enumeration caps."""


def _popcount(x: int) -> int:
    return bin(x).count("1")


def min_max_load_for_support(support: Sequence[int], loads: Sequence[Fraction], m: Optional[int] = None) -> Fraction:
    """Exact min-max machine load for a fixed support.

    ``support[i]`` is a bitmask of the machines hosting application ``i``.

    >>> min_max_load_for_support([0b01, 0b11, 0b10], [1, 1, 1])
    Fraction(3, 2)
    """
    if m is None:
        m = max((s.bit_length() for s in support), default=0)
    best = Fraction(0)
    for S in range(1, 1 << m):
        inside = sum((Fraction(p) for s, p in zip(support, loads) if s & ~S == 0), Fraction(0))
        if inside:
            best = max(best, inside / _popcount(S))
    return best


def _flow_graph(support, loads, level: Fraction, m: int):
    # integer capacities keep networkx exact
    scale = math.lcm(level.denominator, *(Fraction(p).denominator for p in loads))
    G = nx.DiGraph()
    for i, (s, p) in enumerate(zip(support, loads)):
        G.add_edge("src", ("app", i), capacity=int(Fraction(p) * scale))
        for j in range(m):
            if s >> j & 1:
                G.add_edge(("app", i), ("mach", j))  # uncapacitated
    for j in range(m):
        G.add_edge(("mach", j), "sink", capacity=int(level * scale))
    return G, scale


def flow_feasible(support, loads, level, m: Optional[int] = None) -> bool:
    """Can every application's load be routed over its support with no machine above ``level``?"""
    if m is None:
        m = max((s.bit_length() for s in support), default=0)
    level = Fraction(level)
    total = sum((Fraction(p) for p in loads), Fraction(0))
    if total == 0:
        return True
    if m == 0:
        return False
    G, scale = _flow_graph(support, loads, level, m)
    value = nx.maximum_flow_value(G, "src", "sink")
    return value == total * scale


def flow_min_max_load(support, loads, m: Optional[int] = None) -> Fraction:
    """Min-max load by binary search over candidate levels with a max-flow test.

    The optimum is ``sum(A) / |machines touched by A|`` for some set ``A``
    of applications, so the candidates are enumerated from subsets of
    applications rather than subsets of machines.
    """
    if m is None:
        m = max((s.bit_length() for s in support), default=0)
    n = len(support)
    candidates = {Fraction(0)}
    for A in range(1, 1 << n):
        total = Fraction(0)
        touched = 0
        for i in range(n):
            if A >> i & 1:
                total += Fraction(loads[i])
                touched |= support[i]
        if touched:
            candidates.add(total / _popcount(touched))
    levels = sorted(candidates)
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if flow_feasible(support, loads, levels[mid], m):
            hi = mid
        else:
            lo = mid + 1
    return levels[lo]


def split_for_support(support, loads, level, m: int, ids: Sequence[str]) -> Assignment:
    """Recover per-instance reservations achieving ``level`` from a max flow."""
    level = Fraction(level)
    G, scale = _flow_graph(support, loads, level, m)
    value, flows = nx.maximum_flow(G, "src", "sink")
    total = sum((Fraction(p) for p in loads), Fraction(0))
    if value != total * scale:
        raise InfeasibleError(f"support cannot carry the load at level {level}")
    entries = []
    for i, app in enumerate(ids):
        for node, f in flows[("app", i)].items():
            if f:
                entries.append((app, node[1], Fraction(f, scale)))
    return Assignment.build(entries, m)


@dataclass
class OracleSolution:
    value: Fraction
    support: tuple[int, ...]  # bitmask per application, in instance order
    m: int

    def assignment(self, instance: ProblemInstance) -> Assignment:
        ids = [a.id for a in instance.apps]
        loads = [a.p for a in instance.apps]
        return split_for_support(self.support, loads, self.value, self.m, ids)


class _Search:
    """Depth-first enumeration of canonical supports with pruning.

    Machines are identical, so supports are generated with used machines
    always forming a prefix ``0..u-1``; a new application may take any
    subset of the used machines plus the next ``t`` fresh ones.
    """

    def __init__(self, instance: ProblemInstance, m: int, single: bool):
        self.m = m
        self.single = single
        order = sorted(range(len(instance.apps)), key=lambda i: (-instance.apps[i].q, -instance.apps[i].p, i))
        self.order = order
        self.p = [instance.apps[i].p for i in order]
        self.q = [instance.apps[i].q for i in order]
        self.Q = instance.config.Q
        self.full = (1 << m) - 1
        self.sizes = [_popcount(S) for S in range(1 << m)]
        # supersets[T] lists every S containing T
        self.supersets = [[S for S in range(1 << m) if S & T == T] for T in range(1 << m)]
        self.remaining_q = [sum(self.q[k:]) for k in range(len(self.q) + 1)]

    def options(self, used: int):
        fresh = [j for j in range(used, self.m)]
        if self.single:
            for j in range(min(used + 1, self.m)):
                yield 1 << j
            return
        used_mask = (1 << used) - 1
        for t in range(len(fresh) + 1):
            fresh_mask = ((1 << (used + t)) - 1) & ~used_mask
            sub = used_mask
            while True:
                mask = sub | fresh_mask
                if mask:
                    yield mask
                if sub == 0:
                    break
                sub = (sub - 1) & used_mask

    def run(self, bound: Optional[Fraction], stop_at: Optional[Fraction]):
        """Minimise the cut value. Prunes partial supports whose value is ``>= bound``
        (or ``> stop_at`` in decision mode) and returns as soon as a value
        ``<= stop_at`` is found."""
        m, n = self.m, len(self.p)
        conc = [Fraction(0)] * (1 << m)
        memory = [0] * m
        chosen = [0] * n
        best = [bound, None]
        total_p = sum(self.p, Fraction(0))
        floor_value = total_p / m

        def value():
            return max(conc[S] / self.sizes[S] for S in range(1, 1 << m))

        def dfs(k: int, used: int) -> bool:
            current = value() if k else Fraction(0)
            if stop_at is not None:
                if current > stop_at:
                    return False
            elif best[0] is not None and current >= best[0]:
                return False
            if self.remaining_q[k] > sum(self.Q - x for x in memory):
                return False
            if k == n:
                best[0], best[1] = current, tuple(chosen)
                return stop_at is not None or current == floor_value
            q, p = self.q[k], self.p[k]
            for mask in self.options(used):
                if any(memory[j] + q > self.Q for j in range(m) if mask >> j & 1):
                    continue
                for j in range(m):
                    if mask >> j & 1:
                        memory[j] += q
                for S in self.supersets[mask]:
                    conc[S] += p
                chosen[k] = mask
                done = dfs(k + 1, max(used, mask.bit_length()))
                for S in self.supersets[mask]:
                    conc[S] -= p
                for j in range(m):
                    if mask >> j & 1:
                        memory[j] -= q
                if done:
                    return True
            return False

        dfs(0, 0)
        if best[1] is None:
            return None
        support = [0] * n
        for k, i in enumerate(self.order):
            support[i] = best[1][k]
        return OracleSolution(best[0], tuple(support), m)


def _check_caps(instance: ProblemInstance, m: int, max_apps: int, max_machines: int) -> None:
    if len(instance.apps) > max_apps:
        raise OracleTooLarge(f"{len(instance.apps)} applications exceed the cap of {max_apps}")
    if m > max_machines:
        raise OracleTooLarge(f"{m} machines exceed the cap of {max_machines}")
    if m < 1:
        raise StructuralError("m must be positive")


def oracle_balance(
    instance: ProblemInstance,
    m: int,
    *,
    single: bool = False,
    max_apps: int = DEFAULT_MAX_APPS,
    max_machines: int = DEFAULT_MAX_MACHINES,
) -> OracleSolution:
    """Optimal support and value for the balancing objective on ``m`` machines."""
    _check_caps(instance, m, max_apps, max_machines)
    if not instance.apps:
        return OracleSolution(Fraction(0), (), m)
    solution = _Search(instance, m, single).run(bound=None, stop_at=None)
    if solution is None:
        raise InfeasibleError(f"no memory-feasible placement on {m} machines")
    return solution


def oracle_min_max_load(instance: ProblemInstance, m: int, **caps) -> Fraction:
    return oracle_balance(instance, m, **caps).value


def oracle_pack(
    instance: ProblemInstance,
    *,
    single: bool = False,
    max_apps: int = DEFAULT_MAX_APPS,
    max_machines: int = DEFAULT_MAX_MACHINES,
) -> OracleSolution:
    """Fewest machines whose optimal load fits under ``P``, scanning up from the lower bound.

    With ``single=True`` every application keeps one instance (classic
    two-dimensional bin packing).
    """
    P = instance.config.P
    if P is None:
        raise StructuralError("packing objective needs a CPU cap P")
    if not instance.apps:
        return OracleSolution(Fraction(0), (), 0)
    if single and any(a.p > P for a in instance.apps):
        raise InfeasibleError("an application exceeds P and cannot run single-instanced")
    m = max(lower_bound_machines(instance), 1)
    while True:
        _check_caps(instance, m, max_apps, max_machines)
        solution = _Search(instance, m, single).run(bound=None, stop_at=P)
        if solution is not None:
            return solution
        m += 1


def oracle_min_machines(instance: ProblemInstance, **caps) -> int:
    return oracle_pack(instance, **caps).m
