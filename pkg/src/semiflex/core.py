"""Domain types, exact load arithmetic and the assignment validator.

CPU quantities are :class:`fractions.Fraction` values throughout; memory is
an integer. Nothing in the solvers compares floats.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

Load = Fraction
LoadLike = Union[Fraction, int, str, Decimal]


class StructuralError(ValueError):
    """An input is malformed (as opposed to merely infeasible)."""


class InfeasibleError(ValueError):
    """No assignment exists for the given parameters."""


def to_load(value: LoadLike) -> Load:
    """Convert ``value`` to an exact non-negative load.

    Accepts ints, Fractions, Decimals and strings such as ``"7.2"`` or
    ``"10/3"``. Floats are rejected: their binary expansion is rarely the
    quantity the caller meant.

    >>> to_load("7.2")
    Fraction(36, 5)
    >>> to_load("10/3")
    Fraction(10, 3)
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"loads must be exact, got {type(value).__name__} {value!r}")
    if isinstance(value, str):
        text = value.strip()
        try:
            result = Fraction(text) if "/" in text else Fraction(Decimal(text))
        except (ValueError, ZeroDivisionError, InvalidOperation) as exc:
            raise StructuralError(f"not an exact decimal: {value!r}") from exc
    else:
        result = Fraction(value)
    if result < 0:
        raise StructuralError(f"load must be non-negative, got {value!r}")
    return result


def format_load(value: Fraction) -> str:
    """Render a load as a terminating decimal string, or ``"a/b"`` otherwise.

    >>> format_load(Fraction(3, 2))
    '1.5'
    >>> format_load(Fraction(10, 3))
    '10/3'
    """
    value = Fraction(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    if value.denominator == 1:
        return str(value.numerator)
    digits = max(twos, fives)
    scaled = value * 10**digits
    return format(Decimal(scaled.numerator).scaleb(-digits), "f")


@dataclass(frozen=True)
class Application:
    id: str
    p: Fraction
    q: int

    def __post_init__(self):
        object.__setattr__(self, "p", to_load(self.p))
        if self.p <= 0:
            raise StructuralError(f"application {self.id!r}: load must be positive")
        if isinstance(self.q, bool) or not isinstance(self.q, int) or self.q < 1:
            raise StructuralError(f"application {self.id!r}: memory must be a positive integer")


@dataclass(frozen=True)
class MachineConfig:
    """Capacities of one (homogeneous) machine.

    ``P`` is the CPU cap; it may be ``None`` when only the balancing
    objective is solved.
    """

    Q: int
    P: Optional[Fraction] = None

    def __post_init__(self):
        if isinstance(self.Q, bool) or not isinstance(self.Q, int) or self.Q < 1:
            raise StructuralError(f"memory capacity must be a positive integer, got {self.Q!r}")
        if self.P is not None:
            object.__setattr__(self, "P", to_load(self.P))
            if self.P <= 0:
                raise StructuralError("CPU capacity must be positive")


@dataclass(frozen=True)
class Entry:
    app: str
    machine: int
    reserved: Fraction


@dataclass(frozen=True)
class Assignment:
    """Which applications run on which machines, and how much CPU each instance reserves.

    Use :meth:`build` to get a normalized assignment (duplicates merged,
    zero reservations dropped). The raw constructor keeps entries verbatim,
    which the validator relies on to report duplicate instances.
    """

    entries: tuple[Entry, ...]
    machine_count: int

    @classmethod
    def build(cls, entries: Iterable, machine_count: Optional[int] = None) -> "Assignment":
        merged: dict[tuple[str, int], Fraction] = defaultdict(Fraction)
        for item in entries:
            app, machine, reserved = _unpack(item)
            merged[(app, machine)] += to_load(reserved)
        kept = tuple(
            Entry(app, machine, reserved)
            for (app, machine), reserved in sorted(merged.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            if reserved > 0
        )
        if machine_count is None:
            machine_count = max((e.machine for e in kept), default=-1) + 1
        return cls(kept, machine_count)

    @classmethod
    def unchecked(cls, entries: Iterable, machine_count: int) -> "Assignment":
        """Keep entries as given; no merging, no dropping."""
        return cls(tuple(Entry(*_unpack(item)) for item in entries), machine_count)

    def machine_loads(self) -> list[Fraction]:
        loads = [Fraction(0)] * self.machine_count
        for e in self.entries:
            loads[e.machine] += e.reserved
        return loads

    def by_machine(self) -> dict[int, list[Entry]]:
        out: dict[int, list[Entry]] = defaultdict(list)
        for e in self.entries:
            out[e.machine].append(e)
        return dict(out)

    def compacted(self) -> "Assignment":
        """Renumber used machines to ``0..k-1`` keeping their relative order."""
        used = sorted({e.machine for e in self.entries})
        index = {j: k for k, j in enumerate(used)}
        return Assignment.build(((e.app, index[e.machine], e.reserved) for e in self.entries), len(used))

    def to_json(self) -> list[dict]:
        return [{"app": e.app, "machine": e.machine, "reserved": format_load(e.reserved)} for e in self.entries]

    @classmethod
    def from_json(cls, data, machine_count: Optional[int] = None, normalize: bool = True) -> "Assignment":
        items = [(str(d["app"]), int(d["machine"]), to_load(d["reserved"])) for d in data]
        if normalize:
            return cls.build(items, machine_count)
        if machine_count is None:
            machine_count = max((m for _, m, _ in items), default=-1) + 1
        return cls.unchecked(items, machine_count)


def _unpack(item):
    if isinstance(item, Entry):
        return item.app, item.machine, item.reserved
    app, machine, reserved = item
    if isinstance(machine, bool) or not isinstance(machine, int) or machine < 0:
        raise StructuralError(f"machine index must be a non-negative integer, got {machine!r}")
    return app, machine, to_load(reserved)


@dataclass(frozen=True)
class ProblemInstance:
    apps: tuple[Application, ...]
    config: MachineConfig
    fixed_m: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "apps", tuple(self.apps))
        seen = set()
        for app in self.apps:
            if app.id in seen:
                raise StructuralError(f"duplicate application id {app.id!r}")
            seen.add(app.id)
            if app.q > self.config.Q:
                raise StructuralError(
                    f"application {app.id!r} needs {app.q} memory, machine has {self.config.Q}"
                )
        if self.fixed_m is not None and self.fixed_m < 1:
            raise StructuralError("fixed_m must be positive")

    def app(self, app_id: str) -> Application:
        for a in self.apps:
            if a.id == app_id:
                return a
        raise KeyError(app_id)

    def with_config(self, config: MachineConfig) -> "ProblemInstance":
        return ProblemInstance(self.apps, config, self.fixed_m)

    def to_json(self) -> dict:
        P = self.config.P
        return {
            "machine": {"P": None if P is None else format_load(P), "Q": self.config.Q},
            "apps": [{"id": a.id, "p": format_load(a.p), "q": a.q} for a in self.apps],
            "fixed_m": self.fixed_m,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ProblemInstance":
        try:
            machine = data["machine"]
            P = machine.get("P")
            config = MachineConfig(Q=machine["Q"], P=None if P is None else to_load(P))
            apps = tuple(Application(str(a["id"]), to_load(a["p"]), a["q"]) for a in data["apps"])
        except (KeyError, TypeError) as exc:
            raise StructuralError(f"malformed instance document: {exc}") from exc
        return cls(apps, config, data.get("fixed_m"))


class ViolationKind(str, enum.Enum):
    MEMORY_OVERFLOW = "MEMORY_OVERFLOW"
    LOAD_DEFICIT = "LOAD_DEFICIT"
    CPU_OVERFLOW = "CPU_OVERFLOW"
    DUPLICATE_INSTANCE = "DUPLICATE_INSTANCE"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: Union[int, str]  # machine index or app id
    amount: Fraction  # by how much the constraint is broken


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def kinds(self) -> set[ViolationKind]:
        return {v.kind for v in self.violations}

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "violations": [
                {"kind": v.kind.value, "subject": v.subject, "amount": format_load(v.amount)}
                for v in self.violations
            ],
        }


def validate(instance: ProblemInstance, a: Assignment, enforce_cpu_cap: bool = True) -> ValidationReport:
    """Check memory, load coverage, duplicate instances and (optionally) the CPU cap.

    Raises :class:`StructuralError` when the assignment references an unknown
    application or a machine index outside ``0..machine_count-1``.
    """
    apps = {app.id: app for app in instance.apps}
    for e in a.entries:
        if e.app not in apps:
            raise StructuralError(f"assignment references unknown application {e.app!r}")
        if not 0 <= e.machine < a.machine_count:
            raise StructuralError(f"machine index {e.machine} outside 0..{a.machine_count - 1}")
    if enforce_cpu_cap and instance.config.P is None:
        raise StructuralError("CPU cap requested but the machine config has no P")

    violations = []
    pairs: dict[tuple[str, int], int] = defaultdict(int)
    for e in a.entries:
        pairs[(e.app, e.machine)] += 1

    memory = [0] * a.machine_count
    for (app_id, machine), count in pairs.items():
        memory[machine] += apps[app_id].q
    for (app_id, machine), count in sorted(pairs.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        if count > 1:
            violations.append(Violation(ViolationKind.DUPLICATE_INSTANCE, app_id, Fraction(count - 1)))

    Q = instance.config.Q
    for j, used in enumerate(memory):
        if used > Q:
            violations.append(Violation(ViolationKind.MEMORY_OVERFLOW, j, Fraction(used - Q)))

    covered: dict[str, Fraction] = defaultdict(Fraction)
    for e in a.entries:
        covered[e.app] += e.reserved
    for app in instance.apps:
        if covered[app.id] < app.p:
            violations.append(Violation(ViolationKind.LOAD_DEFICIT, app.id, app.p - covered[app.id]))

    if enforce_cpu_cap:
        P = instance.config.P
        for j, load in enumerate(a.machine_loads()):
            if load > P:
                violations.append(Violation(ViolationKind.CPU_OVERFLOW, j, load - P))

    return ValidationReport(tuple(violations))


def max_load(a: Assignment) -> Fraction:
    return max(a.machine_loads(), default=Fraction(0))


def machines_used(a: Assignment) -> int:
    return len({e.machine for e in a.entries if e.reserved > 0})


def lower_bound_machines(instance: ProblemInstance) -> int:
    """``max(ceil(sum p / P), ceil(sum q / Q))``, the normalization denominator."""
    P = instance.config.P
    if P is None:
        raise StructuralError("lower_bound_machines needs a CPU cap P")
    total_p = sum((a.p for a in instance.apps), Fraction(0))
    total_q = sum(a.q for a in instance.apps)
    return max(math.ceil(total_p / P), -(-total_q // instance.config.Q))


@dataclass
class PackingResult:
    assignment: Assignment
    report: ValidationReport
    algorithm: str = ""
    probes: list[tuple[int, bool]] = field(default_factory=list)

    @property
    def machines(self) -> int:
        return machines_used(self.assignment)

    @property
    def max_load(self) -> Fraction:
        return max_load(self.assignment)

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "machines": self.machines,
            "max_load": format_load(self.max_load),
            "feasible": self.report.feasible,
            "violations": self.report.to_json()["violations"],
            "probes": [{"m": m, "feasible": ok} for m, ok in self.probes],
            "machine_count": self.assignment.machine_count,
            "assignment": self.assignment.to_json(),
        }


def make_instance(apps: Sequence[tuple], Q: int, P: Optional[LoadLike] = None, fixed_m: Optional[int] = None):
    """Shorthand: ``make_instance([("a", 2, 1), ...], Q=2, P=3)``."""
    return ProblemInstance(
        tuple(Application(str(i), to_load(p), q) for i, p, q in apps),
        MachineConfig(Q=Q, P=None if P is None else to_load(P)),
        fixed_m,
    )
