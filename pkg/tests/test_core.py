import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiflex.core import (
    Application,
    Assignment,
    MachineConfig,
    ProblemInstance,
    StructuralError,
    ViolationKind,
    format_load,
    lower_bound_machines,
    machines_used,
    make_instance,
    max_load,
    to_load,
    validate,
)

fractions = st.builds(Fraction, st.integers(0, 10**6), st.integers(1, 10**4))


class TestLoadParsing:
    def test_decimal_strings_are_exact(self):
        assert to_load("7.2") == Fraction(36, 5)
        assert to_load("0.001") == Fraction(1, 1000)
        assert to_load(" 3 ") == 3

    def test_fraction_strings(self):
        assert to_load("10/3") == Fraction(10, 3)

    def test_rejects_floats_and_negatives(self):
        with pytest.raises(TypeError):
            to_load(0.5)
        with pytest.raises(StructuralError):
            to_load("-1")
        with pytest.raises(StructuralError):
            to_load("abc")

    @given(fractions)
    def test_format_round_trip(self, x):
        assert to_load(format_load(x)) == x

    def test_format_prefers_decimals(self):
        assert format_load(Fraction(36, 5)) == "7.2"
        assert format_load(Fraction(1, 1024)) == "0.0009765625"
        assert format_load(Fraction(4)) == "4"
        assert format_load(Fraction(2, 3)) == "2/3"


class TestTypes:
    def test_application_contract(self):
        with pytest.raises(StructuralError):
            Application("a", 0, 1)
        with pytest.raises(StructuralError):
            Application("a", 1, 0)

    def test_machine_config_contract(self):
        with pytest.raises(StructuralError):
            MachineConfig(Q=0)
        with pytest.raises(StructuralError):
            MachineConfig(Q=1, P=Fraction(0))
        assert MachineConfig(Q=4).P is None

    def test_instance_rejects_oversized_memory_and_duplicate_ids(self):
        with pytest.raises(StructuralError):
            make_instance([("a", 1, 3)], Q=2)
        with pytest.raises(StructuralError):
            make_instance([("a", 1, 1), ("a", 2, 1)], Q=2)

    def test_build_merges_and_drops_zero(self):
        a = Assignment.build([("x", 0, 1), ("x", 0, Fraction(1, 2)), ("y", 1, 0)], 2)
        assert [(e.app, e.machine, e.reserved) for e in a.entries] == [("x", 0, Fraction(3, 2))]
        assert a.machine_count == 2

    def test_instance_json_round_trip(self, three_by_two):
        doc = json.loads(json.dumps(three_by_two.to_json()))
        assert ProblemInstance.from_json(doc) == three_by_two

    def test_instance_json_parses_decimal_strings(self):
        doc = {"machine": {"P": "32", "Q": 64}, "apps": [{"id": "d1", "p": "7.2", "q": 8}], "fixed_m": None}
        inst = ProblemInstance.from_json(doc)
        assert inst.apps[0].p == Fraction(36, 5)
        assert inst.config.P == 32

    def test_malformed_instance_document(self):
        with pytest.raises(StructuralError):
            ProblemInstance.from_json({"apps": []})

    def test_assignment_json_round_trip(self, trio_split):
        assert Assignment.from_json(trio_split.to_json(), 2) == trio_split


class TestValidate:
    def test_split_trio_is_feasible(self, two_machine_trio, trio_split):
        report = validate(two_machine_trio, trio_split, enforce_cpu_cap=False)
        assert report.feasible
        assert max_load(trio_split) == Fraction(3, 2)

    def test_whole_trio(self, trio_whole):
        assert max_load(trio_whole) == 2

    def test_empty(self):
        inst = make_instance([], Q=1)
        assert validate(inst, Assignment.build([], 0), enforce_cpu_cap=False).feasible

    def test_cpu_cap_only_when_enforced(self):
        inst = make_instance([("a", 2, 1), ("b", 2, 1), ("c", 1, 1)], Q=3, P=4)
        a = Assignment.build([("a", 0, 2), ("b", 0, 2), ("c", 0, 1)], 1)
        capped = validate(inst, a, enforce_cpu_cap=True)
        assert capped.kinds() == {ViolationKind.CPU_OVERFLOW}
        assert capped.violations[0].amount == 1
        assert validate(inst, a, enforce_cpu_cap=False).feasible

    def test_memory_overflow_and_deficit(self, two_machine_trio):
        a = Assignment.build([("1", 0, 1), ("2", 0, 1), ("3", 0, Fraction(1, 2))], 2)
        report = validate(two_machine_trio, a, enforce_cpu_cap=False)
        assert report.kinds() == {ViolationKind.MEMORY_OVERFLOW, ViolationKind.LOAD_DEFICIT}
        by_kind = {v.kind: v for v in report.violations}
        assert by_kind[ViolationKind.MEMORY_OVERFLOW].subject == 0
        assert by_kind[ViolationKind.LOAD_DEFICIT].subject == "3"
        assert by_kind[ViolationKind.LOAD_DEFICIT].amount == Fraction(1, 2)

    def test_missing_app_counts_as_deficit(self, two_machine_trio):
        a = Assignment.build([("1", 0, 1), ("2", 1, 1)], 2)
        report = validate(two_machine_trio, a, enforce_cpu_cap=False)
        assert [(v.kind, v.subject) for v in report.violations] == [(ViolationKind.LOAD_DEFICIT, "3")]

    def test_duplicate_reported_on_raw_assignment(self, two_machine_trio):
        a = Assignment.unchecked([("1", 0, Fraction(1, 2)), ("1", 0, Fraction(1, 2)), ("2", 1, 1), ("3", 1, 1)], 2)
        report = validate(two_machine_trio, a, enforce_cpu_cap=False)
        assert report.kinds() == {ViolationKind.DUPLICATE_INSTANCE}

    def test_unknown_app_is_structural(self, two_machine_trio):
        with pytest.raises(StructuralError):
            validate(two_machine_trio, Assignment.build([("zz", 0, 1)], 1), enforce_cpu_cap=False)

    def test_machine_index_out_of_range_is_structural(self, two_machine_trio):
        with pytest.raises(StructuralError):
            validate(two_machine_trio, Assignment.unchecked([("1", 3, 1)], 2), enforce_cpu_cap=False)

    def test_cap_needs_P(self, two_machine_trio, trio_split):
        with pytest.raises(StructuralError):
            validate(two_machine_trio, trio_split, enforce_cpu_cap=True)


class TestMeasures:
    def test_single_app(self):
        assert max_load(Assignment.build([("a", 0, 7)], 1)) == 7

    def test_empty(self):
        empty = Assignment.build([], 0)
        assert max_load(empty) == 0
        assert machines_used(empty) == 0

    def test_machines_used_ignores_idle_machines(self):
        a = Assignment.build([("a", 0, 2), ("c", 0, 1), ("b", 3, 2), ("c", 3, 1)], 5)
        assert machines_used(a) == 2

    def test_dedicated_layout_uses_three(self, oversized):
        a = Assignment.build([("a", 0, 2), ("c", 0, 1), ("b", 1, 2), ("c", 2, 5)], 3)
        assert validate(oversized, a).feasible
        assert machines_used(a) == 3

    def test_lower_bound(self, three_by_two):
        assert lower_bound_machines(three_by_two) == 2
        assert lower_bound_machines(make_instance([(f"a{i}", 5, 1) for i in range(5)], Q=3, P=9)) == 3
        assert lower_bound_machines(make_instance([("a", 4, 4)], Q=4, P=4)) == 1

    def test_lower_bound_needs_P(self, two_machine_trio):
        with pytest.raises(StructuralError):
            lower_bound_machines(two_machine_trio)


@st.composite
def assignments(draw):
    n = draw(st.integers(1, 6))
    m = draw(st.integers(1, 5))
    entries = []
    for i in range(n):
        machines = draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m, unique=True))
        for j in machines:
            entries.append((f"a{i}", j, draw(st.builds(Fraction, st.integers(1, 20), st.integers(1, 6)))))
    return entries, m


@given(assignments(), st.randoms(use_true_random=False))
def test_splitting_entries_changes_nothing_after_build(data, rnd):
    entries, m = data
    split = []
    for app, j, r in entries:
        cut = r * Fraction(rnd.randint(1, 9), 10)
        split += [(app, j, cut), (app, j, r - cut)]
    assert Assignment.build(split, m) == Assignment.build(entries, m)
    assert max_load(Assignment.build(split, m)) == max_load(Assignment.build(entries, m))


@given(assignments(), st.randoms(use_true_random=False))
@settings(max_examples=50)
def test_measures_invariant_under_machine_permutation(data, rnd):
    entries, m = data
    perm = list(range(m))
    rnd.shuffle(perm)
    a = Assignment.build(entries, m)
    b = Assignment.build([(app, perm[j], r) for app, j, r in entries], m)
    assert max_load(a) == max_load(b)
    assert machines_used(a) == machines_used(b)


@given(assignments())
@settings(max_examples=50)
def test_feasible_assignments_respect_lower_bound(data):
    entries, m = data
    a = Assignment.build(entries, m)
    covered = {}
    for e in a.entries:
        covered[e.app] = covered.get(e.app, 0) + e.reserved
    per_machine = {}
    for e in a.entries:
        per_machine[e.machine] = per_machine.get(e.machine, 0) + 1
    P = max_load(a)
    Q = max(per_machine.values())
    inst = make_instance([(app, p, 1) for app, p in covered.items()], Q=Q, P=P)
    assert validate(inst, a).feasible
    assert machines_used(a) >= lower_bound_machines(inst)

