"""Acceptance criteria 1-10.

Each test prints one ``criterion N: PASS|FAIL ...`` line (visible in the
pytest output) and asserts the criterion at its stated tolerance.  The
bound criteria 6 and 7 are evaluated over the runs of criteria 1-4, which
are cached so that any subset of the tests can run on its own.
"""

import functools
import io
import itertools
import math
import random
import time
from contextlib import contextmanager
from unittest import mock

import pytest

from psiter import cli, psi as psi_module
from psiter.eqsys import parse_system
from psiter.generators import exp_family_closed_form, random_system
from psiter.linear import LinIneq, neg_ineq, parse_affine, parse_constraint
from psiter.oracle import solve_kleene, solve_si
from psiter.partition import BreakList, TreeSpace, parse_regions, tree_labels, tree_leaves
from psiter.psi import check_solution, grid, psi_solve
from psiter.sat import brute_force_point, exact_satisfiable, fm_satisfiable

CLAMP = "params p1, p2\nx = p1 \\/ (x + 1 /\\ p2)\n"
LOOP = "params p1, p2\nx = p1;\nwhile (x < p2) { x = x + 1; }\n"
NAMES = ["p1", "p2"]


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return emit


def run_cli(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


# ------------------------------------------------------------ bound audit


class BoundAudit:
    """Independent record of the improvement-count and leaf-count bounds over many runs."""

    def __init__(self):
        self.runs = 0
        self.round_violations = []
        self.trees = 0
        self.leaf_violations = []

    def improvement(self, system, improvements):
        self.runs += 1
        r = max(len(eq.alternatives) - 1 for eq in system.equations)
        if improvements > (r + 1) ** system.n:
            self.round_violations.append((str(system), improvements))

    def tree(self, space, part):
        if not isinstance(space, TreeSpace):
            return
        self.trees += 1
        n = len(tree_labels(part))
        leaves = len(tree_leaves(part))
        if leaves > sum(math.comb(n, i) for i in range(space.k + 1)):
            self.leaf_violations.append((n, space.k, leaves))


@contextmanager
def audited(audit):
    real = psi_module._Checker.__call__

    def call(self, part, what):
        audit.tree(self.space, part)
        return real(self, part, what)

    with mock.patch.object(psi_module._Checker, "__call__", call):
        yield


def solve_audited(audit, system, *args, **kw):
    with audited(audit):
        res = psi_solve(system, *args, validate=True, **kw)
    audit.improvement(system, res.stats.improvements)
    return res


# --------------------------------------------------------------- workloads


@functools.lru_cache(maxsize=None)
def workload_1():
    audit = BoundAudit()
    t0 = time.perf_counter()
    code, text = run_cli("solve", write_tmp("ex2.eq", CLAMP), "--format", "regions")
    res = solve_audited(audit, parse_system(CLAMP))
    elapsed = time.perf_counter() - t0
    return audit, code, text, res, elapsed


@functools.lru_cache(maxsize=None)
def workload_2():
    audit = BoundAudit()
    t0 = time.perf_counter()
    path = write_tmp("ex1.prog", LOOP)
    code, text = run_cli("analyze", path)
    _, at53 = run_cli("eval", path, "--at", "p1=5,p2=3")
    _, at27 = run_cli("eval", path, "--at", "p1=2,p2=7")
    from psiter.frontend import compile_program, parse_program

    system, _ = compile_program(parse_program(LOOP))
    res = solve_audited(audit, system)
    elapsed = time.perf_counter() - t0
    return audit, code, text, at53, at27, res, elapsed


@functools.lru_cache(maxsize=None)
def workload_3():
    audit = BoundAudit()
    rows = []
    for m in (1, 2, 3):
        _, text = run_cli("gen", "exp", "--m", str(m))
        system = parse_system(text)
        t0 = time.perf_counter()
        res = solve_audited(audit, system, repr="tree")
        elapsed = time.perf_counter() - t0
        mismatches = [p for p in range(-20, 21) if res.value("x1", (p,)) != exp_family_closed_form(m, p)]
        rows.append((m, res.space.leaf_count(res.assignment["x1"]), mismatches, elapsed))
    return audit, rows


@functools.lru_cache(maxsize=None)
def workload_4(count=400, seed=2024):
    audit = BoundAudit()
    rng = random.Random(seed)
    mismatches = []
    t0 = time.perf_counter()
    for _ in range(count):
        k = rng.randint(0, 2)
        s = random_system(rng, rng.randint(1, 5), 2, k, const_range=(-5, 5), max_scale=2)
        res = solve_audited(audit, s, repr="tree")
        rep = check_solution(s, res.assignment, grid(-5, 5, k), res.space, stop_at_first=True)
        if not rep.ok:
            mismatches.append((str(s), rep.summary()))
    return audit, count, mismatches, time.perf_counter() - t0


_TMP = {}


def write_tmp(name, text):
    import tempfile
    from pathlib import Path

    if "dir" not in _TMP:
        _TMP["dir"] = tempfile.TemporaryDirectory()
    path = Path(_TMP["dir"].name) / name
    path.write_text(text)
    return str(path)


def region_lines(text, var):
    lines, cur = [], None
    for line in text.splitlines():
        if line.startswith("#"):
            continue
        if not line.startswith(" "):
            cur = line.rstrip(":")
        elif cur == var:
            lines.append(line)
    return lines


def closed_form_pieces(m, lo, hi):
    """Pieces of the exponential family's closed form on [lo, hi]: one per case, one per point of the middle band."""
    t = 2 ** m

    def case(p):
        if p <= -t - 1:
            return ("low",)
        if p >= t + 1:
            return ("high",)
        return ("mid", p)

    return sum(1 for p in range(lo, hi + 1) if p == lo or case(p) != case(p - 1))


def affine_runs(values):
    """Fewest maximal runs of consecutive points on which the values are affine in p."""
    runs, i, n = 0, 0, len(values)
    while i < n:
        runs += 1
        j = i + 1
        if j < n:
            slope = values[j] - values[i]
            while j + 1 < n and values[j + 1] - values[j] == slope:
                j += 1
        i = j + 1
    return runs


def all_audits():
    return [workload_1()[0], workload_2()[0], workload_3()[0], workload_4()[0]]


# ---------------------------------------------------------------- criteria


class TestAcceptance:
    """Acceptance criteria 1-10, one printed PASS/FAIL line each."""

    def test_criterion_1_clamp_exactness(self, report):
        """The clamped increment system yields the two regions p1 / p2 within three improvement rounds."""
        audit, code, text, res, elapsed = workload_1()
        regions = parse_regions(region_lines(text, "x"), NAMES)
        expect = [
            ([LinIneq((-1, 1), 0)], parse_affine("p1", NAMES)),
            ([LinIneq((1, -1), -1)], parse_affine("p2", NAMES)),
        ]
        ok = code == 0 and regions == expect and res.stats.improvements <= 3 and elapsed < 1.0
        report(1, ok, f"{len(regions)} regions, {res.stats.improvements} improvement rounds, {elapsed:.3f} s")
        assert code == 0
        assert regions == expect
        assert res.stats.improvements <= 3
        assert elapsed < 1.0

    def test_criterion_2_interval_invariant(self, report):
        """The counting loop analysis reproduces the bounds after the loop."""
        audit, code, text, at53, at27, res, elapsed = workload_2()
        lines = text.splitlines()
        want_m = "x_4m: if -1*p1 + 1*p2 <= 0 then 0 + -1*p1 else 0 + -1*p2"
        want_p = "x_4p: if -1*p1 + 1*p2 <= 0 then 0 + 1*p1 else 0 + 1*p2"
        checks = {
            "x_4m": want_m in lines,
            "x_4p": want_p in lines,
            "[5,5]": "x@4: [5, 5]" in at53.splitlines(),
            "[7,7]": "x@4: [7, 7]" in at27.splitlines(),
            "time": elapsed < 2.0,
        }
        ok = code == 0 and all(checks.values())
        report(2, ok, f"checks {checks}, {elapsed:.3f} s")
        assert code == 0
        assert all(checks.values()), checks

    def test_criterion_3_exp_family(self, report):
        """The exponential family matches the closed form with growing region counts."""
        audit, rows = workload_3()
        details = []
        ok = True
        prev = 0
        for m, leaves, mismatches, elapsed in rows:
            pieces = closed_form_pieces(m, -20, 20)
            minimum = affine_runs([exp_family_closed_form(m, p) for p in range(-20, 21)])
            assert pieces == 2 ** (m + 1) + 3
            good = not mismatches and minimum <= leaves <= pieces and leaves > prev and (m < 3 or elapsed < 30)
            ok &= good
            prev = leaves
            details.append(f"m={m}: {leaves} regions (min {minimum}, closed form {pieces}), {len(mismatches)} mismatches, {elapsed:.2f} s")
        report(3, ok, "; ".join(details))
        prev = 0
        for m, leaves, mismatches, elapsed in rows:
            assert not mismatches, (m, mismatches)
            assert affine_runs([exp_family_closed_form(m, p) for p in range(-20, 21)]) <= leaves <= closed_form_pieces(m, -20, 20)
            assert leaves > prev
            prev = leaves
        assert rows[-1][3] < 30

    def test_criterion_4_master_oracle(self, report):
        """Random systems agree with strategy iteration on [-5, 5]^k."""
        audit, count, mismatches, elapsed = workload_4()
        ok = count >= 300 and not mismatches
        report(4, ok, f"{count} systems, {len(mismatches)} mismatches, {elapsed:.1f} s")
        assert count >= 300
        assert not mismatches, mismatches[:3]

    def test_criterion_5_oracle_of_oracle(self, report):
        """Strategy iteration equals accelerated Kleene iteration on small systems."""
        rng = random.Random(5)
        count, bad = 600, []
        t0 = time.perf_counter()
        for _ in range(count):
            s = random_system(rng, rng.randint(1, 4), 2, 0, depth=3, const_range=(-5, 5), max_scale=2)
            if solve_si(s) != solve_kleene(s):
                bad.append(str(s))
        ok = not bad
        report(5, ok, f"{count} systems, {len(bad)} mismatches, {time.perf_counter() - t0:.1f} s")
        assert not bad, bad[:3]

    def test_criterion_6_improvement_bound(self, report):
        """Every run of criteria 1-4 stays within (r+1)^n improvement rounds."""
        audits = all_audits()
        runs = sum(a.runs for a in audits)
        violations = [v for a in audits for v in a.round_violations]
        ok = runs > 0 and not violations
        report(6, ok, f"{runs} runs, {len(violations)} violations")
        assert runs >= 300
        assert not violations, violations[:3]

    def test_criterion_7_leaf_bound(self, report):
        """Every region tree built during criteria 1-4 respects the leaf bound."""
        audits = all_audits()
        trees = sum(a.trees for a in audits)
        violations = [v for a in audits for v in a.leaf_violations]
        ok = trees > 0 and not violations
        report(7, ok, f"{trees} trees checked with the validator on, {len(violations)} violations")
        assert trees > 0
        assert not violations, violations[:3]

    def test_criterion_8_sat_stack(self, report):
        """Exact satisfiability agrees with enumeration on bounded conjunctions."""
        rng = random.Random(8)
        box = 50
        samples = sat_count = 0
        disagreements, chain = [], []
        while samples < 600:
            k = rng.randint(1, 2)
            cons = []
            for _ in range(rng.randint(1, 5)):
                coeffs = tuple(rng.randint(-3, 3) for _ in range(k))
                if any(coeffs):
                    cons.append((coeffs, rng.randint(-10, 10)))
            if not cons:
                continue
            for i in range(k):
                for sign in (1, -1):
                    e = [0] * k
                    e[i] = sign
                    cons.append((tuple(e), box))
            samples += 1
            exact = exact_satisfiable(cons)
            brute = brute_force_point(cons, box) is not None
            sat_count += brute
            if exact != brute:
                disagreements.append(cons)
            if not fm_satisfiable(cons) and exact:
                chain.append(cons)
        ok = not disagreements and not chain
        report(8, ok, f"{samples} conjunctions ({sat_count} satisfiable), {len(disagreements)} disagreements, {len(chain)} chain violations")
        assert not disagreements, disagreements[:3]
        assert not chain, chain[:3]

    def test_criterion_9_representations(self, report):
        """Breakpoint lists and region trees agree for one parameter; breakpoint-list lookups."""
        systems = [
            parse_system("params p1\nx = p1 \\/ (x + 1 /\\ 3)\n"),
            parse_system("params p2\nx = 3 \\/ (x + 1 /\\ p2)\n"),
            parse_system(run_cli("gen", "exp", "--m", "2")[1]),
        ]
        rng = random.Random(9)
        for _ in range(150):
            systems.append(random_system(rng, rng.randint(1, 5), 2, 1, const_range=(-5, 5), max_scale=2))
        bad = []
        for s in systems:
            a = psi_solve(s, repr="list", validate=True)
            b = psi_solve(s, repr="tree", validate=True)
            for p in range(-10, 11):
                if a.values((p,)) != b.values((p,)):
                    bad.append((str(s), p))
                    break
        bl = BreakList((-4, 0, 1, 3), ("v0", "v1", "v2", "v3", "v4"))
        lookups = [bl.lookup(p) for p in (-5, -4, -3, 0, 1, 2, 3, 4)]
        lookups_ok = lookups == ["v0", "v0", "v1", "v1", "v2", "v3", "v3", "v4"]
        ok = not bad and lookups_ok
        report(9, ok, f"{len(systems)} one-parameter systems, {len(bad)} disagreements; breakpoint-list lookups {'correct' if lookups_ok else lookups}")
        assert not bad, bad[:3]
        assert lookups_ok, lookups

    def test_criterion_10_assumption(self, report):
        """Under 0 <= p1 <= p2 the clamped increment system gives p2 where p1 < p2 and p1 where p1 = p2."""
        assume = "0 <= p1 /\\ p1 <= p2"
        code, text = run_cli("solve", write_tmp("ex2.eq", CLAMP), "--assume", assume, "--format", "regions")
        regions = parse_regions(region_lines(text, "x"), NAMES)
        assumption = parse_constraint("0 <= p1 <= p2", NAMES)
        strict = LinIneq((1, -1), -1)  # p1 < p2
        problems = []
        values = set()
        for cons, value in regions:
            if not exact_satisfiable(cons):
                problems.append(("empty region", cons))
            for a in assumption:
                if exact_satisfiable(list(cons) + [neg_ineq(a)]):
                    problems.append(("outside assumption", cons, a))
            if value == parse_affine("p2", NAMES):
                values.add("p2")
                if exact_satisfiable(list(cons) + [neg_ineq(strict)]):
                    problems.append(("p2 where p1 = p2", cons))
            elif value == parse_affine("p1", NAMES):
                values.add("p1")
                if exact_satisfiable(list(cons) + [strict]):
                    problems.append(("p1 where p1 < p2", cons))
            else:
                problems.append(("unexpected value", value))
        covered = all(
            sum(all(c.holds(p) for c in cons) for cons, _ in regions) == (1 if all(a.holds(p) for a in assumption) else 0)
            for p in itertools.product(range(-6, 7), repeat=2)
        )
        ok = code == 0 and not problems and values == {"p1", "p2"} and covered
        report(10, ok, f"{len(regions)} regions, values {sorted(values)}, {len(problems)} problems, exact cover of the assumed grid: {covered}")
        assert code == 0
        assert not problems, problems
        assert values == {"p1", "p2"}
        assert covered
