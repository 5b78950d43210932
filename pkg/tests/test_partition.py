"""Tests for region trees, breakpoint lists and the lifted operators."""

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from psiter.extint import ext_add, ext_guard, ext_max, ext_min, ext_scale
from psiter.linear import AFF, NEG_FN, POS_FN, AffineFn, LinIneq, canonical_polarity, make_ineq, neg_ineq
from psiter.partition import (
    BreakList,
    EmptyAssumption,
    Leaf,
    ListSpace,
    Node,
    OutsideAssumption,
    TreeInvariantError,
    TreeSpace,
    align,
    argmax_keep_current,
    format_pretty,
    format_regions,
    from_regions,
    leaf_bound,
    lift_add,
    lift_guard,
    lift_max,
    lift_min,
    lift_scale,
    make_space,
    parse_regions,
    tree_labels,
)

NAMES = ["p1", "p2"]
C1 = LinIneq((-2, 1), -2)
C2 = LinIneq((-1, -1), -6)
C3 = LinIneq((-1, -1), -2)


def aff(const, *coeffs):
    return AffineFn(AFF, const, tuple(coeffs))


def grid(k, r=6):
    return list(itertools.product(range(-r, r + 1), repeat=k))


def eval_raw(t, p):
    while isinstance(t, Node):
        t = t.yes if t.label.holds(p) else t.no
    return t.value if isinstance(t, Leaf) else t


def random_value(rng, k):
    roll = rng.random()
    if roll < 0.1:
        return NEG_FN
    if roll < 0.15:
        return POS_FN
    return AffineFn(AFF, rng.randint(-4, 4), tuple(rng.randint(-2, 2) for _ in range(k)))


def random_raw(rng, k, depth, leaf=random_value):
    if depth == 0 or rng.random() < 0.3:
        return Leaf(leaf(rng, k))
    c = make_ineq([rng.randint(-2, 2) for _ in range(k)], rng.randint(-4, 4))
    if isinstance(c, bool):
        return Leaf(leaf(rng, k))
    return Node(c, random_raw(rng, k, depth - 1, leaf), random_raw(rng, k, depth - 1, leaf))


def random_index(rng, k):
    return rng.randint(0, 2)


def check_pointwise(space, result, expect, k):
    space.validate(result)
    for p in grid(k):
        if space.in_assumption(p):
            assert space.value_at(result, p) == expect(p), p


class TestBreakList:
    """Tests for the one-parameter representation."""

    def test_figure3_lookups(self):
        """Test the partition [-4, 0, 1, 3] at the boundary points."""
        bl = BreakList((-4, 0, 1, 3), ("v0", "v1", "v2", "v3", "v4"))
        got = [bl.lookup(p) for p in (-5, -4, -3, 0, 1, 2, 3, 4)]
        assert got == ["v0", "v0", "v1", "v1", "v2", "v3", "v3", "v4"]

    def test_second_region(self):
        """Test that -2 lies in the second region [-3, 0]."""
        space = ListSpace(1)
        bl = BreakList((-4, 0, 1, 3), ("v0", "v1", "v2", "v3", "v4"))
        assert space.value_at(bl, (-2,)) == "v1"

    def test_needs_one_parameter(self):
        """Test that lists are refused for two parameters."""
        with pytest.raises(ValueError):
            ListSpace(2)

    def test_domain_from_assumption(self):
        """Test that the assumption bounds the domain."""
        space = ListSpace(1, [LinIneq((-1,), 3), LinIneq((1,), 5)])
        assert (space.lo, space.hi) == (-3, 5)
        with pytest.raises(OutsideAssumption):
            space.value_at(space.leaf(1), (6,))

    def test_empty_domain(self):
        """Test that an empty interval is rejected."""
        with pytest.raises(EmptyAssumption):
            ListSpace(1, [LinIneq((1,), 0), LinIneq((-1,), -1)])

    def test_merge_equal_neighbours(self):
        """Test that normalize merges adjacent equal values."""
        space = ListSpace(1)
        assert space.normalize(BreakList((0, 2), ("a", "a", "b"))) == BreakList((2,), ("a", "b"))

    def test_to_tree(self):
        """Test the conversion to an equivalent ordered region tree."""
        space = ListSpace(1)
        bl = BreakList((-4, 0, 1, 3), tuple(range(5)))
        tree = space.to_tree(bl)
        TreeSpace(1).validate(tree)
        for p in range(-8, 9):
            assert eval_raw(tree, (p,)) == bl.lookup(p)


class TestRegionTree:
    """Tests for tree construction, lookup and normalization."""

    def test_single_leaf(self):
        """Test that a leaf has the same value everywhere."""
        space = TreeSpace(2)
        assert space.value_at(space.leaf("v"), (100, -3)) == "v"

    def three_cons(self):
        space = TreeSpace(2)
        raw = Node(C1, Node(C2, Node(C3, Leaf(1), Leaf(9)), Node(C3, Leaf(2), Leaf(3))), Leaf(4))
        return space, space.from_raw(raw)

    def test_three_cons_shape(self):
        """Test that the implied inequality is not repeated below the second label."""
        space, t = self.three_cons()
        assert t == Node(C1, Node(C2, Leaf(1), Node(C3, Leaf(2), Leaf(3))), Leaf(4))
        assert space.leaf_count(t) == 4

    def test_three_cons_lookup(self):
        """Test lookups in the first and second leaf."""
        space, t = self.three_cons()
        assert space.value_at(t, (3, 4)) == 1
        assert space.value_at(t, (2, 1)) == 2
        assert space.value_at(t, (0, 0)) == 4

    def test_labels_canonical_and_ordered(self):
        """Test that normalize flips and reorders labels."""
        space = TreeSpace(2)
        big, small = LinIneq((1, 1), 0), LinIneq((1, 0), 3)
        t = space.from_raw(Node(big, Node(small, Leaf("a"), Leaf("b")), Leaf("c")))
        space.validate(t)
        assert t.label == canonical_polarity(small)[0]
        for p in grid(2):
            expect = ("a" if small.holds(p) else "b") if big.holds(p) else "c"
            assert space.value_at(t, p) == expect

    def test_normalized_is_fixpoint(self):
        """Test that normalizing a normalized tree changes nothing."""
        space, t = self.three_cons()
        assert space.normalize(t) == t

    def test_unsat_branch_collapses(self):
        """Test that a contradictory split disappears."""
        space = TreeSpace(1)
        c = LinIneq((1,), 0)
        t = space.from_raw(Node(c, Node(neg_ineq(c), Leaf("x"), Leaf("y")), Leaf("z")))
        assert t == space.from_raw(Node(c, Leaf("y"), Leaf("z")))

    def test_validate_rejects_disorder(self):
        """Test that the validator catches out-of-order labels."""
        space = TreeSpace(2)
        with pytest.raises(TreeInvariantError):
            space.validate(Node(C2, Node(C1, Leaf(1), Leaf(2)), Leaf(3)))

    def test_validate_rejects_non_canonical(self):
        """Test that the validator catches a label in the wrong polarity."""
        with pytest.raises(TreeInvariantError):
            TreeSpace(1).validate(Node(LinIneq((1,), 0), Leaf(1), Leaf(2)))

    def test_leaf_bound(self):
        """Test the leaf bound for three labels in two dimensions."""
        assert leaf_bound(3, 2) == 7
        assert leaf_bound(2, 3) == 4

    def test_purge_integer_empty(self):
        """Test that purge removes a leaf whose region has no integer point."""
        space = TreeSpace(2)
        a, b, c = LinIneq((-4, -3), 0), LinIneq((2, -1), -2), LinIneq((1, 3), 3)
        t = space.from_raw(Node(a, Node(b, Node(c, Leaf("ghost"), Leaf("v")), Leaf("v")), Leaf("v")))
        assert "ghost" in space.leaves(t)
        assert space.purge(t) == Leaf("v")

    def test_assumption_restricts(self):
        """Test that regions outside the assumption are absent."""
        space = TreeSpace(2, [LinIneq((-1, 0), 0)])
        t = space.from_raw(Node(LinIneq((1, 0), -1), Leaf("neg"), Leaf("pos")))
        assert t == Leaf("pos")
        with pytest.raises(OutsideAssumption):
            space.value_at(t, (-1, 0))

    def test_empty_assumption(self):
        """Test that an assumption without integer points is rejected."""
        with pytest.raises(EmptyAssumption):
            TreeSpace(1, [LinIneq((3,), 1), LinIneq((-3,), -1)])


class TestLiftedExamples:
    """Tests for the lifted operators on small inputs."""

    def test_min_splits(self):
        """Test that (p1 + 1) /\\ p2 splits on p1 - p2 <= -1."""
        space = TreeSpace(2)
        t = lift_min(space, Leaf(aff(1, 1, 0)), Leaf(aff(0, 0, 1)))
        assert tree_labels(t) == {canonical_polarity(LinIneq((1, -1), -1))[0]}
        assert space.value_at(t, (0, 5)) == aff(1, 1, 0)
        assert space.value_at(t, (5, 0)) == aff(0, 0, 1)

    def test_add_neg_inf_absorbs(self):
        """Test that adding -inf gives -inf everywhere."""
        space = TreeSpace(2)
        other = space.from_raw(Node(C1, Leaf(aff(3, 1, 1)), Leaf(POS_FN)))
        assert lift_add(space, Leaf(NEG_FN), other) == Leaf(NEG_FN)

    def test_guard_infinite_test(self):
        """Test that inf ; g is g."""
        space = TreeSpace(1)
        assert lift_guard(space, Leaf(POS_FN), Leaf(aff(0, 1))) == Leaf(aff(0, 1))

    def test_align_leaves(self):
        """Test that aligning two leaves pairs their values."""
        assert align(TreeSpace(1), Leaf("a"), Leaf("b")) == Leaf(("a", "b"))

    def test_align_disjoint_labels(self):
        """Test that aligning two single-node trees gives at most four leaves."""
        space = TreeSpace(2)
        c, d = LinIneq((-1, 0), 0), LinIneq((0, -1), 0)
        t = align(space, Node(c, Leaf(1), Leaf(2)), Node(d, Leaf(3), Leaf(4)))
        space.validate(t)
        assert t.label == c and space.leaf_count(t) == 4

    def test_align_same_tree(self):
        """Test that aligning a tree with itself keeps its shape."""
        space, t = TestRegionTree().three_cons()
        paired = align(space, t, t)
        assert space.leaf_count(paired) == space.leaf_count(t)
        assert tree_labels(paired) == tree_labels(t)

    def test_select_constant_index(self):
        """Test that a constant index selects one input."""
        space = TreeSpace(2)
        v = space.from_raw(Node(C1, Leaf(aff(1, 0, 0)), Leaf(aff(2, 0, 0))))
        assert space.select(Leaf(0), {0: v}) == v

    def test_select_clamp_shape(self):
        """Test that the index split -p1 + p2 <= 0 selects p1 or p2."""
        space = TreeSpace(2)
        sigma = Node(LinIneq((-1, 1), 0), Leaf(1), Leaf(2))
        t = space.select(sigma, {1: Leaf(aff(0, 1, 0)), 2: Leaf(aff(0, 0, 1))})
        assert format_pretty(t, NAMES) == "if -1*p1 + 1*p2 <= 0 then 0 + 1*p1 else 0 + 1*p2"

    def test_select_identical_values_merge(self):
        """Test that selecting among equal values gives a single leaf."""
        space = TreeSpace(2)
        sigma = space.from_raw(Node(C1, Leaf(0), Node(C3, Leaf(1), Leaf(2))))
        t = space.select(sigma, {i: Leaf(aff(7, 0, 0)) for i in range(3)})
        assert t == Leaf(aff(7, 0, 0))

    def test_argmax_first_improvement(self):
        """Test that -inf at the current index switches to p1 everywhere."""
        space = TreeSpace(2)
        t = argmax_keep_current(space, Leaf(0), [Leaf(NEG_FN), Leaf(aff(0, 1, 0))])
        assert t == Leaf(1)

    def test_argmax_second_improvement(self):
        """Test switching to (p1+1) /\\ p2 exactly where -p1 + p2 >= 1."""
        space = TreeSpace(2)
        third = lift_min(space, Leaf(aff(1, 1, 0)), Leaf(aff(0, 0, 1)))
        t = argmax_keep_current(space, Leaf(1), [Leaf(NEG_FN), Leaf(aff(0, 1, 0)), third])
        assert t == Node(LinIneq((-1, 1), 0), Leaf(1), Leaf(2))

    def test_argmax_all_equal(self):
        """Test that equal alternatives keep the current index."""
        space = TreeSpace(1)
        sigma = space.from_raw(Node(LinIneq((1,), 0), Leaf(1), Leaf(0)))
        assert argmax_keep_current(space, sigma, [Leaf(aff(2, 1)), Leaf(aff(2, 1))]) == sigma

    def test_equal_semantic(self):
        """Test that equality ignores redundant structure."""
        space = TreeSpace(2)
        a = Node(LinIneq((-1, 0), 0), Leaf(1), Leaf(1))
        assert space.equal(Leaf(1), space.from_raw(a))
        assert not space.equal(Leaf(1), Leaf(2))


@pytest.mark.parametrize("kind", ["tree", "list"])
class TestLiftedPointwise:
    """Pointwise oracle for every lifted operator."""

    def spaces(self, kind, seed):
        rng = random.Random(seed)
        k = 1 if kind == "list" else rng.randint(1, 2)
        assumption = []
        if rng.random() < 0.3:
            c = make_ineq([rng.randint(-1, 1) for _ in range(k)], rng.randint(0, 3))
            if isinstance(c, LinIneq):
                assumption.append(c)
        return rng, k, make_space(k, assumption, kind)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_binary_ops(self, kind, seed):
        """Test add, min, max and guard against the extended-integer operators."""
        rng, k, space = self.spaces(kind, seed)
        ra, rb = random_raw(rng, k, 3), random_raw(rng, k, 3)
        a, b = space.from_raw(ra), space.from_raw(rb)
        for lift, op in ((lift_add, ext_add), (lift_min, ext_min), (lift_max, ext_max), (lift_guard, ext_guard)):
            out = lift(space, a, b)
            space.validate(out)
            for p in grid(k):
                if space.in_assumption(p):
                    assert space.value_at(out, p)(p) == op(eval_raw(ra, p)(p), eval_raw(rb, p)(p))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.integers(0, 3))
    def test_scale(self, kind, seed, c):
        """Test scaling against the extended-integer operator."""
        rng, k, space = self.spaces(kind, seed)
        ra = random_raw(rng, k, 3)
        out = lift_scale(space, c, space.from_raw(ra))
        space.validate(out)
        for p in grid(k):
            if space.in_assumption(p):
                assert space.value_at(out, p)(p) == ext_scale(c, eval_raw(ra, p)(p))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_align_refines(self, kind, seed):
        """Test that each aligned region carries both input values."""
        rng, k, space = self.spaces(kind, seed)
        ra, rb = random_raw(rng, k, 3), random_raw(rng, k, 3)
        out = align(space, space.from_raw(ra), space.from_raw(rb))
        check_pointwise(space, out, lambda p: (eval_raw(ra, p), eval_raw(rb, p)), k)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_select_and_argmax(self, kind, seed):
        """Test select and the improvement choice region by region."""
        rng, k, space = self.spaces(kind, seed)
        rs = random_raw(rng, k, 3, random_index)
        rv = [random_raw(rng, k, 2) for _ in range(3)]
        sigma = space.from_raw(rs)
        vals = [space.from_raw(r) for r in rv]
        picked = space.select(sigma, dict(enumerate(vals)))
        check_pointwise(space, picked, lambda p: eval_raw(rv[eval_raw(rs, p)], p), k)

        def best(p):
            cur = eval_raw(rs, p)
            xs = [eval_raw(r, p)(p) for r in rv]
            return cur if xs[cur] == max(xs) else xs.index(max(xs))

        check_pointwise(space, argmax_keep_current(space, sigma, vals), best, k)


class TestRepresentationsAgree:
    """Tests that breakpoint lists and region trees compute the same values."""

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**6))
    def test_random_ops(self, seed):
        """Test a chain of lifted operators in both representations."""
        rng = random.Random(seed)
        raws = [random_raw(rng, 1, 3) for _ in range(3)]
        results = {}
        for kind in ("list", "tree"):
            space = make_space(1, (), kind)
            a, b, c = (space.from_raw(r) for r in raws)
            out = lift_guard(space, c, lift_min(space, lift_add(space, a, b), lift_scale(space, 2, c)))
            results[kind] = (space, out)
        for p in range(-10, 11):
            vals = {kind: s.value_at(t, (p,)) for kind, (s, t) in results.items()}
            assert vals["list"] == vals["tree"]


class TestRegionsText:
    """Tests for the flat region listing."""

    def test_format(self):
        """Test the rendering of the clamped increment solution."""
        space = TreeSpace(2)
        t = Node(LinIneq((-1, 1), 0), Leaf(aff(0, 1, 0)), Leaf(aff(0, 0, 1)))
        assert format_regions(space.regions(t), NAMES) == [
            "[-1*p1 + 1*p2 <= 0] -> 0 + 1*p1",
            "[1*p1 + -1*p2 <= -1] -> 0 + 1*p2",
        ]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(["tree", "list"]))
    def test_round_trip(self, seed, kind):
        """Test that parsing the listing rebuilds an equal partition."""
        rng = random.Random(seed)
        k = 1 if kind == "list" else 2
        space = make_space(k, (), kind)
        t = space.from_raw(random_raw(rng, k, 3))
        lines = format_regions(space.regions(t), NAMES[:k])
        back = from_regions(space, parse_regions(lines, NAMES[:k]))
        assert space.equal(back, t)

    def test_uncovered_regions_rejected(self):
        """Test that a listing with a gap is refused."""
        space = TreeSpace(1)
        with pytest.raises(ValueError):
            from_regions(space, [([LinIneq((1,), 0)], "a"), ([LinIneq((-1,), -2)], "b")])
