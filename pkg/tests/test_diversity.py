import math
import random

import pytest
from hypothesis import given, strategies as st

from knowledge_collapse.diversity import (
    NOISE,
    FrequencyTable,
    GroupPartition,
    VectorSet,
    dbscan,
    frequency_table,
    group_proportional_deviation,
    minimal_representativeness,
    pielou_evenness,
    proportional_deviation,
    resolve_entities,
    shannon_index,
    uniform_deviation,
)
from knowledge_collapse.errors import UsageError

from oracles import dbscan_partition, nearest_reference, total_variation

REF4 = ("a", "b", "c", "d")


def table(counts, reference=REF4):
    return FrequencyTable(reference, counts)


def test_shannon_examples():
    assert shannon_index(table({"a": 1, "b": 1, "c": 1, "d": 1})) == pytest.approx(math.log(4))
    assert shannon_index(table({"a": 10})) == 0
    assert shannon_index(table({"a": 3, "b": 1})) == pytest.approx(0.562335, abs=1e-6)
    with pytest.raises(UsageError):
        shannon_index(table({}))


def test_pielou_table_values():
    assert round(pielou_evenness(4.01, 2693), 2) == 0.51
    assert round(pielou_evenness(7.02, 2693), 2) == 0.89
    assert pielou_evenness(math.log(2693), 2693) == 1.0
    with pytest.raises(UsageError):
        pielou_evenness(0.0, 1)
    with pytest.raises(UsageError):
        pielou_evenness(math.log(4) + 0.01, 4)


counts_strategy = st.lists(st.integers(0, 50), min_size=2, max_size=30).filter(lambda c: sum(c) > 0)


def _table_from(counts):
    ref = tuple(f"e{i}" for i in range(len(counts)))
    return FrequencyTable(ref, dict(zip(ref, counts)))


@given(counts_strategy)
def test_shannon_bounds_and_uniform_equality(counts):
    t = _table_from(counts)
    R = len(counts)
    h = shannon_index(t)
    assert 0 <= h <= math.log(R) + 1e-12
    j = pielou_evenness(h, R)
    uniform = len(set(counts)) == 1
    if uniform:
        assert j == pytest.approx(1.0, abs=1e-12)
    else:
        assert j < 1.0 - 1e-12
    nonzero = [c for c in counts if c]
    if len(nonzero) == 1:
        assert h == 0


@given(st.integers(2, 40), st.integers(1, 20))
def test_uniform_tables_are_perfectly_even(R, k):
    t = _table_from([k] * R)
    assert pielou_evenness(shannon_index(t), R) == pytest.approx(1.0, abs=1e-12)


def test_minimal_representativeness():
    assert minimal_representativeness(table({"a": 1, "b": 2, "c": 3, "d": 1})) == []
    assert minimal_representativeness(FrequencyTable(("a", "b", "c"), {"a": 5, "b": 2})) == ["c"]
    t = FrequencyTable(("italian", "sign"), {"italian": 508, "sign": 1})
    assert minimal_representativeness(t) == []


def test_proportional_deviation_examples():
    w = {"a": 1, "b": 2, "c": 3, "d": 4}
    assert proportional_deviation(table({"a": 10, "b": 20, "c": 30, "d": 40}), w) == pytest.approx(0, abs=1e-15)
    assert uniform_deviation(table({"a": 7})) == pytest.approx(0.75)
    with pytest.raises(UsageError):
        proportional_deviation(table({"a": 1}), {r: 0 for r in REF4})
    with pytest.raises(UsageError):
        proportional_deviation(table({"a": 1}), {"a": 1})


@given(
    st.lists(st.tuples(st.integers(0, 30), st.floats(0, 10)), min_size=2, max_size=15).filter(
        lambda rows: sum(c for c, _ in rows) > 0 and sum(w for _, w in rows) > 0
    ),
    st.floats(0.01, 100),
)
def test_proportional_deviation_matches_direct_sum(rows, scale):
    counts = [c for c, _ in rows]
    weights = [w for _, w in rows]
    t = _table_from(counts)
    wmap = dict(zip(t.reference, weights))
    got = proportional_deviation(t, wmap)
    assert got == pytest.approx(total_variation(counts, weights), abs=1e-12)
    assert 0 <= got <= 1
    scaled = {k: v * scale for k, v in wmap.items()}
    assert proportional_deviation(t, scaled) == pytest.approx(got, abs=1e-12)


def test_group_deviation_examples():
    ref = ("x1", "x2", "y1")
    part = GroupPartition({"x1": "X", "x2": "X", "y1": "Y"}, {"X": 1, "Y": 1})
    assert group_proportional_deviation(FrequencyTable(ref, {"x1": 25, "x2": 25, "y1": 50}), part) == 0
    assert group_proportional_deviation(FrequencyTable(ref, {"x1": 100}), part) == pytest.approx(0.5)
    with pytest.raises(UsageError):
        group_proportional_deviation(FrequencyTable(ref, {"y1": 1}),
                                     GroupPartition({"x1": "X"}, {"X": 1}))
    with pytest.raises(UsageError):
        GroupPartition({"x1": "X"}, {"X": 0})


@given(counts_strategy, st.data())
def test_singleton_groups_reduce_to_item_deviation(counts, data):
    t = _table_from(counts)
    w = {r: data.draw(st.floats(0.1, 5)) for r in t.reference}
    part = GroupPartition({r: r for r in t.reference}, w)
    assert group_proportional_deviation(t, part) == pytest.approx(proportional_deviation(t, w), abs=1e-12)


def test_frequency_table_basics():
    assert frequency_table([], REF4).total == 0
    t = frequency_table(["a", "a", "b", None], REF4)
    assert t.counts == {"a": 2, "b": 1}
    assert t.count("d") == 0
    assert t.ranked()[:2] == [("a", 2), ("b", 1)]
    with pytest.raises(UsageError):
        frequency_table(["zzz"], REF4)
    with pytest.raises(UsageError):
        FrequencyTable(("a", "a"))


@given(st.lists(st.sampled_from(REF4)), st.lists(st.sampled_from(REF4)))
def test_frequency_tables_add(xs, ys):
    assert frequency_table(xs + ys, REF4) == frequency_table(xs, REF4) + frequency_table(ys, REF4)


def _partition_from(assign, labels):
    clusters = {}
    for i, l in enumerate(labels):
        if assign[l] != NOISE:
            clusters.setdefault(assign[l], set()).add(i)
    noise = {i for i, l in enumerate(labels) if assign[l] == NOISE}
    return {frozenset(c) for c in clusters.values()}, noise


def test_dbscan_examples():
    pts = [(0, 0), (0.5, 0), (0, 0.5), (100, 100), (100.5, 100), (100, 100.5)]
    labels = [f"p{i}" for i in range(6)]
    out = dbscan(VectorSet(labels, pts), eps=1.0, min_pts=2)
    assert len(set(out.values())) == 2 and NOISE not in out.values()
    one = dbscan(VectorSet(labels, pts), eps=1000.0, min_pts=1)
    assert set(one.values()) == {0}
    iso = dbscan(VectorSet(["a", "b", "c", "z"], [(0, 0), (0.1, 0), (0, 0.1), (50, 50)]), eps=1.0, min_pts=2)
    assert iso["z"] == NOISE


def test_dbscan_matches_oracle_on_random_instances():
    rnd = random.Random(11)
    for trial in range(100):
        n = rnd.randint(1, 25)
        d = rnd.randint(1, 3)
        pts = [tuple(round(rnd.uniform(0, 10), 1) for _ in range(d)) for _ in range(n)]
        eps = rnd.uniform(0.5, 3.0)
        min_pts = rnd.randint(1, 5)
        labels = [f"m{i:02d}" for i in range(n)]
        got = _partition_from(dbscan(VectorSet(labels, pts), eps, min_pts), labels)
        assert got == dbscan_partition(pts, eps, min_pts), trial


@given(
    st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=20, unique=True),
    st.floats(0.5, 5),
    st.integers(1, 4),
    st.randoms(),
)
def test_dbscan_order_invariant(pts, eps, min_pts, rnd):
    labels = [f"q{i:02d}" for i in range(len(pts))]
    base = dbscan(VectorSet(labels, pts), eps, min_pts)
    order = list(range(len(pts)))
    rnd.shuffle(order)
    shuffled = dbscan(VectorSet([labels[i] for i in order], [pts[i] for i in order]), eps, min_pts)
    assert shuffled == base


def test_dbscan_cosine_metric():
    vs = VectorSet(["a", "b", "c"], [(1, 0), (2, 0.01), (0, 1)])
    out = dbscan(vs, eps=0.01, min_pts=2, metric="cosine")
    assert out["a"] == out["b"] != NOISE and out["c"] == NOISE


def test_resolve_examples():
    ref = VectorSet(["x", "y"], [(0, 0), (10, 0)])
    m = VectorSet(["m1", "m2", "m3"], [(0, 0), (9, 0), (5, 50)])
    assert resolve_entities(m, ref, eps=3.0) == {"m1": "x", "m2": "y", "m3": None}
    with pytest.raises(UsageError):
        resolve_entities(VectorSet(["m"], [(0, 0, 0)]), ref, eps=3.0)


def test_resolve_matches_exhaustive_scan():
    rnd = random.Random(5)
    for _ in range(100):
        d = rnd.randint(1, 4)
        refs = [tuple(rnd.uniform(-5, 5) for _ in range(d)) for _ in range(rnd.randint(1, 12))]
        ments = [tuple(rnd.uniform(-6, 6) for _ in range(d)) for _ in range(rnd.randint(1, 12))]
        eps = rnd.uniform(0.5, 4)
        rl = [f"r{i}" for i in range(len(refs))]
        ml = [f"m{i}" for i in range(len(ments))]
        got = resolve_entities(VectorSet(ml, ments), VectorSet(rl, refs), eps)
        for label, vec in zip(ml, ments):
            j = nearest_reference(vec, refs, eps)
            assert got[label] == (None if j is None else rl[j])


def test_vector_set_validation():
    with pytest.raises(UsageError):
        VectorSet(["a", "a"], [(0,), (1,)])
    with pytest.raises(UsageError):
        VectorSet(["a"], [(0,), (1,)])
    vs = VectorSet(["a", "b"], [(0, 1), (2, 3)])
    assert vs.dimension == 2
    assert vs.subset(["b"]).labels == ("b",)
