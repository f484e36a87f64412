import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdcast.trace import (
    ContactEvent,
    FamilySpec,
    SyntheticTraceConfig,
    Trace,
    TraceFormatError,
    extract_pair_ict_samples,
    generate_synthetic_trace,
    merge_contacts,
    parse_trace,
    serialize_trace,
    synthetic_node_names,
    trace_summary,
)


def csv(*rows):
    return "node_a,node_b,start,end\n" + "\n".join(rows) + "\n"


def union_oracle(intervals):
    """Brute-force union over integer seconds; returns maximal [a, b] runs."""
    covered = set()
    for a, b in intervals:
        covered.update(range(a, b))
    out = []
    for s in sorted(covered):
        if out and out[-1][1] == s:
            out[-1][1] = s + 1
        else:
            out.append([s, s + 1])
    return [tuple(r) for r in out]


def test_parse_two_rows():
    tr = parse_trace(csv("A,B,10,60", "B,C,20,80"))
    assert len(tr.nodes) == 3
    assert len(tr) == 2
    assert tr.horizon == (10, 80)


def test_overlapping_rows_merge():
    tr = parse_trace(csv("A,B,10,60", "A,B,50,100"))
    assert [(e.node_a, e.node_b, e.start, e.end) for e in tr] == [("A", "B", 10, 100)]
    assert [(e.start, e.end) for e in tr] == union_oracle([(10, 60), (50, 100)])


def test_pairs_are_canonical_and_events_sorted():
    tr = parse_trace(csv("C,B,30,40", "B,A,5,9"))
    assert [e.pair for e in tr] == [("A", "B"), ("B", "C")]


def test_empty_input():
    tr = parse_trace("")
    assert len(tr) == 0 and len(tr.nodes) == 0
    assert len(parse_trace("node_a,node_b,start,end\n")) == 0


def test_crawdad_format():
    tr = parse_trace("A B 10 60\nB  C\t20 80\n", format="crawdad")
    assert len(tr) == 2 and tr.horizon == (10, 80)


@pytest.mark.parametrize(
    "text,line",
    [
        (csv("A,B,10,60", "A,B,60,60"), 3),
        (csv("A,B,10,60", "A,B,x,70"), 3),
        (csv("A,B,10"), 2),
        (csv("A,B,-5,10"), 2),
        ("a,b,c,d\nA,B,1,2\n", 1),
    ],
)
def test_malformed_rows_report_line(text, line):
    with pytest.raises(TraceFormatError) as err:
        parse_trace(text)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_unknown_format():
    with pytest.raises(TraceFormatError):
        parse_trace("A B 1 2", format="json")


def test_summary():
    tr = parse_trace(csv("A,B,0,60", "A,B,100,200", "B,C,20,86400"))
    s = trace_summary(tr)
    assert s.node_count == 3 and s.event_count == 3
    assert s.duration_days == pytest.approx(1.0)
    assert s.pair_counts == {("A", "B"): 2, ("B", "C"): 1}
    empty = trace_summary(parse_trace(""))
    assert empty.node_count == 0 and empty.duration_days == 0


@pytest.mark.parametrize(
    "rows,expected",
    [
        (["A,B,10,60", "A,B,160,200"], [100]),
        (["A,B,10,60"], []),
        (["A,B,0,10", "A,B,20,30", "A,B,100,110"], [10, 70]),
    ],
)
def test_ict_samples(rows, expected):
    assert extract_pair_ict_samples(parse_trace(csv(*rows)), ("A", "B")) == expected


def test_ict_samples_unknown_pair():
    assert extract_pair_ict_samples(parse_trace(csv("A,B,1,2")), ("A", "Z")) == []


def test_synthetic_determinism():
    cfg = SyntheticTraceConfig(communities=(4, 3), horizon=86400, seed=7)
    assert generate_synthetic_trace(cfg) == generate_synthetic_trace(cfg)
    other = generate_synthetic_trace(SyntheticTraceConfig(communities=(4, 3), horizon=86400, seed=8))
    assert other != generate_synthetic_trace(cfg)


def test_synthetic_no_inter_contacts():
    cfg = SyntheticTraceConfig(communities=(3, 3), inter_rate=0.0, horizon=3 * 86400, seed=2)
    tr = generate_synthetic_trace(cfg)
    names = synthetic_node_names(cfg)
    group = {n: (0 if k < 3 else 1) for k, n in enumerate(names)}
    assert len(tr) > 0
    assert all(group[e.node_a] == group[e.node_b] for e in tr)


def test_synthetic_mean_ict():
    cfg = SyntheticTraceConfig(
        communities=(4,), intra_rate=1 / 600, horizon=10**6, contact_duration_mean=30,
        contact_duration_std=10, seed=3,
    )
    tr = generate_synthetic_trace(cfg)
    samples = [s for p in tr.pairs() for s in extract_pair_ict_samples(tr, p)]
    # the generator draws start-to-start gaps' idle part, so ICT = gap
    assert np.mean(samples) == pytest.approx(600, rel=0.1)


def test_synthetic_duration_floor():
    cfg = SyntheticTraceConfig(communities=(3,), contact_duration_mean=1, contact_duration_std=50,
                               horizon=86400, seed=4)
    assert all(e.end - e.start >= 1 for e in generate_synthetic_trace(cfg))


def test_family_spec_rejects_unknown():
    with pytest.raises(ValueError):
        FamilySpec("weibull")


def test_invalid_config():
    with pytest.raises(ValueError):
        generate_synthetic_trace(SyntheticTraceConfig(intra_rate=-1))
    with pytest.raises(ValueError):
        generate_synthetic_trace(SyntheticTraceConfig(horizon=0))
    with pytest.raises(ValueError):
        generate_synthetic_trace(SyntheticTraceConfig(communities=(3, 0)))


# -- properties ------------------------------------------------------------------

nodes = st.sampled_from(["a", "b", "c", "d"])
rows = st.lists(
    st.tuples(nodes, nodes, st.integers(0, 500), st.integers(1, 60)).filter(lambda r: r[0] != r[1]),
    max_size=40,
)


def build(raw):
    return Trace.from_events(ContactEvent(s, a, b, s + d) for a, b, s, d in raw)


@settings(max_examples=100, deadline=None)
@given(rows, st.sampled_from(["csv", "crawdad"]))
def test_round_trip(raw, fmt):
    tr = build(raw)
    assert parse_trace(serialize_trace(tr, fmt), fmt) == tr


@settings(max_examples=100, deadline=None)
@given(rows)
def test_no_same_pair_overlap(raw):
    tr = build(raw)
    for pair in tr.pairs():
        ev = tr.pair_contacts(pair)
        assert all(x.end < y.start for x, y in zip(ev, ev[1:]))
        assert [(e.start, e.end) for e in ev] == union_oracle(
            [(s, s + d) for a, b, s, d in raw if tuple(sorted((a, b))) == pair]
        )


@settings(max_examples=100, deadline=None)
@given(rows)
def test_sample_count(raw):
    tr = build(raw)
    for pair in tr.pairs():
        samples = extract_pair_ict_samples(tr, pair)
        assert len(samples) == len(tr.pair_contacts(pair)) - 1
        assert all(s > 0 for s in samples)


def test_merge_contacts_touching():
    merged = merge_contacts([ContactEvent(0, "a", "b", 10), ContactEvent(10, "b", "a", 20)])
    assert [(e.start, e.end) for e in merged] == [(0, 20)]
