import math
import random
from statistics import fmean, pstdev

import pytest
from hypothesis import given
from hypothesis import strategies as st

from podsim.metrics import (
    LookupRecord,
    RecordStore,
    aggregate,
    emit_plot_data,
    read_aggregates_csv,
    read_records_csv,
    success_rate_from_records,
    write_aggregates_csv,
    write_csv,
    write_records_csv,
)


def rec(lid, success=True, hops=1, messages=4, protocol="kademlia", n_domains=4, td=0, **kw):
    base = dict(
        run_id="r", protocol=protocol, scenario="happy_path", n_nodes=1000, n_domains=n_domains,
        lookup_id=lid, kind="intra", source_domain=0, target_domain=td, success=success,
        hops=hops, messages=messages, latency_ms=412.5, attempts=1,
    )
    base.update(kw)
    return LookupRecord(**base)


def test_single_record():
    (s,) = aggregate([rec(1, hops=2, messages=5)])
    assert (s.success_rate, s.success_std) == (1.0, 0.0)
    assert (s.hops_mean, s.hops_std, s.messages_mean, s.messages_std) == (2.0, 0.0, 5.0, 0.0)


def test_mixed_outcomes():
    rs = [rec(i, hops=i % 3, messages=3 + i) for i in range(7)]
    rs += [rec(7 + i, success=False, hops=9, messages=30) for i in range(3)]
    (s,) = aggregate(rs)
    assert s.success_rate == 0.7
    assert s.success_std == pytest.approx(math.sqrt(0.21))
    ok = [i % 3 for i in range(7)]
    assert s.hops_mean == pytest.approx(fmean(ok))
    assert s.hops_std == pytest.approx(pstdev(ok))
    assert s.hops_count == 7 and s.count == 10
    msgs = [3 + i for i in range(7)] + [30] * 3
    assert s.messages_mean == pytest.approx(fmean(msgs))


def test_all_failed_has_zero_hops():
    (s,) = aggregate([rec(1, success=False), rec(2, success=False)])
    assert s.success_rate == 0.0 and s.hops_count == 0 and s.hops_mean == 0.0


def test_groups_sorted_and_split():
    rs = [rec(i, protocol=p, n_domains=d) for i, (p, d) in
          enumerate([("sovkad", 8), ("fedkad", 2), ("kademlia", 2), ("fedkad", 8)])]
    keys = [(s.protocol, s.n_domains) for s in aggregate(rs)]
    assert keys == sorted(keys, key=lambda k: tuple(map(str, k)))
    assert len(keys) == 4


def test_domain_filter():
    rs = [rec(1, td=0, success=False), rec(2, td=1), rec(3, td=0)]
    (s,) = aggregate(rs, domain=0)
    assert s.count == 2 and s.success_rate == 0.5 and s.domain == 0
    assert aggregate(rs, domain=5) == []


def test_custom_group_and_filter():
    rs = [rec(1, kind="intra"), rec(2, kind="inter", hops=3), rec(3, kind="inter", hops=1)]
    out = aggregate(rs, filter=lambda r: r.kind == "inter")
    assert out[0].count == 2 and out[0].hops_mean == 2.0


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 6), st.integers(0, 60)), min_size=1, max_size=60),
       st.integers(0, 1000))
def test_aggregate_ignores_order(rows, seed):
    rs = [rec(i, success=s, hops=h, messages=m, protocol=("kademlia", "fedkad")[i % 2])
          for i, (s, h, m) in enumerate(rows)]
    shuffled = rs[:]
    random.Random(seed).shuffle(shuffled)
    a, b = aggregate(rs), aggregate(shuffled)
    assert [x.count for x in a] == [x.count for x in b]
    for x, y in zip(a, b):
        assert x.success_rate == y.success_rate
        assert x.hops_mean == pytest.approx(y.hops_mean)
        assert x.messages_std == pytest.approx(y.messages_std)


def test_store_rejects_duplicates():
    store = RecordStore()
    store.record(rec(1))
    with pytest.raises(ValueError):
        store.record(rec(1))
    assert len(store) == 1


def test_records_round_trip(tmp_path):
    rs = [rec(1), rec(2, success=False, latency_ms=10000.0, attempts=3)]
    path = tmp_path / "deep" / "records.csv"
    write_records_csv(rs, path)
    assert read_records_csv(path) == rs
    header = path.read_text().splitlines()[0]
    assert header.startswith("run_id,protocol,scenario")


def test_aggregates_round_trip(tmp_path):
    stats = aggregate([rec(1), rec(2, success=False, messages=9)])
    write_csv(stats, tmp_path / "agg.csv")
    rows = read_aggregates_csv(tmp_path / "agg.csv")
    assert [r["metric"] for r in rows] == ["success_rate", "hops", "messages"]
    assert rows[0]["mean"] == 0.5 and rows[2]["mean"] == 6.5


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_aggregates_csv([], blocker / "sub" / "agg.csv")


def test_plot_data(tmp_path):
    rs = [rec(i, protocol=p, n_domains=d) for i, (p, d) in
          enumerate([("kademlia", 2), ("fedkad", 2), ("kademlia", 8)])]
    paths = emit_plot_data(aggregate(rs), tmp_path)
    assert sorted(p.name for p in paths) == ["hops_n1000.dat", "messages_n1000.dat", "success_rate_n1000.dat"]
    lines = (tmp_path / "hops_n1000.dat").read_text().splitlines()
    assert lines[0].startswith("#")
    assert [ln.split()[:2] for ln in lines[1:]] == [["2", "fedkad"], ["2", "kademlia"], ["8", "kademlia"]]


def test_success_rate_helper():
    assert success_rate_from_records([rec(1), rec(2, success=False)]) == 0.5
    assert math.isnan(success_rate_from_records([]))
