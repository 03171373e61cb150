import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FakeCtx, deliver
from podsim.kademlia import INTER, REQUEST, RESPONSE, KademliaNode, Message, ProtocolParams
from podsim.sovkad import (
    MAX_DOMAINS,
    TICKET_TIMER,
    DomainReputation,
    SovKadNode,
    allocate_buckets,
    join_domain,
    leave_domain,
)


def world(ctx, domains=(0, 1)):
    """Domain 0 = {10, 11}; domain 1 = {20, 21, 22, 23}, where only 22 knows 23."""
    nodes = {i: SovKadNode(i, ctx, 0, domains) for i in (10, 11)}
    nodes.update({i: SovKadNode(i, ctx, 1, domains) for i in (20, 21, 22, 23)})
    nodes[10].idhts[0].load([(11, 0.0)])
    nodes[11].idhts[0].load([(10, 0.0)])
    nodes[20].idhts[1].load([(21, 0.0), (22, 0.0)])
    nodes[21].idhts[1].load([(20, 0.0), (22, 0.0)])
    nodes[22].idhts[1].load([(20, 0.0), (21, 0.0), (23, 0.0)])
    nodes[23].idhts[1].load([(22, 0.0)])
    for i in (10, 11):
        nodes[i].xdhts[1].load([(20, 0.0), (21, 0.0)])
    for i in (20, 21, 22, 23):
        nodes[i].xdhts[0].load([(10, 0.0), (11, 0.0)])
    return nodes


# -- bucket allocation --------------------------------------------------------

def test_allocation_examples():
    assert allocate_buckets(8, 1) == 128
    assert allocate_buckets(8, 2) == 122
    assert allocate_buckets(8, 8) == 32


def test_allocation_exhaustive():
    for d in range(1, MAX_DOMAINS + 1):
        for j in range(1, d + 1):
            per = allocate_buckets(d, j)
            assert 1 <= per <= 128
            assert j * per + 2 * (d - j) <= 256


def test_allocation_rejects_bad_input():
    with pytest.raises(ValueError):
        allocate_buckets(65, 1)
    with pytest.raises(ValueError):
        allocate_buckets(8, 0)
    with pytest.raises(ValueError):
        allocate_buckets(8, 9)


# -- reputation ---------------------------------------------------------------

def test_reputation_basics():
    r = DomainReputation(20)
    assert r.score == 1.0
    assert r.update(True) == 1.0
    r = DomainReputation(20)
    for ok in [True] * 14 + [False] * 6:
        r.update(ok)
    assert r.score == pytest.approx(0.7)
    with pytest.raises(ValueError):
        DomainReputation(0)


@given(st.lists(st.booleans(), max_size=80), st.integers(1, 30))
def test_reputation_matches_window_mean(outcomes, w):
    r = DomainReputation(w)
    for ok in outcomes:
        r.update(ok)
    assert len(r) <= w
    tail = outcomes[-w:]
    assert r.score == (sum(tail) / len(tail) if tail else 1.0)


@given(st.lists(st.booleans(), max_size=40))
def test_reputation_saturates(prefix):
    r = DomainReputation(20)
    for ok in prefix:
        r.update(ok)
    for _ in range(20):
        r.update(False)
    assert r.score == 0.0
    for _ in range(20):
        r.update(True)
    assert r.score == 1.0


def test_reputation_only_for_foreign_domains(ctx):
    n = world(ctx)[10]
    with pytest.raises(ValueError):
        n.update_reputation(0, True)


# -- inter-domain lookups -----------------------------------------------------

def test_inter_lookup_fans_out_to_closest_relayers(ctx):
    n = SovKadNode(0, ctx, 0, (0, 1))
    n.xdhts[1].load((p, 0.0) for p in (8, 9, 10, 11, 12))
    target = 13
    out = n.start_lookup(target, 1, 1)
    assert [m.kind for m in out] == [REQUEST] * 3
    assert [m.dst for m in out] == sorted((8, 9, 10, 11, 12), key=lambda p: p ^ target)[:3]
    assert all(m.channel == INTER and m.domain == 1 and m.src_domain == 0 for m in out)
    assert n.tickets[1].attempts == 1
    assert ctx.scheduled[-1][1] == TICKET_TIMER


def test_inter_lookup_truncated_fanout(ctx):
    n = world(ctx)[10]
    assert len(n.start_lookup(23, 1, 1)) == 2


def test_inter_lookup_empty_xdht_fails_with_miss(ctx):
    n = SovKadNode(0, ctx, 0, (0, 1))
    assert n.start_lookup(5, 1, 1) == []
    assert ctx.finished[1][0] is False
    assert n.reputation[1].outcomes[-1] is False


def test_relayer_knows_target_one_hop(ctx):
    nodes = world(ctx)
    deliver(nodes, nodes[10].start_lookup(22, 1, 1))
    assert ctx.finished[1] == (True, 1, 1)
    assert nodes[10].reputation[1].outcomes[-1] is True


def test_relayer_forwards_exactly_one_request(ctx):
    nodes = world(ctx)
    msg = Message(REQUEST, 10, 20, 1, 23, 0, depth=1, channel=INTER, domain=1, src_domain=0)
    out = nodes[20].receive(msg)
    assert [m.kind for m in out] == [REQUEST]
    assert out[0].dst == 22
    assert 10 in nodes[20].xdhts[0]


def test_relay_result_goes_back_to_source(ctx):
    nodes = world(ctx)
    sent = deliver(nodes, nodes[10].start_lookup(23, 1, 1))
    assert ctx.finished[1][:2] == (True, 2)
    back = [m for m in sent if m.kind == RESPONSE and m.dst == 10]
    assert back and back[0].channel == INTER and back[0].found


def test_relay_exhaustion_is_silent(ctx):
    nodes = world(ctx)
    msg = Message(REQUEST, 10, 20, 1, 999, 0, depth=1, channel=INTER, domain=1, src_domain=0)
    sent = deliver(nodes, [msg])
    assert not any(m.dst == 10 for m in sent)


def test_same_domain_request_matches_kademlia(ctx):
    a = SovKadNode(50, ctx, 0, (0, 1))
    b = KademliaNode(50, ctx)
    for t in (a.idhts[0], b.table):
        t.load((p, 0.0) for p in (3, 9, 33, 70, 1000))
    req = Message(REQUEST, 7, 50, 1, 60, 4, depth=1, domain=0)
    assert a.receive(req)[-1].peers == b.receive(req)[-1].peers


def test_timer_reinitiates_with_unvisited_relayers(ctx):
    n = SovKadNode(0, ctx, 0, (0, 1))
    n.xdhts[1].load((p, 0.0) for p in range(1, 8))
    first = {m.dst for m in n.start_lookup(1 << 70, 1, 1)}
    second = {m.dst for m in n.on_ticket_timer(1, 1)}
    assert len(second) == 3 and not first & second
    assert n.tickets[1].attempts == 2
    assert n.on_ticket_timer(1, 1) == []


def test_attempts_capped_at_nine(ctx):
    ctx.params = ProtocolParams(k=40)
    n = SovKadNode(0, ctx, 0, (0, 1))
    n.xdhts[1].load((p, 0.0) for p in range(1, 40))
    n.start_lookup(1 << 70, 1, 1)
    for a in range(1, 12):
        n.on_ticket_timer(1, a)
    assert n.tickets[1].attempts == 9


def test_deadline_abort_records_failure(ctx):
    nodes = world(ctx)
    src = nodes[10]
    src.start_lookup(23, 1, 1)
    assert src.abort_lookup(1) == 1
    assert src.reputation[1].outcomes[-1] is False
    assert not src.tickets


def test_score_crossing_threshold_requests_response(ctx):
    n = world(ctx)[10]
    for ok in [True] * 16 + [False] * 4:
        n.record_outcome(1, ok)
    assert n.reputation[1].score == pytest.approx(0.8)
    assert ctx.responses == []
    n.record_outcome(1, False)  # 15/20
    n.record_outcome(1, False)  # 14/20
    assert ctx.responses == []
    n.record_outcome(1, False)  # 13/20 < 0.7
    assert ctx.responses == [(10, 1)]


# -- membership changes -------------------------------------------------------

def test_join_reallocates_and_seeds_from_xdht(ctx):
    nodes = world(ctx, domains=tuple(range(8)))
    n = nodes[10]
    assert n.bucket_total() == 128 + 2 * 7
    before = set(n.xdhts[1].ids())
    out = join_domain(n, 1, 5.0)
    assert n.joined == {0, 1}
    assert all(t.bucket_count == 122 for t in n.idhts.values())
    assert n.bucket_total() <= 256
    assert set(n.idhts[1].ids()) == before
    assert out and all(m.kind == REQUEST and m.domain == 1 for m in out)
    assert n.last_join_at == 5.0
    # now answers same-domain requests for the joined domain
    resp = n.receive(Message(REQUEST, 22, 10, 3, 21, 1, depth=1, domain=1))[-1]
    assert resp.found and resp.peers == (21,)
    with pytest.raises(ValueError):
        join_domain(n, 1)


def test_joined_domain_lookups_are_intra(ctx):
    nodes = world(ctx)
    n = nodes[10]
    join_domain(n, 1)
    n.sessions.clear()
    out = n.start_lookup(23, 9, 1)
    assert out and all(m.channel != INTER for m in out)
    assert 9 not in n.tickets


def test_leave_round_trip(ctx):
    nodes = world(ctx, domains=tuple(range(8)))
    n = nodes[10]
    join_domain(n, 1)
    former = set(n.idhts[1].ids())
    n.sessions.clear()
    n.start_lookup(23, 4, 1)
    leave_domain(n, 1)
    assert n.joined == {0}
    assert n.idhts[0].bucket_count == 128
    assert n.xdhts[1].bucket_count == 2
    assert set(n.xdhts[1].ids()) <= former
    assert not n.sessions  # lookups on the dropped table are abandoned
    with pytest.raises(ValueError):
        leave_domain(n, 0)
    with pytest.raises(ValueError):
        leave_domain(n, 1)


def test_leave_policy_after_sustained_success(ctx):
    n = world(ctx)[10]
    join_domain(n, 1)
    for _ in range(2 * 20 - 2):
        n.record_intra(1, True)
    assert ctx.leaves == []
    n.record_intra(1, True)
    assert ctx.leaves == [(10, 1)]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 64), st.lists(st.tuples(st.booleans(), st.integers(0, 63)), max_size=40))
def test_bucket_sum_invariant_under_join_leave(d, ops):
    ctx = FakeCtx()
    domains = tuple(range(d))
    n = SovKadNode(1 << 100, ctx, 0, domains)
    for dom in domains[1:]:
        n.xdhts[dom].load([((dom + 1) << 60, 0.0)])
    for join, x in ops:
        dom = x % d
        if join and dom not in n.joined:
            join_domain(n, dom)
        elif not join and dom in n.joined and dom not in n.home_domains:
            leave_domain(n, dom)
        n.sessions.clear()
        j = len(n.joined)
        per = allocate_buckets(d, j)
        assert all(t.bucket_count == per for t in n.idhts.values())
        assert all(t.bucket_count == 2 for t in n.xdhts.values())
        assert set(n.idhts) | set(n.xdhts) == set(domains)
        assert n.bucket_total() == j * per + 2 * (d - j) <= 256
        for t in n.tables():
            t.check_invariants()
