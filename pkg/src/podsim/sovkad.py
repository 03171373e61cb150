"""SovKad: node discovery for overlays split into sovereign domains.

Every node keeps an iDHT per joined domain and a two-bucket xDHT per foreign
domain. Inter-domain lookups are handed to α relayers inside the target
domain. The outcome of each one feeds a per-domain success-rate window; when
a domain's score drops below the threshold the node may temporarily join it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from podsim.identity import ID_BITS, NodeId
from podsim.kademlia import INTER, INTRA, RELAY, REQUEST, RESPONSE, SOURCE, Lookup, Message, Node
from podsim.routing import IDHT, XDHT, RoutingTable

TICKET_TIMER = "ticket_timer"
RESPONSE_CHECK = "response_check"

TOTAL_BUCKETS = 256
XDHT_BUCKETS = 2
MAX_DOMAINS = TOTAL_BUCKETS // XDHT_BUCKETS // 2  # 64


def allocate_buckets(total_domains: int, joined: int) -> int:
    """Per-iDHT bucket count when a node is in ``joined`` of ``total_domains``.

    All iDHTs get the same count, every xDHT keeps two buckets, and the sum
    stays within 256 buckets.
    """
    if total_domains > MAX_DOMAINS:
        raise ValueError(f"at most {MAX_DOMAINS} domains are supported, got {total_domains}")
    if not 1 <= joined <= total_domains:
        raise ValueError(f"need 1 <= joined <= total_domains, got joined={joined}, total={total_domains}")
    spare = TOTAL_BUCKETS - XDHT_BUCKETS * (total_domains - joined)
    return min(ID_BITS, spare // joined)


class DomainReputation:
    """Success rate over the last ``window`` outcomes toward one domain."""

    __slots__ = ("outcomes",)

    def __init__(self, window: int = 20):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.outcomes: deque[bool] = deque(maxlen=window)

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def window(self) -> int:
        return self.outcomes.maxlen

    @property
    def score(self) -> float:
        if not self.outcomes:
            return 1.0
        return sum(self.outcomes) / len(self.outcomes)

    def update(self, success: bool) -> float:
        self.outcomes.append(bool(success))
        return self.score


@dataclass
class SovTicket:
    lookup_id: int
    target: NodeId
    target_domain: object
    attempts: int = 0
    visited: set | None = None


class SovKadNode(Node):
    def __init__(self, node_id: NodeId, ctx, domain: object, all_domains):
        super().__init__(node_id, ctx, domain)
        k = ctx.params.k
        self.all_domains = tuple(all_domains)
        self.home_domains = frozenset([domain])
        self.joined: set = {domain}
        self.idhts: dict[object, RoutingTable] = {domain: RoutingTable(node_id, k, kind=IDHT, scope=domain)}
        self.xdhts: dict[object, RoutingTable] = {
            d: RoutingTable(node_id, k, bucket_count=XDHT_BUCKETS, kind=XDHT, scope=d)
            for d in self.all_domains if d != domain
        }
        self.reputation: dict[object, DomainReputation] = {}
        self.tickets: dict[int, SovTicket] = {}
        self.last_join_at: float | None = None
        self.response_pending = False
        # leave policy bookkeeping for response deployments
        self.stay_windows: dict[object, DomainReputation] = {}
        self.stay_streak: dict[object, int] = {}

    def tables(self) -> list[RoutingTable]:
        return [*self.idhts.values(), *self.xdhts.values()]

    def table_for(self, domain) -> RoutingTable | None:
        t = self.idhts.get(domain)
        return t if t is not None else self.xdhts.get(domain)

    def bucket_total(self) -> int:
        return sum(t.bucket_count for t in self.tables())

    # -- lookups started here -----------------------------------------------
    def start_lookup(self, target: NodeId, lookup_id: int, target_domain: object = None) -> list[Message]:
        if target == self.id:
            raise ValueError("lookup target equals source")
        if target_domain is None:
            target_domain = self.domain
        if target_domain in self.joined:
            lk = self.new_lookup(self.idhts[target_domain], target, lookup_id,
                                 max_attempts=self.ctx.params.max_attempts_intra, domain=target_domain)
            return self.drive(lk, lk.start(self.ctx.now))
        ticket = SovTicket(lookup_id, target, target_domain, visited=set())
        self.tickets[lookup_id] = ticket
        return self.start_inter_lookup(ticket)

    def start_inter_lookup(self, ticket: SovTicket) -> list[Message]:
        """Hand the lookup to the α XOR-closest unvisited relayers of the target domain."""
        ctx = self.ctx
        xdht = self.xdhts.get(ticket.target_domain)
        relayers = []
        if xdht is not None and ticket.attempts < ctx.params.max_attempts_sovkad:
            relayers = xdht.closest_ids(ticket.target, ctx.params.alpha, skip=ticket.visited)
        if not relayers:
            if ticket.attempts == 0:
                return self.fail_inter(ticket)
            return []  # nothing left to try; the deadline settles it
        ticket.attempts += 1
        ticket.visited.update(relayers)
        ctx.schedule(ctx.params.inter_attempt_timeout, TICKET_TIMER,
                     (self.id, ticket.lookup_id, ticket.attempts))
        home = self.domain
        return [
            Message(REQUEST, self.id, r, ticket.lookup_id, ticket.target, 0, depth=1,
                    channel=INTER, domain=ticket.target_domain, src_domain=home)
            for r in relayers
        ]

    def on_ticket_timer(self, lookup_id: int, attempt: int) -> list[Message]:
        ticket = self.tickets.get(lookup_id)
        if ticket is None or ticket.attempts != attempt:
            return []
        return self.start_inter_lookup(ticket)

    def fail_inter(self, ticket: SovTicket) -> list[Message]:
        self.tickets.pop(ticket.lookup_id, None)
        self.ctx.finish(ticket.lookup_id, False, 1 if ticket.attempts else 0, ticket.attempts)
        self.record_outcome(ticket.target_domain, False)
        return []

    def abort_lookup(self, lookup_id: int) -> int | None:
        ticket = self.tickets.pop(lookup_id, None)
        if ticket is not None:
            self.record_outcome(ticket.target_domain, False)
            return 1 if ticket.attempts else 0
        depth = None
        for s, lk in list(self.sessions.items()):
            if lk.lookup_id == lookup_id and lk.purpose == SOURCE:
                lk.abort()
                del self.sessions[s]
                self.record_intra(lk.domain, False)
                depth = max(depth or 0, lk.hops)
        return depth

    def lookup_done(self, lk: Lookup) -> list[Message]:
        if lk.purpose == RELAY:
            if not lk.success:
                return []  # exhaustion is silent; the source relies on its timer
            source, src_domain = lk.reply
            return [Message(
                RESPONSE, self.id, source, lk.lookup_id, lk.target, 0,
                peers=(lk.target,), found=True, depth=lk.hops, channel=INTER,
                domain=lk.domain, src_domain=src_domain,
            )]
        if lk.purpose == SOURCE:
            self.ctx.finish(lk.lookup_id, lk.success, lk.hops, lk.attempts)
            self.record_intra(lk.domain, lk.success)
        return []

    # -- requests and responses --------------------------------------------
    def handle_request(self, msg: Message) -> list[Message]:
        if msg.channel == INTER:
            return self.handle_foreign_request(msg)
        table = self.table_for(msg.domain)
        out = self.observe(table, msg.src, msg.lookup_id)
        out.append(self.answer(table, msg))
        return out

    def handle_foreign_request(self, msg: Message) -> list[Message]:
        """Relay for a source in another domain with a one-wide intra lookup."""
        out = self.observe(self.table_for(msg.src_domain), msg.src, msg.lookup_id)
        table = self.idhts.get(msg.domain)
        if table is None:
            return out  # no longer a member of that domain
        lk = self.new_lookup(
            table, msg.target, msg.lookup_id, purpose=RELAY, base_depth=msg.depth,
            parallelism=1, domain=msg.domain, channel=INTRA, reply=(msg.src, msg.domain),
        )
        out.extend(lk.start(self.ctx.now))
        return self.drive(lk, out)

    def handle_response(self, msg: Message) -> list[Message]:
        if msg.channel != INTER:
            return super().handle_response(msg)
        out = self.observe(self.table_for(msg.domain), msg.src, msg.lookup_id)
        ticket = self.tickets.get(msg.lookup_id)
        if ticket is None:
            return out
        if msg.found or ticket.target in msg.peers:
            del self.tickets[msg.lookup_id]
            self.ctx.finish(msg.lookup_id, True, msg.depth, ticket.attempts)
            self.record_outcome(ticket.target_domain, True)
        return out

    # -- reputation and attack response -------------------------------------
    def update_reputation(self, domain, success: bool) -> float:
        if domain in self.joined:
            raise ValueError(f"domain {domain!r} is joined; reputation tracks foreign domains")
        rep = self.reputation.get(domain)
        if rep is None:
            rep = self.reputation[domain] = DomainReputation(self.ctx.reputation_window)
        return rep.update(success)

    def record_outcome(self, domain, success: bool) -> None:
        if domain in self.joined:
            return
        score = self.update_reputation(domain, success)
        if not success and score < self.ctx.reputation_threshold:
            self.ctx.request_response(self, domain)

    def record_intra(self, domain, success: bool) -> None:
        """Feed the leave policy for domains joined as a response deployment."""
        if domain in self.home_domains or domain not in self.joined:
            return
        w = self.stay_windows.setdefault(domain, DomainReputation(self.ctx.reputation_window))
        w.update(success)
        if len(w) >= w.window and w.score >= self.ctx.reputation_threshold + 0.1:
            self.stay_streak[domain] = self.stay_streak.get(domain, 0) + 1
        else:
            self.stay_streak[domain] = 0
        if self.stay_streak[domain] >= w.window:
            self.ctx.request_leave(self, domain)


def join_domain(node: SovKadNode, domain, now: float = 0.0) -> list[Message]:
    """Make ``node`` a member of ``domain``; returns the messages of its self-lookup there.

    Constraint checks (p, m, throttling) belong to the caller.
    """
    if domain in node.joined:
        raise ValueError(f"node already in domain {domain!r}")
    node.joined.add(domain)
    per = allocate_buckets(len(node.all_domains), len(node.joined))
    for t in node.idhts.values():
        t.rebucket(per)
    k = node.ctx.params.k
    fresh = RoutingTable(node.id, k, bucket_count=per, kind=IDHT, scope=domain)
    old = node.xdhts.pop(domain, None)
    if old is not None:
        fresh.load((p.id, p.last_seen) for p in old.peers())
    node.idhts[domain] = fresh
    node.last_join_at = now
    node.stay_windows.pop(domain, None)
    node.stay_streak.pop(domain, None)
    return node.self_lookup(fresh)


def leave_domain(node: SovKadNode, domain) -> None:
    """Drop a response-deployment membership; the iDHT shrinks back to an xDHT."""
    if domain in node.home_domains:
        raise ValueError(f"cannot leave home domain {domain!r}")
    if domain not in node.joined:
        raise ValueError(f"node is not in domain {domain!r}")
    node.joined.discard(domain)
    table = node.idhts.pop(domain)
    k = node.ctx.params.k
    keep = sorted(table.peers(), key=lambda pi: pi.last_seen)[-XDHT_BUCKETS * k:]
    x = RoutingTable(node.id, k, bucket_count=XDHT_BUCKETS, kind=XDHT, scope=domain)
    x.load((p.id, p.last_seen) for p in keep)
    node.xdhts[domain] = x
    per = allocate_buckets(len(node.all_domains), len(node.joined))
    for t in node.idhts.values():
        t.rebucket(per)
    for s, lk in list(node.sessions.items()):
        if lk.table is table:
            lk.abort()
            del node.sessions[s]
    node.stay_windows.pop(domain, None)
    node.stay_streak.pop(domain, None)
