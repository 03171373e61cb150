"""Iterative Kademlia node lookup.

The ``Lookup`` state machine is shared by every protocol: plain Kademlia
runs it from the source, FedKad and SovKad also run it on relayers that
resolve a target on behalf of a foreign source.

Handlers never touch the event queue directly. They return the messages to
send and talk to the simulator through a small context object exposing
``now``, ``params``, ``rng``, ``new_session()``, ``new_nonce()``,
``schedule(delay, kind, payload)`` and ``finish(lookup_id, success, hops,
attempts)``.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass

from podsim.identity import NodeId
from podsim.routing import IDHT, RoutingTable

REQUEST = "REQUEST"
RESPONSE = "RESPONSE"
PING = "PING"
PONG = "PONG"
GATEWAY_REQUEST = "GATEWAY_REQUEST"
GATEWAY_RESPONSE = "GATEWAY_RESPONSE"

# channel tags: which overlay a lookup message travels in
INTRA = "intra"
INTER = "inter"
GATEWAY = "gateway"

PING_TIMEOUT = "ping_timeout"

SOURCE = "source"
RELAY = "relay"
MAINTENANCE = "maintenance"


@dataclass
class ProtocolParams:
    alpha: int = 3
    beta: int = 20
    k: int = 20
    max_attempts_intra: int = 3
    max_attempts_fedkad: int = 3
    max_attempts_sovkad: int = 9
    request_timeout: float = 1000.0
    pong_timeout: float = 600.0
    inter_attempt_timeout: float = 4000.0
    lookup_deadline: float = 10000.0

    def problems(self) -> list[str]:
        out = []
        if not 1 <= self.alpha <= self.beta <= self.k:
            out.append(f"need 1 <= alpha <= beta <= k, got {self.alpha}, {self.beta}, {self.k}")
        for name in ("max_attempts_intra", "max_attempts_fedkad", "max_attempts_sovkad"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1")
        for name in ("request_timeout", "pong_timeout", "inter_attempt_timeout", "lookup_deadline"):
            if getattr(self, name) <= 0:
                out.append(f"{name} must be positive")
        return out


@dataclass(slots=True)
class Message:
    kind: str
    src: NodeId
    dst: NodeId
    lookup_id: int = 0
    target: NodeId = 0
    session: int = 0
    peers: tuple = ()
    found: bool = False
    depth: int = 0
    channel: str = INTRA
    domain: object = None
    src_domain: object = None
    origin: NodeId = 0
    nonce: int = 0


class Lookup:
    """Per-lookup bookkeeping for one iterative search.

    Candidates are kept as XOR distances to the target in a sorted list, so
    the closest unvisited candidate is always ``pending[0]``. An attempt ends
    once nothing is in flight and no unvisited candidate is closer than the
    k-th closest node that answered; a new attempt reseeds from the table and
    opens the answered-window again.
    """

    __slots__ = (
        "session", "owner", "table", "target", "lookup_id", "domain", "channel",
        "parallelism", "k", "base_depth", "max_attempts", "attempts", "purpose",
        "reply", "started_at", "pending", "responded", "known", "visited",
        "in_flight", "dead", "done", "success", "hops", "max_depth",
    )

    def __init__(
        self,
        owner: NodeId,
        table: RoutingTable,
        target: NodeId,
        *,
        session: int = 0,
        lookup_id: int = 0,
        parallelism: int = 3,
        k: int = 20,
        base_depth: int = 0,
        max_attempts: int = 1,
        purpose: str = SOURCE,
        domain: object = None,
        channel: str = INTRA,
        reply: object = None,
        started_at: float = 0.0,
    ):
        self.session = session
        self.owner = owner
        self.table = table
        self.target = target
        self.lookup_id = lookup_id
        self.domain = domain
        self.channel = channel
        self.parallelism = parallelism
        self.k = k
        self.base_depth = base_depth
        self.max_attempts = max_attempts
        self.attempts = 0
        self.purpose = purpose
        self.reply = reply
        self.started_at = started_at
        self.pending: list[int] = []
        self.responded: list[int] = []
        self.known: dict[NodeId, int] = {}
        self.visited: set[NodeId] = set()
        self.in_flight: dict[NodeId, float] = {}
        self.dead: set[NodeId] = set()
        self.done = False
        self.success = False
        self.hops = 0
        self.max_depth = base_depth

    def __repr__(self) -> str:
        return (
            f"Lookup(session={self.session}, target={self.target:#x}, purpose={self.purpose}, "
            f"attempts={self.attempts}, visited={len(self.visited)}, done={self.done})"
        )

    @property
    def converging(self) -> bool:
        return self.purpose == MAINTENANCE

    def start(self, now: float = 0.0) -> list[Message]:
        self.attempts = 1
        if not self.converging and (self.target == self.owner or self.target in self.table):
            self._finish(True, self.base_depth)
            return []
        self._seed()
        return self._pump(now)

    def on_response(self, src: NodeId, peers, found: bool, now: float = 0.0) -> list[Message]:
        if self.done or src not in self.in_flight:
            return []
        del self.in_flight[src]
        target = self.target
        insort(self.responded, src ^ target)
        depth = self.known[src]
        if not self.converging and (found or target in peers):
            self._finish(True, depth)
            return []
        owner = self.owner
        for p in peers:
            if p != owner:
                self._add(p, depth + 1)
        return self._pump(now)

    def on_timeout(self, peer: NodeId, now: float = 0.0) -> list[Message]:
        if self.done or peer not in self.in_flight:
            return []
        del self.in_flight[peer]
        self.dead.add(peer)
        return self._pump(now)

    def abort(self) -> None:
        if not self.done:
            self._finish(False, self.max_depth)

    def _finish(self, success: bool, hops: int) -> None:
        self.done = True
        self.success = success
        self.hops = hops
        self.in_flight.clear()

    def _seed(self) -> None:
        depth = self.base_depth + 1
        for p in self.table.closest_ids(self.target, self.k, skip=self.known):
            self._add(p, depth)

    def _add(self, p: NodeId, depth: int) -> None:
        known = self.known
        prev = known.get(p)
        if prev is None:
            known[p] = depth
            insort(self.pending, p ^ self.target)
        elif depth < prev and p not in self.visited:
            known[p] = depth

    def _pump(self, now: float) -> list[Message]:
        out: list[Message] = []
        pending = self.pending
        responded = self.responded
        in_flight = self.in_flight
        target = self.target
        k = self.k
        while True:
            while len(in_flight) < self.parallelism and pending:
                dist = pending[0]
                if len(responded) >= k and dist > responded[k - 1]:
                    break
                del pending[0]
                p = dist ^ target
                self.visited.add(p)
                in_flight[p] = now
                depth = self.known[p]
                if depth > self.max_depth:
                    self.max_depth = depth
                out.append(Message(
                    REQUEST, self.owner, p, self.lookup_id, target, self.session,
                    depth=depth, channel=self.channel, domain=self.domain,
                ))
            if in_flight:
                return out
            # attempt exhausted
            if self.attempts >= self.max_attempts:
                self._finish(False, self.max_depth)
                return out
            self.attempts += 1
            responded.clear()
            self._seed()
            if not pending:
                self._finish(False, self.max_depth)
                return out


class Node:
    """Behaviour shared by every simulated node: pings, sessions, dispatch."""

    is_gateway = False

    def __init__(self, node_id: NodeId, ctx, domain: object = None):
        self.id = node_id
        self.ctx = ctx
        self.domain = domain
        self.online = True
        self.sessions: dict[int, Lookup] = {}
        self.pings: dict[int, tuple] = {}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(id={self.id:#x}, domain={self.domain!r})"

    # -- dispatch -------------------------------------------------------
    def receive(self, msg: Message) -> list[Message]:
        kind = msg.kind
        if kind == REQUEST:
            return self.handle_request(msg)
        if kind == RESPONSE:
            return self.handle_response(msg)
        if kind == PING:
            return [Message(PONG, self.id, msg.src, msg.lookup_id, nonce=msg.nonce)]
        if kind == PONG:
            self._resolve_ping(msg.nonce, True)
            return []
        if kind == GATEWAY_REQUEST:
            return self.handle_gateway_request(msg)
        if kind == GATEWAY_RESPONSE:
            return self.handle_gateway_response(msg)
        raise ValueError(f"unknown message kind {kind!r}")

    def handle_gateway_request(self, msg: Message) -> list[Message]:
        return []

    def handle_gateway_response(self, msg: Message) -> list[Message]:
        return []

    # -- table maintenance ---------------------------------------------
    def observe(self, table: RoutingTable | None, peer_id: NodeId, lookup_id: int = 0) -> list[Message]:
        if table is None or peer_id == self.id:
            return []
        action = table.observe_peer(peer_id, self.ctx.now)
        if action is None:
            return []
        nonce = self.ctx.new_nonce()
        self.pings[nonce] = (table, action.candidate.id, action.pending.id)
        self.ctx.schedule(self.ctx.params.pong_timeout, PING_TIMEOUT, (self.id, nonce))
        return [Message(PING, self.id, action.candidate.id, lookup_id, nonce=nonce)]

    def on_ping_timeout(self, nonce: int) -> None:
        self._resolve_ping(nonce, False)

    def _resolve_ping(self, nonce: int, ponged: bool) -> None:
        entry = self.pings.pop(nonce, None)
        if entry is None:
            return
        table, cand, pend = entry
        try:
            table.resolve_ping(ponged, cand, pend, self.ctx.now)
        except ValueError:
            # table was rebuilt while the ping was outstanding
            pass

    # -- lookups --------------------------------------------------------
    def answer(self, table: RoutingTable | None, msg: Message, **extra) -> Message:
        """RESPONSE carrying the target's contact if known, else the β closest."""
        target = msg.target
        found = target != msg.src and (target == self.id or (table is not None and target in table))
        if found:
            peers = (target,)
        elif table is None:
            peers = ()
        else:
            peers = tuple(table.closest_ids(target, self.ctx.params.beta, skip={msg.src}))
        return Message(
            RESPONSE, self.id, msg.src, msg.lookup_id, target, msg.session,
            peers=peers, found=found, depth=msg.depth, channel=msg.channel,
            domain=msg.domain, **extra,
        )

    def new_lookup(self, table: RoutingTable, target: NodeId, lookup_id: int, **kw) -> Lookup:
        ctx = self.ctx
        kw.setdefault("k", ctx.params.k)
        kw.setdefault("parallelism", ctx.params.alpha)
        lk = Lookup(self.id, table, target, session=ctx.new_session(), lookup_id=lookup_id,
                    started_at=ctx.now, **kw)
        self.sessions[lk.session] = lk
        return lk

    def drive(self, lk: Lookup, out: list[Message]) -> list[Message]:
        if lk.done:
            self.sessions.pop(lk.session, None)
            out.extend(self.lookup_done(lk))
        return out

    def on_request_timeout(self, session: int, peer: NodeId) -> list[Message]:
        lk = self.sessions.get(session)
        if lk is None:
            return []
        return self.drive(lk, lk.on_timeout(peer, self.ctx.now))

    def handle_response(self, msg: Message) -> list[Message]:
        lk = self.sessions.get(msg.session)
        if lk is None:
            return []
        out = self.observe(lk.table, msg.src, msg.lookup_id)
        out.extend(lk.on_response(msg.src, msg.peers, msg.found, self.ctx.now))
        return self.drive(lk, out)

    def self_lookup(self, table: RoutingTable) -> list[Message]:
        """Converge ``table`` around the node's own id; announces it to neighbours."""
        lk = self.new_lookup(table, self.id, 0, purpose=MAINTENANCE, domain=table.scope)
        return self.drive(lk, lk.start(self.ctx.now))

    def abort_lookup(self, lookup_id: int) -> int | None:
        """Abandon the source lookup at its deadline; returns the deepest hop reached."""
        depth = None
        for s, lk in list(self.sessions.items()):
            if lk.lookup_id == lookup_id and lk.purpose == SOURCE:
                lk.abort()
                del self.sessions[s]
                depth = max(depth or 0, lk.hops)
        return depth

    def lookup_done(self, lk: Lookup) -> list[Message]:
        if lk.purpose == SOURCE:
            self.ctx.finish(lk.lookup_id, lk.success, lk.hops, lk.attempts)
        return []

    def handle_request(self, msg: Message) -> list[Message]:
        raise NotImplementedError

    def start_lookup(self, target: NodeId, lookup_id: int, target_domain: object = None) -> list[Message]:
        raise NotImplementedError


class KademliaNode(Node):
    """Member of a single flat overlay."""

    def __init__(self, node_id: NodeId, ctx, domain: object = None):
        super().__init__(node_id, ctx, domain)
        self.table = RoutingTable(node_id, ctx.params.k, kind=IDHT, scope="overlay")

    def tables(self) -> list[RoutingTable]:
        return [self.table]

    def handle_request(self, msg: Message) -> list[Message]:
        out = self.observe(self.table, msg.src, msg.lookup_id)
        out.append(self.answer(self.table, msg))
        return out

    def start_lookup(self, target: NodeId, lookup_id: int, target_domain: object = None) -> list[Message]:
        if target == self.id:
            raise ValueError("lookup target equals source")
        lk = self.new_lookup(self.table, target, lookup_id,
                             max_attempts=self.ctx.params.max_attempts_intra)
        return self.drive(lk, lk.start(self.ctx.now))
