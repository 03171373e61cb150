"""Deterministic discrete-event simulator for the three discovery protocols.

One ``random.Random`` seeded from the config drives everything (ids, roles,
latencies, workload, churn, gateway picks), and events are ordered by
``(fire_at, insertion sequence)``, so a (config, seed) pair always yields the
same record stream.
"""

from __future__ import annotations

import hashlib
import logging
import math
import random
from bisect import bisect_left
from collections import Counter
from dataclasses import asdict, dataclass, field
from heapq import heappop, heappush

from podsim.fedkad import FedKadNode, GatewayNode
from podsim.identity import ID_BITS, generate_ids
from podsim.kademlia import (
    INTRA,
    PING,
    PING_TIMEOUT,
    PONG,
    REQUEST,
    KademliaNode,
    Message,
    ProtocolParams,
)
from podsim.metrics import LookupRecord, RecordStore
from podsim.routing import RoutingTable
from podsim.sovkad import MAX_DOMAINS, SovKadNode, join_domain, leave_domain

log = logging.getLogger(__name__)

PROTOCOLS = ("kademlia", "fedkad", "sovkad")
PLACEMENTS = ("uniform", "congregated")
STRATEGIES = ("drop_all", "intra_only_drop", "honest")

# fraction of inter-domain lookups by domain count
INTER_FRACTION = {1: 0.0, 2: 0.05, 4: 0.075, 6: 0.10, 8: 0.15}

# event kinds
DELIVER = "deliver"
LOOKUP_START = "lookup_start"
CHURN_LEAVE = "churn_leave"
CHURN_JOIN = "churn_join"
TIMEOUT = "timeout"
TICKET_TIMER = "ticket_timer"
DEADLINE = "deadline"
RESPONSE_CHECK = "response_check"
LEAVE_DOMAIN = "leave_domain"

DROP = "drop"
DELIVER_MSG = "deliver"


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def inter_lookup_probability(n_domains: int) -> float:
    """Piecewise-linear in the domain count through the measured points; flat past 8."""
    if n_domains <= 1:
        return 0.0
    pts = sorted(INTER_FRACTION.items())
    if n_domains >= pts[-1][0]:
        return pts[-1][1]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x0 <= n_domains <= x1:
            return y0 + (y1 - y0) * (n_domains - x0) / (x1 - x0)
    raise AssertionError("unreachable")


@dataclass
class NetworkModel:
    min_latency: float = 50.0
    max_latency: float = 300.0

    def sample(self, rng: random.Random) -> float:
        return rng.uniform(self.min_latency, self.max_latency)


def sample_latency(rng: random.Random, model: NetworkModel | None = None) -> float:
    return (model or NetworkModel()).sample(rng)


@dataclass
class AdversaryConfig:
    strategy: str = "drop_all"
    respond_to_pings: bool = True
    # optional mid-run switch: from ``switch_at`` ms on, colluders follow ``switch_to``
    switch_at: float | None = None
    switch_to: str | None = None

    def strategy_at(self, now: float) -> str:
        if self.switch_at is not None and self.switch_to is not None and now >= self.switch_at:
            return self.switch_to
        return self.strategy


@dataclass
class ReputationParams:
    window: int = 20
    threshold: float = 0.7
    responses_enabled: bool = True
    response_delay: float = 10_000.0
    join_cooldown: float = 60_000.0


@dataclass
class SimConfig:
    protocol: str = "kademlia"
    n_nodes: int = 1000
    n_domains: int = 4
    sim_duration: float = 3_600_000.0
    churn_rate: float = 0.0
    byzantine_fraction: float = 0.0
    byzantine_placement: str = "uniform"
    victim_domain: int = 0
    multi_domain_fraction: float = 0.1
    max_domains: int | None = None
    inter_lookup_prob: float | None = None
    lookup_interval: float = 60_000.0
    count_pings: bool = True
    seed: int = 0
    scenario: str = "custom"
    run_id: str = ""
    network: NetworkModel = field(default_factory=NetworkModel)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    params: ProtocolParams = field(default_factory=ProtocolParams)
    reputation: ReputationParams = field(default_factory=ReputationParams)

    @property
    def effective_max_domains(self) -> int:
        return self.n_domains if self.max_domains is None else self.max_domains

    @property
    def effective_inter_prob(self) -> float:
        if self.inter_lookup_prob is not None:
            return self.inter_lookup_prob
        return inter_lookup_probability(self.n_domains)

    def label(self) -> str:
        return self.run_id or f"{self.protocol}-{self.scenario}-n{self.n_nodes}-d{self.n_domains}-s{self.seed}"

    def problems(self) -> list[str]:
        out = []
        if self.protocol not in PROTOCOLS:
            out.append(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.n_nodes < 2:
            out.append(f"n_nodes must be >= 2, got {self.n_nodes}")
        if not 1 <= self.n_domains <= MAX_DOMAINS:
            out.append(f"n_domains must be in [1, {MAX_DOMAINS}], got {self.n_domains}")
        if self.protocol in ("fedkad", "sovkad") and self.n_domains < 2:
            out.append(f"{self.protocol} needs at least 2 domains (n_domains=1 is degenerate)")
        if self.sim_duration < 0:
            out.append("sim_duration must be >= 0")
        if not 0.0 <= self.churn_rate <= 1.0:
            out.append(f"churn_rate must be in [0, 1], got {self.churn_rate}")
        if not 0.0 <= self.byzantine_fraction < 1 / 3:
            out.append(f"byzantine_fraction must satisfy 0 <= f < 1/3, got {self.byzantine_fraction}")
        if self.byzantine_placement not in PLACEMENTS:
            out.append(f"byzantine_placement must be one of {PLACEMENTS}")
        if not 0 <= self.victim_domain < max(self.n_domains, 1):
            out.append(f"victim_domain must name a domain in [0, {self.n_domains - 1}]")
        if not 0.0 <= self.multi_domain_fraction <= 1.0:
            out.append("multi_domain_fraction must be in [0, 1]")
        if not 1 <= self.effective_max_domains <= max(self.n_domains, 1):
            out.append("max_domains must be in [1, n_domains]")
        if not 0.0 <= self.effective_inter_prob <= 1.0:
            out.append("inter_lookup_prob must be in [0, 1]")
        if self.lookup_interval <= 0:
            out.append("lookup_interval must be positive")
        if not 0 <= self.network.min_latency <= self.network.max_latency:
            out.append("latency bounds need 0 <= min_latency <= max_latency")
        if self.adversary.strategy not in STRATEGIES:
            out.append(f"adversary strategy must be one of {STRATEGIES}")
        adv = self.adversary
        if (adv.switch_at is None) != (adv.switch_to is None):
            out.append("adversary switch_at and switch_to must be set together")
        elif adv.switch_to is not None and adv.switch_to not in STRATEGIES:
            out.append(f"adversary switch_to must be one of {STRATEGIES}")
        if self.reputation.window < 1:
            out.append("reputation window must be >= 1")
        if not 0.0 <= self.reputation.threshold <= 1.0:
            out.append("reputation threshold must be in [0, 1]")
        out.extend(self.params.problems())
        return out

    def validate(self) -> "SimConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def adversary_intercept(strategy: str, msg: Message, respond_to_pings: bool = True) -> str:
    """Fate of ``msg`` arriving at a colluder: ``"deliver"`` or ``"drop"``."""
    kind = msg.kind
    if strategy == "honest" or kind == PONG:
        return DELIVER_MSG
    if kind == PING:
        return DELIVER_MSG if respond_to_pings else DROP
    if strategy == "drop_all":
        return DROP
    if strategy == "intra_only_drop":
        return DROP if kind == REQUEST and msg.channel == INTRA else DELIVER_MSG
    raise ValueError(f"unknown adversary strategy {strategy!r}")


class IndexedSet:
    """Insertion-stable set with O(1) removal and uniform sampling."""

    __slots__ = ("items", "pos")

    def __init__(self, items=()):
        self.items: list = []
        self.pos: dict = {}
        for x in items:
            self.add(x)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, x) -> bool:
        return x in self.pos

    def __iter__(self):
        return iter(self.items)

    def add(self, x) -> None:
        if x not in self.pos:
            self.pos[x] = len(self.items)
            self.items.append(x)

    def discard(self, x) -> None:
        i = self.pos.pop(x, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def choice(self, rng: random.Random, exclude=None):
        n = len(self.items)
        if n == 0 or (n == 1 and self.items[0] == exclude):
            return None
        while True:
            x = self.items[rng.randrange(n)]
            if x != exclude:
                return x

    def sample(self, rng: random.Random, count: int, exclude=None) -> list:
        pool = [x for x in self.items if x != exclude] if exclude in self.pos else self.items
        if count >= len(pool):
            return list(pool)
        return rng.sample(pool, count)


@dataclass(slots=True)
class _OpenLookup:
    lookup_id: int
    source: int
    target: int
    kind: str
    source_domain: int
    target_domain: int
    started_at: float
    messages: int = 0
    done: bool = False
    success: bool = False
    hops: int = 0
    latency: float = 0.0
    attempts: int = 0


def fill_converged(table: RoutingTable, sorted_ids: list[int], rng: random.Random, now: float = 0.0) -> None:
    """Populate ``table`` as a converged overlay would: per bucket, up to k
    random members from the id range that bucket covers."""
    owner = table.owner
    k = table.k
    entries = []
    n_ids = len(sorted_ids)
    for i in range(ID_BITS):
        lo = ((owner >> i) ^ 1) << i
        a = bisect_left(sorted_ids, lo)
        if a == n_ids:
            continue
        b = bisect_left(sorted_ids, lo + (1 << i), a)
        n = b - a
        if n == 0:
            continue
        if n <= k:
            entries.extend(sorted_ids[a:b])
        else:
            entries.extend(sorted_ids[a + j] for j in rng.sample(range(n), k))
    table.load((p, now) for p in entries)


class Simulation:
    """Owns the event queue, the nodes and the record store for one run.

    Also serves as the context object that protocol nodes call back into.
    """

    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        self.params = config.params
        self.rng = random.Random(config.seed)
        self.now = 0.0
        self._heap: list[tuple] = []
        self._seq = 0
        self._session = 0
        self._nonce = 0
        self._lookup_seq = 0
        self.nodes: dict[int, object] = {}
        self.taken: set[int] = set()
        self.colluders: set[int] = set()
        self.domains = list(range(config.n_domains))
        self.members: dict[int, IndexedSet] = {d: IndexedSet() for d in self.domains}
        self.online: IndexedSet = IndexedSet()
        self.sources: IndexedSet = IndexedSet()
        self.gateways: IndexedSet = IndexedSet()
        self.multi_domain: set[int] = set()
        self.store = RecordStore()
        self.open: dict[int, _OpenLookup] = {}
        self.sent = Counter()
        self.fate = Counter()
        self.responses = Counter()
        self.inter_prob = config.effective_inter_prob
        self.reputation_window = config.reputation.window
        self.reputation_threshold = config.reputation.threshold
        self.bootstrapped = False
        self.finished = False
        self._handlers = {
            DELIVER: self._on_deliver,
            LOOKUP_START: self._on_lookup_start,
            CHURN_LEAVE: self._on_churn_leave,
            CHURN_JOIN: self._on_churn_join,
            TIMEOUT: self._on_timeout,
            PING_TIMEOUT: self._on_ping_timeout,
            TICKET_TIMER: self._on_ticket_timer,
            DEADLINE: self._on_deadline,
            RESPONSE_CHECK: self._on_response_check,
            LEAVE_DOMAIN: self._on_leave_domain,
        }

    # -- context interface used by nodes ---------------------------------
    def new_session(self) -> int:
        self._session += 1
        return self._session

    def new_nonce(self) -> int:
        self._nonce += 1
        return self._nonce

    def schedule(self, delay: float, kind: str, payload) -> None:
        self._seq += 1
        heappush(self._heap, (self.now + delay, self._seq, kind, payload))

    def finish(self, lookup_id: int, success: bool, hops: int, attempts: int) -> None:
        op = self.open.get(lookup_id)
        if op is None or op.done:
            return
        op.done = True
        op.success = success
        op.hops = hops
        op.attempts = attempts
        op.latency = self.now - op.started_at

    def request_response(self, node, domain) -> None:
        rp = self.config.reputation
        if not rp.responses_enabled:
            self.responses["disabled"] += 1
            return
        if node.response_pending:
            return
        node.response_pending = True
        self.schedule(rp.response_delay, RESPONSE_CHECK, (node.id, domain))

    def request_leave(self, node, domain) -> None:
        self.schedule(0.0, LEAVE_DOMAIN, (node.id, domain))

    def send(self, msg: Message) -> None:
        kind = msg.kind
        self.sent[kind] += 1
        if msg.lookup_id:
            op = self.open.get(msg.lookup_id)
            if op is not None and (self.config.count_pings or (kind != PING and kind != PONG)):
                op.messages += 1
        net = self.config.network
        self._seq += 1
        heappush(self._heap, (self.now + self.rng.uniform(net.min_latency, net.max_latency),
                              self._seq, DELIVER, msg))
        if kind == REQUEST and msg.session:
            self._seq += 1
            heappush(self._heap, (self.now + self.params.request_timeout, self._seq, TIMEOUT,
                                  (msg.src, msg.session, msg.dst)))

    # -- bootstrap ---------------------------------------------------------
    def _make_node(self, node_id: int, domain: int):
        proto = self.config.protocol
        if proto == "kademlia":
            return KademliaNode(node_id, self, domain)
        if proto == "fedkad":
            return FedKadNode(node_id, self, domain)
        return SovKadNode(node_id, self, domain, self.domains)

    def _register(self, node, honest: bool) -> None:
        self.nodes[node.id] = node
        self.online.add(node.id)
        if node.is_gateway:
            self.gateways.add(node.id)
            return
        self.members[node.domain].add(node.id)
        if honest:
            self.sources.add(node.id)

    def bootstrap(self) -> "Simulation":
        """Create the population and converge every routing table."""
        if self.bootstrapped:
            return self
        cfg = self.config
        rng = self.rng
        n = cfg.n_nodes
        ids = generate_ids(n, rng, taken=self.taken)
        n_gw = int(cfg.multi_domain_fraction * n) if cfg.protocol == "fedkad" else 0
        gw_ids, rest = ids[:n_gw], ids[n_gw:]
        n_bad = int(cfg.byzantine_fraction * n)
        congregated = cfg.byzantine_placement == "congregated"
        if congregated:
            n_bad = min(n_bad, len(rest))
            self.colluders = set(rng.sample(rest, n_bad))
        else:
            self.colluders = set(rng.sample(ids, n_bad))
        domain_of: dict[int, int] = {}
        D = cfg.n_domains
        slot = 0
        for x in rest:
            if congregated and x in self.colluders:
                domain_of[x] = cfg.victim_domain
            else:
                domain_of[x] = slot % D
                slot += 1
        for g in gw_ids:
            self._register(GatewayNode(g, self, self.domains), g not in self.colluders)
        for x in rest:
            self._register(self._make_node(x, domain_of[x]), x not in self.colluders)

        k = self.params.k
        by_domain = {d: sorted(self.members[d]) for d in self.domains}
        if cfg.protocol == "kademlia":
            everyone = sorted(rest)
            for x in rest:
                fill_converged(self.nodes[x].table, everyone, rng)
        elif cfg.protocol == "fedkad":
            for x in rest:
                node = self.nodes[x]
                fill_converged(node.idht, by_domain[node.domain], rng)
                node.xdht.load((g, 0.0) for g in self.gateways.sample(rng, k))
            for g in gw_ids:
                for d, table in self.nodes[g].domain_tables.items():
                    table.load((p, 0.0) for p in self.members[d].sample(rng, k))
        else:
            for x in rest:
                node = self.nodes[x]
                fill_converged(node.idhts[node.domain], by_domain[node.domain], rng)
                for d, table in node.xdhts.items():
                    table.load((p, 0.0) for p in self.members[d].sample(rng, k))
        self.bootstrapped = True
        log.debug("bootstrapped %s: %d nodes, %d colluders, %d gateways",
                  cfg.label(), len(self.nodes), len(self.colluders), len(self.gateways))
        return self

    def domain_population(self, domain) -> tuple[int, int]:
        """(honest, total) online members of ``domain``, response deployments included."""
        honest = total = 0
        for nid in self.online:
            node = self.nodes[nid]
            if node.is_gateway:
                continue
            joined = getattr(node, "joined", None)
            member = domain in joined if joined is not None else node.domain == domain
            if member:
                total += 1
                honest += nid not in self.colluders
        return honest, total

    def state_digest(self) -> str:
        """sha256 over roles, memberships and every routing table's contents."""
        h = hashlib.sha256()
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            h.update(f"{nid:032x}|{node.domain}|{int(nid in self.colluders)}|{int(node.online)}\n".encode())
            for t in node.tables():
                h.update(f"{t.scope}|{t.bucket_count}|".encode())
                for b in t.buckets:
                    h.update(",".join(f"{p:x}:{s!r}" for p, s in b.entries.items()).encode())
                    h.update(b";")
        return h.hexdigest()

    # -- workload ------------------------------------------------------------
    def draw_lookup(self):
        """Pick (source, target, target_domain) for the next lookup, or None."""
        rng = self.rng
        src = self.sources.choice(rng)
        if src is None:
            return None
        home = self.nodes[src].domain
        D = self.config.n_domains
        if D > 1 and rng.random() < self.inter_prob:
            td = rng.randrange(D - 1)
            if td >= home:
                td += 1
        else:
            td = home
        target = self.members[td].choice(rng, exclude=src)
        if target is None:
            return None
        return src, target, td

    def start_lookup(self, src: int, target: int, target_domain: int) -> int:
        node = self.nodes[src]
        if self.config.protocol == "sovkad":
            kind = "intra" if target_domain in node.joined else "inter"
        else:
            kind = "intra" if target_domain == node.domain else "inter"
        self._lookup_seq += 1
        lid = self._lookup_seq
        self.open[lid] = _OpenLookup(lid, src, target, kind, node.domain, target_domain, self.now)
        self.schedule(self.params.lookup_deadline, DEADLINE, lid)
        for m in node.start_lookup(target, lid, target_domain):
            self.send(m)
        return lid

    def _on_lookup_start(self, _payload) -> None:
        cfg = self.config
        if self.now >= cfg.sim_duration:
            return
        drawn = self.draw_lookup()
        if drawn is not None:
            self.start_lookup(*drawn)
        n = len(self.sources)
        if n:
            nxt = self.now + self.rng.expovariate(n / cfg.lookup_interval)
            if nxt < cfg.sim_duration:
                self.schedule(nxt - self.now, LOOKUP_START, None)

    def _on_deadline(self, lookup_id: int) -> None:
        op = self.open.pop(lookup_id)
        if not op.done:
            node = self.nodes[op.source]
            depth = node.abort_lookup(lookup_id)
            op.success = False
            op.hops = depth or 0
            op.latency = self.params.lookup_deadline
        cfg = self.config
        self.store.record(LookupRecord(
            run_id=cfg.label(), protocol=cfg.protocol, scenario=cfg.scenario,
            n_nodes=cfg.n_nodes, n_domains=cfg.n_domains, lookup_id=op.lookup_id,
            kind=op.kind, source_domain=op.source_domain, target_domain=op.target_domain,
            success=op.success, hops=op.hops, messages=op.messages, latency_ms=op.latency,
            attempts=op.attempts,
        ))

    # -- message and timer events -------------------------------------------
    def _on_deliver(self, msg: Message) -> None:
        node = self.nodes.get(msg.dst)
        if node is None or not node.online:
            self.fate["lost"] += 1
            return
        if msg.dst in self.colluders:
            adv = self.config.adversary
            if adversary_intercept(adv.strategy_at(self.now), msg, adv.respond_to_pings) == DROP:
                self.fate["dropped"] += 1
                return
        self.fate["delivered"] += 1
        for m in node.receive(msg):
            self.send(m)

    def _on_timeout(self, payload) -> None:
        nid, session, peer = payload
        node = self.nodes[nid]
        if not node.online:
            return
        lk = node.sessions.get(session)
        if lk is not None and peer in lk.in_flight:
            self.fate["timeouts"] += 1
        for m in node.on_request_timeout(session, peer):
            self.send(m)

    def _on_ping_timeout(self, payload) -> None:
        nid, nonce = payload
        node = self.nodes[nid]
        if node.online:
            node.on_ping_timeout(nonce)

    def _on_ticket_timer(self, payload) -> None:
        nid, lookup_id, attempt = payload
        node = self.nodes[nid]
        if node.online:
            for m in node.on_ticket_timer(lookup_id, attempt):
                self.send(m)

    # -- attack response -------------------------------------------------------
    def may_join(self, node) -> bool:
        cfg = self.config
        if len(node.joined) + 1 > cfg.effective_max_domains:
            return False
        if node.id not in self.multi_domain:
            cap = int(cfg.multi_domain_fraction * cfg.n_nodes)
            if len(self.multi_domain) + 1 > cap:
                return False
        last = node.last_join_at
        return last is None or self.now - last >= cfg.reputation.join_cooldown

    def _on_response_check(self, payload) -> None:
        nid, domain = payload
        node = self.nodes[nid]
        node.response_pending = False
        if not node.online or domain in node.joined:
            return
        rep = node.reputation.get(domain)
        if rep is None or rep.score >= self.reputation_threshold:
            self.responses["recovered"] += 1
            return
        if not self.may_join(node):
            self.responses["suppressed"] += 1
            return
        self.responses["joined"] += 1
        self.multi_domain.add(nid)
        for m in join_domain(node, domain, self.now):
            self.send(m)

    def _on_leave_domain(self, payload) -> None:
        nid, domain = payload
        node = self.nodes[nid]
        if domain not in node.joined or domain in node.home_domains:
            return
        leave_domain(node, domain)
        self.responses["left"] += 1
        if len(node.joined) == 1:
            self.multi_domain.discard(nid)

    # -- churn -------------------------------------------------------------------
    def schedule_churn(self) -> tuple[int, int]:
        cfg = self.config
        if cfg.churn_rate <= 0 or cfg.sim_duration <= 0:
            return 0, 0
        n = int(cfg.n_nodes * cfg.churn_rate / 2)
        leavers = self.rng.sample(list(self.nodes), n)
        for x in leavers:
            self.schedule(self.rng.uniform(0, cfg.sim_duration), CHURN_LEAVE, x)
        for _ in range(n):
            self.schedule(self.rng.uniform(0, cfg.sim_duration), CHURN_JOIN, None)
        return n, n

    def _on_churn_leave(self, nid: int) -> None:
        node = self.nodes[nid]
        node.online = False
        self.online.discard(nid)
        self.sources.discard(nid)
        self.gateways.discard(nid)
        self.multi_domain.discard(nid)
        if not node.is_gateway:
            self.members[node.domain].discard(nid)

    def _on_churn_join(self, _payload) -> None:
        rng = self.rng
        k = self.params.k
        nid = generate_ids(1, rng, taken=self.taken)[0]
        domain = rng.randrange(self.config.n_domains)
        node = self._make_node(nid, domain)
        proto = self.config.protocol
        now = self.now
        if proto == "kademlia":
            contacts = [x for x in self.online.sample(rng, k + 1) if not self.nodes[x].is_gateway]
            table = node.table
        elif proto == "fedkad":
            contacts = self.members[domain].sample(rng, k)
            table = node.idht
            node.xdht.load((g, now) for g in self.gateways.sample(rng, k))
        else:
            contacts = self.members[domain].sample(rng, k)
            table = node.idhts[domain]
            for d, x in node.xdhts.items():
                x.load((p, now) for p in self.members[d].sample(rng, k))
        table.load((p, now) for p in contacts[:k])
        self._register(node, honest=True)
        for m in node.self_lookup(table):
            self.send(m)

    # -- main loop ---------------------------------------------------------------
    def run(self) -> list[LookupRecord]:
        if self.finished:
            return self.store.records
        self.bootstrap()
        cfg = self.config
        if cfg.sim_duration > 0 and len(self.sources):
            first = self.rng.expovariate(len(self.sources) / cfg.lookup_interval)
            if first < cfg.sim_duration:
                self.schedule(first, LOOKUP_START, None)
        self.schedule_churn()
        heap = self._heap
        handlers = self._handlers
        while heap:
            t, _, kind, payload = heappop(heap)
            self.now = t
            handlers[kind](payload)
        self.finished = True
        return self.store.records


def bootstrap(config: SimConfig) -> Simulation:
    return Simulation(config).bootstrap()


def run(state: Simulation | SimConfig) -> list[LookupRecord]:
    sim = state if isinstance(state, Simulation) else bootstrap(state)
    return sim.run()


def expected_lookups(config: SimConfig) -> float:
    """Mean number of lookups a run generates without churn."""
    sources = config.n_nodes - math.floor(config.byzantine_fraction * config.n_nodes)
    if config.protocol == "fedkad":
        sources -= int(config.multi_domain_fraction * config.n_nodes)
    return sources * config.sim_duration / config.lookup_interval
