"""FedKad: per-domain Kademlia overlays bridged by a relaying gateway overlay.

Domain nodes keep an iDHT over their own domain and a two-bucket xDHT of
gateways. Gateways hold one table per domain, relay inter-domain lookups and
never look anything up themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

from podsim.identity import NodeId
from podsim.kademlia import (
    GATEWAY,
    GATEWAY_REQUEST,
    GATEWAY_RESPONSE,
    INTRA,
    RELAY,
    REQUEST,
    RESPONSE,
    Lookup,
    Message,
    Node,
)
from podsim.routing import IDHT, XDHT, RoutingTable

GATEWAY_SCOPE = "gateway"
TICKET_TIMER = "ticket_timer"


@dataclass
class InterLookupTicket:
    lookup_id: int
    source: NodeId
    target: NodeId
    target_domain: object
    gateway_used: NodeId = 0
    attempts: int = 0


class FedKadNode(Node):
    def __init__(self, node_id: NodeId, ctx, domain: object):
        super().__init__(node_id, ctx, domain)
        k = ctx.params.k
        self.idht = RoutingTable(node_id, k, kind=IDHT, scope=domain)
        self.xdht = RoutingTable(node_id, k, bucket_count=2, kind=XDHT, scope=GATEWAY_SCOPE)
        self.tickets: dict[int, InterLookupTicket] = {}

    def tables(self) -> list[RoutingTable]:
        return [self.idht, self.xdht]

    # -- lookups started here ----------------------------------------------
    def start_lookup(self, target: NodeId, lookup_id: int, target_domain: object = None) -> list[Message]:
        if target == self.id:
            raise ValueError("lookup target equals source")
        if target_domain is None or target_domain == self.domain:
            lk = self.new_lookup(self.idht, target, lookup_id,
                                 max_attempts=self.ctx.params.max_attempts_intra, domain=self.domain)
            return self.drive(lk, lk.start(self.ctx.now))
        ticket = InterLookupTicket(lookup_id, self.id, target, target_domain)
        self.tickets[lookup_id] = ticket
        return self.start_inter_lookup(ticket)

    def start_inter_lookup(self, ticket: InterLookupTicket) -> list[Message]:
        """Send the lookup to one gateway drawn uniformly from the xDHT."""
        ctx = self.ctx
        gateways = self.xdht.ids()
        if not gateways or ticket.attempts >= ctx.params.max_attempts_fedkad:
            self.tickets.pop(ticket.lookup_id, None)
            ctx.finish(ticket.lookup_id, False, 1 if ticket.attempts else 0, ticket.attempts)
            return []
        gw = gateways[ctx.rng.randrange(len(gateways))]
        ticket.gateway_used = gw
        ticket.attempts += 1
        ctx.schedule(ctx.params.inter_attempt_timeout, TICKET_TIMER,
                     (self.id, ticket.lookup_id, ticket.attempts))
        return [Message(
            GATEWAY_REQUEST, self.id, gw, ticket.lookup_id, ticket.target,
            depth=1, channel=GATEWAY, domain=ticket.target_domain, src_domain=self.domain,
            origin=self.id,
        )]

    def on_ticket_timer(self, lookup_id: int, attempt: int) -> list[Message]:
        ticket = self.tickets.get(lookup_id)
        if ticket is None or ticket.attempts != attempt:
            return []
        return self.start_inter_lookup(ticket)

    def handle_gateway_response(self, msg: Message) -> list[Message]:
        out = self.observe(self.xdht, msg.src, msg.lookup_id)
        ticket = self.tickets.get(msg.lookup_id)
        if ticket is None:
            return out
        if msg.found or ticket.target in msg.peers:
            del self.tickets[msg.lookup_id]
            self.ctx.finish(msg.lookup_id, True, msg.depth, ticket.attempts)
            return out
        if ticket.gateway_used == msg.src:
            out.extend(self.start_inter_lookup(ticket))
        return out

    def abort_lookup(self, lookup_id: int) -> int | None:
        ticket = self.tickets.pop(lookup_id, None)
        if ticket is not None:
            return 1 if ticket.attempts else 0
        return super().abort_lookup(lookup_id)

    # -- requests and responses ---------------------------------------------
    def handle_request(self, msg: Message) -> list[Message]:
        if msg.channel == GATEWAY:
            return self.handle_gateway_relay(msg)
        out = self.observe(self.idht, msg.src, msg.lookup_id)
        out.append(self.answer(self.idht, msg))
        return out

    def handle_gateway_relay(self, msg: Message) -> list[Message]:
        """Resolve a target for a gateway with an α-wide intra-domain lookup."""
        out = self.observe(self.xdht, msg.src, msg.lookup_id)
        lk = self.new_lookup(
            self.idht, msg.target, msg.lookup_id, purpose=RELAY, base_depth=msg.depth,
            domain=self.domain, channel=INTRA, reply=(msg.src, msg.origin),
        )
        out.extend(lk.start(self.ctx.now))
        return self.drive(lk, out)

    def lookup_done(self, lk: Lookup) -> list[Message]:
        if lk.purpose == RELAY:
            if not lk.success:
                return []  # silent: the source times out
            gateway, origin = lk.reply
            return [Message(
                RESPONSE, self.id, gateway, lk.lookup_id, lk.target, 0,
                peers=(lk.target,), found=True, depth=lk.hops, channel=GATEWAY,
                domain=self.domain, src_domain=self.domain, origin=origin,
            )]
        return super().lookup_done(lk)


class GatewayNode(Node):
    """Relays inter-domain lookups; holds one routing table per domain."""

    is_gateway = True

    def __init__(self, node_id: NodeId, ctx, domains):
        super().__init__(node_id, ctx, GATEWAY_SCOPE)
        k = ctx.params.k
        self.domain_tables = {d: RoutingTable(node_id, k, kind=XDHT, scope=d) for d in domains}

    def tables(self) -> list[RoutingTable]:
        return list(self.domain_tables.values())

    def start_lookup(self, target, lookup_id, target_domain=None):
        raise RuntimeError("gateway nodes do not perform node lookups")

    # -- relaying -----------------------------------------------------------
    def handle_gateway_request(self, msg: Message) -> list[Message]:
        out = self.observe(self.domain_tables.get(msg.src_domain), msg.src, msg.lookup_id)
        table = self.domain_tables.get(msg.domain)
        reply = Message(
            GATEWAY_RESPONSE, self.id, msg.src, msg.lookup_id, msg.target,
            depth=1, channel=GATEWAY, domain=msg.domain,
        )
        if table is not None and msg.target in table:
            reply.found = True
            reply.peers = (msg.target,)
            out.append(reply)
            return out
        nxt = table.closest_ids(msg.target, 1) if table is not None else []
        if not nxt:
            out.append(reply)
            return out
        out.append(Message(
            REQUEST, self.id, nxt[0], msg.lookup_id, msg.target, 0,
            depth=2, channel=GATEWAY, domain=msg.domain, src_domain=GATEWAY_SCOPE,
            origin=msg.src,
        ))
        return out

    def handle_request(self, msg: Message) -> list[Message]:
        return []

    def handle_response(self, msg: Message) -> list[Message]:
        """Relay a domain node's result back to the original source."""
        if msg.channel != GATEWAY or not msg.origin:
            return []
        out = self.observe(self.domain_tables.get(msg.src_domain), msg.src, msg.lookup_id)
        out.append(Message(
            GATEWAY_RESPONSE, self.id, msg.origin, msg.lookup_id, msg.target,
            peers=msg.peers, found=msg.found, depth=msg.depth, channel=GATEWAY,
            domain=msg.domain,
        ))
        return out

