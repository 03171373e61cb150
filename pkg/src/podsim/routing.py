"""k-bucket routing tables with least-recently-seen maintenance.

Tables store peer ids only; the simulator uses ids as endpoint handles, so a
``PeerInfo`` is materialized on demand from the id, the table scope and the
stored ``last_seen`` stamp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from podsim.identity import ID_BITS, NodeId

IDHT = "iDHT"
XDHT = "xDHT"


@dataclass(slots=True)
class PeerInfo:
    id: NodeId
    address: int
    domain: object
    last_seen: float = 0.0


@dataclass(frozen=True, slots=True)
class PingLeastRecent:
    """Returned by ``observe_peer`` when the target bucket is full.

    The caller pings ``candidate`` and later calls ``resolve_ping``.
    """

    candidate: PeerInfo
    pending: PeerInfo


class KBucket:
    """Up to ``capacity`` peers; dict order is recency order, head is oldest."""

    __slots__ = ("entries", "capacity", "ticket")

    def __init__(self, capacity: int):
        self.entries: dict[NodeId, float] = {}
        self.capacity = capacity
        self.ticket: tuple[NodeId, NodeId] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, peer_id: NodeId) -> bool:
        return peer_id in self.entries

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    def head(self) -> NodeId:
        return next(iter(self.entries))

    def touch(self, peer_id: NodeId, now: float) -> None:
        prev = self.entries.pop(peer_id, now)
        self.entries[peer_id] = now if now > prev else prev

    def ids(self) -> list[NodeId]:
        return list(self.entries)


class RoutingTable:
    """A set of k-buckets owned by one node for one overlay scope.

    ``bucket_count`` may be below the id width; far prefixes then collapse
    into the last bucket.
    """

    def __init__(
        self,
        owner: NodeId,
        k: int = 20,
        bucket_count: int = ID_BITS,
        kind: str = IDHT,
        scope: object = None,
    ):
        if not 1 <= bucket_count <= ID_BITS:
            raise ValueError(f"bucket_count must be in [1, {ID_BITS}], got {bucket_count}")
        self.owner = owner
        self.k = k
        self.bucket_count = bucket_count
        self.kind = kind
        self.scope = scope
        self.buckets = [KBucket(k) for _ in range(bucket_count)]
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def __contains__(self, peer_id: NodeId) -> bool:
        if peer_id == self.owner:
            return False
        return peer_id in self.buckets[self.bucket_for(peer_id)].entries

    def __repr__(self) -> str:
        return (
            f"RoutingTable(owner={self.owner:#x}, kind={self.kind}, scope={self.scope!r}, "
            f"buckets={self.bucket_count}, size={self._size})"
        )

    def bucket_for(self, peer_id: NodeId) -> int:
        d = self.owner ^ peer_id
        if d == 0:
            raise ValueError("peer id equals table owner")
        i = d.bit_length() - 1
        last = self.bucket_count - 1
        return i if i < last else last

    def peer_info(self, peer_id: NodeId) -> PeerInfo:
        b = self.buckets[self.bucket_for(peer_id)]
        return PeerInfo(peer_id, peer_id, self.scope, b.entries[peer_id])

    def ids(self) -> list[NodeId]:
        out: list[NodeId] = []
        for b in self.buckets:
            out.extend(b.entries)
        return out

    def peers(self) -> list[PeerInfo]:
        return [PeerInfo(p, p, self.scope, t) for b in self.buckets for p, t in b.entries.items()]

    def observe_peer(self, peer: PeerInfo | NodeId, now: float) -> PingLeastRecent | None:
        """Record contact with ``peer``.

        Returns ``None`` when the table was updated in place, or a
        ``PingLeastRecent`` when the bucket is full. While a bucket has a ping
        outstanding, further newcomers to it are ignored.
        """
        peer_id = peer.id if isinstance(peer, PeerInfo) else peer
        b = self.buckets[self.bucket_for(peer_id)]
        entries = b.entries
        if peer_id in entries:
            b.touch(peer_id, now)
            return None
        if len(entries) < b.capacity:
            entries[peer_id] = now
            self._size += 1
            return None
        if b.ticket is not None:
            return None
        head = next(iter(entries))
        b.ticket = (head, peer_id)
        return PingLeastRecent(
            PeerInfo(head, head, self.scope, entries[head]),
            PeerInfo(peer_id, peer_id, self.scope, now),
        )

    def resolve_ping(
        self,
        ponged: bool,
        candidate: PeerInfo | NodeId,
        pending: PeerInfo | NodeId,
        now: float,
    ) -> None:
        cid = candidate.id if isinstance(candidate, PeerInfo) else candidate
        pid = pending.id if isinstance(pending, PeerInfo) else pending
        b = self.buckets[self.bucket_for(cid)]
        if b.ticket != (cid, pid):
            raise ValueError("no outstanding ping for this (candidate, pending) pair")
        b.ticket = None
        if ponged:
            if cid in b.entries:
                b.touch(cid, now)
            return
        if cid in b.entries:
            del b.entries[cid]
            self._size -= 1
        if pid not in b.entries and len(b.entries) < b.capacity:
            b.entries[pid] = now
            self._size += 1

    def remove_peer(self, peer_id: NodeId) -> bool:
        if peer_id == self.owner:
            return False
        b = self.buckets[self.bucket_for(peer_id)]
        if peer_id in b.entries:
            del b.entries[peer_id]
            self._size -= 1
            return True
        return False

    def closest_ids(
        self,
        target: NodeId,
        count: int,
        skip: set[NodeId] | frozenset[NodeId] = frozenset(),
    ) -> list[NodeId]:
        """Up to ``count`` stored ids nearest to ``target``, ascending by XOR.

        Buckets are visited in an order where every entry of an earlier
        group is strictly closer to ``target`` than any entry of a later one,
        so only the groups needed to fill ``count`` are sorted.
        """
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        buckets = self.buckets
        last = self.bucket_count - 1
        d = self.owner ^ target
        key = target.__xor__
        if d == 0:
            groups: Iterable[Iterable[KBucket]] = ((b,) for b in buckets)
        else:
            i = d.bit_length() - 1
            if i >= last:
                # target shares the collapsed bucket: its order is not separable
                ids = [p for b in buckets for p in b.entries if p not in skip]
                ids.sort(key=key)
                return ids[:count]
            groups = _group_order(buckets, i, last)
        out: list[NodeId] = []
        for group in groups:
            ids = [p for b in group for p in b.entries if p not in skip]
            if not ids:
                continue
            ids.sort(key=key)
            out.extend(ids)
            if len(out) >= count:
                break
        return out[:count]

    def closest(self, target: NodeId, count: int) -> list[PeerInfo]:
        return [self.peer_info(p) for p in self.closest_ids(target, count)]

    def load(self, entries) -> list[NodeId]:
        """Insert ``(peer_id, last_seen)`` pairs without pinging anyone.

        Pairs are taken in ascending ``last_seen`` order; a full bucket drops
        its least recently seen entry. Returns the evicted ids.
        """
        evicted = []
        for p, t in sorted(entries, key=lambda e: e[1]):
            if p == self.owner:
                continue
            b = self.buckets[self.bucket_for(p)]
            if p in b.entries:
                b.touch(p, t)
                continue
            if len(b.entries) >= b.capacity:
                h = b.head()
                del b.entries[h]
                evicted.append(h)
                self._size -= 1
            b.entries[p] = t
            self._size += 1
        return evicted

    def rebucket(self, bucket_count: int) -> list[NodeId]:
        """Change the bucket count, keeping the most recently seen entries.

        Returns the ids evicted because a merged bucket overflowed.
        """
        if not 1 <= bucket_count <= ID_BITS:
            raise ValueError(f"bucket_count must be in [1, {ID_BITS}], got {bucket_count}")
        # python's sort is stable, so equal stamps keep their LRU order
        flat = [(p, t) for b in self.buckets for p, t in b.entries.items()]
        self.bucket_count = bucket_count
        self.buckets = [KBucket(self.k) for _ in range(bucket_count)]
        self._size = 0
        return self.load(flat)

    def check_invariants(self) -> None:
        seen = set()
        for i, b in enumerate(self.buckets):
            assert len(b.entries) <= b.capacity, f"bucket {i} over capacity"
            stamps = list(b.entries.values())
            assert stamps == sorted(stamps), f"bucket {i} not in recency order"
            for p in b.entries:
                assert p not in seen, "peer stored twice"
                seen.add(p)
                assert self.bucket_for(p) == i, f"peer in wrong bucket {i}"
        assert len(seen) == self._size


def _group_order(buckets: list[KBucket], i: int, last: int):
    yield (buckets[i],)
    if i > 0:
        yield buckets[:i]
    for j in range(i + 1, last + 1):
        yield (buckets[j],)
