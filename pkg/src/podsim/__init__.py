"""Node discovery simulator for single-overlay Kademlia, federated FedKad and
domain-sovereign SovKad overlays."""

from podsim.identity import ID_BITS, bucket_index, generate_ids, xor_distance
from podsim.routing import KBucket, PeerInfo, PingLeastRecent, RoutingTable
from podsim.sim import SimConfig, Simulation, bootstrap, run

__all__ = [
    "ID_BITS",
    "KBucket",
    "PeerInfo",
    "PingLeastRecent",
    "RoutingTable",
    "SimConfig",
    "Simulation",
    "bootstrap",
    "bucket_index",
    "generate_ids",
    "run",
    "xor_distance",
]
