import random
from collections import deque

import pytest

from podsim.kademlia import ProtocolParams


class FakeCtx:
    """Stand-in for the simulator: records timers and outcomes instead of running them."""

    def __init__(self, params=None, seed=0, window=20, threshold=0.7):
        self.now = 0.0
        self.params = params or ProtocolParams()
        self.rng = random.Random(seed)
        self.scheduled = []
        self.finished = {}
        self.responses = []
        self.leaves = []
        self.reputation_window = window
        self.reputation_threshold = threshold
        self._session = 0
        self._nonce = 0

    def new_session(self):
        self._session += 1
        return self._session

    def new_nonce(self):
        self._nonce += 1
        return self._nonce

    def schedule(self, delay, kind, payload):
        self.scheduled.append((self.now + delay, kind, payload))

    def finish(self, lookup_id, success, hops, attempts):
        self.finished.setdefault(lookup_id, (success, hops, attempts))

    def request_response(self, node, domain):
        self.responses.append((node.id, domain))

    def request_leave(self, node, domain):
        self.leaves.append((node.id, domain))


def deliver(nodes, msgs, drop=frozenset(), limit=100_000):
    """FIFO delivery with zero latency. Messages to ``drop`` ids or unknown ids vanish.

    Returns every message sent, in order.
    """
    queue = deque(msgs)
    sent = list(msgs)
    while queue:
        limit -= 1
        assert limit > 0, "message storm"
        m = queue.popleft()
        node = nodes.get(m.dst)
        if node is None or m.dst in drop:
            continue
        out = node.receive(m)
        sent.extend(out)
        queue.extend(out)
    return sent


@pytest.fixture
def ctx():
    return FakeCtx()


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
