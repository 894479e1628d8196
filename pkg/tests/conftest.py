from __future__ import annotations

import random

import pytest

from creditnet.crypto import CryptoSuite
from creditnet.model import CreditNetwork


def build_net(edges, seed: int = 0) -> CreditNetwork:
    """Build a network from (borrower, lender, weight[, interest]) tuples."""
    net = CreditNetwork(seed=seed)
    for edge in edges:
        borrower, lender, weight = edge[:3]
        interest = edge[3] if len(edge) > 3 else 0.1
        for endpoint in (borrower, lender):
            if not net.has_node(endpoint):
                net.add_node(endpoint)
        net.apply_link_update(borrower, lender, weight, interest)
    return net


@pytest.fixture
def suite() -> CryptoSuite:
    return CryptoSuite("test", seed=42)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(42)
