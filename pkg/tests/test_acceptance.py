"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.
"""

from __future__ import annotations

import math
import random
import struct
import time
from collections import deque

from creditnet.chord import ChordOverlay
from creditnet.config import SimConfig
from creditnet.crypto import CryptoSuite
from creditnet.model import NetworkConfig, generate_network
from creditnet.prefix import PrefixEmbedding, tree_distance
from creditnet.protocol import ProtocolContext, multisig
from creditnet.scenarios import run_scenario


def _report(num: int, name: str, budget_s: float | None, fn) -> None:
    started = time.perf_counter()
    try:
        fn()
    except BaseException:
        elapsed = time.perf_counter() - started
        print(f"[criterion {num:02d}] {name}: FAIL ({elapsed:.1f}s)")
        raise
    elapsed = time.perf_counter() - started
    print(f"[criterion {num:02d}] {name}: PASS ({elapsed:.1f}s)")
    if budget_s is not None:
        assert elapsed < budget_s, f"criterion {num} exceeded {budget_s}s budget"


def tree_bfs_distances(embedding: PrefixEmbedding, source: str) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cur = queue.popleft()
        for nb in embedding.tree.tree_neighbors(cur):
            if nb not in dist:
                dist[nb] = dist[cur] + 1
                queue.append(nb)
    return dist


def test_criterion_01_eq1_exactness():
    def check():
        rng = random.Random(2024)
        for case in range(50):
            n = rng.randint(10, 200)
            net = generate_network(NetworkConfig(node_count=n, seed=3000 + case))
            embedding = PrefixEmbedding(net)
            nodes = net.nodes
            for src in nodes:
                oracle = tree_bfs_distances(embedding, src)
                src_id = embedding.ids[src]
                for dst in nodes:
                    assert tree_distance(src_id, embedding.ids[dst]) == oracle[dst]

    _report(1, "tree-coordinate distance equals BFS hops on 50 graphs", 10.0, check)


def test_criterion_02_prefix_routing_delivery():
    def check():
        net = generate_network(NetworkConfig(node_count=1000, seed=77))
        embedding = PrefixEmbedding(net)
        rng = random.Random(78)
        nodes = net.nodes
        for _ in range(1000):
            src, dst = rng.choice(nodes), rng.choice(nodes)
            path = embedding.find_route(src, embedding.hashed_id(dst, rng))
            assert (path[-1] if path else src) == dst
            assert len(path) == tree_distance(embedding.ids[src], embedding.ids[dst])

    _report(2, "1000 prefix routes all deliver at exact coordinate distance", 5.0, check)


def test_criterion_03_chord_oracle_equivalence():
    def check():
        overlay = ChordOverlay(m=16)
        overlay.build([f"n{i:05d}" for i in range(1000)])
        rng = random.Random(79)
        hops = []
        for _ in range(1000):
            key = rng.randrange(overlay.space)
            start = f"n{rng.randrange(1000):05d}"
            owner, path = overlay.lookup(start, key)
            assert owner == overlay.oracle_owner(key)
            hops.append(len(path))
        assert max(hops) <= overlay.m
        assert sum(hops) / len(hops) <= 0.5 * math.log2(1000) + 2

    _report(3, "1000 quiescent lookups match the clockwise scan", 10.0, check)


def test_criterion_04_churn_recovery():
    def check():
        overlay = ChordOverlay(m=16)
        overlay.build([f"n{i:05d}" for i in range(1000)])
        rng = random.Random(80)
        joins = [f"x{i:04d}" for i in range(100)]
        churn: list[tuple[str, str]] = [("join", j) for j in joins]
        churn += [("leave", "") for _ in range(100)]
        rng.shuffle(churn)
        for step, (kind, who) in enumerate(churn):
            if kind == "join":
                overlay.join(who)
            else:
                live = sorted(overlay.nodes)
                overlay.leave(live[rng.randrange(len(live))])
            if step % 10 == 9:
                overlay.stabilize()
        overlay.stabilize_to_quiescence()
        overlay.check_ring()
        live = sorted(overlay.nodes)
        failures = 0
        for _ in range(1000):
            key = rng.randrange(overlay.space)
            owner, _ = overlay.lookup(live[rng.randrange(len(live))], key)
            if owner != overlay.oracle_owner(key):
                failures += 1
        assert failures == 0

    _report(4, "100 joins + 100 leaves, zero lookup failures at quiescence", 30.0, check)


def test_criterion_05_full_transfer_and_conservation():
    def check():
        for seed in range(100):
            cfg = SimConfig(nodes=1000, seed=seed, scenario="prefix-bt")
            result = run_scenario(cfg)
            trace = result.ctx.trace
            fresh = generate_network(cfg.network_config())
            assert sum(a.amount for a in trace.accepted) <= cfg.bt_amount
            settled = {(a.user, a.src) for a in trace.settlements}
            for accepted in trace.accepted:
                prior = fresh.link(accepted.responder, accepted.src)
                if (accepted.responder, accepted.src) not in settled:
                    continue  # aborted post-acceptance (stale subject)
                # the full prior balance moved, nothing partial
                assert prior is not None and prior.weight == accepted.amount
                assert result.net.link(accepted.responder, accepted.src) is None
                new = result.net.link(accepted.responder, result.requestor)
                assert new is not None and new.weight == accepted.amount
                # total debt unchanged by the transfer
                assert (result.net.total_debt(accepted.responder)
                        == fresh.total_debt(accepted.responder))

    _report(5, "100 runs: full-balance transfers, debt conserved, budget kept",
            60.0, check)


def _serialize_signed(contract) -> bytes:
    message = contract.message()
    return b"".join([
        struct.pack(">H", len(message)), message,
        struct.pack(">H", len(contract.sig_dest)), contract.sig_dest,
        struct.pack(">H", len(contract.sig_user)), contract.sig_user,
    ])


def _verify_signed(blob: bytes, suite: CryptoSuite, vk_dir) -> bool:
    try:
        offset = 0
        (mlen,) = struct.unpack_from(">H", blob, offset)
        offset += 2
        message = blob[offset:offset + mlen]
        offset += mlen
        (dlen,) = struct.unpack_from(">H", blob, offset)
        offset += 2
        sig_dest = blob[offset:offset + dlen]
        offset += dlen
        (ulen,) = struct.unpack_from(">H", blob, offset)
        offset += 2
        sig_user = blob[offset:offset + ulen]
        if offset + ulen != len(blob):
            return False
        # parse the canonical contract fields back out
        (id_len,) = struct.unpack_from(">H", message, 0)
        dest = message[2:2 + id_len].decode()
        rest = 2 + id_len
        (id_len,) = struct.unpack_from(">H", message, rest)
        user = message[rest + 2:rest + 2 + id_len].decode()
        return (suite.verify(vk_dir[dest], message, sig_dest)
                and suite.verify(vk_dir[user], message, sig_user))
    except Exception:
        return False


def test_criterion_06_contract_integrity():
    def check():
        from conftest import build_net

        for mode in ("test", "secure"):
            # hub edges put every party in the graph without pre-creating the
            # pairs the contracts are about to link
            edges = [(f"u{i}", "hub", 5, 0.2) for i in range(20)]
            edges += [(f"w{i}", "hub", 5, 0.2) for i in range(20)]
            net = build_net(edges)
            suite = CryptoSuite(mode, seed=55)
            ctx = ProtocolContext(net, suite, random.Random(55))
            blobs = []
            for i in range(20):
                contract = multisig(ctx, f"w{i}", 10 + i, f"u{i}", f"req-{i}", 0.05)
                blobs.append(_serialize_signed(contract))
            for blob in blobs:
                assert _verify_signed(blob, suite, ctx.vk_dir)
                for i in range(len(blob)):
                    flipped = bytes(
                        b ^ (1 << (i % 8)) if j == i else b
                        for j, b in enumerate(blob)
                    )
                    assert not _verify_signed(flipped, suite, ctx.vk_dir), (
                        f"byte {i} flip went undetected ({mode})")

    _report(6, "bit-flip sweep over 20 signed contracts always detected", 10.0, check)


def test_criterion_07_single_write_discipline():
    def check():
        runs = [
            SimConfig(nodes=120, seed=5, scenario="prefix-bt"),
            SimConfig(nodes=120, seed=6, scenario="prefix-bt"),
            SimConfig(nodes=120, seed=5, scenario="chord-bt"),
            SimConfig(nodes=80, seed=7, scenario="bailout"),
            SimConfig(nodes=40, seed=8, scenario="bailout", accept_rate=0.0,
                      bench_repeats=1),
        ]
        for cfg in runs:
            result = run_scenario(cfg)
            ledger = result.ctx.ledger
            trace = result.ctx.trace
            assert len(ledger) == len(trace.contracts)
            recorded = sorted(
                (e.contract.request_id, e.contract.dest, e.contract.user,
                 e.contract.val)
                for e in ledger.entries)
            completed = sorted(
                (c.request_id, c.dest, c.user, c.val) for c in trace.contracts)
            assert recorded == completed
            # nothing else ever reached the ledger: responses, settlements,
            # and outlink requests leave no entries of their own
            assert ledger.verify_chain()

    _report(7, "ledger entries equal completed contracts in every trace",
            None, check)


def test_criterion_08_bailout_loop():
    def check():
        base = SimConfig(nodes=30, seed=2, scenario="bailout", candidates=5,
                         fee_per_link=4, bench_repeats=1, accept_rate=0.0)
        probe = run_scenario(base)
        assert probe.bailout_result.failed
        rounds = probe.bailout_result.candidate_rounds
        landmark = base.landmark

        # (a) first-round success
        first = rounds[0][0]
        res_a = run_scenario(base.with_overrides(lend_overrides=((first, "30"),)))
        bail = res_a.bailout_result
        assert not bail.failed and bail.rounds_used == 1
        assert bail.links == [(first, 30)]
        assert bail.fee == 4 * 1
        assert res_a.net.neighbors(landmark) == set()

        # (b) success only after a fresh candidate list
        second = rounds[1][0]
        res_b = run_scenario(base.with_overrides(lend_overrides=((second, "25"),)))
        bail = res_b.bailout_result
        assert not bail.failed and bail.rounds_used == 2
        assert bail.links == [(second, 25)]
        assert bail.fee == 4 * 1
        assert res_b.net.neighbors(landmark) == set()

        # (c) total failure
        bail = probe.bailout_result
        assert bail.failed and bail.links == [] and bail.fee == 0
        assert probe.net.neighbors(landmark) == set()

    _report(8, "bailout first-round, fresh-list, and failure paths all clean",
            None, check)


def test_criterion_09_adversary_audit():
    def check():
        injections = 0
        seed = 200
        while injections < 50:
            seed += 1
            cfg = SimConfig(nodes=80, seed=seed, scenario="prefix-bt")
            probe = run_scenario(cfg)
            mid_route = None
            for response in probe.ctx.trace.responses:
                path = response.route.intended_path
                if len(path) >= 5:
                    mid_route = path[len(path) // 2]
                    break
            if mid_route is None or not probe.ctx.trace.contracts:
                continue
            misreporter = probe.ctx.trace.contracts[0].user
            for behavior, victim in (("drop", mid_route),
                                     ("misdirect", mid_route),
                                     ("misreport-link", misreporter)):
                if injections == 50:
                    break
                result = run_scenario(cfg.with_overrides(
                    corrupt=((victim, behavior),)))
                if behavior == "misreport-link":
                    flagged = {f.node for f in result.audit.misreport_findings}
                    assert victim in flagged, (seed, behavior)
                else:
                    findings = result.audit.route_findings
                    assert findings, (seed, behavior, "no failed delivery")
                    assert all(victim in f.segment for f in findings), (
                        seed, behavior)
                injections += 1
        assert injections == 50

    _report(9, "50 single-fault injections all localized, no false negatives",
            30.0, check)


def test_criterion_10_scaling_envelope():
    def check():
        sizes = [1000, 2000, 4000, 8000, 10000]
        prefix_costs: dict[str, list[int]] = {}
        for n in sizes:
            result = run_scenario(SimConfig(nodes=n, seed=1, scenario="prefix-bt"))
            for m in result.metrics:
                prefix_costs.setdefault(m.op, []).append(m.cost)
        for op in ("Setup", "FindRoute", "FindRoute and Response"):
            seq = prefix_costs[op]
            assert all(a <= b for a, b in zip(seq, seq[1:])), (op, seq)
        assert len(set(prefix_costs["Broadcast BT"])) == 1

        bailout_costs: dict[str, list[int]] = {}
        big_run_wall = None
        for n in sizes:
            started = time.perf_counter()
            result = run_scenario(SimConfig(
                nodes=n, seed=1, scenario="bailout",
                candidates=max(10, n // 100)))
            elapsed = time.perf_counter() - started
            if n == 10000:
                big_run_wall = elapsed
            for m in result.metrics:
                bailout_costs.setdefault(m.op, []).append(m.cost)
        for op in ("Setup", "FindRoute", "Create Edges"):
            seq = bailout_costs[op]
            assert all(a <= b for a, b in zip(seq, seq[1:])), (op, seq)
        assert big_run_wall is not None and big_run_wall < 300.0

    _report(10, "costs grow with N except broadcast; 10k bailout inside budget",
            None, check)
