from __future__ import annotations

import math
import random

import pytest

from creditnet.chord import ChordError, ChordOverlay, ring_successor


def names(n: int, start: int = 0) -> list[str]:
    return [f"n{i:05d}" for i in range(start, start + n)]


def make_ring(n: int, m: int = 10) -> ChordOverlay:
    overlay = ChordOverlay(m=m)
    overlay.build(names(n))
    return overlay


class TestRingSuccessor:
    """The brute-force clockwise scan is the reference for everything else."""

    @pytest.mark.parametrize("key,expected", [(1, 1), (2, 3), (6, 0), (0, 0), (3, 3)])
    def test_m3_ring(self, key, expected):
        assert ring_successor({0, 1, 3}, key) == expected

    def test_empty_ring_rejected(self):
        with pytest.raises(ChordError):
            ring_successor([], 3)

    def test_exhaustive_small_space(self):
        ids = {2, 9, 55, 13}
        ordered = sorted(ids)
        for key in range(64):
            following = [i for i in ordered if i >= key]
            expected = following[0] if following else ordered[0]
            assert ring_successor(ids, key) == expected


class TestLookup:
    def test_key_owned_by_start_zero_hops(self):
        overlay = make_ring(50)
        node = overlay.nodes[overlay.oracle_owner(123)]
        owner, path = overlay.lookup(node.node_id, 123)
        assert owner == node.node_id
        assert path == []

    def test_matches_oracle_on_random_keys(self):
        overlay = make_ring(200, m=12)
        rng = random.Random(3)
        for _ in range(800):
            key = rng.randrange(overlay.space)
            start = f"n{rng.randrange(200):05d}"
            owner, path = overlay.lookup(start, key)
            assert owner == overlay.oracle_owner(key)
            assert len(path) <= overlay.m

    def test_hop_bound_mean(self):
        overlay = make_ring(512, m=14)
        rng = random.Random(5)
        hops = []
        for _ in range(1000):
            key = rng.randrange(overlay.space)
            start = f"n{rng.randrange(512):05d}"
            _, path = overlay.lookup(start, key)
            hops.append(len(path))
        assert max(hops) <= overlay.m
        assert sum(hops) / len(hops) <= 0.5 * math.log2(512) + 2

    def test_unknown_start_rejected(self):
        overlay = make_ring(4)
        with pytest.raises(ChordError):
            overlay.lookup("stranger", 1)


class TestChurn:
    def test_join_into_singleton(self):
        overlay = ChordOverlay(m=8)
        overlay.join("a")
        overlay.join("b")
        assert overlay.nodes["a"].successor == "b"
        assert overlay.nodes["b"].successor == "a"
        assert overlay.nodes["a"].predecessor == "b"
        assert overlay.nodes["b"].predecessor == "a"

    def test_duplicate_join_rejected(self):
        overlay = make_ring(4)
        with pytest.raises(ChordError):
            overlay.join("n00000")

    def test_unknown_leave_rejected(self):
        overlay = make_ring(4)
        with pytest.raises(ChordError):
            overlay.leave("stranger")

    def test_leave_reassigns_keys_to_successor(self):
        overlay = make_ring(30)
        rng = random.Random(1)
        keys = [rng.randrange(overlay.space) for _ in range(100)]
        for key in keys:
            overlay.put_key(key)
        victim = "n00007"
        old_successor = overlay.nodes[victim].successor
        victim_keys = set(overlay.nodes[victim].keys)
        overlay.leave(victim)
        assert victim_keys <= overlay.nodes[old_successor].keys
        # oracle re-scan: every key resolves to the clockwise owner
        overlay.stabilize_to_quiescence()
        for key in keys:
            owner, _ = overlay.lookup("n00001", key)
            assert owner == overlay.oracle_owner(key)
            assert key in overlay.nodes[owner].keys

    def test_join_then_leave_restores_ring(self):
        overlay = make_ring(20)
        overlay.stabilize_to_quiescence()
        snapshot = overlay.dump_lines()
        overlay.join("zz-visitor")
        overlay.leave("zz-visitor")
        overlay.stabilize_to_quiescence()
        assert overlay.dump_lines() == snapshot

    def test_interleaved_churn_keeps_lookups_correct(self):
        overlay = make_ring(120, m=12)
        rng = random.Random(9)
        joined = 0
        for step in range(60):
            if step % 2 == 0:
                overlay.join(f"x{joined:04d}")
                joined += 1
            else:
                live = sorted(overlay.nodes)
                overlay.leave(live[rng.randrange(len(live))])
            if step % 10 == 9:
                overlay.stabilize()
        overlay.check_ring()
        rounds, _ = overlay.stabilize_to_quiescence()
        live = sorted(overlay.nodes)
        for _ in range(300):
            key = rng.randrange(overlay.space)
            owner, path = overlay.lookup(live[rng.randrange(len(live))], key)
            assert owner == overlay.oracle_owner(key)
            assert len(path) <= overlay.m


class TestStabilize:
    def test_quiescent_ring_zero_corrections(self):
        overlay = make_ring(64)
        assert overlay.stabilize() == 0

    def test_single_join_corrections_bounded(self):
        overlay = make_ring(100, m=12)
        overlay.join("x0000")
        rounds, corrections = overlay.stabilize_to_quiescence()
        n = len(overlay.nodes)
        bound = 3 * math.ceil(math.log2(n)) ** 2
        assert corrections <= bound
        assert overlay.stabilize() == 0

    def test_heavy_churn_then_all_lookups_correct(self):
        overlay = make_ring(300, m=12)
        rng = random.Random(11)
        for i in range(30):
            overlay.join(f"x{i:04d}")
        live = sorted(overlay.nodes)
        for victim in rng.sample(live, 30):
            overlay.leave(victim)
        overlay.stabilize_to_quiescence()
        live = sorted(overlay.nodes)
        for _ in range(1000):
            key = rng.randrange(overlay.space)
            owner, _ = overlay.lookup(live[rng.randrange(len(live))], key)
            assert owner == overlay.oracle_owner(key)

    def test_ring_integrity_single_cycle(self):
        overlay = make_ring(90)
        overlay.check_ring()
        for i in range(10):
            overlay.join(f"x{i:04d}")
        overlay.check_ring()


class TestReposition:
    def test_two_node_ring_stays_valid(self):
        overlay = ChordOverlay(m=8)
        overlay.join("a")
        overlay.join("b")
        overlay.reposition("b")
        overlay.stabilize_to_quiescence()
        overlay.check_ring()
        for key in range(0, overlay.space, 16):
            owner, _ = overlay.lookup("a", key)
            assert owner == overlay.oracle_owner(key)

    def test_key_reachability_preserved_whole_space(self):
        overlay = ChordOverlay(m=6)
        overlay.build(names(12))
        for key in range(0, 64, 2):
            overlay.put_key(key)
        overlay.reposition("n00004")
        overlay.stabilize_to_quiescence()
        for key in range(64):
            owner, _ = overlay.lookup("n00001", key)
            assert owner == overlay.oracle_owner(key)
        for key in range(0, 64, 2):
            owner, _ = overlay.lookup("n00002", key)
            assert key in overlay.nodes[owner].keys

    def test_old_id_resolves_to_former_successor(self):
        overlay = make_ring(40)
        node = "n00013"
        old_id = overlay.ring_id_of(node)
        former_successor = overlay.nodes[node].successor
        new_id = overlay.reposition(node)
        assert new_id != old_id
        overlay.stabilize_to_quiescence()
        owner, _ = overlay.lookup("n00001", old_id)
        assert owner == overlay.oracle_owner(old_id) == former_successor


class TestDump:
    def test_dump_format(self):
        overlay = make_ring(3, m=4)
        lines = overlay.dump_lines()
        node_lines = [l for l in lines if l.startswith("node ")]
        finger_lines = [l for l in lines if l.startswith("finger ")]
        assert len(node_lines) == 3
        assert len(finger_lines) == 3 * overlay.m
        assert all(len(l.split()) == 5 for l in node_lines)
