import random

import pytest

from dht_rebalance.ring import (
    CIRCLE,
    DuplicateNode,
    LastNode,
    LimitedTokenEqualPart,
    LimitedTokenRandomPart,
    ManyTokenEqualPart,
    QSmallerThanN,
    ReplicationExceedsNodes,
    UnknownNode,
    ZeroNodes,
    balance_stats,
    build_ring,
    hash_key,
    join,
    leave,
    lookup,
    mix64,
    partition_of,
    ring_from_json,
    ring_to_json,
)


def test_mix64_is_a_64_bit_permutation_sample():
    seen = {mix64(x) for x in range(10000)}
    assert len(seen) == 10000
    assert all(0 <= h < CIRCLE for h in seen)


def test_partition_ranges_cover_circle():
    q = 7
    w = CIRCLE // q
    assert partition_of(0, q) == 0
    assert partition_of(w - 1, q) == 0
    assert partition_of(w, q) == 1
    # the last partition absorbs the remainder
    assert partition_of(CIRCLE - 1, q) == q - 1
    assert partition_of(q * w, q) == q - 1


def test_build_single_node_owns_everything():
    ring = build_ring(1, ManyTokenEqualPart(128), 1234)
    assert ring.token_counts() == {0: 128}


def test_build_even_split():
    ring = build_ring(4, ManyTokenEqualPart(120), 42)
    assert all(c == 30 for c in ring.token_counts().values())


def test_build_uneven_split_within_one():
    ring = build_ring(5, ManyTokenEqualPart(128), 3)
    counts = ring.token_counts().values()
    assert sorted(counts) == [25, 25, 26, 26, 26]


def test_build_q_smaller_than_n():
    with pytest.raises(QSmallerThanN):
        build_ring(4, ManyTokenEqualPart(3), 0)


def test_build_zero_nodes():
    with pytest.raises(ZeroNodes):
        build_ring(0, ManyTokenEqualPart(8), 0)


def test_build_deterministic():
    a = build_ring(6, ManyTokenEqualPart(96), 99)
    b = build_ring(6, ManyTokenEqualPart(96), 99)
    assert a == b
    c = build_ring(6, LimitedTokenRandomPart(4), 99)
    d = build_ring(6, LimitedTokenRandomPart(4), 99)
    assert c == d


def test_limited_token_equal_part_fixes_q_at_creation():
    ring = build_ring(4, LimitedTokenEqualPart(8), 5)
    assert ring.q == 32
    ring2, _ = join(ring, 4, 17)
    assert ring2.q == 32  # Q never changes after creation


def test_lookup_single_node():
    ring = build_ring(1, ManyTokenEqualPart(16), 0)
    assert lookup(ring, 777, 1) == [0]


def test_lookup_matches_linear_scan():
    ring = build_ring(4, ManyTokenEqualPart(120), 42)
    for key in range(50):
        got = lookup(ring, key, 3)
        assert len(got) == len(set(got)) == 3
        # linear-scan oracle over the token table
        h = hash_key(key)
        p = partition_of(h, ring.q)
        expect = []
        for i in range(ring.q):
            owner = ring.owners[(p + i) % ring.q]
            if owner not in expect:
                expect.append(owner)
            if len(expect) == 3:
                break
        assert got == expect


def test_lookup_replication_exceeds_nodes():
    ring = build_ring(2, ManyTokenEqualPart(16), 0)
    with pytest.raises(ReplicationExceedsNodes):
        lookup(ring, 1, 3)


def test_lookup_stable_under_reinvocation():
    ring = build_ring(5, LimitedTokenRandomPart(3), 8)
    assert lookup(ring, 42, 2) == lookup(ring, 42, 2)


def test_join_even_steal():
    ring = build_ring(4, ManyTokenEqualPart(120), 42)
    ring2, report = join(ring, 4, 7)
    assert ring2.token_counts() == {nd: 24 for nd in range(5)}
    assert len(report.moved_partitions) == 24
    assert all(to == 4 for _, _, to in report.moved_partitions)


def test_join_two_way_split():
    ring = build_ring(1, ManyTokenEqualPart(128), 0)
    ring2, _ = join(ring, 1, 3)
    assert sorted(ring2.token_counts().values()) == [64, 64]


def test_join_duplicate_node():
    ring = build_ring(3, ManyTokenEqualPart(30), 0)
    with pytest.raises(DuplicateNode):
        join(ring, 2, 1)


def test_leave_redistributes_evenly():
    ring = build_ring(5, ManyTokenEqualPart(120), 11)
    ring2, report = leave(ring, 3, 4)
    assert all(c == 30 for c in ring2.token_counts().values())
    assert len(report.moved_partitions) == 24
    assert all(frm == 3 for _, frm, _ in report.moved_partitions)


def test_leave_unknown_and_last_node():
    ring = build_ring(1, ManyTokenEqualPart(8), 0)
    with pytest.raises(LastNode):
        leave(ring, 0, 0)
    ring2 = build_ring(2, ManyTokenEqualPart(8), 0)
    with pytest.raises(UnknownNode):
        leave(ring2, 9, 0)


def test_leave_deterministic_report():
    ring = build_ring(5, ManyTokenEqualPart(100), 2)
    _, a = leave(ring, 1, 77)
    _, b = leave(ring, 1, 77)
    assert a == b


def test_movement_locality_random_sequences():
    rng = random.Random(2024)
    ring = build_ring(4, ManyTokenEqualPart(128), 1)
    next_id = 4
    for _ in range(300):
        if ring.n > 2 and rng.random() < 0.4:
            node = rng.choice(sorted(ring.nodes))
            ring, report = leave(ring, node, rng.getrandbits(32))
            assert all(frm == node for _, frm, _ in report.moved_partitions)
        else:
            ring, report = join(ring, next_id, rng.getrandbits(32))
            assert all(to == next_id for _, _, to in report.moved_partitions)
            next_id += 1
        counts = list(ring.token_counts().values())
        assert sum(counts) == 128  # partition conservation
        assert max(counts) - min(counts) <= 1


def test_join_moved_fraction_matches_binomial():
    # Q divisible by N+1, so the moved circle fraction is exactly 1/(N+1)
    ring = build_ring(4, ManyTokenEqualPart(120), 42)
    k = 200_000
    r = 3
    _, report = join(ring, 4, 9, key_sample=k, sample_seed=5, replication=r)
    frac = report.moved_key_estimate / (k * r)
    p = 1.0 / 5.0
    sigma = (p * (1 - p) / k) ** 0.5
    assert abs(frac - p) <= 3 * sigma


def test_moved_byte_estimate_scales_with_value_size():
    ring = build_ring(4, ManyTokenEqualPart(120), 42)
    _, report = join(ring, 4, 9, key_sample=10_000, value_size=16.0)
    assert report.moved_byte_estimate == report.moved_key_estimate * 16.0


def test_balance_stats_single_node():
    ring = build_ring(1, ManyTokenEqualPart(64), 0)
    stats = balance_stats(ring, 10_000, seed=3)
    assert stats.epsilon_hat == 0.0


def test_balance_stats_equal_part_is_tight():
    ring = build_ring(16, ManyTokenEqualPart(4096), 7)
    stats = balance_stats(ring, 1_000_000, r=1, seed=7)
    assert sum(stats.per_node_load.values()) == stats.k_sampled
    assert stats.mean_load == pytest.approx(1_000_000 / 16)
    assert stats.epsilon_hat <= 0.05


def test_balance_stats_random_part_is_worse():
    equal = balance_stats(build_ring(16, ManyTokenEqualPart(4096), 7),
                          1_000_000, seed=7)
    rand = balance_stats(build_ring(16, LimitedTokenRandomPart(1), 7),
                         1_000_000, seed=7)
    assert rand.epsilon_hat > 5 * equal.epsilon_hat
    assert rand.epsilon_hat > 0.2


def test_balance_stats_replicated_mean():
    ring = build_ring(8, ManyTokenEqualPart(256), 1)
    stats = balance_stats(ring, 50_000, r=3, seed=2)
    assert sum(stats.per_node_load.values()) == 3 * 50_000
    assert stats.mean_load == pytest.approx(3 * 50_000 / 8)


def test_serialization_round_trip():
    for strategy in (ManyTokenEqualPart(96), LimitedTokenRandomPart(3)):
        ring = build_ring(5, strategy, 12)
        assert ring_from_json(ring_to_json(ring)) == ring
