import random

import pytest

from leachsim.config import EmaConfig
from leachsim.contact import (
    KnowledgeState,
    ema_update,
    sync_tables,
    TRANSMISSION,
    TIMEOUT,
)
from leachsim.errors import ContractError

EMA = EmaConfig(alpha=0.5, timeout_s=10.0)


class TestEmaUpdate:
    def test_zero_alpha_keeps_old_value(self):
        assert ema_update(0.5, 0.0, TRANSMISSION, observed=1.0) == 0.5

    def test_contact_blends_toward_observation(self):
        assert ema_update(0.5, 0.5, TRANSMISSION, observed=1.0) == 0.75

    def test_timeout_decays(self):
        assert ema_update(0.8, 0.5, TIMEOUT) == pytest.approx(0.4, abs=1e-15)

    def test_transmission_requires_observation(self):
        with pytest.raises(ContractError):
            ema_update(0.5, 0.5, TRANSMISSION)

    @pytest.mark.parametrize("value, alpha, observed", [
        (-0.1, 0.5, 0.5), (1.1, 0.5, 0.5), (0.5, -0.1, 0.5), (0.5, 1.1, 0.5), (0.5, 0.5, 1.5),
    ])
    def test_out_of_range_inputs_rejected(self, value, alpha, observed):
        with pytest.raises(ContractError):
            ema_update(value, alpha, TRANSMISSION, observed=observed)

    def test_outputs_stay_in_unit_interval(self):
        rng = random.Random(1)
        for _ in range(5000):
            value, alpha, observed = rng.random(), rng.random(), rng.random()
            out = ema_update(value, alpha, TRANSMISSION, observed=observed)
            assert 0.0 <= out <= 1.0
            assert 0.0 <= ema_update(value, alpha, TIMEOUT) <= 1.0

    def test_direct_contact_never_decreases_probability(self):
        rng = random.Random(2)
        for _ in range(2000):
            value, alpha = rng.random(), rng.random()
            assert ema_update(value, alpha, TRANSMISSION, observed=1.0) >= value


class TestKnowledgeState:
    def test_meeting_initialises_unknown_peer(self):
        state = KnowledgeState(1)
        state.record_meeting(2, None, 100, EMA)
        entry = state.cluster_table[2]
        assert entry.contact_probability == 0.5
        assert entry.cluster_id is None
        assert entry.time_stamp == 100

    def test_meeting_updates_existing_entry_and_timestamp(self):
        state = KnowledgeState(1)
        state.record_meeting(2, 7, 100, EMA)
        state.record_meeting(2, 8, 250, EMA)
        entry = state.cluster_table[2]
        assert entry.contact_probability == 0.75
        assert entry.cluster_id == 8
        assert entry.time_stamp == 250

    def test_self_meeting_rejected(self):
        with pytest.raises(ContractError):
            KnowledgeState(1).record_meeting(1, None, 0, EMA)

    def test_timeout_halves_with_half_alpha(self):
        state = KnowledgeState(1)
        state.record_meeting(2, None, 0, EMA)
        state.record_meeting(2, None, 1, EMA)  # 0.75
        state.apply_timeout(2, 10, EMA)
        assert state.cluster_table[2].contact_probability == 0.375
        assert state.cluster_table[2].time_stamp == 10

    def test_timeout_for_unknown_peer_is_noop(self):
        state = KnowledgeState(1)
        state.apply_timeout(9, 10, EMA)
        assert 9 not in state.cluster_table

    def test_repeated_timeouts_match_closed_form(self):
        ema = EmaConfig(alpha=0.3, timeout_s=5.0)
        state = KnowledgeState(1)
        state.record_meeting(2, None, 0, ema)
        start = state.cluster_table[2].contact_probability
        for k in range(1, 25):
            state.apply_timeout(2, k, ema)
            expected = (1.0 - ema.alpha) ** k * start
            assert state.cluster_table[2].contact_probability == pytest.approx(expected, abs=1e-12)

    def test_zero_alpha_timeout_is_identity(self):
        ema = EmaConfig(alpha=0.0, timeout_s=5.0)
        state = KnowledgeState(1)
        state.record_meeting(2, None, 0, ema)
        before = state.cluster_table[2].contact_probability
        state.apply_timeout(2, 5, ema)
        assert state.cluster_table[2].contact_probability == before

    def test_lookup_gateway(self):
        state = KnowledgeState(1)
        assert state.lookup_gateway(4) is None
        state.record_meeting(2, 4, 10, EMA)
        state.record_gateway(2, 4, 10)
        entry = state.lookup_gateway(4)
        assert entry is not None and entry.gateway == 2
        state.clear_gateway_table()
        assert state.lookup_gateway(4) is None


class TestSyncTables:
    def test_disjoint_tables_union(self):
        a = KnowledgeState(1)
        b = KnowledgeState(2)
        a.record_meeting(3, 7, 10, EMA)
        b.record_meeting(4, 8, 20, EMA)
        sync_tables(a, b)
        assert set(a.cluster_table) >= {3, 4}
        assert set(b.cluster_table) >= {3, 4}
        assert a.cluster_table[3] == b.cluster_table[3]
        assert a.cluster_table[4] == b.cluster_table[4]

    def test_newer_timestamp_wins(self):
        a = KnowledgeState(1)
        b = KnowledgeState(2)
        a.record_meeting(3, 7, 5_000_000, EMA)
        b.record_meeting(3, 9, 9_000_000, EMA)
        sync_tables(a, b)
        assert a.cluster_table[3].time_stamp == 9_000_000
        assert a.cluster_table[3] == b.cluster_table[3]

    def test_equal_timestamps_resolve_by_probability(self):
        a = KnowledgeState(1)
        b = KnowledgeState(2)
        a.record_meeting(3, 7, 100, EMA)             # 0.5
        b.record_meeting(3, 7, 50, EMA)
        b.record_meeting(3, 7, 100, EMA)             # 0.75 at same final stamp
        sync_tables(a, b)
        assert a.cluster_table[3].contact_probability == 0.75
        assert b.cluster_table[3].contact_probability == 0.75

    def test_no_self_entries_created(self):
        a = KnowledgeState(1)
        b = KnowledgeState(2)
        a.record_meeting(2, None, 10, EMA)  # a's view of b
        b.record_meeting(1, None, 10, EMA)  # b's view of a
        sync_tables(a, b)
        assert 1 not in a.cluster_table
        assert 2 not in b.cluster_table
        assert 2 in a.cluster_table
        assert 1 in b.cluster_table

    def test_sync_is_idempotent_and_converges(self):
        rng = random.Random(5)
        a = KnowledgeState(1)
        b = KnowledgeState(2)
        for _ in range(50):
            owner, other = (a, b) if rng.random() < 0.5 else (b, a)
            peer = rng.randrange(3, 12)
            owner.record_meeting(peer, rng.randrange(1, 5), rng.randrange(1000), EMA)
            if rng.random() < 0.3:
                owner.record_gateway(peer, rng.randrange(1, 5), rng.randrange(1000))
        sync_tables(a, b)
        shared = (set(a.cluster_table) | set(b.cluster_table)) - {1, 2}
        for key in shared:
            assert a.cluster_table[key] == b.cluster_table[key]
        assert a.gateway_table == b.gateway_table
        snapshot = (dict(a.cluster_table), dict(b.cluster_table), dict(a.gateway_table))
        sync_tables(a, b)
        assert snapshot == (dict(a.cluster_table), dict(b.cluster_table), dict(a.gateway_table))

    def test_canonical_serialisation_is_sorted_and_stable(self):
        a = KnowledgeState(1)
        a.record_meeting(5, 2, 30, EMA)
        a.record_meeting(3, 2, 10, EMA)
        a.record_gateway(5, 2, 30)
        text = a.canonical()
        assert text == a.canonical()
        lines = text.splitlines()
        assert lines[0].startswith("cluster 3 ")
        assert lines[1].startswith("cluster 5 ")
        assert lines[2].startswith("gateway 2 ")
