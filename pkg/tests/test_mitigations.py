import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pacsim.mitigations import (GrapheneTable, Hydra, MetadataAccess, Para,
                                PracPolicy, Refresh, RfmPolicy, RfmRequest,
                                make_mitigation, victims_of)


def test_victims_of():
    assert victims_of(100, 2) == [98, 99, 101, 102]
    assert victims_of(0, 2) == [1, 2]
    assert victims_of(7, 1) == [6, 8]


def test_para_certain_probability_triggers_every_act():
    para = Para(nrh_config=8, constant=8)   # p = 1.0
    for i in range(20):
        actions = para.on_activate(0, 100, i)
        assert actions and isinstance(actions[0], Refresh)
        assert actions[0].rows == (98, 99, 101, 102)


def test_para_seeded_replay_is_identical():
    seq1 = [bool(Para(128, seed=9).on_activate(0, 5, t)) for t in range(200)]
    para = Para(128, seed=9)
    seq2 = [bool(para.on_activate(0, 5, t)) for t in range(200)]
    # same seed, same draw sequence
    assert [bool(Para(128, seed=9).on_activate(0, 5, 0)) for _ in range(1)]
    p1, p2 = Para(128, seed=4), Para(128, seed=4)
    assert [bool(p1.on_activate(0, 5, t)) for t in range(500)] == \
           [bool(p2.on_activate(0, 5, t)) for t in range(500)]


def test_para_trigger_rate_matches_probability():
    para = Para(128, seed=1)
    n = 100_000
    hits = sum(bool(para.on_activate(0, 9, t)) for t in range(n))
    assert hits / n == pytest.approx(11 / 128, rel=0.05)


def test_rfm_threshold_crossings():
    rfm = RfmPolicy(128, raaimt=32)
    reqs = [rfm.on_activate(1, r, t) for t, r in enumerate(range(31))]
    assert not any(reqs)
    assert rfm.on_activate(1, 31, 31) == [RfmRequest(1)]
    assert rfm.raa[1] == 0


def test_rfm_integer_division_count():
    rfm = RfmPolicy(128, raaimt=32)
    n_rfm = sum(bool(rfm.on_activate(0, i % 7, i)) for i in range(100))
    assert n_rfm == 100 // 32


def test_prac_policy_threshold_default():
    prac = PracPolicy(128)
    assert prac.threshold == 32
    assert prac.on_backoff(3) == [RfmRequest(3)]


def test_graphene_single_row_triggers_at_quota():
    g = GrapheneTable(1024, quota=128, table_entries=64)
    triggered_at = None
    for i in range(1024):
        if g.on_activate(0, 777, i):
            triggered_at = i + 1
            break
    assert triggered_at == 128


def test_graphene_round_robin_below_quota_never_triggers():
    g = GrapheneTable(1024, quota=100, table_entries=8, window_acts=800)
    k = g.table_entries
    for i in range(99 * (k + 1)):
        row = i % (k + 1)
        assert g.on_activate(0, row, i) == []


def _brute_counts(rows):
    counts = {}
    for r in rows:
        counts[r] = counts.get(r, 0) + 1
    return counts


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=30), min_size=1, max_size=1500),
       st.integers(min_value=4, max_value=16))
def test_graphene_estimate_error_bound(rows, k):
    # estimates overcount by at most window/k against exact counting
    g = GrapheneTable(1 << 30, quota=1 << 30, table_entries=k, window_acts=len(rows))
    for i, r in enumerate(rows):
        g.on_activate(0, r, i)
    exact = _brute_counts(rows)
    window = len(rows)
    for row in set(rows) | set(g.tables.get(0, {})):
        est = g.estimate(0, row)
        err = est - exact.get(row, 0)
        assert 0 <= err <= window / k


def test_hydra_metadata_traffic_rules():
    h = Hydra(1024, group_size=4, cache_entries=2, trigger=256, group_threshold=8)
    # up to and including the act that crosses the group threshold: no traffic
    for i in range(8):
        assert h.on_activate(0, 100, i) == []
    # per-row counting engaged; a cold row misses the cache -> one fetch
    acts = h.on_activate(0, 100, 8)
    assert [(a.write) for a in acts if isinstance(a, MetadataAccess)] == [False]
    # a second touch hits
    assert h.on_activate(0, 100, 9) == []
    # conflicting row evicts (write back) then fetches
    acts = h.on_activate(0, 102, 10)
    assert [(a.write) for a in acts if isinstance(a, MetadataAccess)] == [True, False]


def test_hydra_single_row_triggers_before_threshold():
    h = Hydra(256)   # trigger = 64, group threshold = 32
    fired = None
    for i in range(256):
        if any(isinstance(a, Refresh) for a in h.on_activate(0, 500, i)):
            fired = i + 1
            break
    assert fired is not None and fired < 256


def test_make_mitigation_rejects_unknown():
    with pytest.raises(ValueError):
        make_mitigation("trr", 128)
    with pytest.raises(ValueError):
        make_mitigation("para", 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=65535),
       st.integers(min_value=1, max_value=3))
def test_all_plugins_emit_victims_within_blast_radius(row, radius):
    plugins = [Para(64, blast_radius=radius, constant=64),
               GrapheneTable(64, blast_radius=radius, quota=1),
               Hydra(64, blast_radius=radius, trigger=1, group_threshold=1)]
    for plugin in plugins:
        for i in range(3):
            for action in plugin.on_activate(0, row, i):
                if isinstance(action, Refresh):
                    assert all(0 <= v < 65536 and 0 < abs(v - row) <= radius
                               for v in action.rows)
