import numpy as np
import pytest

from pacsim import security as S
from pacsim.cmdlog import CMD_ACT, CMD_PREF
from pacsim.device import DeviceTimings, Topology
from pacsim.mitigations import GrapheneTable, Hydra, Para, Refresh
from pacsim.profiles import get_profile, level, load_profiles
from pacsim.verifier import check_disturbance_py

TIMINGS = DeviceTimings()
TOPO = Topology()


def test_attack_row_patterns():
    rows = S.attack_rows("double_sided", 100, 6)
    assert rows.tolist() == [99, 101, 99, 101, 99, 101]
    rows = S.attack_rows("single", 100, 3)
    assert rows.tolist() == [97, 97, 97][0:0] + [99, 99, 99]
    rows = S.attack_rows("half_double", 100, 200)
    far = np.isin(rows, (98, 102)).sum()
    near = np.isin(rows, (99, 101)).sum()
    assert far / near == pytest.approx(32, rel=0.15)
    with pytest.raises(ValueError):
        S.attack_rows("double_sided", 1, 10)


def test_runs_are_deterministic():
    a = S.run_adversarial("para", 128, 30_000, seed=11)
    b = S.run_adversarial("para", 128, 30_000, seed=11)
    assert np.array_equal(a.log.tick, b.log.tick)
    assert np.array_equal(a.log.cmd, b.log.cmd)
    assert np.array_equal(a.log.row, b.log.row)
    assert np.array_equal(a.log.latency_class, b.log.latency_class)
    c = S.run_adversarial("para", 128, 30_000, seed=12)
    assert not np.array_equal(a.log.cmd, c.log.cmd)


def _kernel_aggressors(run):
    """Recover the serviced aggressor sequence from victim refresh batches."""
    rows = run.log.row[run.log.cmd == CMD_PREF]
    assert len(rows) % 4 == 0
    batches = rows.reshape(-1, 4)
    return [(lo + hi) // 2 for lo, hi in zip(batches[:, 0], batches[:, 3])]


def test_graphene_kernel_matches_plugin():
    n = 40_000
    run = S.run_adversarial("graphene", 256, n)
    got = _kernel_aggressors(run)
    plugin = GrapheneTable(256, quota=256 // 8,
                           window_acts=int(TIMINGS.t_refw / TIMINGS.t_rc))
    rows = S.attack_rows("double_sided", 1000, n)
    want = [int(r) for i, r in enumerate(rows)
            if any(isinstance(a, Refresh) for a in plugin.on_activate(0, int(r), i))]
    assert got == want


def test_hydra_kernel_matches_plugin():
    n = 30_000
    run = S.run_adversarial("hydra", 256, n)
    got = _kernel_aggressors(run)
    plugin = Hydra(256)
    rows = S.attack_rows("double_sided", 1000, n)
    want = [int(r) for i, r in enumerate(rows)
            if any(isinstance(a, Refresh) for a in plugin.on_activate(0, int(r), i))]
    assert got == want


def test_para_kernel_matches_plugin_draws():
    n = 20_000
    seed = 5
    run = S.run_adversarial("para", 128, n, seed=seed)
    got = _kernel_aggressors(run)
    plugin = Para(128, seed=seed)
    rows = S.attack_rows("double_sided", 1000, n)
    want = [int(r) for i, r in enumerate(rows) if plugin.on_activate(0, int(r), i)]
    assert got == want


def test_rfm_trigger_spacing():
    nrh = 128
    run = S.run_adversarial("rfm", nrh, 10_000)
    # one service per raaimt activations, alternating aggressors
    assert run.triggers == 10_000 // (nrh // 4)
    aggressors = _kernel_aggressors(run)
    assert set(aggressors) == {999, 1001}


def test_prac_trigger_spacing():
    nrh = 128
    run = S.run_adversarial("prac", nrh, 10_000)
    # back-off on the first row reaching the device threshold
    assert run.triggers == pytest.approx(10_000 // (nrh // 4), abs=1)


def test_guard_limits_streaks_exactly():
    profiles = load_profiles()
    pc, scaled = S.deployed_pacram(get_profile("S6", profiles), level(0.27), TIMINGS, 64)
    assert pc.n_pcr == 1 and not pc.all_partial
    run = S.run_adversarial("graphene", 64, 30_000, pacram_cfg=pc, nrh_scaled=scaled)
    cfg = run.verifier_config(TIMINGS, TOPO)
    assert check_disturbance_py(run.log, cfg) == []
    # with n_pcr = 1, full and partial restores alternate per row
    assert run.full_restores == pytest.approx(run.partial_restores, rel=0.01)


def test_log_is_time_ordered():
    run = S.run_adversarial("graphene", 128, 20_000)
    assert bool(np.all(np.diff(run.log.tick) >= 0))


def test_attack_achieves_max_legal_activation_rate():
    run = S.run_adversarial("none", 1024, 5_000)
    acts = run.log.tick[run.log.cmd == CMD_ACT]
    gaps = set(np.diff(acts).tolist())
    t_rc, t_rfc = 64, 260  # 48 ns and 195 ns at 0.75 ns/tick
    # every gap is exactly the row-cycle time, stretched only by a refresh
    assert gaps == {t_rc, t_rc + t_rfc}


def test_weakened_blast_radius_is_caught_under_half_double():
    # the oracle must detect a mitigation that refreshes only +-1 while the
    # far-aggressor pattern hammers at distance two
    kwargs = dict(pattern="half_double", timings=TIMINGS, topology=TOPO)
    sound = S.run_adversarial("graphene", 128, 300_000, **kwargs)
    cfg = sound.verifier_config(TIMINGS, TOPO)
    from pacsim.verifier import disturbance_totals
    assert sum(disturbance_totals(sound.log, cfg).values()) == 0
    weak = S.run_adversarial("graphene", 128, 300_000, blast_radius=1, **kwargs)
    cfg = weak.verifier_config(TIMINGS, TOPO, blast_radius=2)  # oracle keeps +-2
    assert disturbance_totals(weak.log, cfg)["disturbance"] > 0


def test_pure_latency_win_never_increases_busy_time():
    # M0's sustained threshold equals its nominal at every level, so enabling
    # reduced-latency refresh changes only the per-refresh time
    profiles = load_profiles()
    m0 = get_profile("M0", profiles)
    for nrh in (1024, 128):
        plain = S.run_adversarial("rfm", nrh, 200_000, timings=TIMINGS, topology=TOPO)
        pc, scaled = S.deployed_pacram(m0, level(0.36), TIMINGS, nrh)
        assert scaled == nrh   # ratio exactly 1.0
        red = S.run_adversarial("rfm", nrh, 200_000, pacram_cfg=pc, nrh_scaled=scaled,
                                timings=TIMINGS, topology=TOPO)
        assert red.triggers == plain.triggers
        assert red.pref_busy_ticks <= plain.pref_busy_ticks
