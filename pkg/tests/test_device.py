import pytest

from pacsim.device import (ACT, PRE, RD, REF, PREF, WR, BankState, DDR4_DEFAULT,
                           DDR5_DEFAULT, DeviceTimings, IllegalCommandError,
                           MisraGriesTracker, Topology, ns_to_ticks,
                           rfm_service, timings_from_preset, victim_rows)


def ticks(ns):
    return ns_to_ticks(ns)


@pytest.fixture
def bank():
    return BankState(DDR5_DEFAULT)


def test_presets():
    assert DDR5_DEFAULT.t_refw == 32_000_000.0
    assert DDR5_DEFAULT.t_refi == 3900.0
    assert DDR5_DEFAULT.t_rfc == 195.0
    assert DDR4_DEFAULT.t_refw == 64_000_000.0
    assert DDR4_DEFAULT.t_refi == 7800.0
    assert DDR4_DEFAULT.t_rfc == 350.0
    assert DDR5_DEFAULT.t_rc == DDR5_DEFAULT.t_ras + DDR5_DEFAULT.t_rp


def test_preset_overrides():
    t = timings_from_preset("ddr4_default", t_rp=18.0)
    assert t.t_rp == 18.0 and t.t_refw == 64_000_000.0
    with pytest.raises(ValueError):
        timings_from_preset("ddr3_default")


def test_act_then_pre_at_t_ras(bank):
    bank.issue(ACT, 0, row=7)
    assert bank.legal_at(PRE, 0) == ticks(DDR5_DEFAULT.t_ras)


def test_act_to_act_at_t_rc(bank):
    bank.issue(ACT, 0, row=7)
    bank.issue(PRE, bank.legal_at(PRE, 0))
    assert bank.legal_at(ACT, 0) == ticks(DDR5_DEFAULT.t_rc)


def test_read_on_open_row_immediate(bank):
    bank.issue(ACT, 0, row=7)
    t = bank.legal_at(RD, 0)
    assert t == ticks(DDR5_DEFAULT.t_rcd)
    bank.issue(RD, t)
    assert bank.legal_at(RD, t + ticks(DDR5_DEFAULT.t_bl)) == t + ticks(DDR5_DEFAULT.t_bl)


def test_read_while_precharged_raises(bank):
    with pytest.raises(IllegalCommandError):
        bank.legal_at(RD, 0)


def test_issue_before_legal_is_a_hard_fault(bank):
    bank.issue(ACT, 0, row=7)
    with pytest.raises(IllegalCommandError):
        bank.issue(PRE, 1)


def test_preventive_composite_busy_times(bank):
    done = bank.issue(PREF, 0)   # nominal restoration
    assert done == ticks(33) + ticks(15)
    done2 = bank.issue(PREF, done, restore_latency_ns=12)
    assert done2 - done == ticks(12) + ticks(15)


def test_refresh_blocks_for_t_rfc(bank):
    done = bank.issue(REF, 0)
    assert done == ticks(DDR5_DEFAULT.t_rfc)
    assert bank.legal_at(ACT, 0) == done


def test_prac_counter_and_backoff():
    bank = BankState(DDR5_DEFAULT, prac_enabled=True, prac_threshold=3)
    t = 0
    for i in range(3):
        t = bank.legal_at(ACT, t)
        bank.issue(ACT, t, row=50)
        assert bank.prac_check_backoff() == (True if i == 2 else None)
        t = bank.issue(PRE, bank.legal_at(PRE, t))


def test_rfm_service_resets_counters():
    bank = BankState(DDR5_DEFAULT, prac_enabled=True, prac_threshold=2)
    t = 0
    for _ in range(2):
        t = bank.legal_at(ACT, t)
        bank.issue(ACT, t, row=100)
        t = bank.issue(PRE, bank.legal_at(PRE, t))
    victims, done = rfm_service(bank, bank.legal_at(PREF, t))
    assert victims == [98, 99, 101, 102]
    assert bank.prac_check_backoff() is None
    # service of four victims occupies the bank back to back
    assert done >= t + 4 * (ticks(33) + ticks(15))


def test_rfm_service_empty_tracker():
    bank = BankState(DDR5_DEFAULT, rfm_tracking=True)
    victims, done = rfm_service(bank, 5)
    assert victims == [] and done == 5


def test_rfm_service_edge_clamp():
    bank = BankState(DDR5_DEFAULT, rfm_tracking=True)
    bank.issue(ACT, 0, row=0)
    bank.issue(PRE, bank.legal_at(PRE, 0))
    victims, _ = rfm_service(bank, bank.legal_at(PREF, 10_000))
    assert victims == [1, 2]


def test_victim_rows():
    assert victim_rows(100, 2, 65536) == [98, 99, 101, 102]
    assert victim_rows(0, 2, 65536) == [1, 2]
    assert victim_rows(10, 1, 65536) == [9, 11]
    assert victim_rows(65535, 2, 65536) == [65533, 65534]
    with pytest.raises(ValueError):
        victim_rows(5, 0, 65536)


def test_earliest_legal_monotone(bank):
    seen = []
    t = 0
    for _ in range(4):
        t = bank.legal_at(ACT, t)
        bank.issue(ACT, t, row=3)
        seen.append(bank.earliest[ACT])
        t = bank.issue(PRE, bank.legal_at(PRE, t))
    assert seen == sorted(seen)


def test_misra_gries_tracker():
    trk = MisraGriesTracker(2)
    for _ in range(5):
        trk.observe(1)
    for _ in range(3):
        trk.observe(2)
    assert trk.top() == 1
    trk.reset_entry(1)
    assert trk.top() == 2
    # spillover can displace the minimum entry once it outweighs it
    for _ in range(10):
        trk.observe(3)
    for _ in range(8):
        trk.observe(4)
    assert set(trk.counts) <= {2, 3, 4}
    assert trk.top() == 3


def test_topology_capacity():
    topo = Topology()
    assert topo.total_banks == 32
    assert topo.capacity_bytes == 32 * 65536 * 128 * 64
