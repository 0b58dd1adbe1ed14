import pytest

from stbon.costs import (
    SlotLedger,
    empirical_c_T_distributions,
    measure_run,
    memory_reduction_rate,
)


def ledger_from(counts_and_slots, wall_ms=10.0):
    ledger = SlotLedger(wall_ms=wall_ms)
    for active, slots in counts_and_slots:
        ledger.note(active, slots)
    return ledger


def test_reduction_rate_worked_example():
    assert memory_reduction_rate(50, 500, 5) == pytest.approx(0.8)


def test_reduction_rate_boundary():
    # 2 E[c] = E[T]: the N-stream phase never beats full generation
    assert memory_reduction_rate(250, 500, 5) == 0.0
    assert memory_reduction_rate(250, 500, 1000) == 0.0


def test_reduction_rate_limit_in_n():
    # grows with N toward 1 - 2 E[c]/E[T]
    values = [memory_reduction_rate(50, 500, n) for n in (1, 2, 5, 10, 100, 10**9)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1 - 2 * 50 / 500, abs=1e-9)


def test_reduction_rate_general_window_ratio():
    assert memory_reduction_rate(50, 500, 50, window_ratio=0.0) == pytest.approx(0.9)
    assert memory_reduction_rate(50, 500, 50, window_ratio=3.0) == pytest.approx(0.6)


def test_reduction_rate_validation():
    with pytest.raises(ValueError):
        memory_reduction_rate(0, 500, 5)
    with pytest.raises(ValueError):
        memory_reduction_rate(50, 0, 5)
    with pytest.raises(ValueError):
        memory_reduction_rate(50, 500, 0)
    with pytest.raises(ValueError):
        memory_reduction_rate(50, 500, 5, window_ratio=-1)


def test_ledger_bookkeeping():
    ledger = ledger_from([(3, 3), (3, 6), (3, 9), (1, 10)])
    assert ledger.peak_slots == 10
    assert ledger.total_slot_steps == 28
    assert ledger.total_stream_steps == 10
    assert SlotLedger().peak_slots == 0


def test_measure_run_self_ratio():
    greedy = ledger_from([(1, 1), (1, 2), (1, 3)], wall_ms=5.0)
    report = measure_run(greedy, greedy)
    assert report.m_cost == 1.0
    assert report.t_cost == 1.0
    assert report.a_cost == 1.0
    assert report.memory_reduction is None


def test_measure_run_ratios_and_identity():
    greedy = ledger_from([(1, 1), (1, 2), (1, 3), (1, 4)], wall_ms=8.0)
    run = ledger_from([(5, 5), (5, 10), (1, 11)], wall_ms=20.0)
    report = measure_run(run, greedy, reference_peak=40)
    assert report.m_cost == pytest.approx(11 / 4)
    assert report.t_cost == pytest.approx(2.5)
    assert report.a_cost == pytest.approx(report.m_cost * report.t_cost)
    assert report.memory_reduction == pytest.approx(1 - 11 / 40)

    weighted = measure_run(run, greedy, weight_constant=100.0)
    assert weighted.m_cost == pytest.approx(111 / 104)
    rm = measure_run(run, greedy, weight_constant=100.0, reward_model_constant=50.0)
    assert rm.m_cost == pytest.approx(161 / 104)

    with pytest.raises(ValueError):
        measure_run(run, SlotLedger())


def test_empirical_distributions():
    stats = empirical_c_T_distributions([(7, 100)])
    assert stats.mean_c == 7 and stats.mean_t == 100
    assert stats.c_histogram == {7: 1} and stats.t_histogram == {100: 1}

    stats = empirical_c_T_distributions([(2, 10), (4, 30), (2, 20)])
    assert stats.mean_c == pytest.approx(8 / 3)
    assert stats.mean_t == pytest.approx(20.0)
    assert stats.c_histogram == {2: 2, 4: 1}

    with pytest.raises(ValueError):
        empirical_c_T_distributions([])
