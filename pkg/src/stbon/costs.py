"""Token-slot cost ledger and the memory/latency cost model.

Memory is modeled in token slots: the number of generated (stream,
position) pairs currently allocated. A stream's slots stay allocated
until the decode truncates it or ends, matching batched-generation
semantics where finished rows keep their cache until the batch returns.
Prompt positions are identical across methods and excluded, so measured
peaks line up with the reduction-rate formula, which is stated in terms
of generation lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SlotLedger:
    """Per-step allocation trace for one decode."""

    active_counts: list[int] = field(default_factory=list)
    slot_counts: list[int] = field(default_factory=list)
    wall_ms: float = 0.0

    def note(self, active: int, slots: int) -> None:
        self.active_counts.append(int(active))
        self.slot_counts.append(int(slots))

    @property
    def peak_slots(self) -> int:
        return max(self.slot_counts, default=0)

    @property
    def total_slot_steps(self) -> int:
        return sum(self.slot_counts)

    @property
    def total_stream_steps(self) -> int:
        return sum(self.active_counts)


@dataclass(frozen=True)
class CostReport:
    m_cost: float
    t_cost: float
    a_cost: float
    memory_reduction: float | None
    wall_ms: float
    peak_slots: int
    total_slot_steps: int
    total_stream_steps: int


def memory_reduction_rate(e_c: float, e_t: float, n: int, *, window_ratio: float = 1.0) -> float:
    """Predicted peak-memory reduction of early truncation vs full generation.

    With window length tau = window_ratio * c, the N-stream phase holds
    N*(1+window_ratio)*E[c] slots and the solo phase E[T], against the
    full baseline's N*E[T]:

        1 - max((1 + window_ratio) * E[c] / E[T], 1 / N)

    The default window_ratio of 1 gives the 1 - max(2 E[c]/E[T], 1/N)
    form. Nondecreasing in N, approaching 1 - (1+m) E[c]/E[T].
    """
    if e_c <= 0 or e_t <= 0:
        raise ValueError("expected lengths must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    if window_ratio < 0:
        raise ValueError("window_ratio must be >= 0")
    return 1.0 - max((1.0 + window_ratio) * e_c / e_t, 1.0 / n)


def measure_run(
    ledger: SlotLedger,
    greedy_ledger: SlotLedger,
    *,
    weight_constant: float = 0.0,
    reward_model_constant: float = 0.0,
    reference_peak: int | None = None,
) -> CostReport:
    """Cost of a run relative to a greedy baseline.

    ``weight_constant`` stands in for base-model weight memory (toy
    weights are negligible, so it defaults to 0 and the memory cost is a
    pure peak-slot ratio); ``reward_model_constant`` charts hypothetical
    reward-model-assisted baselines without running one.
    ``reference_peak``, when given, is a full-generation peak used to
    report the achieved memory reduction.
    """
    if not greedy_ledger.slot_counts:
        raise ValueError("greedy baseline ledger is empty")
    m_cost = (weight_constant + ledger.peak_slots + reward_model_constant) / (
        weight_constant + greedy_ledger.peak_slots
    )
    t_cost = ledger.wall_ms / greedy_ledger.wall_ms if greedy_ledger.wall_ms > 0 else float("nan")
    reduction = None
    if reference_peak is not None and reference_peak > 0:
        reduction = 1.0 - ledger.peak_slots / reference_peak
    return CostReport(
        m_cost=float(m_cost),
        t_cost=float(t_cost),
        a_cost=float(m_cost * t_cost),
        memory_reduction=reduction,
        wall_ms=ledger.wall_ms,
        peak_slots=ledger.peak_slots,
        total_slot_steps=ledger.total_slot_steps,
        total_stream_steps=ledger.total_stream_steps,
    )


@dataclass(frozen=True)
class LengthStats:
    c_histogram: dict[int, int]
    t_histogram: dict[int, int]
    mean_c: float
    mean_t: float


def empirical_c_T_distributions(pairs: list[tuple[int, int]]) -> LengthStats:
    """Histograms and means of (earliest estimation time, final length)."""
    if not pairs:
        raise ValueError("need at least one run")
    cs = np.array([p[0] for p in pairs])
    ts = np.array([p[1] for p in pairs])
    c_hist: dict[int, int] = {}
    t_hist: dict[int, int] = {}
    for c in cs:
        c_hist[int(c)] = c_hist.get(int(c), 0) + 1
    for t in ts:
        t_hist[int(t)] = t_hist.get(int(t), 0) + 1
    return LengthStats(
        c_histogram=c_hist,
        t_histogram=t_hist,
        mean_c=float(cs.mean()),
        mean_t=float(ts.mean()),
    )
