"""Event-driven simulation of the sleep/wake link state machine.

One run walks a single FIFO queue through repeating cycles:

    buffer empties -> Sleep (uninterruptible) -> low-power idle ->
    Wakeup -> busy period -> buffer empties ...

The first arrival of a vacation arms the timer and the counter; the wakeup
starts at whichever threshold fires first, but never before the sleep ends.
Arrivals during the wakeup join the queue without reopening that decision.

Events live in one priority queue keyed by absolute time with a fixed kind
order for equal times (service end < sleep end < timer < wakeup end <
arrival), so a run is a pure function of its seed.  Inter-arrival and
service draws come from two independently spawned generator streams.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats as _st

from .config import ProtocolConfig, ServiceLaw, TrafficModel
from .distributions import CountDistribution, empirical_count_distribution
from .errors import ConfigError, StatisticalSetupError, StatisticalValidityError

# Event kinds in tie-break order.
_SERVICE_END = 0
_SLEEP_END = 1
_TIMER = 2
_WAKEUP_END = 3
_ARRIVAL = 4

_RNG_BLOCK = 1 << 15
_MIN_CYCLES_FOR_COUNTS = 10_000


class LinkState(Enum):
    BUSY = "busy"
    SLEEPING = "sleeping"
    LOW_POWER_IDLE = "low_power_idle"
    WAKING_UP = "waking_up"


@dataclass(frozen=True)
class SimConfig:
    protocol: ProtocolConfig
    traffic: TrafficModel
    frame_budget: int = 1_000_000
    warmup_cycles: int = 100
    rng_seed: int = 1
    batch_count: int = 20

    def __post_init__(self):
        if self.batch_count < 10:
            raise StatisticalSetupError(
                f"batch_count must be >= 10 for interval validity, got {self.batch_count}"
            )
        if self.frame_budget < 10 * self.batch_count:
            raise StatisticalSetupError(
                f"frame_budget {self.frame_budget} below 10 * batch_count "
                f"= {10 * self.batch_count}"
            )
        if self.warmup_cycles < 0:
            raise ConfigError("warmup_cycles must be >= 0")
        tau = self.protocol.timer_threshold
        if math.isfinite(tau) and tau <= self.protocol.sleep_duration:
            raise ConfigError(
                f"simulator requires timer_threshold > sleep_duration "
                f"({tau} <= {self.protocol.sleep_duration}); the wakeup decision "
                "would race the uninterruptible sleep"
            )


@dataclass(frozen=True)
class WakeupCauses:
    """How vacations ended: timer expiry, counter mid-idle, counter during sleep."""

    timer: int = 0
    counter: int = 0
    sleep_end_counter: int = 0

    @property
    def total(self) -> int:
        return self.timer + self.counter + self.sleep_end_counter

    def timer_fraction(self) -> float:
        return self.timer / self.total if self.total else math.nan


@dataclass(frozen=True)
class StateTimes:
    sleeping: float
    low_power_idle: float
    waking_up: float
    busy: float

    @property
    def total(self) -> float:
        return self.sleeping + self.low_power_idle + self.waking_up + self.busy


@dataclass(frozen=True)
class SimReport:
    """Post-warmup estimates with 95% batch-means confidence half-widths."""

    mean_delay: float
    delay_ci_halfwidth: float
    power_efficiency: float
    efficiency_ci_halfwidth: float
    mean_vacation: float
    vacation_ci_halfwidth: float
    empirical_h: CountDistribution
    cycles_observed: int
    frames_observed: int
    frames_generated: int
    frames_completed_total: int
    wakeup_cause_counts: WakeupCauses
    state_times: StateTimes
    measured_time: float
    warmup_cycles: int
    rng_seed: int

    def delay_ci_contains(self, value: float) -> bool:
        return abs(value - self.mean_delay) <= self.delay_ci_halfwidth

    def efficiency_ci_contains(self, value: float) -> bool:
        return abs(value - self.power_efficiency) <= self.efficiency_ci_halfwidth


def sample_service(traffic: TrafficModel, rng: np.random.Generator) -> float:
    """Draw one service time from the configured law."""
    law = traffic.service_law
    if law is ServiceLaw.DETERMINISTIC:
        return traffic.service_mean
    if law is ServiceLaw.EXPONENTIAL:
        return float(rng.exponential(traffic.service_mean))
    values = [v for v, _ in traffic.service_table]
    probs = [p for _, p in traffic.service_table]
    return float(rng.choice(values, p=probs))


def _service_block(traffic: TrafficModel, rng: np.random.Generator, size: int) -> list[float]:
    if traffic.service_law is ServiceLaw.EXPONENTIAL:
        return rng.exponential(traffic.service_mean, size).tolist()
    values = np.array([v for v, _ in traffic.service_table])
    probs = np.array([p for _, p in traffic.service_table])
    return rng.choice(values, size=size, p=probs).tolist()


def run_simulation(cfg: SimConfig, trace_path: str | None = None) -> SimReport:
    """Simulate until the post-warmup frame budget completes at a cycle boundary."""
    cfg.traffic.require_stable()
    proto, traffic = cfg.protocol, cfg.traffic
    lam = traffic.arrival_rate
    ts, tw = proto.sleep_duration, proto.wakeup_duration
    tau = proto.timer_threshold
    has_timer = math.isfinite(tau)
    has_counter = math.isfinite(proto.counter_threshold)
    n_threshold = int(proto.counter_threshold) if has_counter else -1

    seq_arrival, seq_service = np.random.SeedSequence(cfg.rng_seed).spawn(2)
    arrival_rng = np.random.Generator(np.random.PCG64(seq_arrival))
    service_rng = np.random.Generator(np.random.PCG64(seq_service))

    arrival_scale = 1.0 / lam
    gaps = arrival_rng.exponential(arrival_scale, _RNG_BLOCK).tolist()
    gap_i = 0
    deterministic_service = traffic.service_law is ServiceLaw.DETERMINISTIC
    fixed_service = traffic.service_mean
    services: list[float] = []
    svc_i = 0

    trace_file = open(trace_path, "w") if trace_path else None
    if trace_file:
        trace_file.write("arrival_time,service_start,departure,cycle_index\n")

    BUSY = LinkState.BUSY
    SLEEPING = LinkState.SLEEPING
    LPI = LinkState.LOW_POWER_IDLE
    WAKING = LinkState.WAKING_UP

    heap: list[tuple[float, int, int]] = []
    push = heapq.heappush
    pop = heapq.heappop
    seq = 0

    # Per-cycle records, collected after warmup only.
    rec_frames: list[int] = []
    rec_delay: list[float] = []
    rec_count: list[int] = []
    rec_sleep: list[float] = []
    rec_lpi: list[float] = []
    rec_waking: list[float] = []
    rec_busy: list[float] = []
    rec_vacation: list[float] = []
    rec_cycle: list[float] = []
    cause_tally = {"timer": 0, "counter": 0, "sleep_end_counter": 0}

    now = 0.0
    state = SLEEPING
    state_entered = 0.0
    queue: list[float] = []  # arrival times; FIFO via rolling head index
    q_head = 0
    current_arrival = 0.0
    current_start = 0.0

    cycle_index = 0
    cycle_start = 0.0
    vac_count = 0
    timer_generation = 0
    counter_hit_in_sleep = False
    wakeup_cause = ""
    cyc_sleep = cyc_lpi = cyc_waking = 0.0
    cyc_frames = 0
    cyc_delay = 0.0

    frames_generated = 0
    frames_completed = 0
    frames_measured = 0
    measuring = cfg.warmup_cycles == 0
    measure_start = 0.0
    budget = cfg.frame_budget

    push(heap, (ts, _SLEEP_END, seq)); seq += 1
    push(heap, (gaps[gap_i], _ARRIVAL, seq)); seq += 1
    gap_i += 1

    while True:
        now, kind, stamp = pop(heap)

        if kind == _ARRIVAL:
            frames_generated += 1
            queue.append(now)
            if gap_i == _RNG_BLOCK:
                gaps = arrival_rng.exponential(arrival_scale, _RNG_BLOCK).tolist()
                gap_i = 0
            push(heap, (now + gaps[gap_i], _ARRIVAL, seq)); seq += 1
            gap_i += 1
            if state is BUSY:
                continue
            vac_count += 1
            if state is WAKING:
                continue  # wakeup committed; the frame just queues
            if vac_count == 1 and has_timer:
                push(heap, (now + tau, _TIMER, timer_generation))
            if vac_count == n_threshold:
                if state is SLEEPING:
                    counter_hit_in_sleep = True
                else:  # counter fires mid-idle: wakeup starts at this arrival
                    cyc_lpi += now - state_entered
                    state = WAKING
                    state_entered = now
                    wakeup_cause = "counter"
                    push(heap, (now + tw, _WAKEUP_END, seq)); seq += 1

        elif kind == _SERVICE_END:
            frames_completed += 1
            cyc_frames += 1
            cyc_delay += now - current_arrival
            if trace_file:
                trace_file.write(f"{current_arrival!r},{current_start!r},{now!r},{cycle_index}\n")
            if q_head < len(queue):
                current_arrival = queue[q_head]
                q_head += 1
                current_start = now
                if deterministic_service:
                    svc = fixed_service
                else:
                    if svc_i == len(services):
                        services = _service_block(traffic, service_rng, _RNG_BLOCK)
                        svc_i = 0
                    svc = services[svc_i]
                    svc_i += 1
                push(heap, (now + svc, _SERVICE_END, seq)); seq += 1
            else:
                # buffer empty: close this cycle, open the next vacation
                if measuring:
                    rec_frames.append(cyc_frames)
                    rec_delay.append(cyc_delay)
                    rec_count.append(vac_count)
                    rec_sleep.append(cyc_sleep)
                    rec_lpi.append(cyc_lpi)
                    rec_waking.append(cyc_waking)
                    rec_busy.append(now - state_entered)
                    rec_vacation.append(cyc_sleep + cyc_lpi + cyc_waking)
                    rec_cycle.append(now - cycle_start)
                    cause_tally[wakeup_cause] += 1
                    frames_measured += cyc_frames
                    if frames_measured >= budget:
                        break
                cycle_index += 1
                if not measuring and cycle_index >= cfg.warmup_cycles:
                    measuring = True
                    measure_start = now
                queue = queue[q_head:]
                q_head = 0
                cycle_start = now
                vac_count = 0
                counter_hit_in_sleep = False
                timer_generation += 1
                wakeup_cause = ""
                cyc_sleep = cyc_lpi = cyc_waking = 0.0
                cyc_frames = 0
                cyc_delay = 0.0
                state = SLEEPING
                state_entered = now
                push(heap, (now + ts, _SLEEP_END, seq)); seq += 1

        elif kind == _SLEEP_END:
            cyc_sleep += now - state_entered
            state_entered = now
            if counter_hit_in_sleep:
                state = WAKING
                wakeup_cause = "sleep_end_counter"
                push(heap, (now + tw, _WAKEUP_END, seq)); seq += 1
            else:
                state = LPI

        elif kind == _WAKEUP_END:
            cyc_waking += now - state_entered
            state = BUSY
            state_entered = now
            # a vacation holds at least one frame, so serving starts right away
            current_arrival = queue[q_head]
            q_head += 1
            current_start = now
            if deterministic_service:
                svc = fixed_service
            else:
                if svc_i == len(services):
                    services = _service_block(traffic, service_rng, _RNG_BLOCK)
                    svc_i = 0
                svc = services[svc_i]
                svc_i += 1
            push(heap, (now + svc, _SERVICE_END, seq)); seq += 1

        else:  # _TIMER; its stamp is the vacation generation that armed it
            if stamp != timer_generation:
                continue  # stale timer from an already-closed vacation
            if state is LPI:
                cyc_lpi += now - state_entered
                state = WAKING
                state_entered = now
                wakeup_cause = "timer"
                push(heap, (now + tw, _WAKEUP_END, seq)); seq += 1
            elif state is SLEEPING:
                raise AssertionError(
                    "timer expired during sleep; timer_threshold <= sleep_duration?"
                )
            # WAKING/BUSY: this vacation's decision already committed

    if trace_file:
        trace_file.close()

    return _build_report(
        cfg, rec_frames, rec_delay, rec_count, rec_sleep, rec_lpi, rec_waking,
        rec_busy, rec_vacation, rec_cycle, cause_tally, frames_generated,
        frames_completed, frames_measured, now - measure_start,
    )


def _batch_ratio(values: np.ndarray, weights: np.ndarray, batches: int) -> tuple[float, float]:
    """Batch-means ratio estimate: mean and 95% half-width over cycle batches."""
    v_chunks = np.array_split(values, batches)
    w_chunks = np.array_split(weights, batches)
    ratios = np.array([v.sum() / w.sum() for v, w in zip(v_chunks, w_chunks)])
    mean = float(ratios.mean())
    spread = float(ratios.std(ddof=1))
    tcrit = float(_st.t.ppf(0.975, batches - 1))
    return mean, tcrit * spread / math.sqrt(batches)


def _build_report(cfg, rec_frames, rec_delay, rec_count, rec_sleep, rec_lpi,
                  rec_waking, rec_busy, rec_vacation, rec_cycle, cause_tally,
                  frames_generated, frames_completed, frames_measured,
                  measured_time) -> SimReport:
    cycles = len(rec_frames)
    if cycles < cfg.batch_count:
        raise StatisticalSetupError(
            f"only {cycles} post-warmup cycles for {cfg.batch_count} batches; "
            "raise frame_budget or lower batch_count"
        )
    frames = np.array(rec_frames, dtype=float)
    delays = np.array(rec_delay)
    lpi = np.array(rec_lpi)
    vacations = np.array(rec_vacation)
    cycle_lens = np.array(rec_cycle)

    delay_mean, delay_hw = _batch_ratio(delays, frames, cfg.batch_count)
    lpi_frac_mean, lpi_frac_hw = _batch_ratio(lpi, cycle_lens, cfg.batch_count)
    vac_mean, vac_hw = _batch_ratio(vacations, np.ones(cycles), cfg.batch_count)

    proto = cfg.protocol
    discount = (proto.power_high - proto.power_low) / proto.power_high
    tallies: dict[int, int] = {}
    for n in rec_count:
        tallies[n] = tallies.get(n, 0) + 1

    state_times = StateTimes(
        sleeping=math.fsum(rec_sleep),
        low_power_idle=math.fsum(rec_lpi),
        waking_up=math.fsum(rec_waking),
        busy=math.fsum(rec_busy),
    )

    return SimReport(
        mean_delay=delay_mean,
        delay_ci_halfwidth=delay_hw,
        power_efficiency=lpi_frac_mean * discount,
        efficiency_ci_halfwidth=lpi_frac_hw * discount,
        mean_vacation=vac_mean,
        vacation_ci_halfwidth=vac_hw,
        empirical_h=empirical_count_distribution(tallies),
        cycles_observed=cycles,
        frames_observed=frames_measured,
        frames_generated=frames_generated,
        frames_completed_total=frames_completed,
        wakeup_cause_counts=WakeupCauses(**cause_tally),
        state_times=state_times,
        measured_time=measured_time,
        warmup_cycles=cfg.warmup_cycles,
        rng_seed=cfg.rng_seed,
    )


def empirical_vacation_counts(report: SimReport) -> CountDistribution:
    """Observed per-vacation arrival-count frequencies.

    Requires enough cycles that the frequencies are statistically meaningful.
    """
    if report.cycles_observed < _MIN_CYCLES_FOR_COUNTS:
        raise StatisticalValidityError(
            f"{report.cycles_observed} cycles < {_MIN_CYCLES_FOR_COUNTS} required"
        )
    return report.empirical_h


def empirical_arrival_weighted_counts(report: SimReport) -> CountDistribution:
    """Fraction of vacation-arriving frames whose vacation held n frames total.

    Every vacation with n arrivals contributes n such frames, so this is the
    size-biased version of the per-vacation count law.
    """
    if report.cycles_observed < _MIN_CYCLES_FOR_COUNTS:
        raise StatisticalValidityError(
            f"{report.cycles_observed} cycles < {_MIN_CYCLES_FOR_COUNTS} required"
        )
    h = report.empirical_h
    idx = np.arange(len(h.pmf))
    weighted = h.pmf * idx
    weighted = weighted / weighted.sum()
    m1 = float(weighted @ idx)
    m2 = float(weighted @ (idx * (idx - 1)))
    return CountDistribution(weighted, m1, m2, tail=None)
