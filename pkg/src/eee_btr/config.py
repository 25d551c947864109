"""Protocol and traffic configuration for the EEE burst-transmission model.

Times are in microseconds, rates in frames per microsecond, power in watts.
A disabled timer or counter threshold is represented by ``math.inf``, never
by a large finite number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, StabilityError

INFINITE = math.inf

# 10GBase-T constants: Sleep takes 2.88 us, Wakeup 4.48 us, and the
# low-power-idle state draws 10% of the active power.
DEFAULT_SLEEP_US = 2.88
DEFAULT_WAKEUP_US = 4.48
DEFAULT_LPI_POWER_FRACTION = 0.1


class PolicyKind(Enum):
    """Which wakeup mechanism(s) a configuration arms."""

    TAU_AND_N = "tau_and_n"  # timer and counter race
    TAU_ONLY = "tau_only"    # counter disabled
    N_ONLY = "n_only"        # timer disabled
    FTR = "ftr"              # counter threshold 1: first arrival wakes the link


@dataclass(frozen=True)
class ProtocolConfig:
    """Hardware and threshold parameters of the sleep/wake strategy.

    ``timer_threshold`` is the LPI timer armed at the first arrival of a
    vacation; ``counter_threshold`` is the arrival count that forces a wakeup.
    At least one of the two must be finite.  The analytical model assumes a
    finite timer exceeds the sleep duration; configurations that break that
    assumption are accepted here (the closed forms still evaluate) but are
    rejected by the simulator, whose event logic relies on it.
    """

    sleep_duration: float = DEFAULT_SLEEP_US
    wakeup_duration: float = DEFAULT_WAKEUP_US
    timer_threshold: float = INFINITE
    counter_threshold: float = INFINITE
    power_high: float = 1.0
    power_low: float = DEFAULT_LPI_POWER_FRACTION * 1.0

    def __post_init__(self):
        if not self.sleep_duration > 0:
            raise ConfigError(f"sleep_duration must be > 0, got {self.sleep_duration}")
        if not self.wakeup_duration > 0:
            raise ConfigError(f"wakeup_duration must be > 0, got {self.wakeup_duration}")
        if not (self.power_high > self.power_low >= 0):
            raise ConfigError(
                f"need power_high > power_low >= 0, got "
                f"{self.power_high} / {self.power_low}"
            )
        tau, n = self.timer_threshold, self.counter_threshold
        if math.isfinite(tau) and not tau > 0:
            raise ConfigError(f"finite timer_threshold must be > 0, got {tau}")
        if math.isfinite(n):
            if n != int(n) or n < 1:
                raise ConfigError(f"finite counter_threshold must be an integer >= 1, got {n}")
        if not (math.isfinite(tau) or math.isfinite(n)):
            raise ConfigError("at least one of timer_threshold / counter_threshold must be finite")

    @property
    def policy(self) -> PolicyKind:
        has_timer = math.isfinite(self.timer_threshold)
        has_counter = math.isfinite(self.counter_threshold)
        if has_counter and int(self.counter_threshold) == 1:
            return PolicyKind.FTR
        if has_timer and has_counter:
            return PolicyKind.TAU_AND_N
        if has_timer:
            return PolicyKind.TAU_ONLY
        return PolicyKind.N_ONLY

    @property
    def overhead(self) -> float:
        """Sleep plus Wakeup time, the fixed per-cycle cost."""
        return self.sleep_duration + self.wakeup_duration


class ServiceLaw(Enum):
    DETERMINISTIC = "det"
    EXPONENTIAL = "exp"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class TrafficModel:
    """Poisson arrivals plus a service-time law with known first two moments."""

    arrival_rate: float
    service_mean: float
    service_second_moment: float
    service_law: ServiceLaw
    service_table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not self.arrival_rate > 0:
            raise ConfigError(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if not self.service_mean > 0:
            raise ConfigError(f"service_mean must be > 0, got {self.service_mean}")
        # Jensen: E[X^2] >= (E[X])^2, with a sliver of float tolerance
        if self.service_second_moment < self.service_mean**2 * (1 - 1e-12):
            raise ConfigError(
                f"service_second_moment {self.service_second_moment} below "
                f"service_mean^2 {self.service_mean**2}"
            )
        if self.service_law is ServiceLaw.EMPIRICAL:
            if not self.service_table:
                raise ConfigError("empirical service law requires a value/probability table")
            probs = [p for _, p in self.service_table]
            if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
                raise ConfigError("empirical service probabilities must be >= 0 and sum to 1")
            if any(v < 0 for v, _ in self.service_table):
                raise ConfigError("empirical service times must be >= 0")
        elif self.service_table is not None:
            raise ConfigError("service_table is only meaningful for the empirical law")

    @classmethod
    def deterministic(cls, arrival_rate: float, service_mean: float = 1.0) -> TrafficModel:
        return cls(arrival_rate, service_mean, service_mean**2, ServiceLaw.DETERMINISTIC)

    @classmethod
    def exponential(cls, arrival_rate: float, service_mean: float = 1.0) -> TrafficModel:
        return cls(arrival_rate, service_mean, 2.0 * service_mean**2, ServiceLaw.EXPONENTIAL)

    @classmethod
    def empirical(cls, arrival_rate: float, table: dict[float, float]) -> TrafficModel:
        pairs = tuple(sorted(table.items()))
        mean = sum(v * p for v, p in pairs)
        second = sum(v * v * p for v, p in pairs)
        return cls(arrival_rate, mean, second, ServiceLaw.EMPIRICAL, pairs)

    @property
    def utilization(self) -> float:
        return self.arrival_rate * self.service_mean

    def require_stable(self) -> None:
        if self.utilization >= 1.0:
            raise StabilityError(
                f"offered load rho = {self.utilization:.6g} >= 1 "
                f"(arrival_rate={self.arrival_rate}, service_mean={self.service_mean})"
            )
