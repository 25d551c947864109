"""Closed-form performance model of the burst-transmission sleep/wake strategy.

Everything here is a pure function of a ``ProtocolConfig`` and a
``TrafficModel``.  The central quantities are the factorial moments of the
vacation arrival count: with first moment m1 and second factorial moment m2,

    mean vacation   V = m1 / lambda
    mean delay      D = lam*x2 / (2*(1-rho)) + m2 / (2*lam*m1) + xbar

The delay formula generalizes the classical vacation-queue decomposition to
vacations that are driven by the arrival process itself; the classical form
(with independent vacations) drops out as the special case where the count
is Poisson over the vacation length.

Accessors with ``_timer_only`` / ``_counter_only`` suffixes evaluate the
single-mechanism laws using the matching threshold from the config while
ignoring the other one, so all three curves can be compared on one config.
``approx=True`` variants return the documented approximations and are never
substituted silently.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .config import ProtocolConfig, TrafficModel
from .distributions import _sleep_lpi_moments, poisson_pmf
from .errors import ConfigError, InternalConsistencyError, StabilityError


# ---------------------------------------------------------------------------
# vacation arrival-count moments and vacation time

def vacation_count_moments(cfg: ProtocolConfig, lam: float) -> tuple[float, float]:
    """Exact first and second factorial moments of the per-vacation count."""
    if not lam > 0:
        raise ConfigError(f"arrival rate must be > 0, got {lam}")
    a1, a2 = _sleep_lpi_moments(cfg, lam)
    mw = lam * cfg.wakeup_duration
    return a1 + mw, a2 + 2.0 * a1 * mw + mw * mw


def mean_arrivals_closed_form(cfg: ProtocolConfig, lam: float) -> float:
    """Mean number of frames accumulated over one vacation."""
    return vacation_count_moments(cfg, lam)[0]


def ftr_h_moments(lam: float, cfg: ProtocolConfig) -> tuple[float, float]:
    """First/second factorial count moments when the first arrival wakes the link.

    Closed forms: m1 = lam*(Ts+Tw) + exp(-lam*Ts) and
    m2 = (lam*(Ts+Tw))^2 + 2*lam*Tw*exp(-lam*Ts).
    """
    if not lam > 0:
        raise ConfigError(f"arrival rate must be > 0, got {lam}")
    ts, tw = cfg.sleep_duration, cfg.wakeup_duration
    quiet_sleep = math.exp(-lam * ts)
    m1 = lam * (ts + tw) + quiet_sleep
    m2 = (lam * (ts + tw)) ** 2 + 2.0 * lam * tw * quiet_sleep
    return m1, m2


def mean_vacation(cfg: ProtocolConfig, lam: float, approx: bool = False) -> float:
    """Mean vacation time V = m1/lambda; ``approx`` selects the min-form.

    The approximation takes the shorter of the two single-mechanism vacation
    estimates, min(1/lam + tau, N/lam) + Tw, which is accurate away from the
    crossover rate (N-1)/tau.
    """
    if approx:
        candidates = []
        if math.isfinite(cfg.timer_threshold):
            candidates.append(1.0 / lam + cfg.timer_threshold)
        if math.isfinite(cfg.counter_threshold):
            candidates.append(cfg.counter_threshold / lam)
        return min(candidates) + cfg.wakeup_duration
    return mean_arrivals_closed_form(cfg, lam) / lam


def mean_vacation_timer_only(cfg: ProtocolConfig, lam: float) -> float:
    """Vacation mean with the counter ignored: 1/lam + tau + Tw."""
    _require_timer(cfg)
    return 1.0 / lam + cfg.timer_threshold + cfg.wakeup_duration


def mean_vacation_counter_only(cfg: ProtocolConfig, lam: float, approx: bool = False) -> float:
    """Vacation mean with the timer ignored; ``approx`` gives N/lam + Tw."""
    n = _require_counter(cfg)
    if approx:
        return n / lam + cfg.wakeup_duration
    return mean_vacation(_counter_only(cfg), lam)


# ---------------------------------------------------------------------------
# power

def efficiency_ceiling(cfg: ProtocolConfig, traffic: TrafficModel) -> float:
    """Upper bound on savings: idle fraction times the LPI power discount."""
    traffic.require_stable()
    rho = traffic.utilization
    return (1.0 - rho) * (cfg.power_high - cfg.power_low) / cfg.power_high


def _efficiency_from_vacation(cfg: ProtocolConfig, traffic: TrafficModel, vbar: float) -> float:
    if vbar < cfg.overhead:
        raise InternalConsistencyError(
            f"mean vacation {vbar:.6g} us below sleep+wakeup overhead "
            f"{cfg.overhead:.6g} us; formula bug"
        )
    return (1.0 - cfg.overhead / vbar) * efficiency_ceiling(cfg, traffic)


def power_efficiency(cfg: ProtocolConfig, traffic: TrafficModel, approx: bool = False) -> float:
    """Fraction of the always-on power the strategy saves."""
    lam = traffic.arrival_rate
    if approx:
        return _efficiency_from_vacation(cfg, traffic, mean_vacation(cfg, lam, approx=True))
    return _efficiency_from_vacation(cfg, traffic, mean_vacation(cfg, lam))


def efficiency_timer_only(cfg: ProtocolConfig, traffic: TrafficModel) -> float:
    return _efficiency_from_vacation(
        cfg, traffic, mean_vacation_timer_only(cfg, traffic.arrival_rate)
    )


def efficiency_counter_only(
    cfg: ProtocolConfig, traffic: TrafficModel, approx: bool = False
) -> float:
    return _efficiency_from_vacation(
        cfg, traffic, mean_vacation_counter_only(cfg, traffic.arrival_rate, approx=approx)
    )


def mean_power(cfg: ProtocolConfig, traffic: TrafficModel) -> float:
    """Time-averaged power draw: LPI at low power, everything else at high."""
    traffic.require_stable()
    vbar = mean_vacation(cfg, traffic.arrival_rate)
    cbar = vbar / (1.0 - traffic.utilization)
    lpi = vbar - cfg.overhead
    return (lpi * cfg.power_low + (cbar - lpi) * cfg.power_high) / cbar


def mean_cycle(cfg: ProtocolConfig, traffic: TrafficModel) -> float:
    """Mean cycle length: one vacation plus the busy period it seeds."""
    traffic.require_stable()
    return mean_vacation(cfg, traffic.arrival_rate) / (1.0 - traffic.utilization)


def mean_busy_period(cfg: ProtocolConfig, traffic: TrafficModel) -> float:
    vbar = mean_vacation(cfg, traffic.arrival_rate)
    return mean_cycle(cfg, traffic) - vbar


# ---------------------------------------------------------------------------
# delay

def _delay_base(traffic: TrafficModel) -> float:
    """Service backlog part of the delay plus the service time itself."""
    traffic.require_stable()
    lam, rho = traffic.arrival_rate, traffic.utilization
    return lam * traffic.service_second_moment / (2.0 * (1.0 - rho)) + traffic.service_mean


def _delay_from_moments(traffic: TrafficModel, m1: float, m2: float) -> float:
    lam = traffic.arrival_rate
    return _delay_base(traffic) + m2 / (2.0 * lam * m1)


def mean_delay(cfg: ProtocolConfig, traffic: TrafficModel, approx: bool = False) -> float:
    """Mean sojourn time (arrival to departure) of a frame.

    The exact value uses the vacation count moments of whatever policy the
    config encodes.  ``approx`` instead takes the smaller of the two
    single-mechanism residual terms (timer-only or counter-only-approximate),
    mirroring the min-form used for the vacation mean.
    """
    lam = traffic.arrival_rate
    if approx:
        residuals = []
        if math.isfinite(cfg.timer_threshold):
            residuals.append(_timer_residual(cfg, lam))
        if math.isfinite(cfg.counter_threshold):
            residuals.append(_counter_residual_approx(cfg, lam))
        return _delay_base(traffic) + min(residuals)
    m1, m2 = vacation_count_moments(cfg, lam)
    return _delay_from_moments(traffic, m1, m2)


def _timer_residual(cfg: ProtocolConfig, lam: float) -> float:
    m = lam * (cfg.timer_threshold + cfg.wakeup_duration)
    return (m * m + 2.0 * m) / (2.0 * lam * (1.0 + m))


def _counter_residual_approx(cfg: ProtocolConfig, lam: float) -> float:
    n = int(cfg.counter_threshold)
    u = n + lam * cfg.wakeup_duration
    return (u * u - n) / (2.0 * lam * u)


def mean_delay_timer_only(cfg: ProtocolConfig, traffic: TrafficModel) -> float:
    """Delay with the counter ignored (shifted-Poisson vacation count)."""
    _require_timer(cfg)
    return _delay_base(traffic) + _timer_residual(cfg, traffic.arrival_rate)


def mean_delay_counter_only(
    cfg: ProtocolConfig, traffic: TrafficModel, approx: bool = False
) -> float:
    """Delay with the timer ignored; ``approx`` drops sleep-window overshoot."""
    _require_counter(cfg)
    if approx:
        return _delay_base(traffic) + _counter_residual_approx(cfg, traffic.arrival_rate)
    m1, m2 = vacation_count_moments(_counter_only(cfg), traffic.arrival_rate)
    return _delay_from_moments(traffic, m1, m2)


def classical_pk_delay(lam: float, xbar: float, x2bar: float, vbar: float, v2bar: float) -> float:
    """Mean delay of a vacation queue whose vacations ignore the arrivals.

    Valid only when vacation lengths are independent of the arrival process;
    fed with the moments of an arrival-driven vacation it overestimates.
    """
    rho = lam * xbar
    if rho >= 1.0:
        raise StabilityError(f"offered load rho = {rho:.6g} >= 1")
    if not vbar > 0:
        raise ConfigError(f"mean vacation must be > 0, got {vbar}")
    return lam * x2bar / (2.0 * (1.0 - rho)) + v2bar / (2.0 * vbar) + xbar


def tau_policy_classical_delay(
    lam: float, xbar: float, x2bar: float, tau: float, tw: float
) -> float:
    """Classical-formula prediction for the timer-only vacation law."""
    law = tau_policy_vacation_law(lam, tau, tw)
    return classical_pk_delay(lam, xbar, x2bar, law.mean, law.second_moment)


# ---------------------------------------------------------------------------
# timer-policy vacation law (closed forms)

@dataclass(frozen=True)
class TauVacationLaw:
    """Vacation-time law when only the timer ends the idle wait.

    The vacation is the wait for the first arrival plus the constant
    tau + Tw, so the density is a shifted exponential.  The count of arrivals
    per vacation is a unit-shifted Poisson, whose generating function does
    NOT equal the vacation-time transform evaluated at lam*(1-z): the count
    and the length are tied through the first arrival, which is exactly why
    the classical delay formula fails here.
    """

    arrival_rate: float
    timer_threshold: float
    wakeup_duration: float

    @property
    def offset(self) -> float:
        return self.timer_threshold + self.wakeup_duration

    @property
    def mean(self) -> float:
        return 1.0 / self.arrival_rate + self.offset

    @property
    def second_moment(self) -> float:
        lam, c = self.arrival_rate, self.offset
        return 2.0 / lam**2 + 2.0 * c / lam + c * c

    def pdf(self, x: float) -> float:
        if x < self.offset:
            return 0.0
        return self.arrival_rate * math.exp(-self.arrival_rate * (x - self.offset))

    def cdf(self, x: float) -> float:
        if x < self.offset:
            return 0.0
        return 1.0 - math.exp(-self.arrival_rate * (x - self.offset))

    def laplace(self, s: float) -> float:
        lam = self.arrival_rate
        return lam / (lam + s) * math.exp(-s * self.offset)

    def count_pmf(self, n: int) -> float:
        if n < 1:
            return 0.0
        return poisson_pmf(n - 1, self.arrival_rate * self.offset)

    def count_pgf(self, z: float) -> float:
        return z * math.exp(-self.arrival_rate * (1.0 - z) * self.offset)

    def residual_density(self, x: float) -> float:
        """Density of the leftover vacation seen by a random independent probe."""
        if x < 0:
            return 0.0
        return (1.0 - self.cdf(x)) / self.mean


def tau_policy_vacation_law(lam: float, tau: float, tw: float) -> TauVacationLaw:
    if not lam > 0:
        raise ConfigError(f"arrival rate must be > 0, got {lam}")
    if tau < 0 or tw < 0:
        raise ConfigError("timer threshold and wakeup duration must be >= 0")
    return TauVacationLaw(lam, tau, tw)


def count_pgf_transform_gap(lam: float, tau: float, tw: float, z_grid=None) -> float:
    """Max |count PGF - vacation transform at lam*(1-z)| over a z grid.

    Strictly positive for the timer policy; zero would mean the count and
    the vacation length were tied only through Poisson thinning.
    """
    law = tau_policy_vacation_law(lam, tau, tw)
    if z_grid is None:
        z_grid = [i / 10 for i in range(1, 10)]
    return max(abs(law.count_pgf(z) - law.laplace(lam - lam * z)) for z in z_grid)


# ---------------------------------------------------------------------------
# delay as a function of efficiency (thresholds coupled to the arrival rate)

def delay_of_efficiency(cfg: ProtocolConfig, traffic: TrafficModel, eta: float) -> float:
    """Delay paid for a target efficiency when tau and N track the rate.

    Assumes the coupling (N-1)/tau = lam.  Diverges as eta approaches the
    ceiling, so the ceiling itself is out of domain.
    """
    eta_star = efficiency_ceiling(cfg, traffic)
    if not 0.0 <= eta < eta_star:
        raise ConfigError(
            f"efficiency {eta:.6g} outside [0, {eta_star:.6g}); delay diverges at the ceiling"
        )
    g = eta / eta_star
    lam = traffic.arrival_rate
    overhead = cfg.overhead
    return (
        _delay_base(traffic)
        + overhead / (2.0 * (1.0 - g))
        - (cfg.sleep_duration + cfg.wakeup_duration * g) / (2.0 * lam * overhead)
    )


def delay_of_efficiency_slope(cfg: ProtocolConfig, traffic: TrafficModel, eta: float) -> float:
    """Derivative of ``delay_of_efficiency`` with respect to the efficiency."""
    eta_star = efficiency_ceiling(cfg, traffic)
    if not 0.0 <= eta < eta_star:
        raise ConfigError(f"efficiency {eta:.6g} outside [0, {eta_star:.6g})")
    g = eta / eta_star
    lam = traffic.arrival_rate
    overhead = cfg.overhead
    return overhead / (2.0 * eta_star * (1.0 - g) ** 2) - cfg.wakeup_duration / (
        2.0 * lam * eta_star * overhead
    )


# ---------------------------------------------------------------------------
# helpers

def _require_timer(cfg: ProtocolConfig) -> float:
    if not math.isfinite(cfg.timer_threshold):
        raise ConfigError("operation needs a finite timer threshold")
    return cfg.timer_threshold


def _require_counter(cfg: ProtocolConfig) -> int:
    if not math.isfinite(cfg.counter_threshold):
        raise ConfigError("operation needs a finite counter threshold")
    return int(cfg.counter_threshold)


def _counter_only(cfg: ProtocolConfig) -> ProtocolConfig:
    if not math.isfinite(cfg.timer_threshold):
        return cfg
    return dataclasses.replace(cfg, timer_threshold=math.inf)
