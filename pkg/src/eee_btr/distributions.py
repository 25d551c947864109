"""Arrival-count distributions for one vacation of the sleep/wake cycle.

Three laws matter: the count over Sleep+LPI, the count over Wakeup, and
their convolution (the count over the whole vacation).  Each is stored as an
explicit probability array long enough that the untracked remainder is below
1e-14, plus, where one exists, an analytic Poisson tail so totals and moments
stay exact rather than truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .config import PolicyKind, ProtocolConfig
from .errors import ConfigError, InternalConsistencyError

# Explicit arrays extend until the remaining analytic-tail mass is below this.
_TAIL_EPS = 1e-16
# A computed probability may undershoot zero by at most this before we treat
# it as a bug instead of rounding noise.
_NEG_EPS = 1e-12


def poisson_pmf(k, mean: float):
    """Poisson probability mass, evaluated in log space.

    Accepts a scalar or array ``k``; stable for counts up to 1e6 and large
    means (no intermediate factorials or powers).
    """
    if mean < 0:
        raise ConfigError(f"Poisson mean must be >= 0, got {mean}")
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise ConfigError("Poisson count must be >= 0")
    if mean == 0.0:
        out = np.where(k_arr == 0, 1.0, 0.0)
    else:
        out = np.exp(-mean + k_arr * math.log(mean) - gammaln(k_arr + 1.0))
    return float(out) if np.isscalar(k) else out


@dataclass(frozen=True)
class PoissonTail:
    """Masses beyond the explicit array: ``poisson_pmf(n - shift, mean)``."""

    mean: float
    shift: int = 0

    def mass(self, n) -> float:
        j = np.asarray(n) - self.shift
        valid = j >= 0
        out = np.where(valid, poisson_pmf(np.maximum(j, 0), self.mean), 0.0)
        return float(out) if np.isscalar(n) else out

    def mass_from(self, start: int) -> float:
        """Total mass at indices >= start."""
        return float(stats.poisson.sf(start - self.shift - 1, self.mean)) if self.mean > 0 else (
            1.0 if start <= self.shift else 0.0
        )


@dataclass(frozen=True)
class CountDistribution:
    """A pmf over arrival counts with exact factorial-moment accessors.

    ``pmf[n]`` covers 0..len-1; ``tail`` (when present) describes every index
    past the array analytically.  The stored moments are closed-form values,
    not sums over the truncated array.
    """

    pmf: np.ndarray
    first_factorial_moment: float
    second_factorial_moment: float
    tail: PoissonTail | None = None

    def __post_init__(self):
        if not math.isfinite(self.first_factorial_moment) or not math.isfinite(
            self.second_factorial_moment
        ):
            raise InternalConsistencyError("factorial moments must be finite")

    def mass(self, n: int) -> float:
        if n < 0:
            return 0.0
        if n < len(self.pmf):
            return float(self.pmf[n])
        if self.tail is not None:
            return self.tail.mass(n)
        return 0.0

    def total_mass(self) -> float:
        total = float(self.pmf.sum())
        if self.tail is not None:
            total += self.tail.mass_from(len(self.pmf))
        return total

    @property
    def mean(self) -> float:
        return self.first_factorial_moment

    def support_upper(self) -> int:
        """Last index of the explicit array (the analytic tail continues past it)."""
        return len(self.pmf) - 1


def _explicit_length(mean: float, shift: int = 0, at_least: int = 1) -> int:
    """Array length so the Poisson remainder past it is below ``_TAIL_EPS``."""
    if mean <= 0:
        return max(at_least, shift + 1)
    q = int(stats.poisson.isf(_TAIL_EPS, mean)) + shift + 8
    return max(at_least, q)


def sleep_lpi_arrival_dist(cfg: ProtocolConfig, lam: float) -> CountDistribution:
    """Count of arrivals between the start of Sleep and the wakeup decision.

    No wakeup happens without an arrival, so the zero count has no mass.
    With a finite timer, counts below the counter threshold are a shifted
    Poisson over the timer window; counts above it can only accrue during the
    uninterruptible Sleep; the threshold itself absorbs the remainder.
    """
    if not lam > 0:
        raise ConfigError(f"arrival rate must be > 0, got {lam}")
    policy = cfg.policy
    mean_sleep = lam * cfg.sleep_duration

    if policy is PolicyKind.TAU_ONLY:
        mean_timer = lam * cfg.timer_threshold
        tail = PoissonTail(mean_timer, shift=1)
        length = _explicit_length(mean_timer, shift=1, at_least=2)
        pmf = np.zeros(length)
        pmf[1:] = poisson_pmf(np.arange(length - 1), mean_timer)
        m1 = 1.0 + mean_timer
        m2 = mean_timer * mean_timer + 2.0 * mean_timer
        return CountDistribution(pmf, m1, m2, tail)

    n = int(cfg.counter_threshold)
    has_timer = math.isfinite(cfg.timer_threshold) and n >= 2
    length = _explicit_length(mean_sleep, at_least=n + 2)
    pmf = np.zeros(length)
    pmf[n + 1 :] = poisson_pmf(np.arange(n + 1, length), mean_sleep)

    if has_timer:
        mean_timer = lam * cfg.timer_threshold
        pmf[1:n] = poisson_pmf(np.arange(n - 1), mean_timer)
        timer_cdf = float(stats.poisson.cdf(n - 2, mean_timer))
    else:
        timer_cdf = 0.0
    mass_at_n = float(stats.poisson.cdf(n, mean_sleep)) - timer_cdf
    if mass_at_n < -_NEG_EPS:
        raise InternalConsistencyError(
            f"threshold mass came out {mass_at_n:.3e} < -{_NEG_EPS}; "
            "parameter/precision bug"
        )
    pmf[n] = max(mass_at_n, 0.0)

    m1, m2 = _sleep_lpi_moments(cfg, lam)
    return CountDistribution(pmf, m1, m2, PoissonTail(mean_sleep))


def _sleep_lpi_moments(cfg: ProtocolConfig, lam: float) -> tuple[float, float]:
    """Exact factorial moments of the Sleep+LPI arrival count."""
    if cfg.policy is PolicyKind.TAU_ONLY:
        mt = lam * cfg.timer_threshold
        return 1.0 + mt, mt * mt + 2.0 * mt
    n = int(cfg.counter_threshold)
    ms = lam * cfg.sleep_duration
    ks = np.arange(n)
    ps = poisson_pmf(ks, ms)
    m1 = ms + float(ps @ (n - ks))
    m2 = ms * ms + float(ps @ (n * (n - 1) - ks * (ks - 1)))
    if math.isfinite(cfg.timer_threshold) and n >= 2:
        mt = lam * cfg.timer_threshold
        kt = np.arange(n - 1)
        pt = poisson_pmf(kt, mt)
        m1 -= float(pt @ (n - kt - 1))
        m2 -= float(pt @ (n * (n - 1) - kt * (kt + 1)))
    return m1, m2


def wakeup_arrival_dist(cfg: ProtocolConfig, lam: float) -> CountDistribution:
    """Plain Poisson count over the fixed Wakeup window."""
    if not lam > 0:
        raise ConfigError(f"arrival rate must be > 0, got {lam}")
    mean = lam * cfg.wakeup_duration
    length = _explicit_length(mean)
    pmf = poisson_pmf(np.arange(length), mean)
    return CountDistribution(pmf, mean, mean * mean, PoissonTail(mean))


def vacation_arrival_dist(cfg: ProtocolConfig, lam: float) -> CountDistribution:
    """Count over a whole vacation: Sleep+LPI count convolved with Wakeup count.

    The explicit pmf is the numerical convolution of the component arrays;
    the moments come from the generating-function product rule, so they are
    exact even where the array stops.
    """
    a = sleep_lpi_arrival_dist(cfg, lam)
    b = wakeup_arrival_dist(cfg, lam)
    pmf = np.convolve(a.pmf, b.pmf)
    a1, a2 = a.first_factorial_moment, a.second_factorial_moment
    b1, b2 = b.first_factorial_moment, b.second_factorial_moment
    m1 = a1 + b1
    m2 = a2 + 2.0 * a1 * b1 + b2
    return CountDistribution(pmf, m1, m2, tail=None)


def empirical_count_distribution(tallies: dict[int, int]) -> CountDistribution:
    """Normalized counts observed in a simulation; moments from the sample."""
    if not tallies:
        raise ConfigError("empty tally table")
    top = max(tallies)
    total = sum(tallies.values())
    pmf = np.zeros(top + 1)
    m1 = 0.0
    m2 = 0.0
    for n, count in tallies.items():
        pmf[n] = count / total
        m1 += n * count
        m2 += n * (n - 1) * count
    return CountDistribution(pmf, m1 / total, m2 / total, tail=None)
