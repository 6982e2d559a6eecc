"""Fluid-model queue recursion and the two queue-bound property suites.

The recursion mirrors the controller's period-level model: the sender injects
``gamma * (w - in_flight)`` each period, the bottleneck serves up to a
scheduled amount, and acknowledgements for packets served toward receiver p
arrive ``n_p`` periods later.  This is the independent oracle used to check
that the queue stays below w (upper-bound lemma) and, with a large enough
window, stays positive (non-empty lemma).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .control import lemma2_min_window

# Slack for floating-point accumulation in the strict < / > comparisons.
_EPS = 1e-9


def fluid_queue_trace(gamma: float, w: float, shares, delays, schedule,
                      clip_service: bool = True):
    """Iterate the period recursion and return the queue trace.

    shares[p] is the fraction of traffic attributed to receiver p, delays[p]
    its round trip in whole periods, schedule[l] the service allowance of
    period l (packets).  Returns (y, served) with y[l] the queue length at
    the start of period l (y[0] == 0) and served[l] the packets actually
    forwarded in period l.  With clip_service the per-period service never
    exceeds what is present in the queue.
    """
    if abs(sum(shares) - 1.0) > 1e-9:
        raise ValueError("shares must sum to 1")
    if len(shares) != len(delays):
        raise ValueError("shares and delays must align")
    y = 0.0
    cum_u = 0.0
    cum_ack = 0.0
    served_hist: list[float] = []
    trace = [0.0]
    for l, allowance in enumerate(schedule):
        u = gamma * (w - (cum_u - cum_ack))
        served = min(allowance, y + u) if clip_service else allowance
        y = y + u - served
        served_hist.append(served)
        cum_u += u
        ack = 0.0
        for share, n in zip(shares, delays):
            if l - n >= 0:
                ack += share * served_hist[l - n]
        cum_ack += ack
        trace.append(y)
    return trace, served_hist


def closed_form_next(gamma: float, w: float, y_l: float, shares, delays,
                     served_hist, l: int) -> float:
    """One step of the algebraic closed form of the recursion: the next queue
    length from the current one, the recently served (still unacknowledged)
    packets per receiver and the current period's service."""
    unacked = 0.0
    for share, n in zip(shares, delays):
        lo = max(0, l - n)
        unacked += share * sum(served_hist[lo:l])
    return (w - (1.0 - gamma) * (w - y_l)
            - gamma * unacked - served_hist[l])


@dataclass
class LemmaTrial:
    index: int
    gamma: float
    w: float
    shares: list[float]
    delays: list[int]
    u_max: float
    violations: list[tuple[int, float]] = field(default_factory=list)


@dataclass
class LemmaReport:
    lemma: int
    trials: list[LemmaTrial]
    elapsed: float

    @property
    def violation_count(self) -> int:
        return sum(len(t.violations) for t in self.trials)

    @property
    def ok(self) -> bool:
        return self.violation_count == 0

    def summary(self) -> str:
        return (f"lemma{self.lemma}: {len(self.trials)} trials, "
                f"{self.violation_count} violations, {self.elapsed:.2f}s")


def _sample_topology(rng: random.Random):
    m = rng.randint(1, 5)
    raw = [rng.random() + 1e-3 for _ in range(m)]
    total = sum(raw)
    shares = [x / total for x in raw]
    delays = [rng.randint(0, 10) for _ in range(m)]
    u_max = float(rng.randint(5, 50))
    return shares, delays, u_max


def verify_lemma1(trials: int = 100, seed: int = 0,
                  periods: int = 1000) -> LemmaReport:
    """Queue never reaches w: random gains, topologies and service schedules
    driven through the recursion; any y(lT) >= w is a violation."""
    start = time.perf_counter()
    rng = random.Random(seed)
    out = []
    for i in range(trials):
        gamma = rng.uniform(0.05, 1.0)
        shares, delays, u_max = _sample_topology(rng)
        w = rng.uniform(10.0, 500.0)
        schedule = [rng.uniform(0.0, u_max) for _ in range(periods)]
        trace, _ = fluid_queue_trace(gamma, w, shares, delays, schedule)
        trial = LemmaTrial(i, gamma, w, shares, delays, u_max)
        trial.violations = [(l, y) for l, y in enumerate(trace)
                            if y >= w + _EPS]
        out.append(trial)
    return LemmaReport(1, out, time.perf_counter() - start)


def verify_lemma2(trials: int = 100, seed: int = 0,
                  periods: int = 1000) -> LemmaReport:
    """Queue stays positive once past the longest round trip when the window
    strictly exceeds the minimum-window bound and the sender is always
    backlogged; any y(lT) <= 0 for l > n_m + 1 is a violation."""
    start = time.perf_counter()
    rng = random.Random(seed)
    out = []
    for i in range(trials):
        gamma = rng.uniform(0.05, 1.0)
        shares, delays, u_max = _sample_topology(rng)
        w = lemma2_min_window(u_max, shares, delays, gamma) + 1.0
        schedule = [rng.uniform(0.0, u_max) for _ in range(periods)]
        trace, _ = fluid_queue_trace(gamma, w, shares, delays, schedule)
        n_m = max(delays)
        trial = LemmaTrial(i, gamma, w, shares, delays, u_max)
        trial.violations = [(l, y) for l, y in enumerate(trace)
                            if l > n_m + 1 and y <= _EPS]
        out.append(trial)
    return LemmaReport(2, out, time.perf_counter() - start)
