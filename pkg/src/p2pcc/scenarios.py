"""Scenario configuration, built-in experiment builders and JSON round-trip.

A scenario pins everything a run needs: topology and latency/rate schedules,
controller parameters, the block source, competing TCP flows and the seed.
Identical scenario + seed must reproduce identical metrics.
"""

from __future__ import annotations

import bisect
import json
import math
import random
from dataclasses import dataclass, field, asdict

from .control import ControllerParams


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class Schedule:
    """Piecewise-constant quantity over time.

    kind "constant": fixed ``value``.
    kind "uniform_resample": redrawn uniformly from [low, high] every
    ``interval`` seconds using the run's seeded generator.
    """

    kind: str = "constant"
    value: float = 0.0
    low: float = 0.0
    high: float = 0.0
    interval: float = 10.0

    def validate(self, name: str) -> None:
        if self.kind == "constant":
            if self.value < 0.0:
                raise ScenarioError(f"{name}: constant value must be >= 0")
        elif self.kind == "uniform_resample":
            if not 0.0 <= self.low <= self.high:
                raise ScenarioError(f"{name}: need 0 <= low <= high")
            if self.interval <= 0.0:
                raise ScenarioError(f"{name}: interval must be positive")
        else:
            raise ScenarioError(f"{name}: unknown schedule kind {self.kind!r}")

    def max_value(self) -> float:
        return self.value if self.kind == "constant" else self.high

    def materialize(self, rng: random.Random, duration: float) -> "PiecewiseConstant":
        if self.kind == "constant":
            return PiecewiseConstant([0.0], [self.value])
        times, values = [], []
        t = 0.0
        while t < duration:
            times.append(t)
            values.append(rng.uniform(self.low, self.high))
            t += self.interval
        return PiecewiseConstant(times, values)


class PiecewiseConstant:
    """Materialized schedule: step function with breakpoints."""

    def __init__(self, times: list[float], values: list[float]):
        self.times = times
        self.values = values

    def __call__(self, t: float) -> float:
        idx = bisect.bisect_right(self.times, t) - 1
        return self.values[max(idx, 0)]

    def steps(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.values))


def constant(value: float) -> Schedule:
    return Schedule(kind="constant", value=value)


def uniform_resample(low: float, high: float, interval: float = 10.0) -> Schedule:
    return Schedule(kind="uniform_resample", low=low, high=high, interval=interval)


@dataclass
class ReceiverConfig:
    receiver_id: str
    latency: Schedule       # router -> receiver one-way delay, seconds


@dataclass
class BottleneckConfig:
    rate: Schedule          # service rate, bits per second
    buffer_capacity: int | None = None   # packets; None = 2x minimum-window bound


@dataclass
class BlockSourceConfig:
    block_size: int = 40
    backlog_blocks: int | None = None    # None = always backlogged


@dataclass
class TcpFlowConfig:
    flow_id: str
    kind: str               # "reno" | "bic"
    receiver_id: str
    start: float
    stop: float


@dataclass
class ScenarioConfig:
    name: str
    duration: float
    seed: int
    controller: ControllerParams = field(default_factory=ControllerParams)
    sender_latency: Schedule = field(default_factory=lambda: constant(0.020))
    receivers: list[ReceiverConfig] = field(default_factory=list)
    bottleneck: BottleneckConfig = field(default_factory=lambda: BottleneckConfig(constant(4_000_000.0)))
    source: BlockSourceConfig = field(default_factory=BlockSourceConfig)
    flows: list[TcpFlowConfig] = field(default_factory=list)
    p2p_start: float = 0.0

    def validate(self) -> None:
        if self.duration <= 0.0:
            raise ScenarioError("duration must be positive")
        if not self.receivers:
            raise ScenarioError("at least one receiver is required")
        ids = [r.receiver_id for r in self.receivers]
        if len(set(ids)) != len(ids):
            raise ScenarioError("receiver ids must be unique")
        self.sender_latency.validate("sender_latency")
        for r in self.receivers:
            r.latency.validate(f"receiver {r.receiver_id} latency")
        self.bottleneck.rate.validate("bottleneck rate")
        if self.bottleneck.rate.kind == "constant" and self.bottleneck.rate.value <= 0.0:
            raise ScenarioError("bottleneck rate must be positive")
        if self.bottleneck.rate.kind == "uniform_resample" and self.bottleneck.rate.low <= 0.0:
            raise ScenarioError("bottleneck rate must stay positive")
        if self.bottleneck.buffer_capacity is not None and self.bottleneck.buffer_capacity < 1:
            raise ScenarioError("buffer_capacity must be >= 1 packet")
        if self.source.block_size < 1:
            raise ScenarioError("block_size must be >= 1")
        for f in self.flows:
            if f.kind not in ("reno", "bic"):
                raise ScenarioError(f"unknown TCP kind {f.kind!r}")
            if f.receiver_id not in ids:
                raise ScenarioError(f"flow {f.flow_id}: unknown receiver {f.receiver_id!r}")
            if not 0.0 <= f.start < f.stop:
                raise ScenarioError(f"flow {f.flow_id}: need 0 <= start < stop")
        if not 0.0 <= self.p2p_start:
            raise ScenarioError("p2p_start must be >= 0")

    def default_buffer_capacity(self) -> int:
        """Twice the minimum-window bound computed from the worst-case round
        trip and the fastest scheduled service rate."""
        params = self.controller
        max_rate = self.bottleneck.rate.max_value()
        u_max = math.ceil(max_rate * params.period_T / params.packet_size_s)
        max_rtt = 2.0 * (self.sender_latency.max_value()
                         + max(r.latency.max_value() for r in self.receivers))
        n_m = math.ceil(max_rtt / params.period_T)
        bound = u_max * (n_m + 1.0 / params.gamma)
        return int(math.ceil(2.0 * bound))

    def buffer_capacity(self) -> int:
        if self.bottleneck.buffer_capacity is not None:
            return self.bottleneck.buffer_capacity
        return self.default_buffer_capacity()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        cfg = cls(
            name=data["name"],
            duration=float(data["duration"]),
            seed=int(data["seed"]),
            controller=ControllerParams(**data.get("controller", {})),
            sender_latency=Schedule(**data.get("sender_latency", {})),
            receivers=[ReceiverConfig(r["receiver_id"], Schedule(**r["latency"]))
                       for r in data.get("receivers", [])],
            bottleneck=BottleneckConfig(
                rate=Schedule(**data["bottleneck"]["rate"]),
                buffer_capacity=data["bottleneck"].get("buffer_capacity"),
            ),
            source=BlockSourceConfig(**data.get("source", {})),
            flows=[TcpFlowConfig(**f) for f in data.get("flows", [])],
            p2p_start=float(data.get("p2p_start", 0.0)),
        )
        cfg.validate()
        return cfg

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return ScenarioConfig.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Built-in experiment scenarios
# ---------------------------------------------------------------------------

_KBPS = 1000.0


def build_experiment_1(seed: int = 1) -> ScenarioConfig:
    """Single receiver behind a 4000 Kbps link; the router-receiver one-way
    delay is redrawn from U(2 ms, 22 ms) every 10 s."""
    cfg = ScenarioConfig(
        name="exp1",
        duration=100.0,
        seed=seed,
        sender_latency=constant(0.020),
        receivers=[ReceiverConfig("r1", uniform_resample(0.002, 0.022, 10.0))],
        bottleneck=BottleneckConfig(rate=constant(4000.0 * _KBPS)),
    )
    cfg.validate()
    return cfg


_EXP2_LATENCIES = {"r1": 0.012, "r2": 0.022, "r3": 0.007, "r4": 0.016}


def _four_receivers() -> list[ReceiverConfig]:
    return [ReceiverConfig(rid, constant(lat))
            for rid, lat in _EXP2_LATENCIES.items()]


def build_experiment_2(variant: str = "static", seed: int = 2) -> ScenarioConfig:
    """Four receivers with fixed heterogeneous delays.  static: 4 Mbps
    constant; dynamic: rate redrawn from U(1, 5) Mbps every 10 s, with a
    deliberately tight buffer so downward rate steps overflow the queue and
    recalibrate the maximum-queue-delay estimate."""
    if variant not in ("static", "dynamic"):
        raise ScenarioError(f"unknown experiment-2 variant {variant!r}")
    if variant == "static":
        bottleneck = BottleneckConfig(rate=constant(4000.0 * _KBPS))
    else:
        bottleneck = BottleneckConfig(
            rate=uniform_resample(1000.0 * _KBPS, 5000.0 * _KBPS, 10.0),
            buffer_capacity=60,
        )
    cfg = ScenarioConfig(
        name=f"exp2-{variant}",
        duration=100.0,
        seed=seed,
        sender_latency=constant(0.020),
        receivers=_four_receivers(),
        bottleneck=bottleneck,
    )
    cfg.validate()
    return cfg


def build_experiment_3(tcp: str = "reno", ordering: str = "p2pfirst",
                       seed: int = 3) -> ScenarioConfig:
    """Experiment-2 topology plus one competing TCP flow to receiver 1 on a
    fixed 4 Mbps link, alpha = 0.75."""
    if tcp not in ("reno", "bic"):
        raise ScenarioError(f"unknown TCP kind {tcp!r}")
    if ordering not in ("p2pfirst", "tcpfirst"):
        raise ScenarioError(f"unknown ordering {ordering!r}")
    duration = 100.0
    if ordering == "p2pfirst":
        p2p_start = 0.0
        window = (15.0, 75.0) if tcp == "reno" else (40.0, 100.0)
    else:
        window = (0.0, duration) if tcp == "reno" else (0.0, 60.0)
        p2p_start = 25.0 if tcp == "reno" else 30.0
    cfg = ScenarioConfig(
        name=f"exp3-{tcp}-{ordering}",
        duration=duration,
        seed=seed,
        controller=ControllerParams(alpha=0.75),
        sender_latency=constant(0.020),
        receivers=_four_receivers(),
        # ~350 ms of queueing at 4 Mbps: deep enough that the loss-calibrated
        # delay target keeps the stream competitive against TCP, shallow
        # enough that TCP cannot monopolize the queue
        bottleneck=BottleneckConfig(rate=constant(4000.0 * _KBPS),
                                    buffer_capacity=116),
        flows=[TcpFlowConfig("tcp1", tcp, "r1", window[0], window[1])],
        p2p_start=p2p_start,
    )
    cfg.validate()
    return cfg


BUILTIN_SCENARIOS = {
    "exp1": build_experiment_1,
    "exp2-static": lambda seed=2: build_experiment_2("static", seed),
    "exp2-dynamic": lambda seed=2: build_experiment_2("dynamic", seed),
    "exp3-reno-p2pfirst": lambda seed=3: build_experiment_3("reno", "p2pfirst", seed),
    "exp3-reno-tcpfirst": lambda seed=3: build_experiment_3("reno", "tcpfirst", seed),
    "exp3-bic-p2pfirst": lambda seed=3: build_experiment_3("bic", "p2pfirst", seed),
    "exp3-bic-tcpfirst": lambda seed=3: build_experiment_3("bic", "tcpfirst", seed),
}
