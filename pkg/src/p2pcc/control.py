"""Periodic congestion controller for sequential block traffic to many receivers.

The sender runs a control step every ``period_T`` seconds.  Each step turns the
current window into an injection quota, the quota is paced over the period, and
acknowledgements feed back latency samples, an ack-rate bandwidth estimate and
(on loss) a recalibration of the maximum-queue-delay estimate that anchors the
queue-delay reference.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

# Quota used while no acknowledgement has ever arrived, so the feedback
# loop has something to start from.
BOOTSTRAP_QUOTA = 2

# The ack-rate estimate is only refreshed when the measured queue delay is at
# least this fraction of d_ref (queue believed non-empty), or when the raw
# rate exceeds the held estimate (the link got faster; ack arrivals cannot
# outpace the bottleneck, so revising upward is always safe).
U_TRUST_RATIO = 0.25

# Loss declaration: this many later acks from the same receiver, or an ack
# outstanding for longer than TIMEOUT_FACTOR * (d_min + q_max estimate).
DUPACK_LOSS_THRESHOLD = 3
TIMEOUT_FACTOR = 2.0


class NoLatencySamples(Exception):
    """No receiver has produced a latency observation yet."""


@dataclass
class ControllerParams:
    """Tuning constants for the periodic controller.

    gamma        -- quota gain in (0, 1]; eigenvalue of the controlled queue.
    gamma2       -- window correction gain, packets per second of delay error.
    alpha        -- fraction of the estimated maximum queue delay used as the
                    queue-delay reference; governs aggressiveness vs TCP.
    period_T     -- control period, seconds.
    bw_window_tc -- horizon for the ack-rate bandwidth estimate, seconds.
    initial_qmax_offset -- stand-in for the maximum queue delay before any
                    loss has calibrated it, seconds.
    packet_size_s -- packet size in bits.
    """

    gamma: float = 0.9
    gamma2: float = 150.0
    alpha: float = 0.75
    period_T: float = 0.05
    bw_window_tc: float = 1.0
    initial_qmax_offset: float = 0.1
    packet_size_s: float = 12000.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.period_T <= 0.0:
            raise ValueError("period_T must be positive")
        if self.bw_window_tc < self.period_T:
            raise ValueError("bw_window_tc must be >= period_T")
        if self.initial_qmax_offset <= 0.0:
            raise ValueError("initial_qmax_offset must be positive")
        if self.packet_size_s <= 0.0:
            raise ValueError("packet_size_s must be positive")


@dataclass
class ReceiverStats:
    """Per-receiver latency tracking and in-flight bookkeeping."""

    receiver_id: str
    d_min: float | None = None      # lowest observed ack round trip (RTT proxy)
    d_max: float | None = None      # loss-calibrated full-queue latency proxy
    in_flight: int = 0
    lambda_sq: float = 0.0          # share of all unacknowledged packets
    ack_history: deque = field(default_factory=lambda: deque(maxlen=2048))
    last_ack_latency: float | None = None


@dataclass
class _Outstanding:
    send_time: float
    acks_after: int = 0


@dataclass
class ControllerState:
    """Mutable controller state; one instance per sender."""

    receivers: dict[str, ReceiverStats]
    cumulative_sent: int = 0
    cumulative_acked: int = 0
    cumulative_lost: int = 0
    window_w: int = 1
    quota_u: int = 0
    est_bandwidth_U: float = 0.0    # packets per second
    d_ref: float = 0.0
    avg_queue_delay_d: float = 0.0  # d(kT) of the last closed interval
    epoch_k: int = 0
    duplicate_acks: int = 0
    ack_arrivals: deque = field(default_factory=deque)   # ack arrival times
    qdelay_samples: list = field(default_factory=list)   # current interval
    outstanding: dict = field(default_factory=dict)      # rid -> {seq: _Outstanding}

    def in_flight_total(self) -> int:
        return sum(r.in_flight for r in self.receivers.values())


@dataclass
class TickSnapshot:
    """What one control step decided, for metrics logging."""

    time: float
    epoch: int
    quota: int
    window: int
    est_bandwidth_pps: float
    ack_rate_pps: float
    d_ref: float
    avg_queue_delay: float
    bootstrap: bool
    timeout_losses: int


def new_state(receiver_ids) -> ControllerState:
    receivers = {rid: ReceiverStats(rid) for rid in receiver_ids}
    state = ControllerState(receivers=receivers)
    state.outstanding = {rid: {} for rid in receiver_ids}
    return state


def compute_send_quota(state: ControllerState, params: ControllerParams) -> int:
    """Packets to inject this period: gain times the window headroom.

    Negative headroom (in-flight above the window after a collapse) clamps
    to zero; quota is rounded half-up to whole packets.
    """
    raw = params.gamma * (state.window_w - state.in_flight_total())
    return max(0, int(math.floor(raw + 0.5)))


def lambda_squared_shares(state: ControllerState) -> dict[str, float]:
    """Each receiver's share of the currently unacknowledged packets."""
    total = state.in_flight_total()
    if total <= 0:
        return {rid: 0.0 for rid in state.receivers}
    return {rid: r.in_flight / total for rid, r in state.receivers.items()}


def qmax_estimate(receivers: dict[str, ReceiverStats],
                  params: ControllerParams) -> tuple[float, bool]:
    """Estimated maximum queue delay and whether a loss has calibrated it.

    Loss-calibrated receivers contribute d_max - d_min; the minimum across
    them respects the tightest buffer.  Before any loss the configured
    bootstrap offset stands in.
    """
    calibrated = [r.d_max - r.d_min for r in receivers.values()
                  if r.d_max is not None and r.d_min is not None]
    if calibrated:
        return min(calibrated), True
    return params.initial_qmax_offset, False


def compute_dref(receivers: dict[str, ReceiverStats],
                 params: ControllerParams) -> float:
    """Queue-delay reference: alpha times the estimated maximum queue delay.

    Raises NoLatencySamples when no receiver has observed any latency.  The
    per-receiver RTT-level target is d_min + d_ref.
    """
    if all(r.d_min is None for r in receivers.values()):
        raise NoLatencySamples("no receiver has a latency sample")
    qmax, _ = qmax_estimate(receivers, params)
    return params.alpha * qmax


def compute_window(state: ControllerState, params: ControllerParams) -> int:
    """Window: bandwidth-delay term from the minimum-window bound plus a
    proportional correction that steers the queue delay toward d_ref."""
    bdp = 0.0
    for r in state.receivers.values():
        if r.lambda_sq > 0.0:
            d_min = r.d_min if r.d_min is not None else 0.0
            bdp += r.lambda_sq * (d_min + state.d_ref + params.period_T)
    first = math.ceil(state.est_bandwidth_U * bdp + 1.0 - 1e-9)
    correction = params.gamma2 * (state.d_ref - state.avg_queue_delay_d)
    return max(1, int(math.floor(first + correction + 0.5)))


def current_ack_rate(state: ControllerState, params: ControllerParams,
                     now: float) -> float:
    """Raw ack arrival rate over the last bw_window_tc seconds, packets/s."""
    horizon = now - params.bw_window_tc
    arrivals = state.ack_arrivals
    while arrivals and arrivals[0] <= horizon:
        arrivals.popleft()
    return len(arrivals) / params.bw_window_tc


def estimate_bandwidth(state: ControllerState, params: ControllerParams,
                       now: float) -> float:
    """Ack-rate bandwidth estimate with the non-empty-queue trust gate.

    The raw rate is adopted when the measured queue delay says the queue is
    non-empty, or when the raw rate exceeds the held estimate; otherwise the
    previous estimate is kept.
    """
    raw = current_ack_rate(state, params, now)
    gate = U_TRUST_RATIO * state.d_ref
    if state.avg_queue_delay_d >= gate or raw > state.est_bandwidth_U:
        return raw
    return state.est_bandwidth_U


def lemma2_min_window(u_max: float, shares, n_p, gamma: float) -> float:
    """Strict lower bound on the window that keeps the queue non-empty.

    u_max is the most packets the bottleneck can serve in one period, shares
    are the per-receiver unacknowledged ratios and n_p the per-receiver
    round-trip delays in periods.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    return u_max * (sum(l * n for l, n in zip(shares, n_p)) + 1.0 / gamma)


def rtt_reference(receivers: dict[str, ReceiverStats],
                  d_ref: float) -> dict[str, float]:
    """Per-receiver RTT-level operating target d_min + d_ref."""
    return {rid: r.d_min + d_ref for rid, r in receivers.items()
            if r.d_min is not None}


class Controller:
    """Drives ControllerState from send/ack/loss events and periodic ticks.

    Pure state machine: the caller owns the clock and must call control_tick
    exactly once per period boundary.
    """

    def __init__(self, params: ControllerParams, receiver_ids):
        self.params = params
        self.state = new_state(receiver_ids)

    def on_send(self, receiver_id: str, seq: int, now: float) -> None:
        state = self.state
        state.outstanding[receiver_id][seq] = _Outstanding(now)
        state.cumulative_sent += 1
        state.receivers[receiver_id].in_flight += 1

    def on_ack(self, receiver_id: str, seq: int, ack_time: float) -> list[tuple[str, int]]:
        """Process one ack; returns packets newly declared lost by the
        duplicate-gap rule.  Unknown (duplicate or spurious) acks are counted
        and leave the state unchanged."""
        state = self.state
        pending = state.outstanding[receiver_id]
        info = pending.pop(seq, None)
        if info is None:
            state.duplicate_acks += 1
            return []
        recv = state.receivers[receiver_id]
        latency = ack_time - info.send_time
        if recv.d_min is None or latency < recv.d_min:
            recv.d_min = latency
        state.qdelay_samples.append(latency - recv.d_min)
        state.ack_arrivals.append(ack_time)
        recv.ack_history.append((ack_time, latency))
        recv.last_ack_latency = latency
        recv.in_flight -= 1
        state.cumulative_acked += 1

        lost = []
        for other_seq, other in pending.items():
            if other_seq < seq:
                other.acks_after += 1
                if other.acks_after >= DUPACK_LOSS_THRESHOLD:
                    lost.append(other_seq)
        for lost_seq in lost:
            self.on_loss(receiver_id, lost_seq, ack_time)
        return [(receiver_id, s) for s in lost]

    def on_loss(self, receiver_id: str, seq: int, now: float) -> None:
        """Account a detected loss and recalibrate the receiver's d_max.

        Loss means the queue overflowed recently, so the highest latency the
        receiver observed over a short trailing window is the best full-queue
        proxy.  The window covers the detection lag of both the duplicate-gap
        and the timeout rule.
        """
        state = self.state
        state.outstanding[receiver_id].pop(seq, None)
        recv = state.receivers[receiver_id]
        recv.in_flight -= 1
        state.cumulative_lost += 1
        horizon = 2.0 * self.params.bw_window_tc
        candidates = [lat for t, lat in recv.ack_history if t >= now - horizon]
        if not candidates and recv.last_ack_latency is not None:
            candidates = [recv.last_ack_latency]
        if candidates:
            recv.d_max = max(candidates)

    def _expire_timeouts(self, now: float) -> int:
        state = self.state
        qmax, _ = qmax_estimate(state.receivers, self.params)
        count = 0
        for rid, pending in state.outstanding.items():
            recv = state.receivers[rid]
            base = recv.d_min if recv.d_min is not None else self.params.initial_qmax_offset
            # the observed latency guards against spurious timeouts while the
            # actual queue delay exceeds the calibrated maximum (e.g. right
            # after a capacity drop)
            observed = recv.last_ack_latency or 0.0
            deadline = TIMEOUT_FACTOR * max(base + qmax, observed)
            expired = [s for s, o in pending.items() if now - o.send_time > deadline]
            for seq in expired:
                self.on_loss(rid, seq, now)
                count += 1
        return count

    def control_tick(self, now: float) -> TickSnapshot:
        """One control epoch: close the interval's queue-delay average,
        refresh the bandwidth estimate and d_ref, recompute window and quota."""
        state = self.state
        params = self.params
        timeout_losses = self._expire_timeouts(now)

        samples = state.qdelay_samples
        state.avg_queue_delay_d = sum(samples) / len(samples) if samples else 0.0
        state.qdelay_samples = []

        state.est_bandwidth_U = estimate_bandwidth(state, params, now)
        ack_rate = len(state.ack_arrivals) / params.bw_window_tc

        shares = lambda_squared_shares(state)
        for rid, share in shares.items():
            state.receivers[rid].lambda_sq = share

        bootstrap = False
        try:
            state.d_ref = compute_dref(state.receivers, params)
            state.window_w = compute_window(state, params)
            state.quota_u = compute_send_quota(state, params)
        except NoLatencySamples:
            bootstrap = True
            state.quota_u = BOOTSTRAP_QUOTA

        state.epoch_k += 1
        return TickSnapshot(
            time=now,
            epoch=state.epoch_k,
            quota=state.quota_u,
            window=state.window_w,
            est_bandwidth_pps=state.est_bandwidth_U,
            ack_rate_pps=ack_rate,
            d_ref=state.d_ref,
            avg_queue_delay=state.avg_queue_delay_d,
            bootstrap=bootstrap,
            timeout_losses=timeout_losses,
        )
