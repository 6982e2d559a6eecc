"""Deterministic discrete-event simulation of the single-bottleneck topology.

Sender -> fixed-latency access link -> drop-tail FIFO bottleneck with a
time-varying service rate -> per-receiver delay links -> receivers, which ack
every packet over an uncongested return path.  The block-source sender is
driven by the periodic controller; competing TCP flows share the same FIFO.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from collections import deque
from dataclasses import dataclass

from .control import Controller
from .metrics import MetricsLog
from .scenarios import ScenarioConfig
from .traffic import (BlockSource, TcpBicFlow, TcpRenoFlow, bic_on_ack,
                      bic_on_loss, reno_on_ack, reno_on_loss)

P2P_FLOW_ID = "p2p"

# TCP retransmission timer bounds (seconds) and duplicate-gap threshold.
TCP_RTO_MIN = 0.2
TCP_RTO_MAX = 3.0
TCP_DUPACK_THRESHOLD = 3
TCP_TIMER_INTERVAL = 0.05


class EventLoop:
    """Time-ordered event queue; ties break by insertion order."""

    def __init__(self) -> None:
        self._heap: list = []
        self._counter = itertools.count()
        self.now = 0.0

    def schedule(self, time: float, fn) -> None:
        heapq.heappush(self._heap, (time, next(self._counter), fn))

    def run(self, until: float) -> None:
        while self._heap and self._heap[0][0] <= until:
            time, _, fn = heapq.heappop(self._heap)
            self.now = time
            fn(time)


@dataclass
class SimPacket:
    seq: int
    receiver_id: str
    flow_id: str
    block_id: int
    size_bits: float
    send_time: float
    base_rtt: float               # queue-free round trip at send time
    enqueue_time: float = 0.0
    retransmitted: bool = False


class DelayLink:
    """One-way link with a time-varying latency; delivery order is FIFO even
    across a latency decrease (in-flight packets keep their assigned delay)."""

    def __init__(self, latency_fn):
        self.latency_fn = latency_fn
        self._last_out = 0.0

    def transit(self, now: float) -> float:
        out = max(now + self.latency_fn(now), self._last_out)
        self._last_out = out
        return out


class Bottleneck:
    """Drop-tail FIFO served at the scheduled bitrate.

    The service time of a packet is fixed when its service starts; the server
    is never idle while the queue is non-empty.
    """

    def __init__(self, loop: EventLoop, rate_fn, capacity: int, on_depart):
        self.loop = loop
        self.rate_fn = rate_fn
        self.capacity = capacity
        self.on_depart = on_depart
        self.queue: deque[SimPacket] = deque()
        self.busy = False
        self.drops = 0
        self.drops_by_flow: dict[str, int] = {}
        self.served_bits: dict[str, float] = {}
        self.enqueued = 0
        self.served = 0

    @property
    def occupancy(self) -> int:
        return len(self.queue)

    def enqueue(self, pkt: SimPacket, now: float) -> bool:
        if len(self.queue) >= self.capacity:
            self.drops += 1
            self.drops_by_flow[pkt.flow_id] = self.drops_by_flow.get(pkt.flow_id, 0) + 1
            return False
        pkt.enqueue_time = now
        self.queue.append(pkt)
        self.enqueued += 1
        if not self.busy:
            self._start_service(now)
        return True

    def _start_service(self, now: float) -> None:
        self.busy = True
        pkt = self.queue[0]
        duration = pkt.size_bits / self.rate_fn(now)
        self.loop.schedule(now + duration, self._finish)

    def _finish(self, now: float) -> None:
        pkt = self.queue.popleft()
        self.served += 1
        self.served_bits[pkt.flow_id] = self.served_bits.get(pkt.flow_id, 0.0) + pkt.size_bits
        self.busy = False
        self.on_depart(pkt, now)
        if self.queue:
            self._start_service(now)


@dataclass
class _TcpOutstanding:
    send_time: float
    acks_after: int = 0
    retransmitted: bool = False


class TcpSender:
    """Endpoint state machine for one competing TCP flow.

    Window growth/decay lives in the traffic-model flow object; this class
    owns sequencing, duplicate-gap loss detection, the retransmission timer
    and pushing packets into the shared path.
    """

    def __init__(self, run: "_Run", flow_id: str, kind: str, receiver_id: str,
                 start: float, stop: float):
        self.run = run
        self.flow_id = flow_id
        self.kind = kind
        self.receiver_id = receiver_id
        self.start = start
        self.stop = stop
        self.cc = TcpRenoFlow() if kind == "reno" else TcpBicFlow()
        self.outstanding: dict[int, _TcpOutstanding] = {}
        self.retransmit_q: deque[int] = deque()
        self.next_seq = 0
        self.highest_sent = -1
        self.recover_until = -1
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto = 1.0
        self.last_progress = start
        run.loop.schedule(start, self._activate)

    def active(self, now: float) -> bool:
        return self.start <= now < self.stop

    def _activate(self, now: float) -> None:
        self.last_progress = now
        self.try_send(now)
        self.run.loop.schedule(now + TCP_TIMER_INTERVAL, self._timer)

    def _timer(self, now: float) -> None:
        if now >= self.stop:
            return
        if self.outstanding and now - self.last_progress > self.rto:
            self._on_cc_loss("timeout")
            self.retransmit_q.extend(sorted(self.outstanding))
            self.outstanding.clear()
            self.last_progress = now
            self.rto = min(self.rto * 2.0, TCP_RTO_MAX)
            self.try_send(now)
        self.run.loop.schedule(now + TCP_TIMER_INTERVAL, self._timer)

    def _on_cc_ack(self) -> None:
        if self.kind == "reno":
            reno_on_ack(self.cc)
        else:
            bic_on_ack(self.cc)

    def _on_cc_loss(self, loss_kind: str) -> None:
        if self.kind == "reno":
            reno_on_loss(self.cc, loss_kind)
        else:
            bic_on_loss(self.cc, loss_kind)

    def try_send(self, now: float) -> None:
        if not self.active(now):
            return
        while len(self.outstanding) < max(1, int(self.cc.cwnd)):
            if self.retransmit_q:
                seq = self.retransmit_q.popleft()
                retransmitted = True
            else:
                seq = self.next_seq
                self.next_seq += 1
                retransmitted = False
            self.outstanding[seq] = _TcpOutstanding(now, retransmitted=retransmitted)
            self.highest_sent = max(self.highest_sent, seq)
            self.run.send_tcp(self, seq, now, retransmitted)

    def on_ack(self, seq: int, now: float) -> None:
        info = self.outstanding.pop(seq, None)
        if info is None:
            return
        self.last_progress = now
        if not info.retransmitted:
            self._update_rtt(now - info.send_time)
        self._on_cc_ack()
        lost = []
        for other_seq, other in self.outstanding.items():
            if other_seq < seq:
                other.acks_after += 1
                if other.acks_after >= TCP_DUPACK_THRESHOLD:
                    lost.append(other_seq)
        if lost:
            if max(lost) > self.recover_until:
                self._on_cc_loss("triple-dup")
                self.recover_until = self.highest_sent
            for lost_seq in lost:
                del self.outstanding[lost_seq]
                self.retransmit_q.append(lost_seq)
        self.try_send(now)

    def _update_rtt(self, sample: float) -> None:
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self.cc.rtt_estimate = self.srtt
        self.rto = min(max(self.srtt + 4.0 * self.rttvar, TCP_RTO_MIN), TCP_RTO_MAX)


class _Run:
    """One simulation run: wiring, event handlers and metrics sampling."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.loop = EventLoop()
        params = cfg.controller
        self.T = params.period_T
        duration = cfg.duration

        self.sender_lat = cfg.sender_latency.materialize(self.rng, duration)
        self.receiver_lat = {r.receiver_id: r.latency.materialize(self.rng, duration)
                             for r in cfg.receivers}
        self.rate = cfg.bottleneck.rate.materialize(self.rng, duration)
        self.capacity = cfg.buffer_capacity()

        self.bottleneck = Bottleneck(self.loop, self.rate, self.capacity, self._on_depart)
        self.access_link = DelayLink(self.sender_lat)
        self.forward_links = {rid: DelayLink(fn) for rid, fn in self.receiver_lat.items()}
        self.ack_links = {
            rid: DelayLink(lambda t, fn=fn: fn(t) + self.sender_lat(t))
            for rid, fn in self.receiver_lat.items()
        }

        receiver_ids = [r.receiver_id for r in cfg.receivers]
        self.controller = Controller(params, receiver_ids)
        self.source = BlockSource(cfg.source.block_size, receiver_ids,
                                  cfg.source.backlog_blocks)
        self.next_seq = 0
        self.last_snapshot = None

        self.tcp_senders = {
            f.flow_id: TcpSender(self, f.flow_id, f.kind, f.receiver_id, f.start, f.stop)
            for f in cfg.flows
        }
        self.flow_ids = [P2P_FLOW_ID] + [f.flow_id for f in cfg.flows]

        # Per-period collectors and carry-forward values for sparse columns.
        self.period_acks: list[tuple[str, float, float]] = []  # (rid, measured, base)
        self.prev_served = {fid: 0.0 for fid in self.flow_ids}
        self.carry = {"rtt_avg_ms": 0.0, "path_rtt_ms": 0.0, "rtt_ref_ms": 0.0}
        self.carry_drtt = {rid: 0.0 for rid in receiver_ids}

        columns = ["time", "w_kbits", "u_kbits", "ack_rate_kbps", "U_est_kbps",
                   "capacity_kbps", "d_ref_ms", "rtt_avg_ms", "rtt_ref_ms",
                   "path_rtt_ms", "queue_packets", "cumulative_drops"]
        columns += [f"dRTT_{rid}_ms" for rid in receiver_ids]
        columns += [f"throughput_{fid}_kbps" for fid in self.flow_ids]
        self.log = MetricsLog(columns)

        # Control ticks are scheduled before samples so a sample at the same
        # instant sees that tick's snapshot.
        n_periods = int(round(duration / self.T))
        k = 0
        while True:
            t = cfg.p2p_start + k * self.T
            if t >= duration:
                break
            self.loop.schedule(t, self._p2p_tick)
            k += 1
        for j in range(1, n_periods + 1):
            self.loop.schedule(j * self.T, self._sample)

    # -- P2P side ---------------------------------------------------------

    def _p2p_tick(self, now: float) -> None:
        snapshot = self.controller.control_tick(now)
        self.last_snapshot = snapshot
        assignments = self.source.next_packets(snapshot.quota)
        if not assignments:
            return
        spacing = self.T / len(assignments)
        for i, (rid, block_id) in enumerate(assignments):
            self.loop.schedule(now + i * spacing,
                               lambda t, r=rid, b=block_id: self._send_p2p(r, b, t))

    def _send_p2p(self, rid: str, block_id: int, now: float) -> None:
        seq = self.next_seq
        self.next_seq += 1
        self.controller.on_send(rid, seq, now)
        pkt = SimPacket(
            seq=seq, receiver_id=rid, flow_id=P2P_FLOW_ID, block_id=block_id,
            size_bits=self.cfg.controller.packet_size_s, send_time=now,
            base_rtt=2.0 * (self.sender_lat(now) + self.receiver_lat[rid](now)),
        )
        self._dispatch(pkt, now)

    # -- TCP side ---------------------------------------------------------

    def send_tcp(self, sender: TcpSender, seq: int, now: float,
                 retransmitted: bool) -> None:
        rid = sender.receiver_id
        pkt = SimPacket(
            seq=seq, receiver_id=rid, flow_id=sender.flow_id, block_id=-1,
            size_bits=self.cfg.controller.packet_size_s, send_time=now,
            base_rtt=2.0 * (self.sender_lat(now) + self.receiver_lat[rid](now)),
            retransmitted=retransmitted,
        )
        self._dispatch(pkt, now)

    # -- Shared path ------------------------------------------------------

    def _dispatch(self, pkt: SimPacket, now: float) -> None:
        arrival = self.access_link.transit(now)
        self.loop.schedule(arrival, lambda t, p=pkt: self.bottleneck.enqueue(p, t))

    def _on_depart(self, pkt: SimPacket, now: float) -> None:
        delivery = self.forward_links[pkt.receiver_id].transit(now)
        self.loop.schedule(delivery, lambda t, p=pkt: self._deliver(p, t))

    def _deliver(self, pkt: SimPacket, now: float) -> None:
        # receivers ack every packet immediately
        ack_arrival = self.ack_links[pkt.receiver_id].transit(now)
        self.loop.schedule(ack_arrival, lambda t, p=pkt: self._on_ack(p, t))

    def _on_ack(self, pkt: SimPacket, now: float) -> None:
        if pkt.flow_id == P2P_FLOW_ID:
            self.controller.on_ack(pkt.receiver_id, pkt.seq, now)
            self.period_acks.append(
                (pkt.receiver_id, now - pkt.send_time, pkt.base_rtt))
        else:
            self.tcp_senders[pkt.flow_id].on_ack(pkt.seq, now)

    # -- Metrics ----------------------------------------------------------

    def _sample(self, now: float) -> None:
        snap = self.last_snapshot
        s_kbit = self.cfg.controller.packet_size_s / 1000.0
        state = self.controller.state

        row = {
            "time": now,
            "w_kbits": (snap.window if snap else 0) * s_kbit,
            "u_kbits": (snap.quota if snap else 0) * s_kbit,
            "ack_rate_kbps": (snap.ack_rate_pps if snap else 0.0) * s_kbit,
            "U_est_kbps": (snap.est_bandwidth_pps if snap else 0.0) * s_kbit,
            "capacity_kbps": self.rate(now) / 1000.0,
            "d_ref_ms": (snap.d_ref if snap else 0.0) * 1000.0,
            "queue_packets": self.bottleneck.occupancy,
            "cumulative_drops": self.bottleneck.drops,
        }

        acks = self.period_acks
        self.period_acks = []
        if acks:
            self.carry["rtt_avg_ms"] = 1000.0 * sum(a[1] for a in acks) / len(acks)
            self.carry["path_rtt_ms"] = 1000.0 * sum(a[2] for a in acks) / len(acks)
        refs = [r.d_min + state.d_ref for r in state.receivers.values()
                if r.d_min is not None]
        if refs:
            self.carry["rtt_ref_ms"] = 1000.0 * sum(refs) / len(refs)
        row.update(self.carry)

        for rid in self.carry_drtt:
            samples = [m - b for r, m, b in acks if r == rid]
            if samples:
                self.carry_drtt[rid] = 1000.0 * sum(samples) / len(samples)
            row[f"dRTT_{rid}_ms"] = self.carry_drtt[rid]

        for fid in self.flow_ids:
            served = self.bottleneck.served_bits.get(fid, 0.0)
            row[f"throughput_{fid}_kbps"] = (served - self.prev_served[fid]) / self.T / 1000.0
            self.prev_served[fid] = served

        self.log.append(row)

    def execute(self) -> MetricsLog:
        self.loop.run(self.cfg.duration)
        return self.log


def run(cfg: ScenarioConfig) -> MetricsLog:
    """Execute a scenario to completion; identical (config, seed) pairs yield
    identical logs."""
    return _Run(cfg).execute()
