"""Application traffic sources: the sequential block source and loss-based
TCP competitor state machines (Reno, plus an experimental BIC-style flow)."""

from __future__ import annotations

from dataclasses import dataclass, field

# BIC shaping constants, taken from the usual binary-increase defaults.
BIC_S_MAX = 32.0
BIC_S_MIN = 0.25
BIC_BETA = 0.8


@dataclass
class BlockSource:
    """Hands out packets block by block, rotating receivers between blocks.

    All packets of a block are emitted before the next block starts; each
    block targets the next receiver in the rotation.  backlog_blocks is None
    for an always-backlogged source.
    """

    block_size: int
    receiver_ids: list[str]
    backlog_blocks: int | None = None
    _block_id: int = 0
    _sent_in_block: int = 0
    _next_receiver: int = 0

    def next_packets(self, quota: int) -> list[tuple[str, int]]:
        """Up to quota (receiver, block) assignments, fewer only when the
        backlog runs out."""
        out: list[tuple[str, int]] = []
        while len(out) < quota:
            if self.backlog_blocks is not None and self._block_id >= self.backlog_blocks:
                break
            rid = self.receiver_ids[self._next_receiver]
            out.append((rid, self._block_id))
            self._sent_in_block += 1
            if self._sent_in_block >= self.block_size:
                self._sent_in_block = 0
                self._block_id += 1
                self._next_receiver = (self._next_receiver + 1) % len(self.receiver_ids)
        return out


@dataclass
class TcpRenoFlow:
    """Reno congestion window state machine (per-ack granularity)."""

    cwnd: float = 2.0
    # initial slow-start threshold is effectively unbounded (RFC 5681)
    ssthresh: float = float("inf")
    state: str = "slow-start"
    rtt_estimate: float = 0.1

    def __post_init__(self) -> None:
        self._sync_state()

    def _sync_state(self) -> None:
        self.state = "slow-start" if self.cwnd < self.ssthresh else "congestion-avoidance"


def reno_on_ack(flow: TcpRenoFlow) -> TcpRenoFlow:
    if flow.cwnd < flow.ssthresh:
        flow.cwnd += 1.0
    else:
        flow.cwnd += 1.0 / flow.cwnd
    flow._sync_state()
    return flow


def reno_on_loss(flow: TcpRenoFlow, kind: str) -> TcpRenoFlow:
    flow.ssthresh = max(flow.cwnd / 2.0, 2.0)
    if kind == "timeout":
        flow.cwnd = 1.0
    else:  # triple-dup
        flow.cwnd = flow.ssthresh
    flow._sync_state()
    return flow


@dataclass
class TcpBicFlow:
    """Binary-increase congestion window state machine (experimental)."""

    cwnd: float = 2.0
    ssthresh: float = float("inf")
    w_max: float = 0.0
    s_max: float = BIC_S_MAX
    s_min: float = BIC_S_MIN
    beta: float = BIC_BETA
    rtt_estimate: float = 0.1


def bic_on_ack(flow: TcpBicFlow) -> TcpBicFlow:
    if flow.cwnd < flow.ssthresh and flow.w_max == 0.0:
        flow.cwnd += 1.0
        return flow
    if flow.w_max > 0.0 and flow.cwnd < flow.w_max:
        # binary search toward the pre-loss window
        inc = (flow.w_max - flow.cwnd) / 2.0
    else:
        # max probing beyond the last known maximum
        inc = max(flow.cwnd - flow.w_max, 1.0)
    inc = min(max(inc, flow.s_min), flow.s_max)
    flow.cwnd += inc / flow.cwnd
    return flow


def bic_on_loss(flow: TcpBicFlow, kind: str) -> TcpBicFlow:
    if flow.cwnd < flow.w_max:
        # fast convergence: release bandwidth when losses repeat below w_max
        flow.w_max = flow.cwnd * (2.0 - flow.beta) / 2.0
    else:
        flow.w_max = flow.cwnd
    if kind == "timeout":
        flow.ssthresh = max(flow.cwnd * flow.beta, 2.0)
        flow.cwnd = 1.0
    else:
        flow.cwnd = max(flow.cwnd * flow.beta, 1.0)
        flow.ssthresh = flow.cwnd
    return flow
