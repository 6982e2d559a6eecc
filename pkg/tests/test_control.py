"""Unit and property tests for the periodic controller."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from p2pcc.control import (BOOTSTRAP_QUOTA, Controller, ControllerParams,
                           NoLatencySamples, compute_dref, compute_send_quota,
                           compute_window, current_ack_rate,
                           estimate_bandwidth, lambda_squared_shares,
                           lemma2_min_window, new_state, qmax_estimate,
                           rtt_reference)


def make_state(receiver_ids=("r1",)):
    return new_state(list(receiver_ids))


def seed_counts(state, sent, acked):
    state.cumulative_sent = sent
    state.cumulative_acked = acked
    # distribute the in-flight difference onto the first receiver
    first = next(iter(state.receivers.values()))
    first.in_flight = sent - acked


# -- send quota -------------------------------------------------------------

def test_quota_empty_pipe_equals_window():
    state = make_state()
    state.window_w = 100
    assert compute_send_quota(state, ControllerParams(gamma=1.0)) == 100


def test_quota_gain_scales_headroom():
    state = make_state()
    state.window_w = 100
    seed_counts(state, 40, 0)
    assert compute_send_quota(state, ControllerParams(gamma=0.5)) == 30


def test_quota_clamps_when_in_flight_exceeds_window():
    state = make_state()
    state.window_w = 100
    seed_counts(state, 130, 0)
    assert compute_send_quota(state, ControllerParams(gamma=1.0)) == 0


def test_quota_rounds_half_up():
    state = make_state()
    state.window_w = 10
    seed_counts(state, 5, 0)
    # 0.9 * 5 = 4.5 -> 5
    assert compute_send_quota(state, ControllerParams(gamma=0.9)) == 5


# -- queue-delay reference --------------------------------------------------

def test_dref_from_calibrated_receiver():
    state = make_state()
    r = state.receivers["r1"]
    r.d_min, r.d_max = 0.020, 0.120
    params = ControllerParams(alpha=0.75)
    assert compute_dref(state.receivers, params) == pytest.approx(0.075)
    assert rtt_reference(state.receivers, 0.075)["r1"] == pytest.approx(0.095)


def test_dref_bootstrap_uses_configured_offset():
    state = make_state()
    state.receivers["r1"].d_min = 0.030  # sample exists, no loss yet
    params = ControllerParams(alpha=0.5, initial_qmax_offset=0.040)
    assert compute_dref(state.receivers, params) == pytest.approx(0.020)


def test_dref_takes_minimum_across_calibrated_receivers():
    state = make_state(["a", "b"])
    state.receivers["a"].d_min, state.receivers["a"].d_max = 0.010, 0.090
    state.receivers["b"].d_min, state.receivers["b"].d_max = 0.010, 0.110
    params = ControllerParams(alpha=0.75)
    # (d_max - d_min) = 80 ms and 100 ms; the tighter one binds
    assert compute_dref(state.receivers, params) == pytest.approx(0.060)


def test_dref_requires_at_least_one_sample():
    state = make_state()
    with pytest.raises(NoLatencySamples):
        compute_dref(state.receivers, ControllerParams())


def test_qmax_estimate_flags_calibration():
    state = make_state()
    params = ControllerParams(initial_qmax_offset=0.1)
    assert qmax_estimate(state.receivers, params) == (0.1, False)
    state.receivers["r1"].d_min = 0.02
    state.receivers["r1"].d_max = 0.07
    assert qmax_estimate(state.receivers, params) == (pytest.approx(0.05), True)


# -- window -----------------------------------------------------------------

def test_window_single_receiver_bandwidth_delay_term():
    state = make_state()
    r = state.receivers["r1"]
    r.d_min, r.lambda_sq = 0.020, 1.0
    state.est_bandwidth_U = 333.0
    state.d_ref = 0.075
    state.avg_queue_delay_d = 0.075  # correction term zero
    params = ControllerParams(period_T=0.050)
    assert compute_window(state, params) == 50  # ceil(333 * 0.145 + 1)


def test_window_cold_start_opens_on_correction_term():
    state = make_state()
    state.est_bandwidth_U = 0.0
    state.d_ref = 0.075
    state.avg_queue_delay_d = 0.0
    params = ControllerParams(gamma2=200.0)
    assert compute_window(state, params) == 16  # 1 + 200 * 0.075


def test_window_four_receiver_regression():
    # frozen hand evaluation: U=333 pkt/s, equal shares over receivers with
    # base one-way delays 12/22/7/16 ms, reference 40 ms, period 50 ms,
    # measured delay at the reference
    state = make_state(["r1", "r2", "r3", "r4"])
    for rid, d in zip(state.receivers, (0.012, 0.022, 0.007, 0.016)):
        state.receivers[rid].d_min = d
        state.receivers[rid].lambda_sq = 0.25
    state.est_bandwidth_U = 333.0
    state.d_ref = 0.040
    state.avg_queue_delay_d = 0.040
    assert compute_window(state, ControllerParams(period_T=0.050)) == 36


def test_window_never_below_one_packet():
    state = make_state()
    state.est_bandwidth_U = 0.0
    state.d_ref = 0.0
    state.avg_queue_delay_d = 10.0  # huge negative correction
    assert compute_window(state, ControllerParams()) == 1


# -- bandwidth estimate -----------------------------------------------------

def test_ack_rate_empty_history_is_zero():
    state = make_state()
    params = ControllerParams(bw_window_tc=1.0)
    assert current_ack_rate(state, params, now=10.0) == 0.0


def test_ack_rate_counts_horizon_window():
    state = make_state()
    params = ControllerParams(bw_window_tc=1.0)
    state.ack_arrivals.extend(9.0 + (i + 1) / 333.0 for i in range(333))
    assert current_ack_rate(state, params, now=10.0) == pytest.approx(333.0)
    # 333 pkt/s * 12000 bit = 3996 Kbps, the nominal 4 Mbps link
    assert 333.0 * 12000.0 / 1000.0 == pytest.approx(4000.0, rel=0.01)


def test_bandwidth_estimate_held_when_queue_looks_empty():
    state = make_state()
    params = ControllerParams(bw_window_tc=1.0)
    state.est_bandwidth_U = 300.0
    state.d_ref = 0.075
    state.avg_queue_delay_d = 0.0  # below the trust threshold
    state.ack_arrivals.extend([9.9] * 100)  # raw rate 100 < held 300
    assert estimate_bandwidth(state, params, now=10.0) == 300.0


def test_bandwidth_estimate_adopts_faster_raw_rate():
    state = make_state()
    params = ControllerParams(bw_window_tc=1.0)
    state.est_bandwidth_U = 100.0
    state.d_ref = 0.075
    state.avg_queue_delay_d = 0.0
    state.ack_arrivals.extend([9.9] * 400)  # raw 400 > held 100
    assert estimate_bandwidth(state, params, now=10.0) == 400.0


def test_bandwidth_estimate_trusts_nonempty_queue():
    state = make_state()
    params = ControllerParams(bw_window_tc=1.0)
    state.est_bandwidth_U = 300.0
    state.d_ref = 0.075
    state.avg_queue_delay_d = 0.050  # queue clearly non-empty
    state.ack_arrivals.extend([9.9] * 100)
    assert estimate_bandwidth(state, params, now=10.0) == 100.0


# -- shares -----------------------------------------------------------------

def test_shares_ratio():
    state = make_state(["a", "b"])
    state.receivers["a"].in_flight = 10
    state.receivers["b"].in_flight = 30
    assert lambda_squared_shares(state) == {"a": 0.25, "b": 0.75}


def test_shares_all_zero_when_nothing_in_flight():
    state = make_state(["a", "b"])
    assert lambda_squared_shares(state) == {"a": 0.0, "b": 0.0}


def test_shares_single_receiver_normalizes_to_one():
    state = make_state()
    state.receivers["r1"].in_flight = 7
    assert lambda_squared_shares(state) == {"r1": 1.0}


# -- minimum-window bound ---------------------------------------------------

def test_min_window_single_receiver():
    assert lemma2_min_window(10.0, [1.0], [5], 1.0) == 60.0


def test_min_window_gain_term():
    assert lemma2_min_window(10.0, [1.0], [5], 0.5) == 70.0


def test_min_window_two_receivers():
    assert lemma2_min_window(20.0, [0.5, 0.5], [2, 6], 1.0) == 100.0


def test_min_window_rejects_bad_gain():
    with pytest.raises(ValueError):
        lemma2_min_window(10.0, [1.0], [5], 0.0)


# -- event handlers ---------------------------------------------------------

def test_on_ack_initializes_and_tracks_minimum_latency():
    c = Controller(ControllerParams(), ["r1"])
    c.on_send("r1", 0, 0.0)
    c.on_ack("r1", 0, 0.020)
    assert c.state.receivers["r1"].d_min == pytest.approx(0.020)
    assert c.state.receivers["r1"].in_flight == 0
    c.on_send("r1", 1, 0.100)
    c.on_ack("r1", 1, 0.118)
    assert c.state.receivers["r1"].d_min == pytest.approx(0.018)


def test_duplicate_ack_counted_but_state_unchanged():
    c = Controller(ControllerParams(), ["r1"])
    c.on_send("r1", 0, 0.0)
    c.on_ack("r1", 0, 0.020)
    before = (c.state.cumulative_acked, c.state.receivers["r1"].in_flight)
    c.on_ack("r1", 0, 0.025)
    assert c.state.duplicate_acks == 1
    assert (c.state.cumulative_acked, c.state.receivers["r1"].in_flight) == before


def test_gap_of_three_later_acks_declares_loss():
    c = Controller(ControllerParams(), ["r1"])
    for seq in range(5):
        c.on_send("r1", seq, 0.0)
    lost = []
    lost += c.on_ack("r1", 1, 0.02)
    lost += c.on_ack("r1", 2, 0.03)
    assert lost == []
    lost += c.on_ack("r1", 3, 0.04)
    assert lost == [("r1", 0)]
    assert c.state.cumulative_lost == 1
    assert 0 not in c.state.outstanding["r1"]


def test_loss_calibrates_dmax_from_recent_peak_latency():
    c = Controller(ControllerParams(bw_window_tc=1.0), ["r1"])
    # an old ack outside the trailing window must not dominate
    c.on_send("r1", 0, 0.0)
    c.on_ack("r1", 0, 0.500)          # latency 500 ms, long ago
    c.on_send("r1", 1, 10.0)
    c.on_ack("r1", 1, 10.020)         # baseline 20 ms
    c.on_send("r1", 2, 10.1)
    c.on_ack("r1", 2, 10.220)         # peak 120 ms inside the window
    c.on_send("r1", 3, 10.3)
    c.on_ack("r1", 3, 10.330)         # 30 ms afterwards
    c.on_send("r1", 4, 10.4)
    c.on_loss("r1", 4, 10.5)
    assert c.state.receivers["r1"].d_max == pytest.approx(0.120)


def test_loss_recalibration_can_move_down():
    c = Controller(ControllerParams(bw_window_tc=0.1), ["r1"])
    c.on_send("r1", 0, 0.0)
    c.on_ack("r1", 0, 0.120)
    c.on_send("r1", 1, 0.05)
    c.on_loss("r1", 1, 0.2)
    assert c.state.receivers["r1"].d_max == pytest.approx(0.120)
    # much later, shallower latencies only: a new loss lowers the estimate
    c.on_send("r1", 2, 10.0)
    c.on_ack("r1", 2, 10.090)
    c.on_send("r1", 3, 10.1)
    c.on_loss("r1", 3, 10.3)
    assert c.state.receivers["r1"].d_max == pytest.approx(0.090)


def test_control_tick_bootstrap_quota():
    c = Controller(ControllerParams(), ["r1"])
    snap = c.control_tick(0.05)
    assert snap.bootstrap
    assert snap.quota == BOOTSTRAP_QUOTA


def test_control_tick_after_first_ack_leaves_bootstrap():
    c = Controller(ControllerParams(), ["r1"])
    c.control_tick(0.05)
    c.on_send("r1", 0, 0.06)
    c.on_ack("r1", 0, 0.08)
    snap = c.control_tick(0.10)
    assert not snap.bootstrap
    assert snap.window >= 1
    assert snap.quota >= 0


def test_timeout_expiry_declares_loss():
    params = ControllerParams(initial_qmax_offset=0.1)
    c = Controller(params, ["r1"])
    c.on_send("r1", 0, 0.0)
    c.on_ack("r1", 0, 0.020)  # d_min 20 ms -> deadline 2*(0.02+0.1)=0.24
    c.on_send("r1", 1, 0.1)
    snap = c.control_tick(0.5)
    assert snap.timeout_losses == 1
    assert c.state.cumulative_lost == 1


def test_timeout_deadline_respects_observed_latency():
    # when real latencies already exceed the calibrated maximum, packets
    # younger than twice the observed latency must not expire
    params = ControllerParams(initial_qmax_offset=0.05)
    c = Controller(params, ["r1"])
    c.on_send("r1", 0, 0.0)
    c.on_ack("r1", 0, 0.400)  # observed 400 ms >> 2*(d_min+offset)
    c.on_send("r1", 1, 0.5)
    snap = c.control_tick(1.2)  # age 0.7 < 2*0.4
    assert snap.timeout_losses == 0


# -- parameter validation ---------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"gamma": 0.0}, {"gamma": 1.5}, {"alpha": 0.0}, {"alpha": 1.0},
    {"period_T": 0.0}, {"bw_window_tc": 0.01}, {"initial_qmax_offset": 0.0},
    {"packet_size_s": 0.0},
])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        ControllerParams(**kwargs)


# -- properties -------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(w=st.integers(1, 1000), sent=st.integers(0, 2000),
       gamma=st.floats(0.01, 1.0))
def test_property_quota_non_negative(w, sent, gamma):
    state = make_state()
    state.window_w = w
    seed_counts(state, sent, 0)
    assert compute_send_quota(state, ControllerParams(gamma=gamma)) >= 0


@settings(max_examples=200, deadline=None)
@given(counts=st.lists(st.integers(0, 50), min_size=1, max_size=6))
def test_property_share_normalization(counts):
    ids = [f"r{i}" for i in range(len(counts))]
    state = make_state(ids)
    for rid, n in zip(ids, counts):
        state.receivers[rid].in_flight = n
    shares = lambda_squared_shares(state)
    assert all(0.0 <= s <= 1.0 for s in shares.values())
    if sum(counts) > 0:
        assert sum(shares.values()) == pytest.approx(1.0)
    else:
        assert all(s == 0.0 for s in shares.values())


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_property_counter_conservation(data):
    ids = ["a", "b"]
    c = Controller(ControllerParams(), ids)
    next_seq = {rid: 0 for rid in ids}
    acked_pool = {rid: [] for rid in ids}
    ops = data.draw(st.lists(
        st.tuples(st.sampled_from(["send", "ack", "loss"]),
                  st.sampled_from(ids)),
        max_size=60))
    t = 0.0
    for op, rid in ops:
        t += 0.01
        if op == "send":
            c.on_send(rid, next_seq[rid], t)
            acked_pool[rid].append(next_seq[rid])
            next_seq[rid] += 1
        elif op == "ack" and acked_pool[rid]:
            c.on_ack(rid, acked_pool[rid].pop(0), t)
        elif op == "loss" and acked_pool[rid]:
            c.on_loss(rid, acked_pool[rid].pop(0), t)
        state = c.state
        in_flight = state.in_flight_total()
        assert (state.cumulative_sent - state.cumulative_acked
                - state.cumulative_lost) == in_flight
        assert in_flight >= 0


@settings(max_examples=100, deadline=None)
@given(latencies=st.lists(st.floats(0.001, 1.0), min_size=1, max_size=50))
def test_property_dmin_monotone_non_increasing(latencies):
    c = Controller(ControllerParams(), ["r1"])
    seen = []
    for i, lat in enumerate(latencies):
        t = float(i)
        c.on_send("r1", i, t)
        c.on_ack("r1", i, t + lat)
        seen.append(c.state.receivers["r1"].d_min)
    assert all(b <= a + 1e-12 for a, b in zip(seen, seen[1:]))
    assert seen[-1] == pytest.approx(min(latencies))
