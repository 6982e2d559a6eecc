"""Single receiver on a 4 Mbps link with a wandering access latency.

The stream should settle at the link rate with its average round trip pinned
to the controller's reference, and without dropping a single packet: all
headroom lives in the delay budget, not in buffer overflow.

Run:  python3 demos/single_receiver_tracking.py
"""

import statistics

from p2pcc.scenarios import build_experiment_1
from p2pcc.sim import run


def main():
    cfg = build_experiment_1()
    print(f"scenario {cfg.name}: {cfg.duration:.0f}s, "
          f"link {cfg.bottleneck.rate.value / 1e6:.1f} Mbps, "
          f"receiver latency {cfg.receivers[0].latency.low * 1e3:.0f}-"
          f"{cfg.receivers[0].latency.high * 1e3:.0f} ms")
    log = run(cfg)

    print(f"{'t (s)':>6} {'U est (Kbps)':>12} {'rtt avg (ms)':>12} "
          f"{'rtt ref (ms)':>12} {'queue':>6}")
    for lo in range(0, 100, 10):
        sel = lambda c: statistics.mean(log.select(c, float(lo), lo + 10.0))
        print(f"{lo + 10:>6} {sel('U_est_kbps'):>12.0f} "
              f"{sel('rtt_avg_ms'):>12.1f} {sel('rtt_ref_ms'):>12.1f} "
              f"{sel('queue_packets'):>6.1f}")

    mean_u = statistics.mean(log.select("U_est_kbps", 20.0, 100.0))
    drops = log.column("cumulative_drops")[-1]
    print(f"\nsteady-state mean estimate: {mean_u:.0f} Kbps "
          f"(link 4000), drops: {drops:.0f}")


if __name__ == "__main__":
    main()
