"""Abrupt capacity changes every 10 seconds.

The link rate is redrawn uniformly in [1, 5] Mbps every 10 s. The bandwidth
estimator only trusts fresh ack-rate readings while the queue is visibly
loaded, so after each step the stream converges to the new rate within a few
control periods. Downward steps overflow the deliberately tight buffer; each
resulting loss recalibrates the queueing-delay reference.

Run:  python3 demos/capacity_steps.py
"""

import statistics

from p2pcc.scenarios import build_experiment_2
from p2pcc.sim import run


def main():
    cfg = build_experiment_2("dynamic")
    log = run(cfg)

    t = log.column("time")
    cap = log.column("capacity_kbps")
    u = log.column("U_est_kbps")
    d_ref = log.column("d_ref_ms")

    print(f"{'step at':>8} {'capacity':>9} {'settle':>7} {'U after':>8}")
    for i in range(1, len(t)):
        if cap[i] == cap[i - 1]:
            continue
        new = cap[i]
        settle = next((t[j] - t[i] for j in range(i, len(t))
                       if abs(u[j] - new) <= 0.10 * new), None)
        after = statistics.mean(log.select("U_est_kbps", t[i] + 3.0, t[i] + 10.0))
        settle_s = f"{settle:.2f}s" if settle is not None else ">window"
        print(f"{t[i]:>7.1f}s {new:>8.0f}K {settle_s:>7} {after:>7.0f}K")

    recals = [(t[i], d_ref[i]) for i in range(1, len(t))
              if t[i] > 1.0 and abs(d_ref[i] - d_ref[i - 1]) > 1e-9]
    drops = log.column("cumulative_drops")[-1]
    print(f"\n{drops:.0f} drops; delay-reference recalibrations: "
          + (", ".join(f"{ts:.1f}s -> {v:.1f}ms" for ts, v in recals) or "none"))


if __name__ == "__main__":
    main()
