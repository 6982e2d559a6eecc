"""Sharing a 4 Mbps bottleneck with a loss-based TCP flow.

Four variants: the competitor uses additive increase (reno) or binary
increase (bic), and either the stream or the TCP flow starts first. In every
case the stream should keep a useful share while TCP is active and reclaim
the link promptly when TCP stops.

Run:  python3 demos/tcp_coexistence.py
"""

import statistics

from p2pcc.scenarios import build_experiment_3
from p2pcc.sim import run


def timeline(log, flow_ids, duration=100.0, bucket=10.0):
    rows = []
    lo = 0.0
    while lo < duration - 1e-9:
        hi = min(lo + bucket, duration)
        row = [statistics.mean(log.select(f"throughput_{fid}_kbps", lo, hi))
               for fid in flow_ids]
        rows.append((hi, row))
        lo = hi
    return rows


def main():
    for tcp in ("reno", "bic"):
        for ordering in ("p2pfirst", "tcpfirst"):
            cfg = build_experiment_3(tcp, ordering)
            log = run(cfg)
            flow_ids = ["p2p"] + [f.flow_id for f in cfg.flows]
            print(f"\n== {cfg.name} ==")
            print(f"{'t (s)':>6} " + " ".join(f"{fid:>10}" for fid in flow_ids)
                  + "   (mean Kbps per 10 s)")
            for hi, row in timeline(log, flow_ids, cfg.duration):
                print(f"{hi:>6.0f} " + " ".join(f"{v:>10.0f}" for v in row))


if __name__ == "__main__":
    main()
