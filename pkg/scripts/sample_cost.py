"""Compare forecast sample counts of the three decompositions for a circuit file.

    python scripts/sample_cost.py configs/circuit_h_t_ad.json --delta 0.05
"""
import argparse

from chanmagic import monotones as M
from chanmagic import simulators as S


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("circuit")
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--epsilon", type=float, default=0.05)
    args = ap.parse_args()
    circ = S.CircuitSpec.load(args.circuit)
    prod = {"R_star": 1.0, "C": 1.0, "R_cpr": 1.0}
    for i, (ch, qs) in enumerate(circ.elements):
        vals = {"R_star": M.channel_robustness_value(ch), "C": M.capacity_value(ch)}
        vals["R_cpr"] = M.r_cpr(ch) if ch.n == 1 else float("nan")
        for k, v in vals.items():
            prod[k] *= v
        print(f"element {i} {ch.name or '?':>24s} on {qs}: " + "  ".join(f"{k} {v:.6f}" for k, v in vals.items()))
    for k, v in prod.items():
        n = S.required_samples(v, args.delta, args.epsilon) if v == v else "n/a"
        print(f"product {k:6s} {v:12.6f}  samples {n}")


if __name__ == "__main__":
    main()
