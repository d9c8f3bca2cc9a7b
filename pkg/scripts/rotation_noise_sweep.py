"""Monotones of a noisy X rotation as a function of the angle.

For each theta the script evaluates R*, C and R_CPR for both orders of the
rotation U(theta) and amplitude damping with strength p, and writes a CSV.
"""
import argparse
import csv
from dataclasses import asdict, dataclass

import numpy as np

from chanmagic import channels as C
from chanmagic import monotones as M


@dataclass
class SweepConfig:
    p: float = 0.1
    points: int = 17
    theta_max: float = np.pi / 4
    out: str = "rotation_noise_sweep.csv"


def row(theta, cfg):
    u, lam = C.x_rotation(theta), C.amplitude_damping(cfg.p)
    out = {"theta": theta, "p": cfg.p}
    for tag, ch in (("noise_first", C.compose(u, lam)), ("noise_last", C.compose(lam, u))):
        out[f"R_star_{tag}"] = M.channel_robustness_value(ch)
        out[f"C_{tag}"] = M.capacity_value(ch)
        out[f"R_cpr_{tag}"] = M.r_cpr(ch)
    return out


def main():
    ap = argparse.ArgumentParser()
    for k, v in asdict(SweepConfig()).items():
        ap.add_argument(f"--{k.replace('_', '-')}", type=type(v), default=v)
    cfg = SweepConfig(**vars(ap.parse_args()))
    rows = [row(float(t), cfg) for t in np.linspace(0, cfg.theta_max, cfg.points)]
    with open(cfg.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {cfg.out}")


if __name__ == "__main__":
    main()
