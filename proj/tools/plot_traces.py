#!/usr/bin/env python3
"""Plot per-agent trajectories written by `agvsim run --plot-out DIR`."""

import argparse
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STATE_STYLE = {"R": "o", "W": "x", "M": ".", "Rep": "s"}


def load(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("plot_dir", type=pathlib.Path)
    ap.add_argument("-o", "--out", type=pathlib.Path, default=pathlib.Path("trajectories.png"))
    args = ap.parse_args()

    files = sorted(args.plot_dir.glob("agent_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        ap.error(f"no agent_*.csv files in {args.plot_dir}")

    fig, (ax_xy, ax_t) = plt.subplots(1, 2, figsize=(12, 5))
    for f in files:
        rows = load(f)
        label = f.stem.replace("agent_", "A")
        xs = [float(r["x"]) for r in rows]
        ys = [float(r["y"]) for r in rows]
        ts = [float(r["time"]) for r in rows]
        (line,) = ax_xy.plot(xs, ys, label=label)
        ax_xy.plot(xs[:1], ys[:1], "^", color=line.get_color())
        ax_xy.plot(xs[-1:], ys[-1:], "*", color=line.get_color(), markersize=12)
        waiting = [r["state"] in ("W", "Rep") for r in rows]
        ax_t.step(ts, [1 if w else 0 for w in waiting], where="post", label=label)

    ax_xy.set_aspect("equal")
    ax_xy.set_xlabel("x [m]")
    ax_xy.set_ylabel("y [m]")
    ax_xy.legend()
    ax_t.set_xlabel("time [s]")
    ax_t.set_ylabel("stopped (W or Rep)")
    ax_t.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
