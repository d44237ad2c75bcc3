"""Exact density of every preset construction, with a Monte-Carlo cross-check."""
import argparse

from permflag.constructions import PRESETS, preset
from permflag.perm import format_perm
from permflag.permuton import density_mc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    for name in PRESETS:
        s, mu, exact = preset(name)
        est, err = density_mc(s, mu, args.samples, args.seed)
        print(f"{name:10s} p({format_perm(s)}) = {exact:.10f}   mc {est:.5f} +- {err:.5f}"
              f"  ({(est - exact) / err:+.2f} sigma)")


if __name__ == "__main__":
    main()
