"""Certified upper bounds for a batch of (pattern, N, forbidden) jobs.

    python scripts/run_upper_bounds.py                 # quick jobs only
    python scripts/run_upper_bounds.py --all           # includes the N=6 runs (minutes each)
"""
import argparse
import time
from pathlib import Path

from permflag.certify import upper_bound, verify, write_certificate
from permflag.perm import ForbiddenSet, format_perm

QUICK = [((1, 3, 2), 3, ()), ((1, 2), 2, ()), ((1, 3, 2, 4), 5, ()), ((2, 4, 1, 3), 5, ())]
LONG = [((1, 3, 4, 2), 6, ("2431",)), ((2, 4, 1, 3), 6, ())]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--all", action="store_true")
    ap.add_argument("--out", default="certs")
    args = ap.parse_args()
    jobs = QUICK + (LONG if args.all else [])
    Path(args.out).mkdir(exist_ok=True)
    for s, n, forb in jobs:
        t0 = time.perf_counter()
        cert, sol = upper_bound(s, n, ForbiddenSet.of(*forb))
        ok = verify(cert).ok
        name = f"{format_perm(s)}_n{n}" + "".join(f"_forb{f}" for f in forb)
        write_certificate(cert, Path(args.out) / f"{name}.json")
        print(f"{name:24s} numeric {sol.objective_value:.10f}  exact {float(cert.bound):.10f}"
              f"  verified={ok}  {time.perf_counter() - t0:6.1f}s")


if __name__ == "__main__":
    main()
