"""Best layered densities for every layered pattern of a given length."""
import argparse
import time

from permflag.layered import price_optimize
from permflag.perm import enumerate_perms, format_perm, is_layered, layer_profile


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--length", type=int, default=4)
    ap.add_argument("--max-layers", type=int, default=20)
    args = ap.parse_args()
    for s in enumerate_perms(args.length):
        if not is_layered(s) or len(layer_profile(s)) in (1, len(s)):  # monotone: density 1
            continue
        t0 = time.perf_counter()
        value, x, used = price_optimize(s, args.max_layers)
        print(f"{format_perm(s):8s} {value:.10f}  {used:2d} layers  {time.perf_counter() - t0:5.1f}s")


if __name__ == "__main__":
    main()
