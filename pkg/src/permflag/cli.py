"""permflag command line: enumerate, upper-bound, verify, lower-bound, sample."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .certify import (DEFAULT_K, CertificateError, NonCertifiableSolution, certify_solution,
                      read_certificate, verify, write_certificate)
from .constructions import PRESETS, optimize_gamma_1324, preset
from .flags import enumerate_flags, enumerate_types
from .perm import ForbiddenSet, format_perm, parse_perm
from .permuton import density_exact, density_mc, loads, sample_permutation
from .sdp import SolverError, assemble, crude_bound, effective_forbidden, solve

OK, FAILURE, USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    pattern: str = ""
    n: int = 0
    forbid: list[str] = field(default_factory=list)
    layered_only: bool = False
    solver: str | None = None
    k: int = DEFAULT_K
    samples: int = 1_000_000
    seed: int = 0
    output: str | None = None
    preset: str | None = None
    permuton: str | None = None
    type: str | None = None
    certificate: str | None = None
    crude: bool = False
    optimize: bool = False
    mc: bool = False
    timeout: float = 3600.0
    epsilon_shift: float = 0.0
    workers: int = 1

    def forbidden(self) -> ForbiddenSet:
        try:
            return ForbiddenSet.of(*self.forbid)
        except ValueError as exc:
            raise UsageError(f"bad --forbid: {exc}") from None

    def parsed_pattern(self):
        try:
            s = parse_perm(self.pattern)
        except ValueError as exc:
            raise UsageError(f"bad pattern {self.pattern!r}: {exc}") from None
        return s

    def default_output(self) -> Path:
        name = f"{self.pattern}_n{self.n}"
        if self.forbid:
            name += "_forb" + "_".join(self.forbidden().strings())
        if self.layered_only:
            name += "_layered"
        return Path("certs") / f"{name}.json"


def cmd_enumerate(cfg: RunConfig) -> int:
    forb = cfg.forbidden()
    if cfg.n < 0:
        raise UsageError("--n must be >= 0")
    if cfg.type is not None:
        try:
            tau = parse_perm(cfg.type)
        except ValueError as exc:
            raise UsageError(f"bad --type: {exc}") from None
        if len(tau) > cfg.n:
            raise UsageError("type is longer than --n")
        items = [str(f) for f in enumerate_flags(cfg.n, tau, forb)]
        what = f"{format_perm(tau)}-flags of size {cfg.n}"
    else:
        items = [format_perm(p) for p in enumerate_types(cfg.n, forb)]
        what = f"admissible permutations of length {cfg.n}"
    for line in items:
        print(line)
    print(f"# {len(items)} {what}", file=sys.stderr)
    return OK


def cmd_upper_bound(cfg: RunConfig) -> int:
    s = cfg.parsed_pattern()
    forb = cfg.forbidden()
    if cfg.n < len(s):
        raise UsageError(f"--n must be at least |pattern| = {len(s)}")
    if cfg.crude:
        b = crude_bound(s, cfg.n, effective_forbidden(forb, cfg.layered_only))
        print(f"crude bound: {b} ~ {float(b):.10f}")
        return OK
    t0 = time.perf_counter()
    try:
        problem = assemble(s, cfg.n, forb, cfg.layered_only, use_cache=True, workers=cfg.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"[assemble] {problem.num_constraints} admissible, blocks {problem.block_sizes}")
    try:
        sol = solve(problem, cfg.solver, cfg.timeout)
    except SolverError as exc:
        print(f"[solve] {type(exc).__name__}: {exc}", file=sys.stderr)
        if exc.log:
            print(exc.log[-2000:], file=sys.stderr)
        return FAILURE
    print(f"[solve] numeric objective {sol.objective_value:.10f}")
    try:
        cert = certify_solution(problem, sol, cfg.k, cfg.epsilon_shift)
    except NonCertifiableSolution as exc:
        print(f"[round] {exc}", file=sys.stderr)
        return FAILURE
    out = Path(cfg.output) if cfg.output else cfg.default_output()
    write_certificate(cert, out)
    print(f"[certify] bound {float(cert.bound):.12f} (exact {cert.bound.numerator}/"
          f"{cert.bound.denominator})")
    print(f"[certify] witness {format_perm(cert.witness)}")
    print(f"[certify] written to {out} in {time.perf_counter() - t0:.1f}s")
    return OK


def cmd_verify(cfg: RunConfig) -> int:
    path = Path(cfg.certificate or "")
    if not path.is_file():
        raise UsageError(f"no certificate file {str(path)!r}")
    try:
        cert = read_certificate(path)
    except CertificateError as exc:
        raise UsageError(f"malformed certificate: {exc}") from None
    report = verify(cert, workers=cfg.workers)
    print(report)
    return OK if report.ok else FAILURE


def _load_permuton(cfg: RunConfig, need_pattern: bool = True):
    if cfg.preset and cfg.permuton:
        raise UsageError("give either --preset or --permuton, not both")
    if cfg.preset:
        if cfg.preset not in PRESETS:
            raise UsageError(f"unknown preset {cfg.preset!r}; choose from {', '.join(PRESETS)}")
        pattern, mu, _ = preset(cfg.preset)
        return (parse_perm(cfg.pattern) if cfg.pattern else pattern), mu
    if cfg.permuton:
        if need_pattern and not cfg.pattern:
            raise UsageError("--permuton needs --pattern")
        try:
            mu = loads(Path(cfg.permuton).read_text())
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read permuton: {exc}") from None
        return (cfg.parsed_pattern() if cfg.pattern else None), mu
    raise UsageError("give --preset or --permuton")


def cmd_lower_bound(cfg: RunConfig) -> int:
    s, mu = _load_permuton(cfg)
    if cfg.optimize and cfg.preset == "gamma1324":
        value, a, c = optimize_gamma_1324()
        print(f"optimised a = {a:.12f}, c = {c:.12f}, closed form {value:.12f}")
    value = density_exact(s, mu)
    print(f"p({format_perm(s)}) = {value:.12f}")
    if cfg.mc:
        est, err = density_mc(s, mu, cfg.samples, cfg.seed)
        z = (est - value) / err if err > 0 else 0.0
        print(f"monte carlo ({cfg.samples} samples, seed {cfg.seed}): {est:.6f} +- {err:.6f}"
              f" ({z:+.2f} sigma)")
    return OK


def cmd_sample(cfg: RunConfig) -> int:
    _, mu = _load_permuton(cfg, need_pattern=False)
    if cfg.n < 0:
        raise UsageError("--n must be >= 0")
    print(format_perm(sample_permutation(mu, cfg.n, cfg.seed)))
    return OK


COMMANDS = {"enumerate": cmd_enumerate, "upper-bound": cmd_upper_bound, "verify": cmd_verify,
            "lower-bound": cmd_lower_bound, "sample": cmd_sample}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="permflag", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("enumerate", help="list admissible permutations or flags")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--forbid", nargs="*", default=[])
    p.add_argument("--type", help="list flags of this type instead")

    p = sub.add_parser("upper-bound", help="flag-algebra upper bound with a certificate")
    p.add_argument("pattern")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--forbid", nargs="*", default=[])
    p.add_argument("--layered-only", action="store_true")
    p.add_argument("--solver", help="CSDP-compatible solver executable")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="round L to multiples of 2^-k")
    p.add_argument("--epsilon-shift", type=float, default=0.0)
    p.add_argument("--output")
    p.add_argument("--crude", action="store_true", help="max density over admissible N-perms only")
    p.add_argument("--timeout", type=float, default=3600.0)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("verify", help="re-check a certificate from scratch")
    p.add_argument("certificate")
    p.add_argument("--workers", type=int, default=1)

    for name, helptext in (("lower-bound", "evaluate a construction"),
                           ("sample", "sample a permutation from a construction")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--preset", help=", ".join(PRESETS))
        p.add_argument("--permuton", help="permuton JSON file")
        p.add_argument("--pattern", default="")
        p.add_argument("--seed", type=int, default=0)
        if name == "lower-bound":
            p.add_argument("--optimize", action="store_true")
            p.add_argument("--mc", action="store_true")
            p.add_argument("--samples", type=int, default=1_000_000)
        else:
            p.add_argument("--n", type=int, required=True)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = {k: v for k, v in vars(args).items() if k != "verbose" and v is not None}
    cfg = RunConfig(**opts)
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"permflag: error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
