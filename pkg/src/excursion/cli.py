"""Batch command-line front end.

Subcommands run sweeps, constructions, and audits, writing CSV/JSON files
(and optional figures) whose bytes are a pure function of the flags and
seed.  Exit codes: 0 success, 1 usage error, 2 certificate failure or any
library error (a JSON error body goes to stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import cantor, cover, formats, lattice
from .cf import (
    ConvergentLadder,
    PartialQuotientStream,
    PrimitiveVector,
    RealHandle,
    jb_ladder,
    ladder_from_stream,
)
from .counting import (
    RationalInterval,
    count_floor_ratio,
    count_heights_in_band,
    floor_ratio_bound,
    min_height_in_interval,
)
from .errors import ExcursionError

NAMED_STREAMS = ("sqrt2", "sqrt3", "golden", "e")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def parse_real(text: str) -> RealHandle:
    """sqrt2|sqrt3|golden|e, an exact rational like 3/7 or 0.625, or
    cf:a0;a1,a2,... for an explicit quotient list."""
    if text in NAMED_STREAMS:
        return RealHandle.named(text)
    if text.startswith("cf:"):
        head, _, tail = text[3:].partition(";")
        quots = [int(t) for t in tail.replace(",", " ").split()] if tail.strip() else []
        return RealHandle(PartialQuotientStream(int(head), quots))
    return RealHandle.from_rational(Fraction(text))


def _interval(args) -> RationalInterval:
    return RationalInterval(
        Fraction(args.lo), Fraction(args.hi), args.open_lo, args.open_hi
    )


def _write(path: str, payload: str) -> None:
    Path(path).write_text(payload, encoding="utf-8")


def _grid(t0: float, t1: float, step: float) -> np.ndarray:
    n = int(math.floor((t1 - t0) / step + 1e-9)) + 1
    return t0 + step * np.arange(n)


def _thread_count() -> int:
    """EXCURSION_THREADS is the only environment variable consulted."""
    try:
        return max(1, int(os.environ.get("EXCURSION_THREADS", "1")))
    except ValueError:
        return 1


def _threaded_sweep(x: RealHandle, ts: np.ndarray) -> np.ndarray:
    workers = _thread_count()
    if workers == 1 or len(ts) < 4 * workers:
        return lattice.w_sweep(x, ts)
    chunks = np.array_split(ts, workers)
    lattice.w_sweep(x, ts[:1])  # warm the shared ladder cache once
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: lattice.w_sweep(x, c), chunks))
    return np.concatenate(parts)


def _pick_x(args) -> RealHandle:
    if getattr(args, "cf", None):
        if args.x:
            raise ExcursionError("--x and --cf are mutually exclusive")
        head, _, tail = args.cf.partition(";")
        quots = [int(t) for t in tail.replace(",", " ").split()] if tail.strip() else []
        return RealHandle(PartialQuotientStream(int(head), quots))
    if not args.x:
        raise ExcursionError("one of --x or --cf is required")
    return parse_real(args.x)


# -- subcommand bodies -------------------------------------------------------


def cmd_wfunc(args) -> int:
    x = _pick_x(args)
    ts = _grid(args.t0, args.t1, args.step)
    if not x.exact:
        x.ladder(min_height=int(math.ceil(math.exp(float(ts.max()) / 2.0 + 1))) + 1)
    ws = _threaded_sweep(x, ts)
    tent = lattice.tent_of(x)
    tents = tent(ts)
    _write(args.out, formats.sweep_csv(ts, ws, tents))
    if args.plot:
        from . import plotting

        plotting.save_sweep(args.plot, ts, ws, tents, args.x or args.cf)
    return 0


def cmd_verify_pl(args) -> int:
    x = _pick_x(args)
    ts = _grid(args.t0, args.t1, args.step)
    hi, lo = lattice.verify_pl(x, ts)
    tau = 1e-9
    ok = lo >= -tau and hi <= 2 * math.log(2) + tau
    print(f"min_excess {formats.sig12(lo)}")
    print(f"max_excess {formats.sig12(hi)}")
    print(f"bound {formats.sig12(2 * math.log(2))}")
    print("verdict " + ("within-bounds" if ok else "violated"))
    return 0 if ok else 2


def _coords(args) -> list[RealHandle]:
    coords = [parse_real(args.x)]
    if args.y:
        coords.append(parse_real(args.y))
    if args.z:
        coords.append(parse_real(args.z))
    return coords


def cmd_minima(args) -> int:
    coords = _coords(args)
    events = lattice.local_minima(coords, args.T)
    _write(args.out, formats.events_csv(events))
    if args.plot:
        from . import plotting

        plotting.save_events(args.plot, events, None, args.x)
    return 0


def cmd_certify(args) -> int:
    coords = _coords(args)
    report = lattice.divergence_certificate(coords, Fraction(args.delta), args.T)
    _write(args.out, formats.divergence_to_json(report))
    if args.plot:
        from . import plotting

        plotting.save_events(args.plot, report.events, report.threshold, args.x)
    print(f"verdict {report.verdict}")
    return 0 if report.verdict == "certified-above-threshold" else 2


def cmd_count_band(args) -> int:
    interval = _interval(args)
    count = count_heights_in_band(interval, args.h)
    scale = float(args.h * args.h * interval.width)  # reference h^2 |I|
    rows = [(interval.lo, interval.hi, args.h, None, count, scale, count / scale)]
    _write(args.out, formats.counts_csv(rows))
    print(f"count {count}")
    return 0


def cmd_count_floor(args) -> int:
    interval = _interval(args)
    count = count_floor_ratio(interval, args.q, args.b)
    bound = floor_ratio_bound(args.q, args.b, interval.width)
    ratio = count / float(bound) if bound else 0.0
    rows = [(interval.lo, interval.hi, args.q, args.b, count, float(bound), ratio)]
    _write(args.out, formats.counts_csv(rows))
    print(f"count {count}")
    return 0


def cmd_min_height(args) -> int:
    v = min_height_in_interval(_interval(args))
    print(f"{v.p}/{v.q}")
    return 0


def _jb_base(delta: Fraction, entries: int, seed: Optional[int]) -> ConvergentLadder:
    start = ladder_from_stream(PartialQuotientStream(0, [2]), 2)
    rng = random.Random(seed) if seed is not None else None
    return jb_ladder(delta, entries, start, rng=rng)


def cmd_cantor_build(args) -> int:
    delta = Fraction(args.delta)
    base = _jb_base(delta, args.base_entries, args.seed)
    k0, levels = cantor.build_levels_auto(
        base, args.depth, branch_cap=args.branch_cap, delta=delta
    )
    _write(args.out, formats.levels_to_json(levels))
    print(f"k0 {k0}")
    print(f"levels {len(levels)}")
    return 0


def cmd_cantor_verify(args) -> int:
    levels = formats.levels_from_json(Path(args.levels).read_text(encoding="utf-8"))
    report = cantor.verify_levels(levels)
    for chk in report.failures():
        print(f"FAIL {chk.name} level={chk.level} {chk.detail}", file=sys.stderr)
    print("verdict " + ("certified" if report.ok else "failed"))
    return 0 if report.ok else 2


def cmd_dim_lower(args) -> int:
    levels = formats.levels_from_json(Path(args.levels).read_text(encoding="utf-8"))
    ms, eps = [], []
    for lvl in levels[1:]:
        if lvl.m is None:
            break
        ms.append(lvl.m)
        eps.append(lvl.eps)
    if not ms:
        raise ExcursionError("no counted levels; nothing to estimate")
    est = cantor.lower_dim_estimate(ms, eps, j_min=args.j_min)
    _write(args.out, formats.quotients_csv(est.quotients))
    if args.plot:
        from . import plotting

        plotting.save_quotients(args.plot, est.quotients, Path(args.levels).name)
    print(f"proxy {formats.sig12(est.proxy)}")
    return 0


def cmd_cover_audit(args) -> int:
    delta = Fraction(args.delta)
    rng = random.Random(args.seed)
    if args.sample:
        audits = []
        for _ in range(args.sample):
            node = sample_node2(rng, delta)
            audits.append(cover.cover_sum_audit(node, args.s, args.a_max))
        payload = (
            "[\n"
            + ",\n".join(formats.cover_audit_to_json(a).rstrip("\n") for a in audits)
            + "\n]\n"
        )
        _write(args.out, payload)
        worst = max(a.certified_total / a.analytic_bound for a in audits)
        print(f"nodes {len(audits)}")
        print(f"worst_fraction {formats.sig12(worst)}")
        return 0 if all(a.ok for a in audits) else 2
    up, uq = (int(t) for t in args.u.split(","))
    vp, vq = (int(t) for t in args.v.split(","))
    node = cover.CoverNode2(PrimitiveVector(up, uq), PrimitiveVector(vp, vq), delta)
    audit = cover.cover_sum_audit(node, args.s, args.a_max)
    _write(args.out, formats.cover_audit_to_json(audit))
    print(f"certified_total {formats.sig12(audit.certified_total)}")
    print(f"analytic_bound {formats.sig12(audit.analytic_bound)}")
    return 0 if audit.ok else 2


def sample_node2(rng: random.Random, delta: Fraction) -> cover.CoverNode2:
    """A random covering-index node, either orientation."""
    while True:
        qu = rng.randint(1, 6)
        pu = rng.randint(0, qu)
        if math.gcd(pu, qu) != 1:
            continue
        factor = rng.randint(2, 4)
        qv_min = int(qu / delta) + 1
        qv = rng.randint(qv_min, factor * qv_min)
        pv = rng.randint(0, qv)
        if math.gcd(pv, qv) != 1:
            continue
        u, v = PrimitiveVector(pu, qu), PrimitiveVector(pv, qv)
        if rng.random() < 0.5:
            u, v = v, u
        return cover.CoverNode2(u, v, delta)


def cmd_dim_upper(args) -> int:
    delta = Fraction(args.delta)
    value = cover.upper_dim2(delta) if args.n == 2 else cover.upper_dimN(args.n, delta)
    print(formats.sig12(value))
    return 0


# -- parser ------------------------------------------------------------------


def _add_interval_flags(sp) -> None:
    sp.add_argument("--lo", required=True, help="exact rational lower endpoint")
    sp.add_argument("--hi", required=True, help="exact rational upper endpoint")
    sp.add_argument("--open-lo", action="store_true", dest="open_lo")
    sp.add_argument("--open-hi", action="store_true", dest="open_hi")


def build_parser() -> _Parser:
    p = _Parser(prog="excursion", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("wfunc", help="sweep w/tent/excess over a time grid")
    sp.add_argument("--x")
    sp.add_argument("--cf", help='explicit quotient stream "a0;a1,a2,..."')
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--t1", type=float, default=30.0)
    sp.add_argument("--step", type=float, default=0.01)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot")
    sp.set_defaults(func=cmd_wfunc)

    sp = sub.add_parser("verify-pl", help="check the sandwich bound on a grid")
    sp.add_argument("--x")
    sp.add_argument("--cf", help='explicit quotient stream "a0;a1,a2,..."')
    sp.add_argument("--t0", type=float, default=-5.0)
    sp.add_argument("--t1", type=float, default=30.0)
    sp.add_argument("--step", type=float, default=0.01)
    sp.set_defaults(func=cmd_verify_pl)

    sp = sub.add_parser("minima", help="exact local minima of the max excursion")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y")
    sp.add_argument("--z")
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot")
    sp.set_defaults(func=cmd_minima)

    sp = sub.add_parser("certify", help="divergence certificate for coordinates")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y")
    sp.add_argument("--z")
    sp.add_argument("--delta", required=True)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--out", default="certificate.json")
    sp.add_argument("--plot")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("count-band", help="rationals with height in [h, 2h]")
    _add_interval_flags(sp)
    sp.add_argument("--h", type=int, required=True)
    sp.add_argument("--out", default="counts.csv")
    sp.set_defaults(func=cmd_count_band)

    sp = sub.add_parser("count-floor", help="rationals with floor(q'/q) = b")
    _add_interval_flags(sp)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--out", default="counts.csv")
    sp.set_defaults(func=cmd_count_floor)

    sp = sub.add_parser("min-height", help="minimal-height rational in an interval")
    _add_interval_flags(sp)
    sp.set_defaults(func=cmd_min_height)

    sp = sub.add_parser("cantor-build", help="build nested-interval levels")
    sp.add_argument("--delta", default="1")
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--branch-cap", type=int, default=3, dest="branch_cap")
    sp.add_argument("--base-entries", type=int, default=8, dest="base_entries")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_cantor_build)

    sp = sub.add_parser("cantor-verify", help="certify built levels")
    sp.add_argument("--levels", required=True)
    sp.set_defaults(func=cmd_cantor_verify)

    sp = sub.add_parser("dim-lower", help="branching quotients from built levels")
    sp.add_argument("--levels", required=True)
    sp.add_argument("--j-min", type=int, default=2, dest="j_min")
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot")
    sp.set_defaults(func=cmd_dim_lower)

    sp = sub.add_parser("cover-audit", help="certified covering-sum audit")
    sp.add_argument("--u", help="p,q of the first index vector")
    sp.add_argument("--v", help="p,q of the second index vector")
    sp.add_argument("--delta", required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--a-max", type=int, default=200, dest="a_max")
    sp.add_argument("--sample", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="audit.json")
    sp.set_defaults(func=cmd_cover_audit)

    sp = sub.add_parser("dim-upper", help="closed-form dimension bound")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--delta", required=True)
    sp.set_defaults(func=cmd_dim_upper)

    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ExcursionError, ValueError, OSError) as exc:
        body = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(body) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
