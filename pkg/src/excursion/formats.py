"""Text, CSV, and JSON wire formats.

CSV columns are fixed and headers mandatory; decimals carry 12 significant
digits.  JSON reports are pretty-printed UTF-8 with keys in fixed order.
Exact rationals serialize as "p/q" strings so nothing is lost in transit.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from typing import Optional, Sequence

from .cantor import CantorLevel
from .cf import ConvergentLadder, PartialQuotientStream, PrimitiveVector
from .cover import CoverAudit
from .errors import ExcursionError
from .lattice import DivergenceReport


def sig12(x: float) -> str:
    return f"{x:.12g}"


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(text: str) -> Fraction:
    return Fraction(text)


# -- ladder / stream text ----------------------------------------------------


def ladder_to_text(ladder: ConvergentLadder) -> str:
    lines = [f"ladder v1 seed={'+1' if ladder.seed == 1 else '-1'}"]
    lines += [f"{v.p} {v.q}" for v in ladder.entries]
    return "\n".join(lines) + "\n"


def ladder_from_text(text: str) -> ConvergentLadder:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("ladder v1 seed="):
        raise ExcursionError("not a ladder v1 document")
    seed = 1 if lines[0].split("seed=")[1].strip() == "+1" else -1
    entries = []
    for ln in lines[1:]:
        p, q = ln.split()
        entries.append(PrimitiveVector(int(p), int(q)))
    quots = []
    prev = (seed, 0)
    for k in range(1, len(entries)):
        u, v = entries[k - 1], entries[k]
        a = (v.q - prev[1]) // u.q
        quots.append(a)
        prev = (u.p, u.q)
    ladder = ConvergentLadder(tuple(entries), seed, tuple(quots))
    ladder.check()
    return ladder


def stream_to_text(stream: PartialQuotientStream, count: Optional[int] = None) -> str:
    if count is None:
        if not stream.finite:
            raise ExcursionError("explicit count required for infinite streams")
        count = stream.available()
    terms = stream.prefix(count)
    tail = " ".join(str(a) for a in terms[1:])
    return f"cf v1: {terms[0]}; {tail}".rstrip() + "\n"


def stream_from_text(text: str) -> PartialQuotientStream:
    text = text.strip()
    if not text.startswith("cf v1:"):
        raise ExcursionError("not a cf v1 document")
    body = text[len("cf v1:") :].strip()
    head, _, tail = body.partition(";")
    quots = [int(tok) for tok in tail.split()]
    return PartialQuotientStream(int(head), quots)


# -- CSV ---------------------------------------------------------------------


def sweep_csv(ts, ws, tents) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "w_lattice", "tent", "excess"])
    for t, wv, tv in zip(ts, ws, tents):
        w.writerow([sig12(t), sig12(wv), sig12(tv), sig12(wv - tv)])
    return buf.getvalue()


def events_csv(events) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_j", "value", "u_height", "v_height"])
    for ev in events:
        u, v = ev.witnesses[0], ev.witnesses[-1]
        w.writerow([sig12(ev.t), sig12(ev.value), str(u.q), str(v.q)])
    return buf.getvalue()


def counts_csv(rows) -> str:
    """rows: (lo, hi, h_or_q, b_or_None, count, bound, ratio)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lo", "hi", "h_or_q", "b", "count", "bound", "ratio"])
    for lo, hi, hq, b, count, bound, ratio in rows:
        w.writerow(
            [
                frac_str(lo),
                frac_str(hi),
                str(hq),
                "" if b is None else str(b),
                str(count),
                sig12(float(bound)),
                sig12(float(ratio)),
            ]
        )
    return buf.getvalue()


def quotients_csv(quotients: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "quotient"])
    for j, q in enumerate(quotients, start=1):
        w.writerow([str(j), sig12(q)])
    return buf.getvalue()


# -- JSON --------------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def levels_to_json(levels: Sequence[CantorLevel]) -> str:
    out = []
    for lvl in levels:
        out.append(
            {
                "j": lvl.j,
                "h": lvl.h,
                "eps": frac_str(lvl.eps),
                "d": frac_str(lvl.d),
                "intervals": [{"p": c.p, "q": c.q} for c in lvl.centers],
                "parents": list(lvl.parents),
                "child_counts": list(lvl.child_counts),
                "m": lvl.m,
            }
        )
    return _dump({"levels": out})


def levels_from_json(text: str) -> list[CantorLevel]:
    doc = json.loads(text)
    levels = []
    for rec in doc["levels"]:
        levels.append(
            CantorLevel(
                j=rec["j"],
                h=rec["h"],
                eps=parse_frac(rec["eps"]),
                d=parse_frac(rec["d"]),
                centers=tuple(
                    PrimitiveVector(iv["p"], iv["q"]) for iv in rec["intervals"]
                ),
                parents=tuple(rec["parents"]),
                child_counts=tuple(rec["child_counts"]),
                m=rec["m"],
            )
        )
    return levels


def cover_audit_to_json(audit: CoverAudit) -> str:
    node = audit.node
    return _dump(
        {
            "node": {
                "u": {"p": node.u.p, "q": node.u.q},
                "v": {"p": node.v.p, "q": node.v.q},
            },
            "s": audit.s,
            "delta": frac_str(node.delta),
            "a_max": audit.a_max,
            "partial_sum": float(sig12(audit.partial_sum)),
            "tail_bound": float(sig12(audit.tail_bound)),
            "analytic_bound": float(sig12(audit.analytic_bound)),
            "certified_total": float(sig12(audit.certified_total)),
            "ok": audit.ok,
            "fibers": [
                {"a": f.a, "b": f.b, "count": f.count, "bound": f.bound}
                for f in audit.fibers
            ],
        }
    )


def divergence_to_json(report: DivergenceReport) -> str:
    return _dump(
        {
            "horizon": float(sig12(report.horizon)),
            "delta": frac_str(report.delta),
            "threshold": float(sig12(report.threshold)),
            "verdict": report.verdict,
            "t0": None if report.t0 is None else float(sig12(report.t0)),
            "violated_at": None
            if report.violated_at is None
            else float(sig12(report.violated_at)),
            "events": [
                {
                    "t": float(sig12(ev.t)),
                    "value": float(sig12(ev.value)),
                    "heights": [str(w.q) for w in ev.witnesses],
                }
                for ev in report.events
            ],
        }
    )
