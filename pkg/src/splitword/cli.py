"""Command-line entry point.

Every artifact embeds its full provenance (schedule spec, seed, sample
count, tool version) so that re-running the embedded configuration
reproduces the file byte-for-byte; the timestamp sits in a single
isolated field that determinism comparisons drop.

A JSON config file can supply any long-option default (keys named like
the flags, dashes allowed); explicit flags always win.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path as FsPath

from . import __version__, acceptance, metric, reconstruct
from .bigmath import mpf_str
from .coupling import canonical_coupling, partial_canonical_coupling
from .experiments import VERDICT_FAIL, bound_report
from .process import simulate_path
from .schedule import (
    build_schedule,
    build_selection_plan,
    condition_report,
    extract_schedule,
    parse_spec,
    spec_to_string,
)
from .words import Word


def _meta(args, **extra) -> dict:
    meta = {
        "tool": "splitword",
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    for key in ("spec", "seed", "samples", "scale"):
        if getattr(args, key, None) is not None:
            meta[key] = getattr(args, key)
    meta.update(extra)
    return meta


def _emit(payload: dict, rows: list[dict], args) -> None:
    """Write the artifact to --out (or stdout): JSON, with a CSV mirror."""
    fmt = getattr(args, "format", "json") or "json"
    out = getattr(args, "out", None)
    if out is None and os.environ.get("SPLITWORD_OUT_DIR"):
        out = os.path.join(
            os.environ["SPLITWORD_OUT_DIR"], f"{payload['meta']['command']}.{fmt}"
        )
    if fmt == "json":
        text = json.dumps(payload, indent=2, default=str) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        text = buf.getvalue()
    if out:
        FsPath(out).parent.mkdir(parents=True, exist_ok=True)
        FsPath(out).write_text(text, encoding="utf-8")
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _ell_repr(value: int) -> str:
    return str(value) if value.bit_length() <= 64 else f"2^{value.bit_length() - 1}~"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_classify(args) -> int:
    s = build_schedule(parse_spec(args.spec))
    report = condition_report(s, args.precision)
    rows = []
    for n in sorted(report.terms, reverse=True):
        rows.append(
            {
                "time": n,
                "ratio": _ell_repr(s.ratio(n)),
                "length": _ell_repr(s.ell(n)),
                "term": mpf_str(report.terms[n]),
                "tail_sum": mpf_str(report.tail_sums[n]),
                "factorial_term": mpf_str(report.factorial_terms[n]),
            }
        )
    payload = {
        "meta": _meta(args, command="classify", precision_bits=args.precision),
        "verdict": report.verdict,
        "verdict_basis": report.verdict_basis,
        "terms": rows,
    }
    print(f"verdict: {report.verdict} ({report.verdict_basis})")
    _emit(payload, rows, args)
    return 0


def cmd_plan(args) -> int:
    s = build_schedule(parse_spec(args.spec))
    plan = build_selection_plan(s)
    rows = [
        {
            "time": t,
            "alpha": str(a),
            "beta": str(plan.betas[t]),
            "lambda": str(int(a * s.ell(t))),
        }
        for t, a in zip(plan.times, plan.alphas)
    ]
    payload = {
        "meta": _meta(args, command="plan"),
        "times": list(plan.times),
        "alphas": [str(a) for a in plan.alphas],
        "even_mass": str(plan.even_mass),
        "odd_mass": str(plan.odd_mass),
        "strict_indices": list(plan.strict_indices),
        "rounding_violations": list(plan.rounding_violations),
        "diagnostic": plan.diagnostic,
        "selection": rows,
    }
    if plan.is_empty():
        print(f"empty plan: {plan.diagnostic}")
    else:
        print(f"selected times {list(plan.times)}; "
              f"masses even={float(plan.even_mass):.4g} odd={float(plan.odd_mass):.4g}")
    _emit(payload, rows, args)
    return 0


def cmd_extract(args) -> int:
    s = build_schedule(parse_spec(args.spec))
    keep = json.loads(args.keep)
    extracted = extract_schedule(s, keep)
    rows = [
        {
            "time": n,
            "length": _ell_repr(extracted.ell(n)),
            "ratio": _ell_repr(extracted.ratio(n)) if n > extracted.m else "",
        }
        for n in sorted(extracted.times(), reverse=True)
    ]
    payload = {
        "meta": _meta(args, command="extract", keep=keep),
        "block_len": _ell_repr(extracted.block_len),
        "base_alphabet": extracted.alphabet,
        "window": [extracted.m, 0],
        "levels": rows,
    }
    _emit(payload, rows, args)
    return 0


def cmd_simulate(args) -> int:
    s = build_schedule(parse_spec(args.spec))
    path = simulate_path(s, args.seed)
    path.check_splitting()
    records = []
    for n in sorted(path.X, reverse=True):
        rec = {"time": n, "word": path.X[n].literal()}
        if n in path.V:
            rec["innovation"] = path.V[n]
        records.append(rec)
    if args.dump:
        with open(args.dump, "w", encoding="utf-8") as fh:
            meta = _meta(args, command="simulate")
            fh.write(json.dumps({"meta": meta}) + "\n")
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
        print(f"wrote {args.dump}")
    else:
        for rec in records:
            print(json.dumps(rec))
    return 0


def cmd_couple(args) -> int:
    word = Word.from_literal(args.word, args.M if not args.partial else args.N)
    if args.partial:
        if args.ell is None or args.lam is None:
            raise SystemExit("--partial needs --ell and --lambda")
        phi = partial_canonical_coupling(word, args.ell, args.lam)
        block_len = args.ell
    else:
        phi = canonical_coupling(word)
        block_len = 1
    r = phi.degree
    m = args.N**args.lam if args.partial else args.M
    letters = word.letters if not args.partial else None
    matched, mismatched = [], []
    for i in range(1, r + 1):
        target_letter = (phi(i) - 1) % m + 1
        if args.partial:
            from .words import encode_blocks, tilde_extract

            codes = encode_blocks(tilde_extract(word, args.ell, args.lam), args.lam)
            actual = int(codes[i - 1])
        else:
            actual = int(letters[i - 1])
        (matched if target_letter == actual else mismatched).append(i)
    payload = {
        "meta": _meta(args, command="couple", block_len=block_len),
        "perm": [int(v) for v in phi.perm],
        "matched_positions": matched,
        "mismatched_positions": mismatched,
    }
    _emit(payload, [], args)
    return 0


def cmd_reconstruct(args) -> int:
    s = build_schedule(parse_spec(args.spec))
    if args.mode == "theoremB":
        result = reconstruct.full_chain(s, args.samples, args.seed)
        rows = []
        for n in sorted(result.per_time, reverse=True):
            st = result.per_time[n]
            rows.append(
                {
                    "time": n,
                    "match_frequency": st.frequency,
                    "step_bound": st.bound,
                    "bound_envelope": st.envelope,
                    "samples": st.samples,
                }
            )
        payload = {
            "meta": _meta(args, command="reconstruct-chain"),
            "template_match_frequency": result.template_matches / result.samples,
            "per_time": rows,
        }
    else:
        plan = reconstruct.ReconstructionPlan.from_json(
            FsPath(args.plan).read_text(encoding="utf-8")
        )
        result = reconstruct.partial_pipeline(
            s, plan, args.target, args.samples, args.seed
        )
        rows = []
        for k, st in enumerate(result.stats):
            rows.append(
                {
                    "pair": k,
                    "partial_time": st.partial_time,
                    "checkpoint_time": st.checkpoint_time,
                    "alpha": str(st.alpha),
                    "origin_frequency": st.a_frequency,
                    "prefix_match_frequency": st.prefix_match_frequency,
                    "prefix_mismatch_bound": st.prefix_bound,
                    "joint_success_frequency": st.joint_success_frequency,
                    "conditional_success_frequency":
                        st.conditional_success_frequency,
                    "samples": st.samples,
                }
            )
        payload = {
            "meta": _meta(args, command="reconstruct-partial",
                          target=args.target, plan=json.loads(plan.to_json())),
            "pairs": rows,
        }
    _emit(payload, rows, args)
    return 0


def cmd_metric(args) -> int:
    s = build_schedule(parse_spec(args.spec))
    if args.mode == "e":
        x = Word.from_literal(args.x, args.N)
        y = Word.from_literal(args.y, args.N)
        value = metric.e_exact(s, args.n, args.n0, x, y)
        payload = {
            "meta": _meta(args, command="metric-e", n=args.n, n0=args.n0),
            "num": value.numerator,
            "den": value.denominator,
            "decimal": float(value),
        }
        if args.oracle:
            oracle = metric.e_bruteforce(s, args.n, args.n0, x, y)
            payload["oracle_num"] = oracle.numerator
            payload["oracle_den"] = oracle.denominator
            payload["oracle_agrees"] = (
                oracle.numerator == value.numerator
                and oracle.denominator == value.denominator
            )
        _emit(payload, [payload], args)
        return 0
    if args.mode == "autcount":
        count = metric.aut_count(s, args.n, args.n0)
        payload = {
            "meta": _meta(args, command="metric-autcount", n=args.n, n0=args.n0),
            "count": _ell_repr(count.count),
            "count_bits": count.count.bit_length(),
            "log_count_over_length": mpf_str(count.s_value),
            "terms": {str(k): mpf_str(v) for k, v in count.terms.items()},
        }
        _emit(payload, [], args)
        return 0
    # tailbound
    choice = metric.choose_n0(s)
    n = args.n if args.n is not None else s.m
    alpha = args.alpha if args.alpha is not None else choice.alpha_mid
    ell = s.ell(n)
    bound, threshold = metric.tail_bound(s.alphabet, alpha, ell, choice.s_value)
    import numpy as np

    from .metric import e_exact_batch_ratio2
    from .process import stream

    hits = 0
    done = 0
    b = 0
    batch = max(1, (1 << 22) // ell)
    while done < args.samples:
        take = min(batch, args.samples - done)
        xs = stream(args.seed, b, 0).integers(
            1, s.alphabet + 1, size=(take, ell), dtype=np.uint8
        )
        ys = stream(args.seed, b, 1).integers(
            1, s.alphabet + 1, size=(take, ell), dtype=np.uint8
        )
        nums = e_exact_batch_ratio2(s, n, choice.n0, xs, ys)
        hits += int(np.count_nonzero(nums <= threshold * ell))
        done += take
        b += 1
    payload = {
        "meta": _meta(args, command="metric-tailbound", n=n, n0=choice.n0),
        "alpha": alpha,
        "threshold": threshold,
        "empirical": hits / args.samples,
        "bound": bound,
    }
    _emit(payload, [payload], args)
    return 0


def cmd_verify(args) -> int:
    results = acceptance.run_all(args.seed, args.scale)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.cid}: {r.name} -- {r.details}")
    checks = [c for r in results for c in r.checks]
    payload = {
        "meta": _meta(args, command="verify"),
        "criteria": [r.to_record(include_duration=False) for r in results],
        "all_passed": all(r.passed for r in results),
        "feasible_all_passed": all(r.passed or r.infeasible for r in results),
    }
    if checks:
        payload["bound_checks"] = bound_report(checks).to_csv_rows()
    rows = [
        {"id": r.cid, "name": r.name, "passed": r.passed,
         "infeasible": r.infeasible}
        for r in results
    ]
    _emit(payload, rows, args)
    failed = [r for r in results if not r.passed]
    if not failed:
        return 0
    print(f"{len(failed)} criteria failed: {', '.join(r.cid for r in failed)}")
    return 1


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitword",
        description="Split-word process laboratory: schedules, couplings, "
        "reconstructions, orbit metrics, and the verification suite.",
    )
    parser.add_argument("--config", help="JSON file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec=True):
        if spec:
            p.add_argument("--spec", required=True,
                           help="schedule spec, e.g. const:r=2,depth=10,N=2")
        p.add_argument("--out", help="output file (default: stdout or "
                                     "$SPLITWORD_OUT_DIR)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("classify", help="divergence-condition report")
    common(p)
    p.add_argument("--precision", type=int, default=256)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("plan", help="constructive selection plan")
    common(p)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("extract", help="extract a subsequence schedule")
    common(p)
    p.add_argument("--keep", required=True, help="JSON list of kept times")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("simulate", help="simulate one path")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dump", help="write JSON lines to this file")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("couple", help="canonical coupling of a word")
    p.add_argument("--word", required=True)
    p.add_argument("--M", type=int, default=2, help="alphabet size (full coupling)")
    p.add_argument("--N", type=int, default=2, help="base alphabet (partial)")
    p.add_argument("--partial", action="store_true")
    p.add_argument("--ell", type=int)
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_couple)

    p = sub.add_parser("reconstruct", help="reconstruction pipelines")
    psub = p.add_subparsers(dest="mode", required=True)
    for mode, need_plan in (("theoremB", False), ("theoremC", True)):
        q = psub.add_parser(mode)
        common(q)
        q.add_argument("--samples", type=int, required=True)
        q.add_argument("--seed", type=int, required=True)
        if need_plan:
            q.add_argument("--plan", required=True,
                           help='JSON plan {"times": [...], "alphas": [...]}')
            q.add_argument("--target", type=int, default=0)
        q.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("metric", help="orbit metric operations")
    msub = p.add_subparsers(dest="mode", required=True)
    q = msub.add_parser("e")
    common(q)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--n0", type=int, required=True)
    q.add_argument("--x", required=True)
    q.add_argument("--y", required=True)
    q.add_argument("--N", type=int, default=2)
    q.add_argument("--oracle", action="store_true")
    q.set_defaults(fn=cmd_metric)
    q = msub.add_parser("autcount")
    common(q)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--n0", type=int, required=True)
    q.set_defaults(fn=cmd_metric)
    q = msub.add_parser("tailbound")
    common(q)
    q.add_argument("--alpha", type=float)
    q.add_argument("--samples", type=int, required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--n", type=int)
    q.set_defaults(fn=cmd_metric)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scale", type=float, default=1.0,
                   help="sample-count multiplier for quick runs")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = json.loads(FsPath(args.config).read_text(encoding="utf-8"))
        for key, value in defaults.items():
            attr = key.replace("-", "_")
            if getattr(args, attr, None) in (None, False):
                setattr(args, attr, value)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
