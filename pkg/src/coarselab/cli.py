"""Command-line entry point.

Every run echoes its effective configuration as ``# key<TAB>value`` lines,
then prints a TSV (or CSV) table. ``--json`` emits one JSON object holding
both instead. Exit status is 0 on success, 1 on a domain error and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import ai_tools, cover, entropy, optimize, stable_norm
from .metric_graph import GraphError, generator_names, load_graph


class UsageError(Exception):
    pass


@dataclass
class Report:
    """Result of one command: table text plus the same content as a dict."""

    text: str
    data: dict
    extra_files: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# Helpers


def _vector(text: str) -> tuple[int, int]:
    try:
        p, q = (int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected p,q integers, got {text!r}") from None
    return p, q


def _positive(kind):
    def check(text):
        try:
            val = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return val

    return check


def _nonnegative(text):
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if val < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return val


def _tsv(rows, header) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _words(g, path: str):
    names = generator_names(g)
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(cover.parse_word(line, names))
    return out, names


# ----------------------------------------------------------------------
# Commands


def cmd_entropy(args) -> Report:
    g = load_graph(args.graph)
    if args.compare:
        other = load_graph(args.compare)
        c = entropy.compare_entropies(g, other, args.tol)
        data = {"h1": c.entropy1, "h2": c.entropy2, "gap": c.gap, "tolerance": c.tolerance, "verdict": c.verdict}
        return Report(_tsv([list(data.values())], list(data)), data)
    if args.method == "perron":
        rep = entropy.perron_entropy(g, tol=args.tol)
    else:
        source = "ball_measure" if args.method == "ball" else "covering_s1"
        rep = entropy.empirical_entropy(g, args.r_min, args.r_max, args.step, source=source)
    return Report(rep.to_tsv(), rep.to_dict())


def cmd_minimize(args) -> Report:
    g = load_graph(args.graph)
    if args.restarts:
        seeds = [args.seed + k for k in range(args.restarts)]
        results = optimize.restarts(g, seeds, args.tol, args.max_iter, workers=args.workers)
        res = min(results, key=lambda r: (r.entropy, r.seed))
    else:
        results = []
        res = optimize.minimize_entropy(g, args.tol, args.max_iter)
    out_graph = g.with_lengths(res.lengths.values)
    rows = [[i, v] for i, v in enumerate(res.lengths.values)]
    text = "\n".join(
        [
            f"# entropy\t{res.entropy!r}",
            f"# iterations\t{res.iterations}",
            f"# gradient_norm\t{res.gradient_norm!r}",
            f"# converged\t{int(res.converged)}",
            f"# degree_warning\t{int(res.degree_warning)}",
        ]
    )
    if results:
        text += "\nseed\tentropy\tconverged\n" + "".join(
            f"{r.seed}\t{r.entropy!r}\t{int(r.converged)}\n" for r in results
        )
        text = text.rstrip("\n")
    text += "\n" + _tsv(rows, ["edge", "length"])
    data = {
        "entropy": res.entropy,
        "lengths": list(res.lengths.values),
        "iterations": res.iterations,
        "gradient_norm": res.gradient_norm,
        "converged": res.converged,
        "degree_warning": res.degree_warning,
        "restarts": [{"seed": r.seed, "entropy": r.entropy, "converged": r.converged} for r in results],
    }
    extra = {}
    if args.graph_out:
        extra[args.graph_out] = out_graph.to_json() + "\n"
    if args.trace:
        extra[args.trace] = res.trace_tsv()
    return Report(text, data, extra)


def cmd_covering(args) -> Report:
    g = load_graph(args.graph)
    rs = [args.r] if args.r is not None else [float(r) for r in _radii(args)]
    rows = []
    for r in rs:
        row = [r, cover.ball_measure(g, r), cover.covering_number(g, args.s, r)]
        if args.packing:
            row.append(cover.packing_number(g, args.s, r))
        rows.append(row)
    header = ["r", "measure", "covering"] + (["packing"] if args.packing else [])
    data = {"s": args.s, "rows": [dict(zip(header, row)) for row in rows]}
    return Report(_tsv(rows, header), data)


def _radii(args):
    if args.r_min is None or args.r_max is None:
        raise UsageError("give --r or both --r-min and --r-max")
    r, out = args.r_min, []
    while r <= args.r_max + 1e-9:
        out.append(r)
        r += args.step
    return out


def cmd_mls(args) -> Report:
    g0 = load_graph(args.graph)
    words, names = _words(g0, args.words)
    g1 = load_graph(args.other) if args.other else g0
    if [(e.u, e.v) for e in g1.edges] != [(e.u, e.v) for e in g0.edges]:
        raise GraphError("the two graphs must share one topology")
    cmp = ai_tools.compare_mls(g0, g0.lengths, g1.lengths, words, names)
    data = {
        "verdict": cmp.verdict,
        "rows": [{"word": r.word, "length0": r.length0, "length1": r.length1, "equal": r.equal} for r in cmp.rows],
    }
    return Report(cmp.to_tsv(), data)


def cmd_ai(args) -> Report:
    x = ai_tools.load_metric_space(args.x)
    y = ai_tools.load_metric_space(args.y)
    if args.ai_command == "verify":
        table = ai_tools.parse_assignment(Path(args.map).read_text())
        cert = ai_tools.verify_map(x, y, table)
        data = {"stretch": cert.stretch, "additive": cert.additive, "onto_radius": cert.onto_radius}
        if args.inverse:
            inv = ai_tools.round_trip(x, y, cert)
            data.update(
                inverse_stretch=inv.inverse.stretch,
                inverse_additive=inv.inverse.additive,
                inverse_onto_radius=inv.inverse.onto_radius,
                source_displacement=inv.source_displacement,
                target_displacement=inv.target_displacement,
            )
        return Report(_tsv([list(data.values())], list(data)), data)
    if args.ai_command == "search":
        table = ai_tools.search_ai(x, y, args.c, args.max_points)
        if table is None:
            return Report("# found\t0\n", {"found": False, "assignment": None})
        text = "# found\t1\n" + ai_tools.format_assignment(table)
        return Report(text, {"found": True, "assignment": table})
    c = ai_tools.min_ai_constant(x, y, args.max_points)
    return Report(_tsv([[c]], ["min_c"]), {"min_c": c})


def cmd_pushforward(args) -> Report:
    g = load_graph(args.graph)
    names = generator_names(g)
    w = cover.parse_word(args.word, names)
    if args.identity:
        phi = psi = ai_tools.identity_map
    else:
        phi = ai_tools.JitterMap(args.c, args.seed)
        psi = ai_tools.JitterMap(args.c, args.seed + 1)
    rep = ai_tools.pushforward_check(g, phi, psi, w, args.r, args.c, args.pairs, args.seed)
    data = {
        "word": rep.word,
        "max_distortion": rep.max_distortion,
        "bound": rep.bound,
        "pairs": rep.n_pairs,
        "ok": rep.ok,
    }
    return Report(_tsv([list(data.values())], list(data)), data)


def _periodic(path):
    return stable_norm.PeriodicGraph(load_graph(path))


def cmd_stable_norm(args) -> Report:
    est = stable_norm.stable_norm(_periodic(args.graph), args.vector, args.n)
    data = {"vx": est.vector[0], "vy": est.vector[1], "n": est.n, "norm": est.value, "err": est.error_bound}
    return Report(_tsv([list(data.values())], list(data)), data)


def cmd_unit_ball(args) -> Report:
    samples = stable_norm.unit_ball(_periodic(args.graph), args.dirs, args.n, args.workers)
    text = stable_norm.unit_ball_csv(samples)
    rows = [{"vx": s.vector[0], "vy": s.vector[1], "norm": s.norm, "err": s.err} for s in samples]
    try:
        resid = stable_norm.ellipse_residual([s.point for s in samples])
    except stable_norm.EllipseFitError as exc:
        resid = None
        text = f"# ellipse_fit\t{exc}\n" + text
    else:
        text = f"# ellipse_residual\t{resid!r}\n" + text
    return Report(text, {"ellipse_residual": resid, "samples": rows})


# ----------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--json", action="store_true", help="emit one JSON object")

    p = argparse.ArgumentParser(prog="coarselab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("entropy", parents=[common], help="volume entropy of a graph's cover")
    e.add_argument("graph")
    e.add_argument("--method", choices=["perron", "ball", "covering"], default="perron")
    e.add_argument("--tol", type=_positive(float), default=1e-12)
    e.add_argument("--r-min", type=_positive(float), default=5.0)
    e.add_argument("--r-max", type=_positive(float), default=15.0)
    e.add_argument("--step", type=_positive(float), default=1.0)
    e.add_argument("--compare", metavar="GRAPH", help="compare entropies with a second graph")
    e.set_defaults(func=cmd_entropy)

    m = sub.add_parser("minimize", parents=[common], help="minimize entropy at total length 1")
    m.add_argument("graph")
    m.add_argument("--tol", type=_positive(float), default=1e-6)
    m.add_argument("--max-iter", type=_positive(int), default=2000)
    m.add_argument("--restarts", type=int, default=0, help="random restarts seeded from --seed")
    m.add_argument("--workers", type=_positive(int), default=1)
    m.add_argument("--graph-out", help="write the minimizing metric as a graph file")
    m.add_argument("--trace", help="write the convergence trace as TSV")
    m.set_defaults(func=cmd_minimize)

    c = sub.add_parser("covering", parents=[common], help="ball measure and covering counts")
    c.add_argument("graph")
    c.add_argument("--s", type=_positive(float), default=1.0)
    c.add_argument("--r", type=_nonnegative)
    c.add_argument("--r-min", type=_nonnegative)
    c.add_argument("--r-max", type=_nonnegative)
    c.add_argument("--step", type=_positive(float), default=1.0)
    c.add_argument("--packing", action="store_true", help="also report packing counts")
    c.set_defaults(func=cmd_covering)

    ml = sub.add_parser("mls", parents=[common], help="translation lengths of words")
    ml.add_argument("graph")
    ml.add_argument("other", nargs="?", help="same topology, other lengths")
    ml.add_argument("--words", required=True, help="file with one word per line")
    ml.set_defaults(func=cmd_mls)

    a = sub.add_parser("ai", help="almost-isometries between finite metric spaces")
    asub = a.add_subparsers(dest="ai_command", required=True)
    av = asub.add_parser("verify", parents=[common])
    av.add_argument("x")
    av.add_argument("y")
    av.add_argument("map", help="assignment file with lines 'x -> y'")
    av.add_argument("--inverse", action="store_true", help="also certify the coarse inverse")
    asr = asub.add_parser("search", parents=[common])
    asr.add_argument("x")
    asr.add_argument("y")
    asr.add_argument("--c", type=_nonnegative, required=True)
    amc = asub.add_parser("min-c", parents=[common])
    amc.add_argument("x")
    amc.add_argument("y")
    for sp in (av, asr, amc):
        sp.add_argument("--max-points", type=_positive(int), default=ai_tools.DEFAULT_MAX_POINTS)
        sp.set_defaults(func=cmd_ai)

    pf = sub.add_parser("pushforward-check", parents=[common], help="distortion of a pushed-forward deck map")
    pf.add_argument("graph")
    pf.add_argument("--word", default="a")
    pf.add_argument("--c", type=_nonnegative, default=0.2)
    pf.add_argument("--r", type=_positive(float), default=8.0)
    pf.add_argument("--pairs", type=_positive(int), default=200)
    pf.add_argument("--identity", action="store_true", help="use identity maps instead of jitters")
    pf.set_defaults(func=cmd_pushforward)

    sn = sub.add_parser("stable-norm", parents=[common], help="stable norm of a periodic graph")
    sn.add_argument("graph")
    sn.add_argument("--vector", type=_vector, required=True)
    sn.add_argument("--n", type=_positive(int), default=16)
    sn.set_defaults(func=cmd_stable_norm)

    ub = sub.add_parser("unit-ball", parents=[common], help="sample the stable-norm unit ball")
    ub.add_argument("graph")
    ub.add_argument("--dirs", type=int, default=16)
    ub.add_argument("--n", type=_positive(int), default=16)
    ub.add_argument("--workers", type=_positive(int), default=1)
    ub.set_defaults(func=cmd_unit_ball)
    return p


def _config(args) -> dict:
    skip = {"func", "out", "json"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _plain(obj):
    """JSON-safe copy: tuples become lists and non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "item"):  # numpy scalars
        return _plain(obj.item())
    return obj


def _render(args, report: Report) -> str:
    config = _config(args)
    if args.json:
        payload = _plain({"config": config, "result": report.data})
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"
    head = "".join(f"# config.{k}\t{_fmt(v)}\n" for k, v in config.items())
    return head + report.text


DOMAIN_ERRORS = (
    GraphError,
    ai_tools.MetricSpaceError,
    ai_tools.SizeBoundExceeded,
    stable_norm.EllipseFitError,
    cover.BudgetExceeded,
    entropy.ConvergenceError,
    OSError,
    ValueError,
)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except cover.BudgetExceeded as exc:
        print(f"error: {exc} (partial result discarded)", file=sys.stderr)
        return 1
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = _render(args, report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for path, content in report.extra_files.items():
        Path(path).write_text(content)
    return 0


if __name__ == "__main__":
    sys.exit(main())
