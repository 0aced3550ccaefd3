"""Command-line entry point: ``triarch <subcommand> ...``.

Every subcommand writes its outputs into ``--out`` together with ``run.json``
(the resolved parameters). ``triarch rerun run.json --out DIR`` repeats the
run from that file. Outputs are staged in a temporary directory and moved
into place only on success.

Exit codes: 0 success, 2 invalid arguments or input, 3 I/O failure,
4 numerical blow-up in the layout.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

from triarch import __version__
from triarch.attrition import (
    REPORT_HEADER,
    activity_histogram,
    diff_attrition,
    matrix_distance,
    mixing_matrix,
)
from triarch.centrality import betweenness, size_scale
from triarch.errors import NumericalBlowup, UndefinedMatrix, ValidationError
from triarch.glocality import (
    Gazetteer,
    TopicLexicon,
    build_scale_network,
    chi_square_independence,
    coarsest,
    cross_topic_edge_fraction,
    extract_all,
    local_global_partition,
    page_topic_mixes,
)
from triarch.graph import STANCE_ORDER, degree_stats, stance_counts
from triarch.ingest import load_manifest, load_posts, load_snapshot, read_kv, save_snapshot
from triarch.layout import LayoutParams, layout_rows, render_svg, run_layout
from triarch.softening import (
    MILESTONE_HEADER,
    RUN_HEADER,
    TRAJECTORY_HEADER,
    SofteningConfig,
    run_ensemble,
    snapshot_states,
)
from triarch.synth import GeneratorConfig, apply_removal, generate, reference_pair

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_BLOWUP = 0, 2, 3, 4


def default_threads() -> int:
    env = os.environ.get("TRIARCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _write_csv(path: Path, header, rows, comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _abspath(p):
    return None if p is None else str(Path(p).resolve())


# -- subcommands: resolve(args) -> params, execute(params, out_dir, threads) ---


def resolve_ingest(args):
    return {
        "input": _abspath(args.input),
        "window": [args.window_start, args.window_end],
        "depth": args.depth,
    }


def execute_ingest(p, out: Path, threads: int):
    s = load_snapshot(p["input"])
    save_snapshot(s, out)
    deg = degree_stats(s)
    _write_csv(out / "degrees.csv", ("id", "in_degree", "out_degree", "total_degree"),
               ((nid, *deg[nid]) for nid in s.ids))
    counts = stance_counts(s)
    _write_csv(out / "stance_counts.csv", ("stance", "node_count", "fan_sum"),
               ((st.value, *counts[st]) for st in STANCE_ORDER))
    manifest = load_manifest(p["input"])
    if manifest.posts is not None:
        posts = load_posts(manifest.posts)
        hist = activity_histogram(posts, s, tuple(p["window"]), p["depth"])
        _write_csv(out / "activity.csv", ("stance", "month", "count"), hist.rows())


def resolve_diff(args):
    return {"before": _abspath(args.before), "after": _abspath(args.after), "attribution": args.attribution}


def execute_diff(p, out: Path, threads: int):
    before, after = load_snapshot(p["before"]), load_snapshot(p["after"])
    report = diff_attrition(before, after, p["attribution"])
    _write_csv(out / "attrition.csv", REPORT_HEADER, report.rows())
    mats = {"before": mixing_matrix(before), "after": mixing_matrix(after)}
    rows = []
    for name, m in mats.items():
        for a in STANCE_ORDER:
            for b in STANCE_ORDER:
                rows.append((name, a.value, b.value, repr(m[a, b]) if m.defined else ""))
    _write_csv(out / "mixing.csv", ("snapshot", "source_stance", "target_stance", "fraction"), rows)
    try:
        dist = repr(matrix_distance(mats["before"], mats["after"]))
    except UndefinedMatrix:
        dist = ""
    _write_csv(out / "mixing_distance.csv", ("l1_distance",), [(dist,)])


def resolve_centrality(args):
    return {"input": _abspath(args.input), "directed": args.directed, "normalized": args.normalized}


def execute_centrality(p, out: Path, threads: int):
    s = load_snapshot(p["input"])
    scores = betweenness(s, p["directed"], p["normalized"], workers=threads)
    _write_csv(out / "centrality.csv", ("id", "betweenness"), scores.rows())


def resolve_layout(args):
    return {
        "input": _abspath(args.input),
        "seed": args.seed,
        "params": {
            "scaling": args.scaling,
            "gravity": args.gravity,
            "theta": args.theta,
            "jitter_tolerance": args.jitter_tolerance,
            "speed": args.speed,
            "max_speed": args.max_speed,
            "tolerance": args.tolerance,
            "max_iter": args.iterations,
            "barnes_hut": args.barnes_hut,
        },
        "min_px": args.min_px,
        "max_px": args.max_px,
    }


def execute_layout(p, out: Path, threads: int):
    s = load_snapshot(p["input"])
    try:
        params = LayoutParams(**p["params"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    pos = run_layout(s, params, p["seed"])
    _write_csv(out / "layout.csv", ("id", "x", "y"), layout_rows(pos))
    sizes = size_scale(betweenness(s, workers=threads), p["min_px"], p["max_px"]) if s.n else {}
    (out / "layout.svg").write_text(render_svg(s, pos, sizes), encoding="utf-8")


def resolve_glocality(args):
    return {
        "input": _abspath(args.input),
        "lexicon": _abspath(args.lexicon),
        "gazetteer": _abspath(args.gazetteer),
    }


def execute_glocality(p, out: Path, threads: int):
    s = load_snapshot(p["input"])
    gaz = Gazetteer.from_file(p["gazetteer"]) if p["gazetteer"] else Gazetteer.default()
    toponyms = extract_all(s, gaz)
    _write_csv(out / "toponyms.csv", ("page_id", "toponym", "scale"),
               ((nid, r.toponym, r.scale.label) for nid in s.ids for r in toponyms[nid]))
    net = build_scale_network(s, toponyms)
    _write_csv(out / "scale_network.csv", ("source", "target", "scale_a", "scale_b"), net.rows())
    part = local_global_partition(toponyms, s)
    local = set(part.local)
    no_top = set(part.no_toponym)
    _write_csv(out / "partition.csv", ("page_id", "partition", "coarsest_scale"),
               ((nid, "local" if nid in local else "global",
                 "" if nid in no_top else coarsest(toponyms[nid]).label) for nid in s.ids))
    _write_csv(out / "partition_summary.csv", ("partition", "pages", "fan_sum", "no_toponym_pages"),
               [("local", len(part.local), part.local_fans, 0),
                ("global", len(part.global_), part.global_fans, len(part.no_toponym))])
    _write_csv(out / "categories.csv", ("page_id", "category"),
               ((n.id, n.subcategory or n.stance.value) for n in s.nodes))
    # partition x stance contingency
    table = [[sum(1 for n in s.nodes if (n.id in local) == is_local and n.stance is st) for st in STANCE_ORDER]
             for is_local in (True, False)]
    try:
        chi = chi_square_independence(table)
        chi_row = (repr(chi.statistic), chi.dof, repr(chi.p_value))
    except ValidationError:
        chi_row = ("", "", "")
    _write_csv(out / "chisquare.csv", ("statistic", "dof", "p_value"), [chi_row])

    manifest = load_manifest(p["input"])
    if manifest.posts is not None:
        lex = TopicLexicon.from_file(p["lexicon"]) if p["lexicon"] else TopicLexicon.default()
        mixes = page_topic_mixes(load_posts(manifest.posts), s, lex)
        _write_csv(out / "topics.csv", ("page_id", "topic", "proportion"),
                   ((nid, t, repr(v)) for nid in s.ids for t, v in mixes[nid].proportions.items()))
        cross = cross_topic_edge_fraction(s, mixes)
        _write_csv(out / "cross_topic.csv", ("fraction", "cross_edges", "counted_edges", "excluded_edges"),
                   [(repr(cross.fraction), cross.cross_edges, cross.counted_edges, cross.excluded_edges)])


SIM_FLAGS = {
    "circle_size": "circle_size",
    "circles_per_step": "circles_per_step",
    "p_convert": "conversion_probability",
    "scenario": "scenario",
    "mixed_rule": "mixed_rule",
    "max_steps": "max_steps",
    "runs": "run_count",
    "seed": "seed",
    "hours_per_step": "hours_per_step",
    "record_run": "record_run",
}


def resolve_simulate(args):
    cfg = read_kv(args.config) if args.config else {}
    for flag, key in SIM_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            cfg[key] = value
    config = SofteningConfig.from_dict(cfg)
    return {
        "input": _abspath(args.input),
        "config": config.to_dict(),
        "record_steps": sorted(set(args.record_steps or [])),
        "per_run": args.per_run,
    }


def execute_simulate(p, out: Path, threads: int):
    if p["input"]:
        s = load_snapshot(p["input"])
    else:
        s = reference_pair()[1]
    config = SofteningConfig.from_dict(p["config"])
    result = run_ensemble(s, config, workers=threads)
    tag = f"mixed_rule={config.mixed_rule.value} scenario={config.scenario.value}"
    _write_csv(out / "trajectory.csv", TRAJECTORY_HEADER, result.trajectory_rows(), comment=tag)
    _write_csv(out / "milestones.csv", MILESTONE_HEADER, result.milestone_rows(), comment=tag)
    if p["per_run"]:
        _write_csv(out / "runs.csv", RUN_HEADER, result.run_rows(), comment=tag)
    if p["record_steps"]:
        snaps = snapshot_states(result, p["record_steps"])
        rows = ((t, n.id, n.stance.value) for t, snap in zip(p["record_steps"], snaps) for n in snap.nodes)
        _write_csv(out / "states.csv", ("step", "id", "stance"), rows, comment=tag)


def resolve_generate(args):
    cfg = read_kv(args.config) if args.config else {}
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.label is not None:
        cfg["label"] = args.label
    try:
        config = GeneratorConfig.from_dict(cfg)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    removal = None
    if args.remove is not None:
        removal = dict(zip(("anti", "pro", "neutral"), args.remove))
    return {"config": config.to_dict(), "removal": removal, "removal_seed": args.removal_seed}


def execute_generate(p, out: Path, threads: int):
    config = GeneratorConfig.from_dict(p["config"])
    s = generate(config)
    save_snapshot(s, out)
    if p["removal"]:
        fractions = {st: p["removal"][st.value] for st in STANCE_ORDER}
        after = apply_removal(s, fractions, p["removal_seed"])
        save_snapshot(after, out, stem="after_")


COMMANDS = {
    "ingest": (resolve_ingest, execute_ingest),
    "diff": (resolve_diff, execute_diff),
    "centrality": (resolve_centrality, execute_centrality),
    "layout": (resolve_layout, execute_layout),
    "glocality": (resolve_glocality, execute_glocality),
    "simulate": (resolve_simulate, execute_simulate),
    "generate": (resolve_generate, execute_generate),
}


# -- parser -------------------------------------------------------------------


def _fraction_list(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions: anti,pro,neutral")
    try:
        return [float(x) for x in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numbers: {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not integers: {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """Argument errors also emit the JSON error report before exiting with 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        report = {"error": "BadArgs", "message": f"{self.prog}: {message}", "exit_code": EXIT_INVALID}
        print(json.dumps(report), file=sys.stderr)
        sys.exit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triarch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"triarch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        sp.add_argument("--threads", type=int, default=default_threads(),
                        help="worker cap; env TRIARCH_THREADS (default: machine parallelism, here %(default)s)")
        return sp

    sp = add("ingest", "validate a snapshot and export normalized tables")
    sp.add_argument("--input", required=True, help="snapshot manifest (default: required)")
    sp.add_argument("--window-start", default="2025-01", help="first month of the activity window (default: %(default)s)")
    sp.add_argument("--window-end", default="2025-06", help="last month of the activity window (default: %(default)s)")
    sp.add_argument("--depth", type=int, default=10, help="most recent posts counted per page (default: %(default)s)")

    sp = add("diff", "node/edge attrition and stance mixing between two snapshots")
    sp.add_argument("--before", required=True, help="earlier snapshot manifest (default: required)")
    sp.add_argument("--after", required=True, help="later snapshot manifest (default: required)")
    sp.add_argument("--attribution", choices=("incident", "source"), default="incident",
                    help="edge-to-stance attribution (default: %(default)s)")

    sp = add("centrality", "betweenness centrality")
    sp.add_argument("--input", required=True, help="snapshot manifest (default: required)")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--directed", dest="directed", action="store_true", default=True,
                   help="follow edge direction (default: %(default)s)")
    g.add_argument("--undirected", dest="directed", action="store_false", help="ignore edge direction (default: False)")
    sp.add_argument("--normalized", action="store_true", default=False,
                    help="divide by the number of node pairs (default: %(default)s)")

    d = LayoutParams()
    sp = add("layout", "force-directed layout with SVG rendering")
    sp.add_argument("--input", required=True, help="snapshot manifest (default: required)")
    sp.add_argument("--seed", type=int, default=0, help="initial-position seed (default: %(default)s)")
    sp.add_argument("--iterations", type=int, default=d.max_iter, help="maximum iterations (default: %(default)s)")
    sp.add_argument("--scaling", type=float, default=d.scaling, help="repulsion scaling (default: %(default)s)")
    sp.add_argument("--gravity", type=float, default=d.gravity, help="gravity strength (default: %(default)s)")
    sp.add_argument("--theta", type=float, default=d.theta, help="Barnes-Hut opening angle (default: %(default)s)")
    sp.add_argument("--jitter-tolerance", type=float, default=d.jitter_tolerance,
                    help="global speed tolerance (default: %(default)s)")
    sp.add_argument("--speed", type=float, default=d.speed, help="local speed factor (default: %(default)s)")
    sp.add_argument("--max-speed", type=float, default=d.max_speed,
                    help="cap on per-step displacement (default: %(default)s)")
    sp.add_argument("--tolerance", type=float, default=d.tolerance,
                    help="stop when mean displacement is below this (default: %(default)s)")
    sp.add_argument("--barnes-hut", action="store_true", default=d.barnes_hut,
                    help="approximate repulsion with a quadtree (default: %(default)s)")
    sp.add_argument("--min-px", type=float, default=4.0, help="smallest node diameter (default: %(default)s)")
    sp.add_argument("--max-px", type=float, default=40.0, help="largest node diameter (default: %(default)s)")

    sp = add("glocality", "topic mixes, toponyms, scale network, local/global split")
    sp.add_argument("--input", required=True, help="snapshot manifest, optionally with posts (default: required)")
    sp.add_argument("--lexicon", default=None, help="topic lexicon file (default: bundled lexicon)")
    sp.add_argument("--gazetteer", default=None, help="gazetteer CSV (default: bundled gazetteer)")

    c = SofteningConfig()
    sp = add("simulate", "mixed-circle softening ensemble")
    sp.add_argument("--input", default=None,
                    help="snapshot manifest (default: synthetic 974-page survivor network)")
    sp.add_argument("--config", default=None, help="key = value simulation config (default: none)")
    sp.add_argument("--seed", type=int, default=None, help=f"master seed (default: {c.seed})")
    sp.add_argument("--runs", type=int, default=None, help=f"independent runs (default: {c.run_count})")
    sp.add_argument("--circle-size", type=int, default=None, help=f"circle size (default: {c.circle_size})")
    sp.add_argument("--circles-per-step", type=int, default=None,
                    help="circles drawn per step (default: ceil(nodes / circle size))")
    sp.add_argument("--p-convert", type=float, default=None,
                    help=f"conversion probability in a mixed circle (default: {c.conversion_probability})")
    sp.add_argument("--scenario", choices=("average", "better"), default=None,
                    help=f"average: anti and pro convert; better: anti only (default: {c.scenario.value})")
    sp.add_argument("--mixed-rule", choices=("any_two", "anti_pro"), default=None,
                    help=f"what makes a circle mixed (default: {c.mixed_rule.value})")
    sp.add_argument("--max-steps", type=int, default=None, help=f"steps per run (default: {c.max_steps})")
    sp.add_argument("--hours-per-step", type=float, default=None,
                    help=f"reporting only (default: {c.hours_per_step})")
    sp.add_argument("--record-run", type=int, default=None, help=f"run whose states are kept (default: {c.record_run})")
    sp.add_argument("--record-steps", type=_int_list, default=None,
                    help="comma-separated steps to export from the recorded run (default: none)")
    sp.add_argument("--per-run", action="store_true", default=False,
                    help="also write every run's trajectory (default: %(default)s)")

    sp = add("generate", "synthetic tri-polar network")
    sp.add_argument("--config", default=None, help="key = value generator config (default: none)")
    sp.add_argument("--seed", type=int, default=None, help="generator seed (default: 0)")
    sp.add_argument("--label", default=None, help="snapshot label (default: synthetic)")
    sp.add_argument("--remove", type=_fraction_list, default=None,
                    help="also write a survivor network removing anti,pro,neutral fractions (default: none)")
    sp.add_argument("--removal-seed", type=int, default=1, help="seed for the removal draw (default: %(default)s)")

    sp = sub.add_parser("rerun", help="repeat a run from its run.json", description="repeat a run from its run.json")
    sp.add_argument("manifest", help="run.json written by an earlier run (default: required)")
    sp.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    sp.add_argument("--threads", type=int, default=default_threads(),
                    help="worker cap; env TRIARCH_THREADS (default: machine parallelism, here %(default)s)")
    return parser


# -- driver -------------------------------------------------------------------


def run_command(command: str, params: dict, out: Path, threads: int) -> None:
    """Execute into a staging directory, then move every file into ``out``."""
    out = Path(out).resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".triarch-", dir=out.parent))
    try:
        COMMANDS[command][1](params, stage, threads)
        manifest = {
            "subcommand": command,
            "version": __version__,
            "params": params,
            "output_dir": str(out),
        }
        (stage / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        out.mkdir(exist_ok=True)
        for f in sorted(stage.iterdir()):
            os.replace(f, out / f.name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def _fail(code: int, exc: BaseException) -> int:
    report = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(report), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        if args.command == "rerun":
            data = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            command, params = data.get("subcommand"), data.get("params")
            if command not in COMMANDS or not isinstance(params, dict):
                raise ValidationError(f"{args.manifest}: not a run manifest")
        else:
            command = args.command
            params = COMMANDS[command][0](args)
        run_command(command, params, Path(args.out), args.threads)
    except NumericalBlowup as exc:
        return _fail(EXIT_BLOWUP, exc)
    except (ValidationError, json.JSONDecodeError) as exc:
        return _fail(EXIT_INVALID, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
