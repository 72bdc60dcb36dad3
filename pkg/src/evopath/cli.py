"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, EvoPathError, RunAborted
from .evolution import BUFFER_FILE, RunConfig, run
from .generator import ProviderConfig
from .hin import augment_inverses, load_hin
from .replay import BufferConfig, ReplayBuffer
from .sampler import WalkConfig

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- data and config ----------------------------------------------------------

def _data_paths(args) -> dict:
    paths = {}
    if args.data:
        d = Path(args.data)
        paths = {"facts": d / "facts.tsv", "types": d / "types.tsv", "dag": d / "dag.tsv"}
    for key in ("facts", "types", "dag"):
        if getattr(args, key, None):
            paths[key] = Path(getattr(args, key))
    if "facts" not in paths:
        raise ConfigError("no facts file: pass --data DIR or --facts FILE")
    if not paths["facts"].exists():
        raise ConfigError(f"facts file not found: {paths['facts']}")
    return {k: v for k, v in paths.items() if k == "facts" or v.exists()}


def _load(args, augment=True):
    augment = augment and not getattr(args, "no_inverses", False)
    p = _data_paths(args)
    hin = load_hin(p["facts"], p.get("types"), p.get("dag"))
    return augment_inverses(hin) if augment else hin


def _file_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    try:
        return json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc


def resolve_run_config(args) -> RunConfig:
    """Config file values, then flags on top (flags win)."""
    base = _file_config(args).get("run", {})
    d = dict(base)
    walk = dict(d.pop("walk", {}))
    buf = dict(d.pop("buffer", {}))
    prov = dict(d.pop("provider", {}))

    def put(target, key, value):
        if value is not None:
            target[key] = value

    put(d, "target_relation", args.relation)
    put(d, "max_rounds", args.max_rounds)
    put(d, "stagnation_rounds", args.stagnation_rounds)
    put(d, "max_consecutive_failures", args.max_failures)
    put(d, "expand_top_k", args.expand_top_k)
    put(d, "min_similarity", args.min_similarity)
    put(d, "rng_seed", args.seed)
    put(d, "score_workers", args.workers)
    for flag in ("background", "few_shot", "scores"):
        if getattr(args, f"no_{flag}"):
            d[f"include_{flag}"] = False
    put(walk, "max_length", args.max_length)
    put(walk, "fact_batch_size", args.fact_batch)
    put(walk, "walks_per_fact", args.walks_per_fact)
    put(buf, "strategy", args.strategy)
    put(buf, "score_mode", args.score_mode)
    put(buf, "few_shot_n", args.few_shot_n)
    put(prov, "kind", args.provider)
    put(prov, "endpoint", args.endpoint)
    put(prov, "model", args.model)
    put(prov, "api_key_env", args.api_key_env)
    put(prov, "temperature", args.temperature)
    put(prov, "max_candidates", args.max_candidates)
    if "target_relation" not in d:
        raise ConfigError("no target relation: pass --relation or set run.target_relation")
    try:
        d["walk"] = WalkConfig(**walk)
        d["buffer"] = BufferConfig(**buf)
        d["provider"] = ProviderConfig(**prov)
        return RunConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _make_provider(cfg: RunConfig, hin):
    """Build the provider up front so bad settings fail before any work."""
    if cfg.target_relation not in hin.relation_labels():
        raise ConfigError(f"target relation {cfg.target_relation!r} does not occur in the facts")
    from .generator import make_provider
    from .hin import build_schema_graph
    return make_provider(cfg.provider, build_schema_graph(hin))


def _echo_config(out: Path, args, cfg: RunConfig, extra: dict):
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"data": {k: str(v) for k, v in _data_paths(args).items()},
                "run": cfg.to_dict(), "eval": extra}
    (out / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")


def _write_report(out: Path, report) -> None:
    (out / "report.json").write_text(report.to_json())
    (out / "report.txt").write_text(report.to_table())


# -- commands -------------------------------------------------------------------

def cmd_ingest(args) -> int:
    hin = _load(args, augment=False)
    s = hin.summary()
    if args.json:
        print(json.dumps(s, sort_keys=True))
    else:
        print(f"{s['facts']} facts, {s['entities']} entities")
        for key in ("entities", "types", "relations", "facts"):
            print(f"{key:<10} {s[key]}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import SynthSpec, write_planted

    spec = SynthSpec(confidence=args.confidence, coverage=args.coverage,
                     n_persons=args.persons, n_cities=args.cities, n_countries=args.countries,
                     n_regions=args.regions, n_orgs=args.orgs, knows_degree=args.knows_degree,
                     twins_per_city=args.twins_per_city, noise=not args.no_noise, seed=args.seed)
    paths = write_planted(args.out, spec)
    rec = json.loads(paths["truth"].read_text())
    truth = rec["truth"]
    print(f"wrote {args.out}: planted {rec['rendered']} for {truth['target_relation']} "
          f"(coverage={truth['coverage']:.4f}, confidence={truth['confidence']:.4f})")
    return EXIT_OK


def cmd_discover(args) -> int:
    cfg = resolve_run_config(args)
    hin = _load(args)
    provider = _make_provider(cfg, hin)
    excluded = None
    if args.exclude:
        from .evaluation import fact_ids, read_rows
        excluded = fact_ids(hin, read_rows(args.exclude, 3))
    res = run(hin, cfg, args.out, provider=provider, excluded_facts=excluded, resume=args.resume)
    print(f"{len(res.rounds)} round(s), stopped: {res.stop_reason}; buffer holds {len(res.buffer)}")
    top = res.buffer.top(1)
    if top:
        it = top[0]
        print(f"top-1: {it.metapath.render()} (coverage={it.score.coverage:.4f}, "
              f"confidence={it.score.confidence:.4f})")
    return EXIT_OK


def report_rows(buffer: ReplayBuffer, k: int | None):
    rows = []
    for i, it in enumerate(buffer.top(k, "sum"), 1):
        rows.append({"rank": i, "metapath": it.metapath.render(), "coverage": it.score.coverage,
                     "confidence": it.score.confidence, "sum": it.value("sum"),
                     "round": it.generation_round})
    return rows


def cmd_report(args) -> int:
    path = Path(args.run_dir) / BUFFER_FILE
    if not path.exists():
        raise ConfigError(f"no buffer at {path}")
    rows = report_rows(ReplayBuffer.load(path), args.top)
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    width = max([len("meta-path")] + [len(r["metapath"]) for r in rows])
    print(f"{'rank':>4}  {'meta-path':<{width}}  {'coverage':>8}  {'confidence':>10}  "
          f"{'sum':>6}  {'round':>5}")
    for r in rows:
        print(f"{r['rank']:>4}  {r['metapath']:<{width}}  {r['coverage']:>8.4f}  "
              f"{r['confidence']:>10.4f}  {r['sum']:>6.4f}  {r['round']:>5d}")
    return EXIT_OK


def cmd_evaluate_kbc(args) -> int:
    from .evaluation import KbcSplit
    from .pipeline import kbc_protocol

    cfg = resolve_run_config(args)
    hin = _load(args)
    provider = _make_provider(cfg, hin)
    out = Path(args.out)
    extra = {"protocol": "kbc", "filtered": not args.raw, "tie": args.tie,
             "candidates": args.candidates}
    _echo_config(out, args, cfg, extra)
    split = KbcSplit.read(args.split_dir, cfg.target_relation) if args.split_dir else None
    report, _ = kbc_protocol(hin, cfg, out, filtered=not args.raw, tie=args.tie,
                             candidates=args.candidates, split=split, provider=provider)
    _write_report(out, report)
    print(report.to_table(), end="")
    return EXIT_OK


def cmd_evaluate_lp(args) -> int:
    from .evaluation import LpDataset
    from .pipeline import lp_protocol

    cfg = resolve_run_config(args)
    hin = _load(args)
    provider = _make_provider(cfg, hin)
    out = Path(args.out)
    _echo_config(out, args, cfg, {"protocol": "lp", "mode": args.mode})
    lp = LpDataset.read(args.split_dir, cfg.target_relation, cfg.max_length) \
        if args.split_dir else None
    report, _ = lp_protocol(hin, cfg, out, mode=args.mode, lp=lp, provider=provider)
    _write_report(out, report)
    print(report.to_table(), end="")
    return EXIT_OK


def cmd_evaluate_inductive(args) -> int:
    from .pipeline import inductive_protocol, inductive_table, rows_as_dicts

    cfg = resolve_run_config(args)
    hin = _load(args)
    provider = _make_provider(cfg, hin)
    out = Path(args.out)
    pcts = args.removal_pct or [0, 20, 50, 100]
    _echo_config(out, args, cfg, {"protocol": "inductive", "mode": args.mode,
                                  "removal_pct": pcts})
    rows, _ = inductive_protocol(hin, cfg, pcts, out, mode=args.mode, provider=provider)
    (out / "report.json").write_text(json.dumps(rows_as_dicts(rows), indent=2, sort_keys=True) + "\n")
    table = inductive_table(rows)
    (out / "report.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _data_args(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--data", help="directory holding facts.tsv, types.tsv and dag.tsv")
    g.add_argument("--facts", help="facts TSV: head<TAB>relation<TAB>tail")
    g.add_argument("--types", help="entity types TSV: entity<TAB>type")
    g.add_argument("--dag", help="type DAG TSV: child<TAB>parent")


def _run_args(p):
    g = p.add_argument_group("discovery (flags override --config)")
    g.add_argument("--config", help="JSON config file; its 'run' object holds run settings")
    g.add_argument("--relation", help="target relation label")
    g.add_argument("--seed", type=int, help="top-level random seed (default 0)")
    g.add_argument("--max-rounds", type=int, help="round budget (default 30)")
    g.add_argument("--stagnation-rounds", type=int,
                   help="stop after this many rounds without new meta-paths (default 5)")
    g.add_argument("--max-failures", type=int,
                   help="consecutive provider failures tolerated before aborting (default 3)")
    g.add_argument("--max-length", type=int, help="maximum type slots per meta-path (default 3)")
    g.add_argument("--fact-batch", type=int, help="target facts sampled for walks (default 200)")
    g.add_argument("--walks-per-fact", type=int, help="random walks per sampled fact (default 10)")
    g.add_argument("--strategy", choices=["direct", "rank", "random"],
                   help="few-shot prioritisation (default rank)")
    g.add_argument("--score-mode", choices=["confidence", "coverage", "sum"],
                   help="score driving prioritisation (default sum)")
    g.add_argument("--few-shot-n", type=int, help="examples per prompt (default 30)")
    g.add_argument("--expand-top-k", type=int, help="similar atoms added per seed atom (default 3)")
    g.add_argument("--min-similarity", type=float,
                   help="gestalt threshold for expansion and repair (default 0.5)")
    g.add_argument("--no-background", action="store_true", help="omit the background paragraph")
    g.add_argument("--no-few-shot", action="store_true", help="omit the example section")
    g.add_argument("--no-scores", action="store_true", help="omit example scores")
    g.add_argument("--provider", choices=["mutation", "http_chat"],
                   help="generator backend (default mutation)")
    g.add_argument("--endpoint", help="chat-completions base URL (http_chat)")
    g.add_argument("--model", help="model name (http_chat)")
    g.add_argument("--api-key-env", help="environment variable holding the API key (http_chat)")
    g.add_argument("--temperature", type=float, help="sampling temperature (default 0.7)")
    g.add_argument("--max-candidates", type=int, help="lines emitted per mutation round (default 30)")
    g.add_argument("--workers", type=int, help="threads for scoring (default 1)")
    g.add_argument("--no-inverses", action="store_true",
                   help="do not add inverse relations (label^-1) before walking and matching")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="evopath", description="Meta-path discovery over typed knowledge graphs.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log each round")
    sub = ap.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a dataset and print its size")
    _data_args(p)
    p.add_argument("--json", action="store_true", help="print counts as JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic dataset with a planted meta-path")
    p.add_argument("out", help="output directory")
    p.add_argument("--confidence", type=float, default=0.9)
    p.add_argument("--coverage", type=float, default=0.8)
    p.add_argument("--persons", type=int, default=300)
    p.add_argument("--cities", type=int, default=40)
    p.add_argument("--countries", type=int, default=8)
    p.add_argument("--regions", type=int, default=16)
    p.add_argument("--orgs", type=int, default=30)
    p.add_argument("--knows-degree", type=int, default=0, help="random knows edges per person")
    p.add_argument("--twins-per-city", type=int, default=0, help="random twinnedWith edges per city")
    p.add_argument("--no-noise", action="store_true", help="only the planted structure")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("discover", help="run the discovery loop into a run directory")
    _data_args(p)
    _run_args(p)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--resume", action="store_true", help="continue an interrupted run in --out")
    p.add_argument("--exclude", help="facts TSV held out when scoring")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("report", help="print the best meta-paths of a run")
    p.add_argument("run_dir")
    p.add_argument("--top", type=int, default=20, help="rows to show (default 20)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    for name, func, helptext in (
            ("evaluate-kbc", cmd_evaluate_kbc, "split 9:1, discover on train, rank test tails"),
            ("evaluate-lp", cmd_evaluate_lp, "link prediction with same-type negatives"),
            ("evaluate-inductive", cmd_evaluate_inductive, "link prediction under node removal")):
        p = sub.add_parser(name, help=helptext)
        _data_args(p)
        _run_args(p)
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=func)
        if name == "evaluate-kbc":
            p.add_argument("--raw", action="store_true", help="unfiltered ranking")
            p.add_argument("--tie", choices=["average", "optimistic", "pessimistic"],
                           default="average", help="tie handling (default average)")
            p.add_argument("--candidates", choices=["typed", "all"], default="typed",
                           help="candidate tails: type-compatible or all entities (default typed)")
            p.add_argument("--split-dir", help="reuse kbc_train.tsv/kbc_test.tsv from here")
        else:
            p.add_argument("--mode", choices=["max_conf", "weighted_sum"], default="max_conf",
                           help="pair scoring (default max_conf)")
            if name == "evaluate-lp":
                p.add_argument("--split-dir", help="reuse lp_train.tsv/lp_test.tsv from here")
            else:
                p.add_argument("--removal-pct", type=float, action="append",
                               help="percent of selected nodes removed; repeatable "
                                    "(default 0 20 50 100)")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"evopath: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RunAborted as exc:
        print(f"evopath: run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (EvoPathError, OSError, ValueError) as exc:
        print(f"evopath: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
