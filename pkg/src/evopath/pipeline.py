"""End-to-end protocols: discovery followed by KBC, LP or inductive evaluation."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .evaluation import (
    EvalReport, KbcSplit, LpDataset, build_lp_dataset, evaluate_kbc, evaluate_lp, inductive_mask,
    kbc_split,
)
from .evolution import RunConfig, run
from .hin import Hin
from .replay import ScoredMetaPath
from .sampler import rng_stream


def discover_rules(hin: Hin, cfg: RunConfig, run_dir=None, provider=None) -> list[ScoredMetaPath]:
    """Run the loop on ``hin`` and return every buffered meta-path with confidence > 0."""
    res = run(hin, cfg, run_dir, provider=provider)
    return [it for it in res.buffer if it.score.confidence > 0]


def kbc_protocol(hin: Hin, cfg: RunConfig, out_dir=None, *, ratio: float = 0.9,
                 filtered: bool = True, tie: str = "average", candidates: str = "typed",
                 split: KbcSplit | None = None, provider=None) -> tuple[EvalReport, KbcSplit]:
    r_q = cfg.target_relation
    if split is None:
        split = kbc_split(hin, r_q, rng_stream(cfg.rng_seed, "kbc_split"), ratio)
        split.seed = cfg.rng_seed
    train = split.train_graph(hin)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        split.write(out)
    rules = discover_rules(train, cfg, out / "run" if out else None, provider)
    report, _ = evaluate_kbc(train, rules, split, filtered=filtered, tie=tie, candidates=candidates)
    report.meta["seed"] = cfg.rng_seed
    return report, split


def lp_dataset_for(hin: Hin, cfg: RunConfig) -> LpDataset:
    return build_lp_dataset(hin, cfg.target_relation, cfg.max_length,
                            rng_stream(cfg.rng_seed, "lp_split"))


def lp_protocol(hin: Hin, cfg: RunConfig, out_dir=None, *, mode: str = "max_conf",
                lp: LpDataset | None = None, provider=None) -> tuple[EvalReport, LpDataset]:
    lp = lp or lp_dataset_for(hin, cfg)
    scoring = lp.scoring_graph(hin)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        lp.write(out)
    rules = discover_rules(scoring, cfg, out / "run" if out else None, provider)
    report = evaluate_lp(scoring, rules, lp, mode)
    report.meta["seed"] = cfg.rng_seed
    return report, lp


@dataclass
class InductiveRow:
    removal_pct: float
    removed_nodes: int
    rules: int
    roc_auc: float
    ap: float
    relative_drop: float


def inductive_protocol(hin: Hin, cfg: RunConfig, removal_pcts: Sequence[float] = (0, 20, 50, 100),
                       out_dir=None, *, mode: str = "max_conf", lp: LpDataset | None = None,
                       provider=None) -> tuple[list[InductiveRow], LpDataset]:
    """Discover and score rules on a node-masked graph, then rank test pairs on the full one.

    The masked nodes come back at prediction time, the way unseen entities
    arrive with their edges; only rule discovery and rule confidence are
    computed without them.
    """
    lp = lp or lp_dataset_for(hin, cfg)
    scoring = lp.scoring_graph(hin)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        lp.write(out)
    rows: list[InductiveRow] = []
    base = None
    for pct in removal_pcts:
        mask = inductive_mask(scoring, lp, pct, rng_stream(cfg.rng_seed, "mask"))
        run_dir = out / f"run_removal_{int(pct):03d}" if out else None
        rules = discover_rules(mask.hin, cfg, run_dir, provider)
        rep = evaluate_lp(scoring, rules, lp, mode)
        if base is None:
            base = rep.roc_auc
        drop = (base - rep.roc_auc) / base if base else 0.0
        rows.append(InductiveRow(pct, len(mask.removed), len(rules), rep.roc_auc, rep.ap, drop))
    return rows, lp


def inductive_table(rows: Sequence[InductiveRow]) -> str:
    head = f"{'removal_pct':>11}  {'removed':>7}  {'rules':>5}  {'roc_auc':>7}  {'ap':>6}  {'rel_drop':>8}"
    lines = [head]
    for r in rows:
        lines.append(f"{r.removal_pct:>11g}  {r.removed_nodes:>7d}  {r.rules:>5d}  "
                     f"{r.roc_auc:>7.4f}  {r.ap:>6.4f}  {r.relative_drop:>8.4f}")
    return "\n".join(lines) + "\n"


def rows_as_dicts(rows: Sequence[InductiveRow]) -> list[dict]:
    return [dataclasses.asdict(r) for r in rows]
