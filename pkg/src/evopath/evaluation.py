"""Evaluation protocols: KBC ranking, link prediction and inductive masking."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EvoPathError
from .hin import Hin
from .matcher import match_pairs
from .replay import ScoredMetaPath

TIES = ("average", "optimistic", "pessimistic")


# -- reports ----------------------------------------------------------------

@dataclass
class EvalReport:
    mode: str
    n: int
    hits_at_1: float | None = None
    hits_at_3: float | None = None
    hits_at_10: float | None = None
    mrr: float | None = None
    roc_auc: float | None = None
    ap: float | None = None
    meta: dict = field(default_factory=dict)

    def metrics(self) -> dict[str, float]:
        keys = ("hits_at_1", "hits_at_3", "hits_at_10", "mrr", "roc_auc", "ap")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        rows = [("mode", self.mode), ("n", str(self.n))]
        rows += [(k, f"{v:.4f}") for k, v in self.metrics().items()]
        rows += [(k, str(v)) for k, v in sorted(self.meta.items())]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def write_rows(path, rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(str(x) for x in row) + "\n")


def read_rows(path, ncols: int) -> list[tuple[str, ...]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != ncols:
                raise EvoPathError(f"{path}:{i}: expected {ncols} columns, got {len(parts)}")
            out.append(tuple(parts))
    return out


def fact_ids(hin: Hin, triples: Iterable[tuple[str, str, str]]) -> list:
    """Label triples to id facts of ``hin``."""
    return [hin.fact(h, r, t) for h, r, t in triples]


def _base_pairs(hin: Hin, r_q: str) -> list[tuple[str, str]]:
    heads, tails = hin.relation_facts(hin.relation_id(r_q))
    lab = hin.entities.label
    return [(lab(int(h)), lab(int(t))) for h, t in zip(heads, tails)]


# -- KBC --------------------------------------------------------------------

@dataclass
class KbcSplit:
    relation: str
    train: list[tuple[str, str]]
    test: list[tuple[str, str]]
    ratio: float = 0.9
    seed: int = 0

    def test_facts(self) -> list[tuple[str, str, str]]:
        return [(h, self.relation, t) for h, t in self.test]

    def train_graph(self, hin: Hin) -> Hin:
        """``hin`` without the test facts (and their inverses)."""
        return hin.without_facts(fact_ids(hin, self.test_facts()))

    def write(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_rows(d / "kbc_train.tsv", self.train)
        write_rows(d / "kbc_test.tsv", self.test)

    @classmethod
    def read(cls, directory, relation: str) -> "KbcSplit":
        d = Path(directory)
        return cls(relation, read_rows(d / "kbc_train.tsv", 2), read_rows(d / "kbc_test.tsv", 2))


def kbc_split(hin: Hin, r_q: str, rng: np.random.Generator, ratio: float = 0.9) -> KbcSplit:
    """Partition the ``r_q`` pairs into train/test at ``ratio`` (at least one of each)."""
    pairs = _base_pairs(hin, r_q)
    if len(pairs) < 2:
        raise EvoPathError(f"{r_q!r} needs at least 2 facts to split, has {len(pairs)}")
    order = rng.permutation(len(pairs))
    n_train = min(max(int(round(len(pairs) * ratio)), 1), len(pairs) - 1)
    train = sorted(pairs[i] for i in order[:n_train])
    test = sorted(pairs[i] for i in order[n_train:])
    return KbcSplit(r_q, train, test, ratio)


def tail_scores(hin: Hin, rules: Sequence[ScoredMetaPath], head: int) -> dict[int, float]:
    """Max-pooled rule confidence for every tail reachable from ``head``."""
    scores: dict[int, float] = {}
    for rule in rules:
        conf = rule.score.confidence
        pairs = match_pairs(hin, rule.metapath, sources=[head])
        for t in pairs.tails:
            t = int(t)
            if conf > scores.get(t, -1.0):
                scores[t] = conf
    return scores


def kbc_rank(hin: Hin, rules: Sequence[ScoredMetaPath], query: tuple[str, str]) -> list[tuple[str, float]]:
    """Reachable candidate tails for ``(head, r_q)``, best first (label breaks ties)."""
    head = hin.entity_id(query[0])
    scores = tail_scores(hin, rules, head)
    lab = hin.entities.label
    return sorted(((lab(t), s) for t, s in scores.items()), key=lambda ts: (-ts[1], ts[0]))


def rank_of(scores: dict[int, float], true_tail: int, filtered: Iterable[int] = (),
            candidates: set[int] | None = None, tie: str = "average") -> float:
    """Rank of ``true_tail``; ``inf`` when no rule reaches it."""
    if tie not in TIES:
        raise ValueError(f"tie must be one of {TIES}")
    s = scores.get(true_tail)
    if s is None:
        return math.inf
    skip = set(filtered)
    skip.discard(true_tail)
    greater = equal = 0
    for t, v in scores.items():
        if t == true_tail or t in skip or (candidates is not None and t not in candidates):
            continue
        if v > s:
            greater += 1
        elif v == s:
            equal += 1
    if tie == "optimistic":
        return 1.0 + greater
    if tie == "pessimistic":
        return 1.0 + greater + equal
    return 1.0 + greater + equal / 2.0


def kbc_metrics(ranks: Sequence[float]) -> EvalReport:
    if len(ranks) == 0:
        raise ValueError("no ranks to summarise")
    r = np.asarray(ranks, dtype=float)
    if np.any(r < 1):
        raise ValueError("ranks must be >= 1")
    recip = np.where(np.isinf(r), 0.0, 1.0 / r)
    return EvalReport("kbc", len(r),
                      hits_at_1=float(np.mean(r <= 1)), hits_at_3=float(np.mean(r <= 3)),
                      hits_at_10=float(np.mean(r <= 10)), mrr=float(np.mean(recip)))


def candidate_tails(hin: Hin, tails: Iterable[int]) -> set[int]:
    """Entities sharing at least one declared type with any observed tail."""
    wanted = set()
    for t in tails:
        wanted |= hin.declared_types(t)
    return {e for e in range(hin.n_entities)
            if hin.has_entity(e) and hin.declared_types(e) & wanted}


def evaluate_kbc(hin_train: Hin, rules: Sequence[ScoredMetaPath], split: KbcSplit, *,
                 filtered: bool = True, tie: str = "average",
                 candidates: str = "typed") -> tuple[EvalReport, list[float]]:
    """Rank every test tail against the train graph; filtered setting by default."""
    eid = hin_train.entity_id
    known: dict[int, set[int]] = {}
    for h, t in split.train + split.test:
        known.setdefault(eid(h), set()).add(eid(t))
    cand = None
    if candidates == "typed":
        cand = candidate_tails(hin_train, (eid(t) for _, t in split.train))
    elif candidates != "all":
        raise ValueError("candidates must be 'typed' or 'all'")
    cache: dict[int, dict[int, float]] = {}
    ranks = []
    for h, t in split.test:
        hid, tid = eid(h), eid(t)
        if hid not in cache:
            cache[hid] = tail_scores(hin_train, rules, hid)
        flt = known[hid] if filtered else ()
        ranks.append(rank_of(cache[hid], tid, flt, cand, tie))
    report = kbc_metrics(ranks)
    report.meta = {"relation": split.relation, "filtered": filtered, "tie": tie,
                   "candidates": candidates, "rules": len(rules)}
    return report, ranks


# -- link prediction ----------------------------------------------------------

@dataclass
class LpDataset:
    relation: str
    max_length: int
    train_pos: list[tuple[str, str]]
    test_pos: list[tuple[str, str]]
    train_neg: list[tuple[str, str]]
    test_neg: list[tuple[str, str]]
    n_eligible: int = 0
    n_total: int = 0

    def labelled(self, split: str) -> tuple[list[tuple[str, str]], list[int]]:
        pos, neg = (self.train_pos, self.train_neg) if split == "train" else \
            (self.test_pos, self.test_neg)
        return pos + neg, [1] * len(pos) + [0] * len(neg)

    def test_facts(self) -> list[tuple[str, str, str]]:
        return [(h, self.relation, t) for h, t in self.test_pos]

    def scoring_graph(self, hin: Hin) -> Hin:
        """``hin`` without the test positives (and their inverses)."""
        return hin.without_facts(fact_ids(hin, self.test_facts()))

    def write(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for split in ("train", "test"):
            pairs, labels = self.labelled(split)
            write_rows(d / f"lp_{split}.tsv", [(h, t, y) for (h, t), y in zip(pairs, labels)])

    @classmethod
    def read(cls, directory, relation: str, max_length: int) -> "LpDataset":
        d = Path(directory)
        parts = {}
        for split in ("train", "test"):
            rows = read_rows(d / f"lp_{split}.tsv", 3)
            parts[split] = ([(h, t) for h, t, y in rows if y == "1"],
                            [(h, t) for h, t, y in rows if y == "0"])
        return cls(relation, max_length, parts["train"][0], parts["test"][0],
                   parts["train"][1], parts["test"][1])


def _reaches_without_direct(hin: Hin, indptr, rels, tails, h: int, t: int, rq: int,
                            max_steps: int) -> bool:
    """Bounded BFS from ``h`` to ``t`` ignoring the edge ``(h, rq, t)``."""
    frontier, seen = [h], {h}
    for _ in range(max_steps):
        nxt = []
        for u in frontier:
            lo, hi = indptr[u], indptr[u + 1]
            for k in range(lo, hi):
                v = int(tails[k])
                if u == h and v == t and rels[k] == rq:
                    continue
                if v == t:
                    return True
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return False


def eligible_pairs(hin: Hin, r_q: str, max_length: int) -> list[tuple[str, str]]:
    """``r_q`` pairs also joined by a path of at most ``max_length - 1`` steps besides the direct edge."""
    rq = hin.relation_id(r_q)
    indptr, rels, tails = hin.out_csr
    heads_, tails_ = hin.relation_facts(rq)
    lab = hin.entities.label
    out = []
    for h, t in zip(heads_.tolist(), tails_.tolist()):
        if _reaches_without_direct(hin, indptr, rels, tails, h, t, rq, max_length - 1):
            out.append((lab(h), lab(t)))
    return out


def _negatives(hin: Hin, r_q: str, positives, n: int, rng, taken: set) -> list[tuple[str, str]]:
    rq = hin.relation_id(r_q)
    eid, lab = hin.entity_id, hin.entities.label
    by_type: dict[int, list[int]] = {}
    for e in range(hin.n_entities):
        if hin.has_entity(e):
            for ty in hin.declared_types(e):
                by_type.setdefault(ty, []).append(e)
    out: list[tuple[str, str]] = []
    if n == 0:
        return out
    budget = 50 * n + 100
    while len(out) < n and budget > 0:
        budget -= 1
        h, t = positives[int(rng.integers(len(positives)))]
        hid, tid = eid(h), eid(t)
        pool = sorted({e for ty in hin.declared_types(tid) for e in by_type.get(ty, ())})
        if not pool:
            continue
        cand = pool[int(rng.integers(len(pool)))]
        if cand == tid or hin.has_fact(hid, rq, cand) or (hid, cand) in taken:
            continue  # a true fact or a repeat: draw again
        taken.add((hid, cand))
        out.append((h, lab(cand)))
    if len(out) < n:
        raise EvoPathError(f"could only draw {len(out)} of {n} same-type negatives for {r_q!r}")
    return out


def build_lp_dataset(hin: Hin, r_q: str, max_length: int, rng: np.random.Generator, *,
                     train_ratio: float = 0.8, pos_per_neg: float = 2.0,
                     min_pairs: int = 5) -> LpDataset:
    """Eligible positives split ``train_ratio``, plus same-type tail-corrupted negatives."""
    total = len(_base_pairs(hin, r_q))
    pairs = eligible_pairs(hin, r_q, max_length)
    if len(pairs) < min_pairs:
        raise EvoPathError(f"only {len(pairs)} of {total} {r_q!r} pairs are eligible, "
                           f"need at least {min_pairs}")
    order = rng.permutation(len(pairs))
    n_train = min(max(int(round(len(pairs) * train_ratio)), 1), len(pairs) - 1)
    train = sorted(pairs[i] for i in order[:n_train])
    test = sorted(pairs[i] for i in order[n_train:])
    taken: set = set()
    train_neg = _negatives(hin, r_q, train, int(round(len(train) / pos_per_neg)), rng, taken)
    test_neg = _negatives(hin, r_q, test, int(round(len(test) / pos_per_neg)), rng, taken)
    return LpDataset(r_q, max_length, train, test, train_neg, test_neg, len(pairs), total)


def lp_scores(hin: Hin, rules: Sequence[ScoredMetaPath], pairs: Sequence[tuple[str, str]],
              mode: str = "max_conf") -> np.ndarray:
    """Per-pair score from the rules whose instances join the pair (0 when none)."""
    if mode not in ("max_conf", "weighted_sum"):
        raise ValueError("mode must be 'max_conf' or 'weighted_sum'")
    n = hin.n_entities
    eid = hin.entity_id
    keys = np.array([eid(h) * n + eid(t) for h, t in pairs], dtype=np.int64)
    heads = sorted({eid(h) for h, _ in pairs})
    out = np.zeros(len(pairs))
    for rule in rules:
        matched = match_pairs(hin, rule.metapath, sources=heads)
        hit = np.isin(keys, matched.keys)
        conf = rule.score.confidence
        if mode == "max_conf":
            out[hit] = np.maximum(out[hit], conf)
        else:
            out[hit] += conf
    return out


def _check_binary(labels, scores):
    y = np.asarray(labels).astype(bool)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    if y.all() or not y.any():
        raise ValueError("need at least one positive and one negative")
    return y, s


def _average_ranks(s: np.ndarray) -> np.ndarray:
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(len(s))
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(labels, scores) -> float:
    """Mann-Whitney U over positives vs negatives, ties counted as half."""
    y, s = _check_binary(labels, scores)
    ranks = _average_ranks(s)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(labels, scores) -> float:
    """Sum of precision times recall gain, one step per group of tied scores."""
    y, s = _check_binary(labels, scores)
    order = np.argsort(-s, kind="mergesort")
    ys, ss = y[order], s[order]
    n_pos = int(y.sum())
    ap, tp, seen, i = 0.0, 0, 0, 0
    while i < len(ss):
        j = i
        while j + 1 < len(ss) and ss[j + 1] == ss[i]:
            j += 1
        group_tp = int(ys[i:j + 1].sum())
        tp += group_tp
        seen = j + 1
        if group_tp:
            ap += (group_tp / n_pos) * (tp / seen)
        i = j + 1
    return float(ap)


def evaluate_lp(hin_scoring: Hin, rules: Sequence[ScoredMetaPath], lp: LpDataset,
                mode: str = "max_conf", split: str = "test") -> EvalReport:
    pairs, labels = lp.labelled(split)
    scores = lp_scores(hin_scoring, rules, pairs, mode)
    return EvalReport("lp", len(pairs), roc_auc=roc_auc(labels, scores),
                      ap=average_precision(labels, scores),
                      meta={"relation": lp.relation, "scoring": mode, "split": split,
                            "rules": len(rules)})


# -- inductive ----------------------------------------------------------------

@dataclass
class InductiveMask:
    hin: Hin
    selected_pairs: list[tuple[str, str]]
    removed: list[str]


def inductive_mask(hin: Hin, lp: LpDataset, removal_pct: float, rng: np.random.Generator,
                   select_frac: float = 0.4) -> InductiveMask:
    """Drop ``removal_pct`` % of the nodes in a random ``select_frac`` of test positives."""
    if not 0 <= removal_pct <= 100:
        raise ValueError("removal_pct must lie in [0, 100]")
    n_sel = int(round(len(lp.test_pos) * select_frac))
    idx = np.sort(rng.permutation(len(lp.test_pos))[:n_sel])
    selected = [lp.test_pos[i] for i in idx]
    nodes = sorted({e for pair in selected for e in pair})
    n_remove = int(round(len(nodes) * removal_pct / 100.0))
    removed = sorted(nodes[i] for i in rng.permutation(len(nodes))[:n_remove])
    if not removed:
        return InductiveMask(hin, selected, [])
    masked = hin.without_entities(hin.entity_id(e) for e in removed)
    return InductiveMask(masked, selected, removed)
