"""Exact meta-path matching and coverage/confidence scoring."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .errors import EvoPathError, NoSupportError
from .hin import Hin


@dataclass(frozen=True)
class MetaPath:
    """Alternating type/relation chain ``t1 -r1-> t2 ... t_k``, held as labels."""

    types: tuple[str, ...]
    relations: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "relations", tuple(self.relations))
        if len(self.types) < 1 or len(self.types) != len(self.relations) + 1:
            raise ValueError(
                f"meta-path needs len(types) == len(relations) + 1 >= 1, "
                f"got {len(self.types)} types and {len(self.relations)} relations")

    @property
    def length(self) -> int:
        """Number of type slots."""
        return len(self.types)

    def tokens(self) -> list[str]:
        out = [self.types[0]]
        for r, t in zip(self.relations, self.types[1:]):
            out += [r, t]
        return out

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "MetaPath":
        tokens = list(tokens)
        if len(tokens) % 2 == 0:
            raise ValueError(f"token sequence must have odd length, got {len(tokens)}")
        return cls(tuple(tokens[0::2]), tuple(tokens[1::2]))

    def steps(self):
        return list(zip(self.types[:-1], self.relations, self.types[1:]))

    def render(self) -> str:
        out = self.types[0]
        for r, t in zip(self.relations, self.types[1:]):
            out += f" -[{r}]-> {t}"
        return out

    def __str__(self):
        return self.render()


class PairSet:
    """Set of directed entity pairs, stored as sorted ``head * n + tail`` keys."""

    __slots__ = ("keys", "n")

    def __init__(self, keys: np.ndarray, n: int):
        self.keys = keys
        self.n = n

    def __len__(self):
        return int(self.keys.size)

    def __iter__(self):
        n = self.n
        for k in self.keys.tolist():
            yield (k // n, k % n)

    def __contains__(self, pair):
        h, t = pair
        k = h * self.n + t
        i = np.searchsorted(self.keys, k)
        return bool(i < self.keys.size and self.keys[i] == k)

    def __eq__(self, other):
        if isinstance(other, PairSet):
            return self.n == other.n and np.array_equal(self.keys, other.keys)
        if isinstance(other, (set, frozenset)):
            return self.to_set() == other
        return NotImplemented

    def __repr__(self):
        return f"PairSet({len(self)} pairs)"

    def to_set(self) -> set[tuple[int, int]]:
        return set(self)

    @property
    def heads(self) -> np.ndarray:
        return self.keys // self.n

    @property
    def tails(self) -> np.ndarray:
        return self.keys % self.n

    def intersection_size(self, other_keys: np.ndarray) -> int:
        return int(np.intersect1d(self.keys, other_keys, assume_unique=True).size)


@dataclass(frozen=True)
class MetaPathScore:
    coverage: float
    confidence: float
    support_both: int
    support_rq: int
    support_m: int

    @property
    def total(self) -> float:
        return self.coverage + self.confidence


def _graph(hin: Hin, excluded_facts) -> Hin:
    return hin.without_facts(excluded_facts) if excluded_facts else hin


def match_pairs(hin: Hin, m: MetaPath, excluded_facts: Iterable | None = None, *,
                sources: Iterable[int] | None = None, cap: int | None = None) -> PairSet:
    """All ``(v1, vk)`` joined by at least one instance of ``m``.

    Expansion starts from every entity typed ``t1`` (optionally restricted to
    ``sources``) and joins along each relation, keeping only arrivals typed
    ``t_{i+1}``. Intermediate ``(source, current)`` pairs are deduplicated at
    every step. ``cap`` bounds the number of such pairs per step.
    """
    g = _graph(hin, excluded_facts)
    type_ids = [hin.type_id(t) for t in m.types]
    rel_ids = [hin.relation_id(r) for r in m.relations]
    start = g.entities_of_type(type_ids[0])
    if sources is not None:
        start = np.intersect1d(start, np.fromiter(sources, dtype=np.int64))
    steps = []
    for r, t in zip(rel_ids, type_ids[1:]):
        indptr, indices = g.relation_csr(r)
        steps.append((indptr, indices, g.type_mask(t)))
    keys = _backend.expand(start, steps, g.n_entities, -1 if cap is None else cap)
    return PairSet(keys, g.n_entities)


def score_metapath(hin: Hin, m: MetaPath, r_q: str,
                   excluded_facts: Iterable | None = None, *, cap: int | None = None) -> MetaPathScore:
    """Coverage and confidence of ``m`` for target relation ``r_q``.

    Both ratios count entity pairs, not path instances. The coverage
    denominator is every ``r_q`` pair, regardless of endpoint types.
    Confidence is 0 when ``m`` has no instance.
    """
    g = _graph(hin, excluded_facts)
    rq_keys = g.pair_keys(hin.relation_id(r_q))
    if rq_keys.size == 0:
        raise NoSupportError(f"relation has no support: {r_q!r}")
    pairs = match_pairs(g, m, cap=cap)
    both = pairs.intersection_size(rq_keys)
    n_m = len(pairs)
    return MetaPathScore(
        coverage=both / rq_keys.size,
        confidence=both / n_m if n_m else 0.0,
        support_both=both,
        support_rq=int(rq_keys.size),
        support_m=n_m,
    )


def batch_score(hin: Hin, metapaths: Sequence[MetaPath], r_q: str,
                excluded_facts: Iterable | None = None, *, workers: int = 1,
                cap: int | None = None) -> list:
    """Score many meta-paths; order is preserved.

    A failing item yields its exception object in place of a score rather than
    aborting the batch. With ``workers > 1`` items run on a thread pool; the
    compiled kernel releases the GIL, and results do not depend on the worker
    count.
    """
    g = _graph(hin, excluded_facts)

    def one(m):
        try:
            return score_metapath(g, m, r_q, cap=cap)
        except EvoPathError as exc:
            return exc

    if workers <= 1 or len(metapaths) <= 1:
        return [one(m) for m in metapaths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, metapaths))
