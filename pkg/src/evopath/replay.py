"""Prioritised replay buffer of scored meta-paths."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError
from .matcher import MetaPath, MetaPathScore

STRATEGIES = ("direct", "rank", "random")
SCORE_MODES = ("confidence", "coverage", "sum")
PRIORITY_FLOOR = 1e-6


@dataclass(frozen=True)
class ScoredMetaPath:
    metapath: MetaPath
    score: MetaPathScore
    target_relation: str
    generation_round: int = 0

    @property
    def key(self):
        return (self.metapath, self.target_relation)

    def value(self, score_mode: str) -> float:
        if score_mode == "confidence":
            return self.score.confidence
        if score_mode == "coverage":
            return self.score.coverage
        return self.score.coverage + self.score.confidence

    def to_record(self) -> dict:
        s = self.score
        return {
            "types": list(self.metapath.types),
            "relations": list(self.metapath.relations),
            "target_relation": self.target_relation,
            "coverage": s.coverage,
            "confidence": s.confidence,
            "support_both": s.support_both,
            "support_rq": s.support_rq,
            "support_m": s.support_m,
            "round": self.generation_round,
        }

    @classmethod
    def from_record(cls, d: dict) -> "ScoredMetaPath":
        score = MetaPathScore(d["coverage"], d["confidence"], d["support_both"],
                              d["support_rq"], d["support_m"])
        return cls(MetaPath(tuple(d["types"]), tuple(d["relations"])), score,
                   d["target_relation"], d.get("round", 0))


@dataclass
class BufferConfig:
    strategy: str = "rank"
    score_mode: str = "sum"
    capacity: int | None = None
    few_shot_n: int = 30

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.score_mode not in SCORE_MODES:
            raise ConfigError(f"score_mode must be one of {SCORE_MODES}, got {self.score_mode!r}")
        if self.few_shot_n < 1:
            raise ConfigError("few_shot_n must be >= 1")
        if self.capacity is not None and self.capacity < 1:
            raise ConfigError("capacity must be >= 1 or None")


class ReplayBuffer:
    """Deduplicated pool of :class:`ScoredMetaPath`, kept in insertion order."""

    def __init__(self, config: BufferConfig | None = None):
        self.config = config or BufferConfig()
        self._items: dict[tuple, ScoredMetaPath] = {}

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items.values())

    def __contains__(self, key):
        if isinstance(key, ScoredMetaPath):
            key = key.key
        return key in self._items

    @property
    def items(self) -> list[ScoredMetaPath]:
        return list(self._items.values())

    def insert(self, items: Iterable[ScoredMetaPath]) -> int:
        """Add new entries, keep existing ones on collision; return how many stayed in."""
        added = []
        for it in items:
            if it.key not in self._items:
                self._items[it.key] = it
                added.append(it.key)
        self._evict()
        return sum(1 for k in added if k in self._items)

    def _evict(self):
        cap = self.config.capacity
        if cap is None or len(self._items) <= cap:
            return
        mode = self.config.score_mode
        entries = list(self._items.items())
        # lowest value goes first; among equals the newest goes first
        order = sorted(range(len(entries)), key=lambda i: (entries[i][1].value(mode), -i))
        for i in order[: len(entries) - cap]:
            del self._items[entries[i][0]]

    def priorities(self, config: BufferConfig | None = None) -> np.ndarray:
        """Sampling distribution ``P(j) = p_j / sum_k p_k`` over entries in insertion order."""
        cfg = config or self.config
        n = len(self._items)
        if n == 0:
            raise ValueError("buffer is empty")
        if cfg.strategy == "random":
            return np.full(n, 1.0 / n)
        values = np.array([it.value(cfg.score_mode) for it in self._items.values()])
        if cfg.strategy == "direct":
            p = np.maximum(values, PRIORITY_FLOOR)
        else:
            # stable sort keeps older entries ahead of equal-valued newer ones
            order = np.argsort(-values, kind="stable")
            rank = np.empty(n)
            rank[order] = np.arange(1, n + 1)
            p = 1.0 / rank
        return p / p.sum()

    def sample_few_shot(self, rng: np.random.Generator,
                        config: BufferConfig | None = None) -> list[ScoredMetaPath]:
        """Draw up to ``few_shot_n`` distinct entries by repeated renormalised sampling."""
        cfg = config or self.config
        items = self.items
        if len(items) <= cfg.few_shot_n:
            return items
        p = self.priorities(cfg).copy()
        out = []
        for _ in range(cfg.few_shot_n):
            cdf = np.cumsum(p)
            j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            j = min(j, len(p) - 1)
            while p[j] == 0.0:  # guards the float edge where u * total lands on a drained slot
                j -= 1
            out.append(items[j])
            p[j] = 0.0
        return out

    def top(self, k: int | None = None, score_mode: str = "sum") -> list[ScoredMetaPath]:
        """Entries by descending score, ties in insertion order."""
        ranked = sorted(self._items.values(), key=lambda it: -it.value(score_mode))
        return ranked if k is None else ranked[:k]

    def best_value(self, score_mode: str = "sum") -> float:
        return max((it.value(score_mode) for it in self._items.values()), default=0.0)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for it in self._items.values():
                fh.write(json.dumps(it.to_record(), sort_keys=True) + "\n")
        tmp.replace(path)

    @classmethod
    def load(cls, path, config: BufferConfig | None = None) -> "ReplayBuffer":
        buf = cls(config)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    it = ScoredMetaPath.from_record(json.loads(line))
                    buf._items.setdefault(it.key, it)
        return buf
