"""Relation-anchored random walks and their summarisation into seed meta-paths."""
from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NoSupportError
from .hin import ROOT, Hin, lca_types
from .matcher import MetaPath


def rng_stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for a named sub-stream of one top-level seed."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode()), *map(int, extra)])


@dataclass(frozen=True)
class PathInstance:
    entities: tuple[int, ...]
    relations: tuple[int, ...]
    anchor_relation: int


@dataclass
class WalkConfig:
    max_length: int = 3
    fact_batch_size: int = 200
    walks_per_fact: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_length < 1:
            raise ConfigError(f"max_length must be >= 1, got {self.max_length}")
        for name in ("fact_batch_size", "walks_per_fact"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


def _step(indptr, rels, tails, node, rng, skip=None):
    """Pick a uniformly random out-edge of ``node``; ``skip`` removes one edge index."""
    lo, hi = int(indptr[node]), int(indptr[node + 1])
    n = hi - lo
    if skip is not None:
        n -= 1
    if n <= 0:
        return None
    k = lo + int(rng.integers(n))
    if skip is not None and k >= skip:
        k += 1
    return int(rels[k]), int(tails[k])


def _edge_index(indptr, rels, tails, node, rel, tail):
    lo, hi = int(indptr[node]), int(indptr[node + 1])
    for k in range(lo, hi):
        if rels[k] == rel and tails[k] == tail:
            return k
    return None


def sample_paths(hin: Hin, r_q: str, cfg: WalkConfig) -> list[PathInstance]:
    """Collect path instances that close an ``r_q`` fact.

    A batch of ``r_q`` facts is drawn without replacement. From each head,
    ``walks_per_fact`` walks of at most ``max_length - 1`` steps follow
    uniformly chosen out-edges; whenever the current node is an ``r_q`` tail
    of the head, the prefix so far is recorded. The first step never uses the
    anchor fact's own edge. Each fact gets its own random stream, so results
    are independent of processing order.
    """
    rq = hin.relation_id(r_q)
    heads, tails = hin.relation_facts(rq)
    if heads.size == 0:
        raise NoSupportError(f"relation has no support: {r_q!r}")
    pick = rng_stream(cfg.rng_seed, "facts")
    n_pick = min(cfg.fact_batch_size, heads.size)
    chosen = np.sort(pick.choice(heads.size, size=n_pick, replace=False))

    indptr, out_rel, out_tail = hin.out_csr
    closes = set((hin.pair_keys(rq)).tolist())
    n = hin.n_entities
    max_steps = cfg.max_length - 1
    out: list[PathInstance] = []
    for fi in chosen.tolist():
        vh, vt = int(heads[fi]), int(tails[fi])
        rng = rng_stream(cfg.rng_seed, "walk", fi)
        anchor = _edge_index(indptr, out_rel, out_tail, vh, rq, vt)
        for _ in range(cfg.walks_per_fact):
            ents, rels = [vh], []
            node = vh
            for step in range(max_steps):
                nxt = _step(indptr, out_rel, out_tail, node, rng,
                            skip=anchor if step == 0 else None)
                if nxt is None:
                    break
                r, node = nxt
                ents.append(node)
                rels.append(r)
                if vh * n + node in closes:
                    out.append(PathInstance(tuple(ents), tuple(rels), rq))
    return out


def summarize(hin: Hin, instances, cap_per_instance: int = 10) -> list[MetaPath]:
    """Lift instances to meta-paths.

    Each slot keeps its declared type when there is exactly one, otherwise the
    slot's lowest common ancestors. Every combination of slot alternatives is
    emitted (lexicographic order, at most ``cap_per_instance``); duplicates
    across instances are dropped, first occurrence wins.
    """
    T, R = hin.types.label, hin.relations.label
    seen: dict[MetaPath, None] = {}
    for inst in instances:
        slots = []
        for e in inst.entities:
            decl = {T(t) for t in hin.declared_types(e)} or {ROOT}
            slots.append(decl)
        lifted = lca_types(hin, slots)
        rels = tuple(R(r) for r in inst.relations)
        options = [sorted(s) for s in lifted]
        for combo in itertools.islice(itertools.product(*options), cap_per_instance):
            seen.setdefault(MetaPath(combo, rels), None)
    return list(seen)
