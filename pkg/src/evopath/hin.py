"""In-memory heterogeneous information network.

Entities, types and relations are interned to dense integer ids. Facts live
in three parallel ``int64`` arrays sorted by ``(relation, head, tail)``, which
makes per-relation CSR adjacency a slice-and-count away. Each entity carries
a set of *declared* types; matching uses the *effective* types, which add
every ancestor in the type DAG plus the synthetic root.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import HinFormatError, HinValidationError, UnknownAtomError

ROOT = "ROOT"
INVERSE_SUFFIX = "^-1"


class Fact(NamedTuple):
    head: int
    relation: int
    tail: int


def is_inverse_label(label: str) -> bool:
    return label.endswith(INVERSE_SUFFIX)


def base_label(label: str) -> str:
    """Strip the inverse suffix if present."""
    return label[: -len(INVERSE_SUFFIX)] if is_inverse_label(label) else label


def inverse_label(label: str) -> str:
    if is_inverse_label(label):
        return base_label(label)
    return label + INVERSE_SUFFIX


class SymbolTable:
    """Bijective label <-> dense id mapping."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        for label in labels:
            self.intern(label)

    def intern(self, label: str) -> int:
        i = self._ids.get(label)
        if i is None:
            i = len(self._labels)
            self._ids[label] = i
            self._labels.append(label)
        return i

    def id(self, label: str) -> int:
        return self._ids[label]

    def get(self, label: str, default=None):
        return self._ids.get(label, default)

    def label(self, i: int) -> str:
        return self._labels[i]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    def copy(self) -> "SymbolTable":
        return SymbolTable(self._labels)

    def __len__(self):
        return len(self._labels)

    def __contains__(self, label):
        return label in self._ids

    def __iter__(self):
        return iter(self._labels)

    def __eq__(self, other):
        return isinstance(other, SymbolTable) and self._labels == other._labels


def _sorted_unique_facts(heads, rels, tails):
    heads = np.asarray(heads, dtype=np.int64)
    rels = np.asarray(rels, dtype=np.int64)
    tails = np.asarray(tails, dtype=np.int64)
    if heads.size == 0:
        return heads, rels, tails
    order = np.lexsort((tails, heads, rels))
    heads, rels, tails = heads[order], rels[order], tails[order]
    keep = np.ones(heads.size, dtype=bool)
    keep[1:] = (np.diff(rels) != 0) | (np.diff(heads) != 0) | (np.diff(tails) != 0)
    return heads[keep], rels[keep], tails[keep]


class Hin:
    """Immutable typed multigraph.

    Do not construct directly; use :func:`load_hin` or :meth:`from_triples`.
    Derived structures (CSR slices, type masks) are computed lazily and
    cached, so a ``Hin`` can be shared read-only across threads.
    """

    def __init__(self, entities, types, relations, heads, rels, tails,
                 declared, parents, augmented=False, removed=frozenset()):
        self.entities: SymbolTable = entities
        self.types: SymbolTable = types
        self.relations: SymbolTable = relations
        self.heads, self.rels, self.tails = _sorted_unique_facts(heads, rels, tails)
        self.declared: list[frozenset[int]] = declared
        self.parents: dict[int, frozenset[int]] = parents
        self.augmented = augmented
        self.removed: frozenset[int] = frozenset(removed)
        self._mask_cache: dict[int, np.ndarray] = {}
        self._csr_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._view_cache: dict[frozenset, "Hin"] = {}

    # -- construction -------------------------------------------------------

    @classmethod
    def from_triples(cls, facts, entity_types=(), dag=()):
        """Build from label triples, ``(entity, type)`` pairs and ``(child, parent)`` pairs."""
        return load_hin(list(facts), list(entity_types), list(dag))

    def _derive(self, heads, rels, tails, relations=None, augmented=None,
                removed=None, declared=None):
        return Hin(
            self.entities, self.types,
            self.relations if relations is None else relations,
            heads, rels, tails,
            self.declared if declared is None else declared,
            self.parents,
            self.augmented if augmented is None else augmented,
            self.removed if removed is None else removed,
        )

    # -- basic accessors ----------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_facts(self) -> int:
        return int(self.heads.size)

    def __len__(self):
        return self.n_facts

    def facts(self) -> Iterator[Fact]:
        for h, r, t in zip(self.heads.tolist(), self.rels.tolist(), self.tails.tolist()):
            yield Fact(h, r, t)

    @cached_property
    def fact_set(self) -> frozenset:
        return frozenset(self.facts())

    def has_fact(self, head: int, relation: int, tail: int) -> bool:
        return Fact(head, relation, tail) in self.fact_set

    def fact(self, head: str, relation: str, tail: str) -> Fact:
        """Resolve a label triple to a :class:`Fact` of ids."""
        return Fact(self.entity_id(head), self.relation_id(relation), self.entity_id(tail))

    def entity_id(self, label: str) -> int:
        i = self.entities.get(label)
        if i is None:
            raise UnknownAtomError(label, "entity")
        return i

    def type_id(self, label: str) -> int:
        i = self.types.get(label)
        if i is None:
            raise UnknownAtomError(label, "type")
        return i

    def relation_id(self, label: str) -> int:
        i = self.relations.get(label)
        if i is None:
            raise UnknownAtomError(label, "relation")
        return i

    def has_entity(self, eid: int) -> bool:
        return 0 <= eid < self.n_entities and eid not in self.removed

    def declared_types(self, eid: int) -> frozenset[int]:
        return self.declared[eid]

    def relation_labels(self, with_facts=True) -> list[str]:
        if not with_facts:
            return list(self.relations.labels)
        present = np.unique(self.rels)
        return [self.relations.label(int(r)) for r in present]

    def type_labels(self) -> list[str]:
        return list(self.types.labels)

    # -- relations ----------------------------------------------------------

    def inverse_id(self, rid: int) -> int | None:
        return self.relations.get(inverse_label(self.relations.label(rid)))

    @cached_property
    def _rel_bounds(self) -> np.ndarray:
        return np.searchsorted(self.rels, np.arange(len(self.relations) + 1))

    def relation_slice(self, rid: int) -> slice:
        b = self._rel_bounds
        if rid >= len(b) - 1:
            return slice(0, 0)
        return slice(int(b[rid]), int(b[rid + 1]))

    def relation_size(self, rid: int) -> int:
        s = self.relation_slice(rid)
        return s.stop - s.start

    def relation_facts(self, rid: int) -> tuple[np.ndarray, np.ndarray]:
        """Heads and tails of all facts with relation ``rid``, sorted by (head, tail)."""
        s = self.relation_slice(rid)
        return self.heads[s], self.tails[s]

    def pair_keys(self, rid: int) -> np.ndarray:
        """Sorted ``head * n + tail`` keys of the relation's pairs."""
        h, t = self.relation_facts(rid)
        return h * self.n_entities + t

    def relation_csr(self, rid: int) -> tuple[np.ndarray, np.ndarray]:
        got = self._csr_cache.get(rid)
        if got is None:
            h, t = self.relation_facts(rid)
            counts = np.bincount(h, minlength=self.n_entities)
            indptr = np.zeros(self.n_entities + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            got = (indptr, np.ascontiguousarray(t, dtype=np.int64))
            self._csr_cache[rid] = got
        return got

    @cached_property
    def out_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Out-edges of every entity over all relations: ``(indptr, rel, tail)``."""
        order = np.lexsort((self.tails, self.rels, self.heads))
        counts = np.bincount(self.heads, minlength=self.n_entities)
        indptr = np.zeros(self.n_entities + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return indptr, self.rels[order], self.tails[order]

    # -- types --------------------------------------------------------------

    @cached_property
    def ancestors(self) -> list[frozenset[int]]:
        """Per type id: itself, every DAG ancestor, and the root."""
        memo: dict[int, frozenset[int]] = {}

        def visit(t):
            got = memo.get(t)
            if got is not None:
                return got
            acc = {t, 0}
            for p in self.parents.get(t, ()):
                acc |= visit(p)
            memo[t] = frozenset(acc)
            return memo[t]

        return [visit(t) for t in range(len(self.types))]

    @cached_property
    def effective_types(self) -> list[frozenset[int]]:
        anc = self.ancestors
        out = []
        for eid, decl in enumerate(self.declared):
            if eid in self.removed:
                out.append(frozenset())
                continue
            acc: set[int] = set()
            for t in decl:
                acc |= anc[t]
            out.append(frozenset(acc))
        return out

    def type_mask(self, tid: int) -> np.ndarray:
        """``uint8`` membership mask of entities whose effective types contain ``tid``."""
        got = self._mask_cache.get(tid)
        if got is None:
            got = np.zeros(self.n_entities, dtype=np.uint8)
            idx = [e for e, ts in enumerate(self.effective_types) if tid in ts]
            got[idx] = 1
            self._mask_cache[tid] = got
        return got

    def entities_of_type(self, tid: int) -> np.ndarray:
        return np.flatnonzero(self.type_mask(tid)).astype(np.int64)

    # -- derived graphs -----------------------------------------------------

    def _with_inverses(self, facts: Iterable) -> set[Fact]:
        out = set()
        for h, r, t in facts:
            out.add(Fact(int(h), int(r), int(t)))
            if self.augmented:
                inv = self.inverse_id(int(r))
                if inv is not None:
                    out.add(Fact(int(t), inv, int(h)))
        return out

    def without_facts(self, facts: Iterable) -> "Hin":
        """Copy with the given facts removed; on augmented graphs their inverses go too.

        Views are memoised per excluded set so repeated scoring against the
        same held-out facts reuses one graph.
        """
        drop = frozenset(self._with_inverses(facts))
        if not drop:
            return self
        view = self._view_cache.get(drop)
        if view is None:
            n = self.n_entities
            key = (self.rels * n + self.heads) * n + self.tails
            dk = np.array(sorted((r * n + h) * n + t for h, r, t in drop), dtype=np.int64)
            keep = ~np.isin(key, dk)
            view = self._derive(self.heads[keep], self.rels[keep], self.tails[keep])
            self._view_cache[drop] = view
        return view

    def without_entities(self, eids: Iterable[int]) -> "Hin":
        """Copy with the entities and every incident fact removed."""
        gone = frozenset(int(e) for e in eids)
        if not gone:
            return self
        arr = np.fromiter(gone, dtype=np.int64)
        keep = ~(np.isin(self.heads, arr) | np.isin(self.tails, arr))
        return self._derive(self.heads[keep], self.rels[keep], self.tails[keep],
                            removed=self.removed | gone)

    def strip_inverses(self) -> "Hin":
        """Drop every inverse fact, recovering the pre-augmentation graph."""
        if not self.augmented:
            return self
        inv = np.array([is_inverse_label(lbl) for lbl in self.relations], dtype=bool)
        keep = ~inv[self.rels]
        return self._derive(self.heads[keep], self.rels[keep], self.tails[keep],
                            augmented=False)

    # -- serialisation ------------------------------------------------------

    def to_rows(self):
        """Return ``(fact_rows, type_rows, dag_rows)`` as label tuples."""
        E, T, R = self.entities.label, self.types.label, self.relations.label
        base = self.strip_inverses()
        fact_rows = [(E(h), R(r), E(t)) for h, r, t in base.facts()]
        type_rows = []
        for eid, decl in enumerate(self.declared):
            if eid in self.removed:
                continue
            for t in sorted(decl):
                if t != 0:
                    type_rows.append((E(eid), T(t)))
        dag_rows = [(T(c), T(p)) for c in sorted(self.parents) for p in sorted(self.parents[c])]
        return fact_rows, type_rows, dag_rows

    def write(self, directory) -> dict[str, Path]:
        """Write ``facts.tsv``, ``types.tsv`` and ``dag.tsv`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, rows in zip(("facts", "types", "dag"), self.to_rows()):
            p = directory / f"{name}.tsv"
            with open(p, "w", encoding="utf-8", newline="") as fh:
                for row in rows:
                    fh.write("\t".join(row) + "\n")
            paths[name] = p
        return paths

    def summary(self) -> dict[str, int]:
        base = self.strip_inverses()
        live = [e for e in range(self.n_entities) if e not in self.removed]
        return {
            "entities": len(live),
            "types": len(self.types) - 1,
            "relations": len(base.relation_labels()),
            "facts": base.n_facts,
        }


# -- loading ----------------------------------------------------------------

def _iter_rows(source, ncols: int, name: str):
    """Yield ``(lineno, cells)``; accepts a path or an iterable of rows/lines."""
    if isinstance(source, (str, os.PathLike)):
        name = str(source)
        with open(source, encoding="utf-8", newline="") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.startswith("#"):
                    continue
                cells = line.split("\t")
                if len(cells) != ncols:
                    raise HinFormatError(
                        f"{name}:{lineno}: expected {ncols} tab-separated columns, got {len(cells)}")
                yield lineno, [c.strip() for c in cells]
        return
    for lineno, row in enumerate(source, 1):
        if isinstance(row, str):
            if not row.strip() or row.startswith("#"):
                continue
            row = row.rstrip("\r\n").split("\t")
        row = list(row)
        if len(row) != ncols:
            raise HinFormatError(
                f"{name}:{lineno}: expected {ncols} columns, got {len(row)}")
        yield lineno, [str(c).strip() for c in row]


def _find_cycle_member(parents: dict[int, set[int]]) -> int | None:
    nodes = set(parents)
    for ps in parents.values():
        nodes |= ps
    children: dict[int, list[int]] = {}
    for c, ps in parents.items():
        for p in ps:
            children.setdefault(p, []).append(c)
    # Kahn over child -> parent edges
    remaining = {t: len(parents.get(t, ())) for t in nodes}
    stack = [t for t, d in remaining.items() if d == 0]
    while stack:
        p = stack.pop()
        for c in children.get(p, ()):
            remaining[c] -= 1
            if remaining[c] == 0:
                stack.append(c)
    left = [t for t, d in remaining.items() if d > 0]
    if not left:
        return None
    # walk parents inside the residue until a node repeats; that node is on a cycle
    seen = set()
    t = left[0]
    while t not in seen:
        seen.add(t)
        t = next(p for p in parents[t] if remaining.get(p, 0) > 0)
    return t


def load_hin(facts_source, types_source=None, dag_source=None) -> Hin:
    """Load a graph from facts, entity-type and type-DAG sources.

    Each source is a TSV path or an iterable of rows. Facts are deduplicated;
    entities without a type row receive the root type. Inverse augmentation is
    *not* applied here; see :func:`augment_inverses`.
    """
    entities = SymbolTable()
    types = SymbolTable([ROOT])
    relations = SymbolTable()
    heads, rels, tails = [], [], []
    for _, (h, r, t) in _iter_rows(facts_source, 3, "facts"):
        heads.append(entities.intern(h))
        rels.append(relations.intern(r))
        tails.append(entities.intern(t))

    assigned: dict[int, set[int]] = {}
    if types_source is not None:
        for _, (e, ty) in _iter_rows(types_source, 2, "types"):
            assigned.setdefault(entities.intern(e), set()).add(types.intern(ty))

    parents: dict[int, set[int]] = {}
    if dag_source is not None:
        for lineno, (child, parent) in _iter_rows(dag_source, 2, "dag"):
            c, p = types.intern(child), types.intern(parent)
            if c == 0:
                raise HinValidationError(f"dag:{lineno}: the root type cannot have a parent")
            parents.setdefault(c, set()).add(p)
        member = _find_cycle_member(parents)
        if member is not None:
            raise HinValidationError(f"type DAG has a cycle through {types.label(member)!r}")

    declared = [frozenset(assigned.get(e) or {0}) for e in range(len(entities))]
    frozen_parents = {c: frozenset(ps) for c, ps in parents.items()}
    return Hin(entities, types, relations, heads, rels, tails, declared, frozen_parents)


def augment_inverses(hin: Hin) -> Hin:
    """Add ``(t, r^-1, h)`` for every fact ``(h, r, t)``."""
    if hin.augmented:
        raise HinValidationError("graph is already inverse-augmented")
    relations = hin.relations.copy()
    base_ids = list(range(len(relations)))
    for rid in base_ids:
        label = relations.label(rid)
        if is_inverse_label(label):
            raise HinValidationError(
                f"relation {label!r} already carries the inverse suffix {INVERSE_SUFFIX!r}")
    inv_of = np.array([relations.intern(relations.label(r) + INVERSE_SUFFIX) for r in base_ids],
                      dtype=np.int64)
    heads = np.concatenate([hin.heads, hin.tails])
    rels = np.concatenate([hin.rels, inv_of[hin.rels] if hin.rels.size else hin.rels])
    tails = np.concatenate([hin.tails, hin.heads])
    return hin._derive(heads, rels, tails, relations=relations, augmented=True)


# -- schema graph ------------------------------------------------------------

@dataclass
class SchemaGraph:
    """Type-level summary: ``(source type, relation, target type) -> support``."""

    support: dict[tuple[str, str, str], int] = field(default_factory=dict)

    @property
    def nodes(self) -> set[str]:
        out = set()
        for a, _, b in self.support:
            out.add(a)
            out.add(b)
        return out

    @property
    def edges(self) -> set[tuple[str, str, str]]:
        return set(self.support)

    def has_edge(self, src: str, relation: str, dst: str) -> bool:
        return self.support.get((src, relation, dst), 0) >= 1

    @cached_property
    def _out(self) -> dict[str, list[tuple[str, str]]]:
        out: dict[str, list[tuple[str, str]]] = {}
        for (a, r, b) in sorted(self.support):
            out.setdefault(a, []).append((r, b))
        return out

    def out_edges(self, src: str) -> list[tuple[str, str]]:
        return self._out.get(src, [])

    def total_support(self) -> int:
        return sum(self.support.values())


def build_schema_graph(hin: Hin) -> SchemaGraph:
    """Count, for each ``(t1, r, t2)``, the facts ``(v1, r, v2)`` with ``t1 in tau(v1)``, ``t2 in tau(v2)``."""
    eff = hin.effective_types
    sig_ids: dict[frozenset, int] = {}
    sig_of = np.empty(hin.n_entities, dtype=np.int64)
    sigs: list[frozenset] = []
    for e, ts in enumerate(eff):
        s = sig_ids.get(ts)
        if s is None:
            s = sig_ids[ts] = len(sigs)
            sigs.append(ts)
        sig_of[e] = s
    support: dict[tuple[str, str, str], int] = {}
    if hin.n_facts:
        ns = len(sigs)
        key = (hin.rels * ns + sig_of[hin.heads]) * ns + sig_of[hin.tails]
        uniq, counts = np.unique(key, return_counts=True)
        T, R = hin.types.label, hin.relations.label
        for k, c in zip(uniq.tolist(), counts.tolist()):
            st = k % ns
            sh = (k // ns) % ns
            r = k // (ns * ns)
            rl = R(r)
            for a in sigs[sh]:
                for b in sigs[st]:
                    kk = (T(a), rl, T(b))
                    support[kk] = support.get(kk, 0) + c
    return SchemaGraph(support)


# -- lowest common ancestors -------------------------------------------------

def lca_types(hin: Hin, type_sets: Sequence[Iterable[str]]) -> list[set[str]]:
    """Minimal common ancestors for each slot's type set.

    A singleton slot is returned unchanged. The root is always a common
    ancestor, so the result is never empty.
    """
    anc = hin.ancestors
    out = []
    for slot in type_sets:
        ids = [hin.type_id(t) for t in slot]
        if len(set(ids)) <= 1:
            out.append({hin.types.label(i) for i in ids} or {ROOT})
            continue
        common = set(anc[ids[0]])
        for i in ids[1:]:
            common &= anc[i]
        # c is minimal unless some other common ancestor lies below it
        minimal = {c for c in common
                   if not any(d != c and c in anc[d] for d in common)}
        out.append({hin.types.label(i) for i in minimal})
    return out


def read_pairs(path) -> list[tuple[str, str]]:
    """Read a two-column TSV (used for persisted splits)."""
    with open(path, encoding="utf-8", newline="") as fh:
        return [tuple(row) for row in csv.reader(fh, delimiter="\t") if row and not row[0].startswith("#")]
