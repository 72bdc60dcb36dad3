"""Candidate atom catalog: seed extraction plus string-similarity expansion."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import _backend
from .hin import ROOT, Hin, base_label, is_inverse_label
from .matcher import MetaPath

EXTRACTED = "extracted"
EXPANDED = "expanded"


def gestalt_similarity(a: str, b: str) -> float:
    """Ratcliff-Obershelp similarity ``2 * matches / (len(a) + len(b))``.

    Comparison is case-insensitive. The pair is put in lexicographic order
    before matching so the result is symmetric. Two empty strings score 1.
    """
    a, b = a.lower(), b.lower()
    if a > b:
        a, b = b, a
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * _backend.gestalt_matches(a, b) / total


def relation_similarity(a: str, b: str) -> float:
    """Similarity of relation labels, ignoring the inverse suffix."""
    return gestalt_similarity(base_label(a), base_label(b))


@dataclass
class AtomCatalog:
    types: list[str] = field(default_factory=list)
    relations: list[str] = field(default_factory=list)
    provenance: dict[tuple[str, str], str] = field(default_factory=dict)

    def has_type(self, label: str) -> bool:
        return ("type", label) in self.provenance

    def has_relation(self, label: str) -> bool:
        return ("relation", label) in self.provenance

    def __len__(self):
        return len(self.types) + len(self.relations)

    def add(self, kind: str, label: str, how: str) -> bool:
        if (kind, label) in self.provenance:
            return False
        self.provenance[(kind, label)] = how
        (self.types if kind == "type" else self.relations).append(label)
        return True

    def dump(self) -> str:
        """Two-column ``label<TAB>provenance`` report, types first."""
        lines = ["# types"]
        lines += [f"{t}\t{self.provenance[('type', t)]}" for t in self.types]
        lines.append("# relations")
        lines += [f"{r}\t{self.provenance[('relation', r)]}" for r in self.relations]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"types": [[t, self.provenance[("type", t)]] for t in self.types],
                "relations": [[r, self.provenance[("relation", r)]] for r in self.relations]}

    @classmethod
    def from_dict(cls, d: dict) -> "AtomCatalog":
        cat = cls()
        for t, how in d["types"]:
            cat.add("type", t, how)
        for r, how in d["relations"]:
            cat.add("relation", r, how)
        return cat


def _expand(extracted: Sequence[str], vocab: Iterable[str], sim, top_k: int,
            min_similarity: float) -> list[tuple[str, float]]:
    present = set(extracted)
    pool = [v for v in vocab if v not in present]
    best: dict[str, float] = {}
    for atom in extracted:
        scored = [(sim(atom, v), v) for v in pool]
        scored = [(s, v) for s, v in scored if s >= min_similarity]
        scored.sort(key=lambda sv: (-sv[0], sv[1]))
        for s, v in scored[:top_k]:
            if s > best.get(v, -1.0):
                best[v] = s
    return sorted(best.items(), key=lambda vs: (-vs[1], vs[0]))


def build_catalog(hin: Hin, seed_metapaths: Sequence[MetaPath], expand_top_k: int = 3,
                  min_similarity: float = 0.5) -> AtomCatalog:
    """Atoms of the seeds, then up to ``expand_top_k`` similar vocabulary atoms per seed atom.

    Each seed atom independently proposes its top matches from the full type
    or relation vocabulary (already-extracted atoms excluded); the union is
    appended in descending similarity, label as tiebreak. Relations compare
    by base label, so a relation always proposes its own inverse first.
    """
    cat = AtomCatalog()
    for m in seed_metapaths:
        for t in m.types:
            cat.add("type", t, EXTRACTED)
        for r in m.relations:
            cat.add("relation", r, EXTRACTED)
    if expand_top_k <= 0:
        return cat
    type_vocab = [t for t in hin.type_labels() if t != ROOT]
    rel_vocab = hin.relation_labels()
    for t, _ in _expand(list(cat.types), type_vocab, gestalt_similarity, expand_top_k, min_similarity):
        cat.add("type", t, EXPANDED)
    for r, _ in _expand(list(cat.relations), rel_vocab, relation_similarity, expand_top_k,
                        min_similarity):
        cat.add("relation", r, EXPANDED)
    return cat


def closest(label: str, candidates: Sequence[str], relation: bool = False):
    """Best-scoring candidate for ``label`` and its similarity; first wins ties.

    For relations only candidates with the same direction (inverse or not)
    are considered.
    """
    best, best_s = None, -1.0
    inv = is_inverse_label(label)
    for c in candidates:
        if relation:
            if is_inverse_label(c) != inv:
                continue
            s = relation_similarity(label, c)
        else:
            s = gestalt_similarity(label, c)
        if s > best_s:
            best, best_s = c, s
    return best, best_s
