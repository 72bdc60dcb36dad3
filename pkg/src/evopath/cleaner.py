"""Repair and validation of generated token sequences."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .atoms import AtomCatalog, closest
from .hin import ROOT, Hin, SchemaGraph
from .matcher import MetaPath

REASONS = ("unknown_atom", "invalid_step", "trivial_rq", "overlength", "malformed")


@dataclass
class CleanReport:
    accepted: list[MetaPath] = field(default_factory=list)
    corrected_count: int = 0
    rejected: dict[str, int] = field(default_factory=lambda: dict.fromkeys(REASONS, 0))
    duplicates: int = 0
    # per input sequence: "accepted", "duplicate" or a rejection reason
    outcomes: list[str] = field(default_factory=list)

    @property
    def rejected_count(self) -> int:
        return sum(self.rejected.values())

    @property
    def error_rate(self) -> float:
        total = len(self.accepted) + self.duplicates + self.rejected_count
        return self.rejected_count / total if total else 0.0

    def summary(self) -> dict:
        return {
            "accepted": len(self.accepted),
            "duplicates": self.duplicates,
            "corrected": self.corrected_count,
            "rejected": dict(self.rejected),
            "error_rate": self.error_rate,
        }


def _repair(token: str, is_relation: bool, vocab: Sequence[str], known, min_similarity: float):
    if known(token):
        return token, False
    best, sim = closest(token, vocab, relation=is_relation)
    if best is None or sim < min_similarity:
        return None, False
    return best, True


def clean(hin: Hin, schema: SchemaGraph, catalog: AtomCatalog, sequences, r_q: str,
          max_length: int, min_similarity: float = 0.5,
          search_full_vocab: bool = False) -> CleanReport:
    """Repair out-of-vocabulary atoms, then keep schema-sound, non-trivial meta-paths.

    Token kind follows position: even slots are types, odd slots relations.
    Checks run in this order and the first failure decides the reason:
    malformed shape, unknown atom, overlength, invalid step, trivial target.
    Accepted paths are deduplicated; duplicates are neither accepted nor errors.
    """
    if search_full_vocab:
        type_vocab = [t for t in hin.type_labels() if t != ROOT] + [ROOT]
        rel_vocab = hin.relation_labels()
    else:
        type_vocab, rel_vocab = catalog.types, catalog.relations
    type_set, rel_set = set(type_vocab), set(rel_vocab)
    report = CleanReport()
    seen: set[MetaPath] = set()

    def reject(reason):
        report.rejected[reason] += 1
        report.outcomes.append(reason)

    for seq in sequences:
        toks = list(seq)
        if len(toks) < 3 or len(toks) % 2 == 0 or not all(isinstance(t, str) and t for t in toks):
            reject("malformed")
            continue
        fixed, changed, ok = [], False, True
        for i, tok in enumerate(toks):
            is_rel = i % 2 == 1
            vocab, known = (rel_vocab, rel_set.__contains__) if is_rel else \
                (type_vocab, type_set.__contains__)
            new, did = _repair(tok, is_rel, vocab, known, min_similarity)
            if new is None:
                ok = False
                break
            fixed.append(new)
            changed |= did
        if not ok:
            reject("unknown_atom")
            continue
        m = MetaPath.from_tokens(fixed)
        if m.length > max_length:
            reject("overlength")
            continue
        if not all(schema.has_edge(a, r, b) for a, r, b in m.steps()):
            reject("invalid_step")
            continue
        if m.relations == (r_q,):
            reject("trivial_rq")
            continue
        if changed:
            report.corrected_count += 1
        if m in seen:
            report.duplicates += 1
            report.outcomes.append("duplicate")
            continue
        seen.add(m)
        report.accepted.append(m)
        report.outcomes.append("accepted")
    return report
