import random

import pytest
from hypothesis import given, settings, strategies as st

from evopath.atoms import AtomCatalog, EXTRACTED, gestalt_similarity
from evopath.cleaner import REASONS, clean
from evopath.hin import build_schema_graph, load_hin
from evopath.matcher import MetaPath

import oracles


@pytest.fixture
def world():
    facts = [("ann", "isCitizenOf", "fr"), ("ann", "livesIn", "fr"), ("bob", "wasBornIn", "paris"),
             ("paris", "isLocatedIn", "fr"), ("eth", "hasCurrency", "chf")]
    types = [("ann", "Person"), ("bob", "Person"), ("fr", "Country"), ("paris", "City"),
             ("eth", "University"), ("chf", "Currency")]
    hin = load_hin(facts, types)
    cat = AtomCatalog()
    for t in ["Person", "Country", "City", "University"]:
        cat.add("type", t, EXTRACTED)
    for r in ["isCitizenOf", "livesIn", "wasBornIn", "isLocatedIn", "hasCurrency"]:
        cat.add("relation", r, EXTRACTED)
    return hin, build_schema_graph(hin), cat


def run(world, seqs, **kw):
    hin, schema, cat = world
    return clean(hin, schema, cat, seqs, "isCitizenOf", kw.pop("L", 3), **kw)


def test_valid_sequence_accepted(world):
    rep = run(world, [["Person", "livesIn", "Country"]])
    assert rep.accepted == [MetaPath(("Person", "Country"), ("livesIn",))]
    assert rep.corrected_count == 0 and rep.error_rate == 0.0


def test_synonym_correction(world):
    cat = world[2]
    sims = {r: gestalt_similarity("Citizenship", r) for r in cat.relations}
    assert max(sims, key=sims.get) == "isCitizenOf" and sims["isCitizenOf"] >= 0.5
    # repairs to the bare target relation, which is then rejected
    rep = run(world, [["Person", "Citizenship", "Country"]])
    assert rep.rejected["trivial_rq"] == 1 and rep.corrected_count == 0


def test_inverse_needs_inverse_candidate(world):
    rep = run(world, [["Country", "livesIn^-1", "Person"]])
    assert rep.rejected["unknown_atom"] == 1


def test_synonym_correction_accepted(world):
    rep = run(world, [["Person", "wasBornInto", "City", "isLocatedIn", "country"]])
    assert rep.accepted == [MetaPath(("Person", "City", "Country"), ("wasBornIn", "isLocatedIn"))]
    assert rep.corrected_count == 1


def test_invalid_step(world):
    rep = run(world, [["Person", "hasCurrency", "University"]])
    assert rep.rejected["invalid_step"] == 1 and rep.outcomes == ["invalid_step"]


def test_overlength(world):
    rep = run(world, [["Person", "wasBornIn", "City", "isLocatedIn", "Country"]], L=2)
    assert rep.rejected["overlength"] == 1


def test_relation_in_type_slot_is_unknown(world):
    rep = run(world, [["livesIn", "livesIn", "Country"]], min_similarity=0.9)
    assert rep.rejected["unknown_atom"] == 1


def test_malformed(world):
    rep = run(world, [["Person", "livesIn"], ["Person"], []])
    assert rep.rejected["malformed"] == 3


def test_dedup(world):
    rep = run(world, [["Person", "livesIn", "Country"]] * 3)
    assert len(rep.accepted) == 1 and rep.duplicates == 2 and rep.error_rate == 0.0


def test_full_vocab_flag(world):
    hin, schema, cat = world
    small = AtomCatalog()
    small.add("type", "Person", EXTRACTED)
    small.add("relation", "livesIn", EXTRACTED)
    seq = [["Person", "livesIn", "Country"]]
    assert clean(hin, schema, small, seq, "isCitizenOf", 3).rejected["unknown_atom"] == 1
    rep = clean(hin, schema, small, seq, "isCitizenOf", 3, search_full_vocab=True)
    assert len(rep.accepted) == 1


def _random_world(seed):
    rng = random.Random(seed)
    facts, type_rows = oracles.random_graph(rng, n_entities=40, n_types=5, n_relations=4, n_facts=90)
    hin = load_hin(facts, type_rows)
    eff = oracles.closure(oracles.declared_from_rows(facts, type_rows), [])
    edges = oracles.schema_edges(facts, eff)
    cat = AtomCatalog()
    for t in sorted({t for ts in eff.values() for t in ts}):
        cat.add("type", t, EXTRACTED)
    for r in sorted({r for _, r, _ in facts}):
        cat.add("relation", r, EXTRACTED)
    return rng, hin, edges, cat


def check_against_ground_truth(seed, n):
    rng, hin, edges, cat = _random_world(seed)
    cases = oracles.corrupted_sequences(rng, edges, cat.types, cat.relations, "r0", 3, n)
    rep = clean(hin, build_schema_graph(hin), cat, [c[1] for c in cases], "r0", 3)
    lookup = {x.lower(): x for x in cat.types + cat.relations}
    seen, expected = set(), []
    for kind, toks, expect in cases:
        if expect == "accepted":
            m = MetaPath.from_tokens([lookup[t.lower()] for t in toks])
            expect = "duplicate" if m in seen else "accepted"
            seen.add(m)
        expected.append(expect)
    return cases, rep, expected


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_rejection_reasons_match_ground_truth(seed):
    cases, rep, expected = check_against_ground_truth(seed, 80)
    assert rep.outcomes == expected
    total = len(rep.accepted) + rep.duplicates + rep.rejected_count
    assert total == len(cases)
    assert 0.0 <= rep.error_rate <= 1.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_soundness_and_idempotence(seed):
    rng, hin, edges, cat = _random_world(seed)
    schema = build_schema_graph(hin)
    cases = oracles.corrupted_sequences(rng, edges, cat.types, cat.relations, "r0", 3, 60)
    first = clean(hin, schema, cat, [c[1] for c in cases], "r0", 3)
    for m in first.accepted:
        assert all(s in edges for s in m.steps())
    again = clean(hin, schema, cat, [m.tokens() for m in first.accepted], "r0", 3)
    assert again.accepted == first.accepted
    assert again.corrected_count == 0 and again.rejected_count == 0


def test_reason_names():
    assert set(REASONS) == {"unknown_atom", "invalid_step", "trivial_rq", "overlength", "malformed"}
