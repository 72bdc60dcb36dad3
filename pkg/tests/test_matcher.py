import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evopath.errors import FrontierLimitError, NoSupportError, UnknownAtomError
from evopath.hin import augment_inverses, load_hin
from evopath.matcher import MetaPath, batch_score, match_pairs, score_metapath

import oracles


def labelled(hin, pairs):
    E = hin.entities.label
    return {(E(h), E(t)) for h, t in pairs}


def test_zero_relation_path_is_diagonal(citizenship_hin, kernels):
    got = match_pairs(citizenship_hin, MetaPath(("Person",)))
    assert labelled(citizenship_hin, got) == {("a", "a"), ("b", "b"), ("c", "c")}


def test_simple_join(citizenship_hin, kernels):
    m = MetaPath(("Person", "Country"), ("livesIn",))
    assert labelled(citizenship_hin, match_pairs(citizenship_hin, m)) == {("a", "c1"), ("b", "c1")}


def test_exclusion(citizenship_hin, kernels):
    m = MetaPath(("Person", "Country"), ("livesIn",))
    ex = [citizenship_hin.fact("a", "livesIn", "c1")]
    assert labelled(citizenship_hin, match_pairs(citizenship_hin, m, ex)) == {("b", "c1")}


def test_micro_example_scores(citizenship_hin, kernels):
    s = score_metapath(citizenship_hin, MetaPath(("Person", "Country"), ("livesIn",)), "citizenOf")
    assert (s.coverage, s.confidence) == (0.5, 0.5)
    assert (s.support_both, s.support_rq, s.support_m) == (1, 2, 2)


def test_self_explanation_has_full_coverage(citizenship_hin, kernels):
    s = score_metapath(citizenship_hin, MetaPath(("Person", "Country"), ("citizenOf",)), "citizenOf")
    assert s.coverage == 1.0


def test_no_instances(citizenship_hin, kernels):
    s = score_metapath(citizenship_hin, MetaPath(("Country", "Person"), ("livesIn",)), "citizenOf")
    assert (s.coverage, s.confidence, s.support_m) == (0.0, 0.0, 0)


def test_unknown_atom_named(citizenship_hin):
    with pytest.raises(UnknownAtomError, match="worksFor"):
        match_pairs(citizenship_hin, MetaPath(("Person", "Country"), ("worksFor",)))
    with pytest.raises(UnknownAtomError, match="Planet"):
        match_pairs(citizenship_hin, MetaPath(("Planet",)))


def test_no_support(citizenship_hin):
    ex = [citizenship_hin.fact("a", "citizenOf", "c1"), citizenship_hin.fact("c", "citizenOf", "c2")]
    with pytest.raises(NoSupportError, match="relation has no support"):
        score_metapath(citizenship_hin, MetaPath(("Person",)), "citizenOf", ex)


def test_frontier_cap(citizenship_hin, kernels):
    m = MetaPath(("Person", "Country"), ("livesIn",))
    with pytest.raises(FrontierLimitError):
        match_pairs(citizenship_hin, m, cap=1)
    assert len(match_pairs(citizenship_hin, m, cap=2)) == 2


def test_invalid_metapath_shape():
    with pytest.raises(ValueError):
        MetaPath(("A", "B"), ())


def test_token_length_rule():
    m = MetaPath(("A", "B", "C"), ("r", "s"))
    assert len(m.tokens()) == 2 * len(m.relations) + 1
    assert MetaPath.from_tokens(m.tokens()) == m


def _random_case(seed):
    rng = random.Random(seed)
    facts, type_rows = oracles.random_graph(
        rng, n_entities=rng.randint(5, 120), n_relations=rng.randint(1, 4),
        n_facts=rng.randint(5, 300), inverse=rng.random() < 0.5)
    hin = load_hin(facts, type_rows)
    eff = oracles.closure(oracles.declared_from_rows(facts, type_rows), [])
    types = sorted({t for ts in eff.values() for t in ts})
    rels = sorted({r for _, r, _ in facts})
    return rng, hin, facts, eff, types, rels


@pytest.mark.parametrize("seed", range(25))
def test_random_graphs_match_dfs(seed, kernels):
    rng, hin, facts, eff, types, rels = _random_case(seed)
    for _ in range(8):
        ts, rs = oracles.random_metapath(rng, types, rels)
        got = labelled(hin, match_pairs(hin, MetaPath(ts, rs)))
        assert got == oracles.dfs_pairs(facts, eff, ts, rs)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_exclusion_is_monotone(seed):
    rng, hin, facts, eff, types, rels = _random_case(seed)
    ts, rs = oracles.random_metapath(rng, types, rels)
    m = MetaPath(ts, rs)
    all_facts = list(hin.facts())
    x = rng.sample(all_facts, len(all_facts) // 5)
    y = rng.sample(all_facts, len(all_facts) // 5)
    small = match_pairs(hin, m, x).to_set()
    big = match_pairs(hin, m, x + y).to_set()
    assert big <= small


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_scores_in_unit_interval(seed):
    rng, hin, facts, eff, types, rels = _random_case(seed)
    ts, rs = oracles.random_metapath(rng, types, rels)
    s = score_metapath(hin, MetaPath(ts, rs), rels[0])
    assert 0.0 <= s.coverage <= 1.0 and 0.0 <= s.confidence <= 1.0


def test_backends_agree():
    from evopath import _pykernels
    ck = pytest.importorskip("evopath._ckernels")
    rng, hin, *_ , types, rels = _random_case(99)
    for _ in range(30):
        ts, rs = oracles.random_metapath(rng, types, rels)
        steps = [(*hin.relation_csr(hin.relation_id(r)), hin.type_mask(hin.type_id(t)))
                 for r, t in zip(rs, ts[1:])]
        src = hin.entities_of_type(hin.type_id(ts[0]))
        a = _pykernels.expand(src, steps, hin.n_entities)
        b = ck.expand(src, steps, hin.n_entities)
        assert np.array_equal(a, b)


class TestBatch:
    def test_empty(self, citizenship_hin):
        assert batch_score(citizenship_hin, [], "citizenOf") == []

    def test_singleton(self, citizenship_hin):
        m = MetaPath(("Person", "Country"), ("livesIn",))
        assert batch_score(citizenship_hin, [m], "citizenOf") == [
            score_metapath(citizenship_hin, m, "citizenOf")]

    def test_item_errors_do_not_abort(self, citizenship_hin):
        good = MetaPath(("Person", "Country"), ("livesIn",))
        bad = MetaPath(("Person", "Country"), ("nope",))
        out = batch_score(citizenship_hin, [good, bad, good], "citizenOf")
        assert isinstance(out[1], UnknownAtomError)
        assert out[0] == out[2]

    @pytest.mark.parametrize("workers", [1, 4])
    def test_matches_sequential_loop(self, workers):
        rng = random.Random(5)
        facts, type_rows = oracles.random_graph(rng, n_entities=200, n_relations=5, n_facts=600,
                                                inverse=False)
        hin = augment_inverses(load_hin(facts, type_rows))
        types = hin.type_labels()
        rels = hin.relation_labels()
        paths = [MetaPath(*oracles.random_metapath(rng, types, rels)) for _ in range(50)]
        ex = rng.sample(list(hin.facts()), 20)
        seq = [score_metapath(hin, m, "r0", ex) for m in paths]
        assert batch_score(hin, paths, "r0", ex, workers=workers) == seq
