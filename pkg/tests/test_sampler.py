import itertools
import math
import random

import numpy as np
import pytest

from evopath.errors import ConfigError, NoSupportError
from evopath.hin import augment_inverses, load_hin
from evopath.matcher import MetaPath, match_pairs
from evopath.sampler import PathInstance, WalkConfig, _step, rng_stream, sample_paths, summarize

import oracles


def star(n_heads=5):
    facts, types = [], []
    for i in range(n_heads):
        facts += [(f"h{i}", "rq", "t"), (f"h{i}", "a", f"m{i}"), (f"m{i}", "b", "t")]
        types += [(f"h{i}", "H"), (f"m{i}", "M")]
    types.append(("t", "T"))
    return load_hin(facts, types)


def test_dead_end_start_yields_nothing():
    hin = load_hin([("x", "rq", "y")], [("x", "A"), ("y", "B")])
    assert sample_paths(hin, "rq", WalkConfig(max_length=3, fact_batch_size=5, walks_per_fact=5)) == []


def test_star_records_every_walk():
    hin = star(5)
    cfg = WalkConfig(max_length=3, fact_batch_size=4, walks_per_fact=7, rng_seed=1)
    got = sample_paths(hin, "rq", cfg)
    # from h_i the only non-anchor edge is a -> m_i, whose only edge b -> t closes the anchor
    assert len(got) == cfg.fact_batch_size * cfg.walks_per_fact
    rels = {tuple(hin.relations.label(r) for r in p.relations) for p in got}
    assert rels == {("a", "b")}


def test_fixed_seed_is_reproducible():
    rng = random.Random(4)
    facts, types = oracles.random_graph(rng, n_entities=80, n_facts=400, inverse=False)
    hin = augment_inverses(load_hin(facts, types))
    cfg = WalkConfig(max_length=3, fact_batch_size=30, walks_per_fact=5, rng_seed=9)
    assert sample_paths(hin, "r0", cfg) == sample_paths(hin, "r0", cfg)
    other = WalkConfig(max_length=3, fact_batch_size=30, walks_per_fact=5, rng_seed=10)
    assert sample_paths(hin, "r0", cfg) != sample_paths(hin, "r0", other)


def test_instances_are_valid_walks():
    rng = random.Random(8)
    facts, types = oracles.random_graph(rng, n_entities=50, n_facts=300, inverse=False)
    hin = augment_inverses(load_hin(facts, types))
    rq = hin.relation_id("r1")
    cfg = WalkConfig(max_length=4, fact_batch_size=50, walks_per_fact=10)
    got = sample_paths(hin, "r1", cfg)
    assert got
    for p in got:
        assert len(p.entities) == len(p.relations) + 1 <= cfg.max_length
        for a, r, b in zip(p.entities, p.relations, p.entities[1:]):
            assert hin.has_fact(a, r, b)
        assert hin.has_fact(p.entities[0], rq, p.entities[-1])
        assert p.anchor_relation == rq


def test_missing_relation():
    hin = load_hin([("x", "r", "y")])
    with pytest.raises(KeyError):
        sample_paths(hin, "nope", WalkConfig())
    hin2 = load_hin([("x", "r", "y")]).without_facts([hin.fact("x", "r", "y")])
    with pytest.raises(NoSupportError):
        sample_paths(hin2, "r", WalkConfig())


@pytest.mark.parametrize("field", ["max_length", "fact_batch_size", "walks_per_fact"])
def test_config_validation(field):
    with pytest.raises(ConfigError):
        WalkConfig(**{field: 0})


def test_transition_uniformity():
    d = 6
    hin = load_hin([("hub", f"r{i % 3}", f"n{i}") for i in range(d)])
    indptr, rels, tails = hin.out_csr
    hub = hin.entity_id("hub")
    rng = rng_stream(0, "uniformity")
    n = 100_000
    counts = np.zeros(hin.n_entities, dtype=int)
    for _ in range(n):
        counts[_step(indptr, rels, tails, hub, rng)[1]] += 1
    sigma = math.sqrt(n * (1 / d) * (1 - 1 / d))
    for i in range(d):
        c = counts[hin.entity_id(f"n{i}")]
        assert abs(c - n / d) <= 3 * sigma


def test_emitted_metapaths_have_instances():
    rng = random.Random(12)
    facts, types = oracles.random_graph(rng, n_entities=60, n_facts=350, inverse=False)
    hin = augment_inverses(load_hin(facts, types, [("T1", "T0"), ("T2", "T0")]))
    cfg = WalkConfig(max_length=3, fact_batch_size=40, walks_per_fact=8)
    mps = summarize(hin, sample_paths(hin, "r2", cfg))
    assert mps
    for m in mps:
        assert m.length <= cfg.max_length
        assert len(match_pairs(hin, m)) > 0


class TestSummarize:
    def test_singly_typed_gives_one_per_instance(self):
        hin = load_hin([("a", "r", "b"), ("b", "s", "c")], [("a", "A"), ("b", "B"), ("c", "C")])
        E, R = hin.entity_id, hin.relation_id
        inst = PathInstance((E("a"), E("b"), E("c")), (R("r"), R("s")), R("r"))
        assert summarize(hin, [inst]) == [MetaPath(("A", "B", "C"), ("r", "s"))]

    def test_dag_lift(self):
        hin = load_hin([("a", "r", "b")], [("a", "Scientist"), ("a", "Writer"), ("b", "City")],
                       [("Scientist", "Person"), ("Writer", "Person")])
        E, R = hin.entity_id, hin.relation_id
        inst = PathInstance((E("a"), E("b")), (R("r"),), R("r"))
        assert summarize(hin, [inst]) == [MetaPath(("Person", "City"), ("r",))]

    def test_flat_taxonomy_lifts_to_root(self):
        hin = load_hin([("a", "r", "b")], [("a", "X"), ("a", "Y"), ("b", "U"), ("b", "V")])
        E, R = hin.entity_id, hin.relation_id
        inst = PathInstance((E("a"), E("b")), (R("r"),), R("r"))
        assert summarize(hin, [inst], cap_per_instance=10) == [MetaPath(("ROOT", "ROOT"), ("r",))]

    @pytest.mark.parametrize("cap", [1, 3, 4, 10])
    def test_cross_product_cap(self, cap):
        # X and Y share two incomparable parents A and B, so their LCA set is {A, B}
        dag = [("X", "A"), ("X", "B"), ("Y", "A"), ("Y", "B"),
               ("U", "C"), ("U", "D"), ("V", "C"), ("V", "D")]
        hin = load_hin([("a", "r", "b")], [("a", "X"), ("a", "Y"), ("b", "U"), ("b", "V")], dag)
        E, R = hin.entity_id, hin.relation_id
        inst = PathInstance((E("a"), E("b")), (R("r"),), R("r"))
        parents = {}
        for c, p in dag:
            parents.setdefault(c, set()).add(p)
        slot1 = sorted(oracles.all_common_ancestor_minima(parents, {"X", "Y"}))
        slot2 = sorted(oracles.all_common_ancestor_minima(parents, {"U", "V"}))
        expected = [MetaPath(c, ("r",)) for c in itertools.product(slot1, slot2)][:cap]
        got = summarize(hin, [inst], cap_per_instance=cap)
        assert got == expected
        assert len(got) == min(len(slot1) * len(slot2), cap)

    def test_dedup_across_instances(self):
        hin = load_hin([("a", "r", "b"), ("c", "r", "d")], [("a", "A"), ("b", "B"), ("c", "A"), ("d", "B")])
        E, R = hin.entity_id, hin.relation_id
        insts = [PathInstance((E("a"), E("b")), (R("r"),), R("r")),
                 PathInstance((E("c"), E("d")), (R("r"),), R("r"))]
        assert summarize(hin, insts) == [MetaPath(("A", "B"), ("r",))]
