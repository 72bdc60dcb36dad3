import itertools
import json
import os
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evopath.errors import ConfigError, ProviderError, TemplateError
from evopath.generator import (
    HttpChatProvider, MutationProvider, PromptSpec, ProviderConfig, RawGeneration,
    _fill, build_prompt, parse_generation, parse_lines, render,
)
from evopath.hin import SchemaGraph
from evopath.matcher import MetaPath
from evopath.stubserver import StubChatServer, request_hash

GOLDEN = Path(__file__).parent / "golden"
FLAGS = list(itertools.product([True, False], repeat=3))


def golden_spec(background, few_shot, scores):
    return PromptSpec(
        target_relation="isCitizenOf",
        max_length=3,
        candidate_relations=["isCitizenOf", "livesIn", "wasBornIn", "isLocatedIn"],
        candidate_types=["Person", "Country", "City"],
        few_shot=[
            (MetaPath(("Person", "Country"), ("livesIn",)), 0.5, 0.5),
            (MetaPath(("Person", "City", "Country"), ("wasBornIn", "isLocatedIn")), 0.8125, 0.9),
        ],
        include_background=background,
        include_few_shot=few_shot,
        include_scores=scores,
    )


def golden_name(background, few_shot, scores):
    return f"prompt_bg{int(background)}_fs{int(few_shot)}_sc{int(scores)}.txt"


@pytest.mark.parametrize("flags", FLAGS, ids=lambda f: golden_name(*f)[7:-4])
def test_prompt_matches_golden(flags):
    text = build_prompt(golden_spec(*flags))
    path = GOLDEN / golden_name(*flags)
    if os.environ.get("EVOPATH_REGEN_GOLDEN"):
        path.parent.mkdir(exist_ok=True)
        path.write_text(text, encoding="utf-8")
    assert text == path.read_text(encoding="utf-8")


def test_word_budget_literal():
    text = build_prompt(golden_spec(True, True, True))
    assert "7 words in total" in text
    assert text.rstrip().endswith("Do not return any explanation.")


def test_background_toggle_only_drops_paragraph():
    on = build_prompt(golden_spec(True, True, True))
    off = build_prompt(golden_spec(False, True, True))
    assert on.endswith(off)
    assert on.split("\n\n", 1)[1] == off


def test_empty_few_shot_requires_flag_off():
    spec = golden_spec(True, True, True)
    spec.few_shot = []
    with pytest.raises(ValueError):
        build_prompt(spec)
    spec.include_few_shot = False
    assert "example" not in build_prompt(spec)


def test_template_integrity_check():
    with pytest.raises(TemplateError):
        _fill("explain {relation} with {words} words", relation="r")


class TestParse:
    @pytest.mark.parametrize("line,expected", [
        ("Person -[livesIn]-> Country", ["Person", "livesIn", "Country"]),
        ("1. Person -[bornIn]-> City -[locatedIn]-> Country",
         ["Person", "bornIn", "City", "locatedIn", "Country"]),
        ("- Person -[livesIn^-1]-> Country", ["Person", "livesIn^-1", "Country"]),
        ("Person → livesIn⁻¹ → Country", ["Person", "livesIn^-1", "Country"]),
        ("Person, livesIn, Country", ["Person", "livesIn", "Country"]),
        ("Person -[livesIn]-> Country (coverage=0.5000, confidence=0.5000)",
         ["Person", "livesIn", "Country"]),
    ])
    def test_accepts(self, line, expected):
        assert parse_generation(RawGeneration([line])) == [expected]

    @pytest.mark.parametrize("line", [
        "Sure! Here are some meta-paths:",
        "Person -[livesIn]->",
        "Person",
        "i.e. a Person that livesIn a Country.",
    ])
    def test_drops(self, line):
        seqs, dropped = parse_lines([line])
        assert seqs == [] and dropped == 1

    def test_blank_lines_not_counted(self):
        assert parse_lines(["", "   "]) == ([], 0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 5), st.data())
    def test_render_round_trip(self, k, data):
        ident = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True)
        types = data.draw(st.lists(ident, min_size=k, max_size=k))
        rels = data.draw(st.lists(st.tuples(ident, st.booleans()), min_size=k - 1, max_size=k - 1))
        rels = [r + "^-1" if inv else r for r, inv in rels]
        m = MetaPath(types, rels)
        if k == 1:
            return  # a lone type is not a meta-path line
        assert parse_generation(RawGeneration([render(m)])) == [m.tokens()]


def one_substitute_schema():
    # A -r-> B -s-> C, and each atom has exactly one alternative: A2, B2, C2, r2, s2
    edges = [("A", "r", "B"), ("B", "s", "C"), ("A2", "r", "B"), ("A", "r2", "B"),
             ("A", "r", "B2"), ("B2", "s", "C"), ("B", "s2", "C"), ("B", "s", "C2"),
             ("C", "t", "D")]
    return SchemaGraph({e: 1 for e in edges})


def oracle_neighbours(schema, src, target, max_len, rels, types):
    """Every token sequence one edit away from ``src``, filtered by the contract."""
    toks = src.tokens()
    found = set()
    for i in range(len(toks)):
        pool = types if i % 2 == 0 else rels
        for a in pool:
            found.add(tuple(toks[:i] + [a] + toks[i + 1:]))
    for r in rels:
        for t in types:
            found.add(tuple(toks + [r, t]))
    if len(toks) >= 5:
        found.add(tuple(toks[:-2]))
    out = set()
    for seq in found:
        m = MetaPath.from_tokens(seq)
        if m == src or m.length > max_len or m.relations == (target,):
            continue
        if all(schema.has_edge(*s) for s in m.steps()):
            out.add(m)
    return out


class TestMutation:
    rels = ["r", "s", "r2", "s2", "t", "q"]
    types = ["A", "B", "C", "A2", "B2", "C2", "D"]

    def prompt(self, examples, max_length=3):
        return build_prompt(PromptSpec("q", max_length, self.rels, self.types,
                                       [(m, 0.1, 0.2) for m in examples]))

    def test_matches_single_edit_oracle(self):
        schema = one_substitute_schema()
        src = MetaPath(("A", "B", "C"), ("r", "s"))
        prov = MutationProvider(schema, ProviderConfig(max_candidates=1000))
        got = {MetaPath.from_tokens(t) for t in
               parse_generation(prov.generate(self.prompt([src]), np.random.default_rng(0)))}
        assert got == oracle_neighbours(schema, src, "q", 3, self.rels, self.types)
        assert MetaPath(("A2", "B", "C"), ("r", "s")) in got
        assert MetaPath(("A", "B"), ("r",)) in got

    def test_extension_respects_length(self):
        schema = one_substitute_schema()
        src = MetaPath(("A", "B"), ("r",))
        prov = MutationProvider(schema, ProviderConfig(max_candidates=1000))
        for L in (2, 3):
            got = {MetaPath.from_tokens(t) for t in parse_generation(
                prov.generate(self.prompt([src], L), np.random.default_rng(0)))}
            assert got == oracle_neighbours(schema, src, "q", L, self.rels, self.types)
            assert all(m.length <= L for m in got)

    def test_deterministic_and_capped(self):
        schema = one_substitute_schema()
        src = MetaPath(("A", "B", "C"), ("r", "s"))
        prov = MutationProvider(schema, ProviderConfig(max_candidates=3))
        a = prov.generate(self.prompt([src]), np.random.default_rng(5)).lines
        b = prov.generate(self.prompt([src]), np.random.default_rng(5)).lines
        assert a == b and len(a) == 3

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_closure_on_random_schemas(self, seed):
        rng = random.Random(seed)
        types = [f"T{i}" for i in range(5)]
        rels = [f"r{i}" for i in range(4)]
        schema = SchemaGraph({(rng.choice(types), rng.choice(rels), rng.choice(types)): 1
                              for _ in range(12)})
        edges = sorted(schema.support)
        a, r, b = edges[0]
        prov = MutationProvider(schema, ProviderConfig(max_candidates=50))
        prompt = build_prompt(PromptSpec("r0", 3, rels, types, [(MetaPath((a, b), (r,)), 0, 0)]))
        for toks in parse_generation(prov.generate(prompt, np.random.default_rng(seed))):
            m = MetaPath.from_tokens(toks)
            assert all(schema.has_edge(*s) for s in m.steps())
            assert m.relations != ("r0",)


class TestHttp:
    def config(self, endpoint, **kw):
        return ProviderConfig(kind="http_chat", endpoint=endpoint, model="stub-model", **kw)

    def test_canned_completion(self, tmp_path):
        canned = "Person -[livesIn]-> Country\nPerson -[wasBornIn]-> City"
        probe = HttpChatProvider(self.config("http://unused"))
        key = request_hash(probe.payload("hello"))
        mapping = tmp_path / "map.json"
        mapping.write_text(json.dumps({key: canned}))
        with StubChatServer(mapping) as srv:
            prov = HttpChatProvider(self.config(srv.endpoint))
            raw = prov.generate("hello")
            assert raw.text == canned
            assert srv.requests[0]["messages"] == [{"role": "user", "content": "hello"}]
            assert srv.requests[0]["temperature"] == 0.7

    def test_empty_completion(self):
        with StubChatServer({"*": ""}) as srv:
            raw = HttpChatProvider(self.config(srv.endpoint)).generate("x")
            assert raw.lines == []

    def test_error_status_after_retries(self):
        with StubChatServer({"*": {"status": 503}}) as srv:
            prov = HttpChatProvider(self.config(srv.endpoint, retries=1))
            with pytest.raises(ProviderError) as err:
                prov.generate("x")
            assert err.value.status == 503
            assert len(srv.requests) == 2

    def test_missing_key_env(self, monkeypatch):
        monkeypatch.delenv("EVOPATH_TEST_KEY", raising=False)
        with pytest.raises(ConfigError, match="EVOPATH_TEST_KEY"):
            HttpChatProvider(self.config("http://x", api_key_env="EVOPATH_TEST_KEY"))

    def test_requires_endpoint_and_model(self):
        with pytest.raises(ConfigError):
            ProviderConfig(kind="http_chat", endpoint="http://x")
