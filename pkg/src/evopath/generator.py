"""Prompt assembly, generation providers and output parsing."""
from __future__ import annotations

import os
import re
import string
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ProviderError, TemplateError
from .hin import SchemaGraph
from .matcher import MetaPath

BACKGROUND = (
    "Within Heterogeneous Information Networks (HINs), a meta-path represents a defined "
    "sequence of relations among multiple entity types in the network. Each meta-path should "
    "start and end with an entity type, involving a series of interactions between types and "
    "relations."
)
FEW_SHOT_HEADER = "Here are some example meta-paths and their scores for {relation}:"
FEW_SHOT_HEADER_PLAIN = "Here are some example meta-paths for {relation}:"
REQUIREMENT = (
    "Please generate as many meta-paths as possible to explain relation {relation}. "
    "You need to generate meta-paths with {words} words in total. "
    "Relations and types in the meta-paths must be selected from {relations} and {types} "
    "separately. Do not return any explanation."
)
EXAMPLE = "{path} (coverage={coverage:.4f}, confidence={confidence:.4f})"


def _fill(template: str, **values) -> str:
    fields = {name for _, name, _, _ in string.Formatter().parse(template) if name}
    missing = fields - values.keys()
    if missing:
        raise TemplateError(f"unsubstituted placeholder(s): {sorted(missing)}")
    return template.format(**values)


def render(m: MetaPath) -> str:
    return m.render()


def describe(m: MetaPath) -> str:
    """Plain-language gloss, e.g. ``a Person that livesIn a Country.``"""
    out = f"a {m.types[0]}"
    for r, t in zip(m.relations, m.types[1:]):
        out += f" that {r} a {t}"
    return out + "."


def _bracket(labels: Sequence[str]) -> str:
    return "[" + ", ".join(labels) + "]"


@dataclass
class PromptSpec:
    target_relation: str
    max_length: int
    candidate_relations: list[str]
    candidate_types: list[str]
    few_shot: list[tuple[MetaPath, float, float]] = field(default_factory=list)
    background: str = BACKGROUND
    include_scores: bool = True
    include_few_shot: bool = True
    include_background: bool = True
    describe: bool = True


def build_prompt(spec: PromptSpec) -> str:
    """Background, scored examples and requirement, separated by blank lines."""
    if spec.include_few_shot and not spec.few_shot:
        raise ValueError("few-shot examples requested but none given")
    parts = []
    if spec.include_background:
        parts.append(spec.background)
    if spec.include_few_shot:
        header = FEW_SHOT_HEADER if spec.include_scores else FEW_SHOT_HEADER_PLAIN
        lines = [_fill(header, relation=spec.target_relation)]
        for m, cov, conf in spec.few_shot:
            if spec.include_scores:
                lines.append(_fill(EXAMPLE, path=render(m), coverage=cov, confidence=conf))
            else:
                lines.append(render(m))
            if spec.describe:
                lines.append("    i.e. " + describe(m))
        parts.append("\n".join(lines))
    parts.append(_fill(
        REQUIREMENT,
        relation=spec.target_relation,
        words=spec.max_length * 2 + 1,
        relations=_bracket(spec.candidate_relations),
        types=_bracket(spec.candidate_types),
    ))
    return "\n\n".join(parts) + "\n"


# -- parsing ----------------------------------------------------------------

_LIST_MARKER = re.compile(r"^\s*(?:\d+\s*[.):]|\(\d+\)|[-*•])\s+")
_TRAILING_PAREN = re.compile(r"\s*\([^()]*\)\s*$")
_SPLIT = re.compile(r"\s*(?:-\[|\]-+>|-+>|\[|\]|,)\s*|\s+")
_TOKEN = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_:'/]*(?:\^-1)?$")


def _normalise(line: str) -> str:
    return (line.replace("→", "->").replace("⟶", "->")
            .replace("⁻¹", "^-1").replace("^{-1}", "^-1"))


def tokenize_line(line: str) -> list[str] | None:
    """Token list for a plausible meta-path line, else ``None``."""
    line = _normalise(line).strip()
    line = _LIST_MARKER.sub("", line)
    line = _TRAILING_PAREN.sub("", line)
    toks = [t for t in _SPLIT.split(line) if t]
    if len(toks) < 3 or len(toks) % 2 == 0:
        return None
    if not all(_TOKEN.match(t) for t in toks):
        return None
    return toks


def parse_lines(lines: Sequence[str]) -> tuple[list[list[str]], int]:
    """Tokenised candidates and the number of non-empty lines dropped."""
    out, dropped = [], 0
    for line in lines:
        if not line.strip():
            continue
        toks = tokenize_line(line)
        if toks is None:
            dropped += 1
        else:
            out.append(toks)
    return out, dropped


# -- providers --------------------------------------------------------------

PROVIDER_KINDS = ("http_chat", "mutation")


@dataclass
class ProviderConfig:
    kind: str = "mutation"
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    temperature: float = 0.7
    max_tokens: int = 1024
    timeout: float = 60.0
    retries: int = 2
    max_candidates: int = 30

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ConfigError(f"provider kind must be one of {PROVIDER_KINDS}, got {self.kind!r}")
        if self.kind == "http_chat" and not (self.endpoint and self.model):
            raise ConfigError("http_chat provider needs both endpoint and model")
        if self.retries < 0 or self.max_candidates < 1:
            raise ConfigError("retries must be >= 0 and max_candidates >= 1")


@dataclass
class RawGeneration:
    lines: list[str]
    latency: float = 0.0
    prompt_tokens: int | None = None
    completion_tokens: int | None = None

    @property
    def text(self) -> str:
        return "\n".join(self.lines)


def parse_generation(raw: RawGeneration) -> list[list[str]]:
    """Candidate token sequences from a provider response (labels not validated)."""
    return parse_lines(raw.lines)[0]


class HttpChatProvider:
    """Chat-completions client: one user message in, first choice's content out."""

    def __init__(self, config: ProviderConfig, transport=None):
        import httpx

        self.config = config
        key = None
        if config.api_key_env:
            key = os.environ.get(config.api_key_env)
            if not key:
                raise ConfigError(f"environment variable {config.api_key_env} is not set")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)
        self.url = config.endpoint.rstrip("/") + "/chat/completions"

    def payload(self, prompt: str) -> dict:
        c = self.config
        return {
            "model": c.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": c.temperature,
            "max_tokens": c.max_tokens,
        }

    def generate(self, prompt: str, rng=None) -> RawGeneration:
        import httpx

        body = self.payload(prompt)
        status, last = None, None
        for attempt in range(self.config.retries + 1):
            t0 = time.perf_counter()
            try:
                resp = self._client.post(self.url, json=body)
            except httpx.HTTPError as exc:
                last, status = exc, None
            else:
                if resp.status_code < 400:
                    data = resp.json()
                    text = (data.get("choices") or [{}])[0].get("message", {}).get("content") or ""
                    usage = data.get("usage") or {}
                    return RawGeneration(text.splitlines(), time.perf_counter() - t0,
                                         usage.get("prompt_tokens"), usage.get("completion_tokens"))
                status, last = resp.status_code, resp.text[:200]
            if attempt < self.config.retries:
                time.sleep(min(0.1 * 2 ** attempt, 2.0))
        raise ProviderError(f"chat request failed after {self.config.retries + 1} attempt(s): "
                            f"{last}", status=status)

    def close(self):
        self._client.close()


_RENDERED = re.compile(r"^\s*(\S+(?: -\[\S+\]-> \S+)+)")
_TARGET = re.compile(r"to explain relation (\S+?)\. ")
_WORDS = re.compile(r"with (\d+) words in total")
_CANDIDATES = re.compile(r"must be selected from \[(.*?)\] and \[(.*?)\] separately")


def _split_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


class MutationProvider:
    """LLM-free generator: single schema-valid edits of the prompt's examples.

    Edits are relation substitution, type substitution, one-step extension
    (within the prompt's length budget) and truncation of the last step.
    Only atoms from the prompt's candidate lists are used and every emitted
    step is a schema edge, so the cleaner never rejects its output. Paths
    consisting solely of the target relation are not emitted.
    """

    def __init__(self, schema: SchemaGraph, config: ProviderConfig | None = None):
        self.schema = schema
        self.config = config or ProviderConfig()

    @staticmethod
    def read_prompt(prompt: str):
        target = _TARGET.search(prompt)
        words = _WORDS.search(prompt)
        cands = _CANDIDATES.search(prompt)
        if not (target and words and cands):
            raise ProviderError("prompt lacks the requirement section")
        examples = []
        for line in prompt.splitlines():
            m = _RENDERED.match(line)
            if m:
                toks = tokenize_line(m.group(1))
                if toks:
                    examples.append(MetaPath.from_tokens(toks))
        max_len = (int(words.group(1)) - 1) // 2
        return (examples, target.group(1), max_len,
                _split_list(cands.group(1)), _split_list(cands.group(2)))

    def neighbours(self, examples, target, max_len, rels, types) -> list[MetaPath]:
        """All single edits of ``examples``, deduplicated, in deterministic order."""
        has = self.schema.has_edge
        rel_ok, type_ok = set(rels), set(types)
        out: dict[MetaPath, None] = {}

        def emit(m: MetaPath, src: MetaPath):
            if m == src or m.length > max_len or m.relations == (target,):
                return
            if not all(r in rel_ok for r in m.relations) or not all(t in type_ok for t in m.types):
                return
            if all(has(a, r, b) for a, r, b in m.steps()):
                out.setdefault(m, None)

        for src in examples:
            ts, rs = list(src.types), list(src.relations)
            for i in range(len(rs)):
                for r2 in rels:
                    if r2 != rs[i]:
                        emit(MetaPath(ts, rs[:i] + [r2] + rs[i + 1:]), src)
            for i in range(len(ts)):
                for t2 in types:
                    if t2 != ts[i]:
                        emit(MetaPath(ts[:i] + [t2] + ts[i + 1:], rs), src)
            if len(ts) < max_len:
                for r2, t2 in self.schema.out_edges(ts[-1]):
                    emit(MetaPath(ts + [t2], rs + [r2]), src)
            if len(rs) >= 2:
                emit(MetaPath(ts[:-1], rs[:-1]), src)
        return list(out)

    def generate(self, prompt: str, rng: np.random.Generator) -> RawGeneration:
        t0 = time.perf_counter()
        cands = self.neighbours(*self.read_prompt(prompt))
        if len(cands) > self.config.max_candidates:
            idx = rng.permutation(len(cands))[: self.config.max_candidates]
            cands = [cands[i] for i in idx]
        return RawGeneration([render(m) for m in cands], time.perf_counter() - t0)


def make_provider(config: ProviderConfig, schema: SchemaGraph | None = None):
    if config.kind == "http_chat":
        return HttpChatProvider(config)
    if schema is None:
        raise ConfigError("mutation provider needs the schema graph")
    return MutationProvider(schema, config)


def generate(provider, prompt: str, rng) -> RawGeneration:
    return provider.generate(prompt, rng)
