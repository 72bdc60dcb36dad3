"""The discovery loop: sample examples, prompt, generate, clean, score, insert."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .atoms import AtomCatalog, build_catalog
from .cleaner import clean
from .errors import ConfigError, EvoPathError, NoSupportError, ProviderError, RunAborted
from .generator import PromptSpec, ProviderConfig, build_prompt, make_provider, parse_lines
from .hin import Hin, build_schema_graph
from .matcher import batch_score
from .replay import BufferConfig, ReplayBuffer, ScoredMetaPath
from .sampler import WalkConfig, rng_stream, sample_paths, summarize

log = logging.getLogger(__name__)

RUN_FILE, BUFFER_FILE, ROUNDS_FILE, PROMPTS_DIR = "run.json", "buffer.jsonl", "rounds.jsonl", "prompts"


@dataclass
class RunConfig:
    target_relation: str
    max_rounds: int = 30
    stagnation_rounds: int = 5
    max_consecutive_failures: int = 3
    walk: WalkConfig = field(default_factory=WalkConfig)
    buffer: BufferConfig = field(default_factory=BufferConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    expand_top_k: int = 3
    min_similarity: float = 0.5
    include_background: bool = True
    include_few_shot: bool = True
    include_scores: bool = True
    describe: bool = True
    refresh_catalog: bool = False
    score_workers: int = 1
    frontier_cap: int | None = None
    summarize_cap: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.stagnation_rounds < 1:
            raise ConfigError(f"stagnation_rounds must be >= 1, got {self.stagnation_rounds}")
        if self.max_consecutive_failures < 0:
            raise ConfigError("max_consecutive_failures must be >= 0")
        if not 0.0 <= self.min_similarity <= 1.0:
            raise ConfigError("min_similarity must lie in [0, 1]")

    @property
    def max_length(self) -> int:
        return self.walk.max_length

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        nested = {"walk": WalkConfig, "buffer": BufferConfig, "provider": ProviderConfig}
        for key, typ in nested.items():
            if isinstance(d.get(key), dict):
                d[key] = typ(**d[key])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RoundStats:
    round: int
    prompts: int
    parsed: int
    dropped_lines: int
    clean: dict
    new_unique: int
    buffer_size: int
    best_sum: float
    seconds: float
    failed: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunResult:
    buffer: ReplayBuffer
    rounds: list[RoundStats]
    catalog: AtomCatalog
    stop_reason: str
    stopped_at_round: int


def bootstrap(hin: Hin, cfg: RunConfig, excluded_facts: Iterable | None = None):
    """Seed the buffer from random walks and build the atom catalog."""
    r_q = cfg.target_relation
    walk = dataclasses.replace(cfg.walk, rng_seed=cfg.rng_seed)
    instances = sample_paths(hin, r_q, walk)
    if not instances:
        raise NoSupportError(
            f"random walks found no path closing a {r_q!r} fact; "
            "raise walks_per_fact or fact_batch_size")
    seeds = [m for m in summarize(hin, instances, cfg.summarize_cap) if m.relations != (r_q,)]
    if not seeds:
        raise NoSupportError(f"every sampled path for {r_q!r} was the trivial one-step path")
    scores = batch_score(hin, seeds, r_q, excluded_facts, workers=cfg.score_workers,
                         cap=cfg.frontier_cap)
    buffer = ReplayBuffer(cfg.buffer)
    buffer.insert(ScoredMetaPath(m, s, r_q, 0) for m, s in zip(seeds, scores)
                  if not isinstance(s, Exception))
    if len(buffer) == 0:
        raise NoSupportError(f"no seed meta-path for {r_q!r} could be scored")
    catalog = build_catalog(hin, seeds, cfg.expand_top_k, cfg.min_similarity)
    return buffer, catalog


def _catalog_from_buffer(hin: Hin, buffer: ReplayBuffer, cfg: RunConfig) -> AtomCatalog:
    return build_catalog(hin, [it.metapath for it in buffer], cfg.expand_top_k, cfg.min_similarity)


class _RunDir:
    def __init__(self, path):
        self.path = Path(path)

    def exists(self) -> bool:
        return (self.path / RUN_FILE).exists()

    def init(self, cfg: RunConfig, catalog: AtomCatalog):
        (self.path / PROMPTS_DIR).mkdir(parents=True, exist_ok=True)
        self.write_meta({"config": cfg.to_dict(), "catalog": catalog.to_dict(), "status": "running"})
        (self.path / ROUNDS_FILE).write_text("")

    def read_meta(self) -> dict:
        return json.loads((self.path / RUN_FILE).read_text())

    def write_meta(self, meta: dict):
        tmp = self.path / (RUN_FILE + ".tmp")
        tmp.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.path / RUN_FILE)

    def set_status(self, status: str, **extra):
        meta = self.read_meta()
        meta["status"] = status
        meta.update(extra)
        self.write_meta(meta)

    def read_rounds(self) -> list[RoundStats]:
        p = self.path / ROUNDS_FILE
        if not p.exists():
            return []
        return [RoundStats(**json.loads(line)) for line in p.read_text().splitlines() if line.strip()]

    def append_round(self, st: RoundStats):
        with open(self.path / ROUNDS_FILE, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(st.to_dict(), sort_keys=True) + "\n")

    def save_prompt(self, k: int, prompt: str, response: str | None):
        d = self.path / PROMPTS_DIR
        (d / f"round_{k:03d}.prompt.txt").write_text(prompt, encoding="utf-8")
        if response is not None:
            (d / f"round_{k:03d}.response.txt").write_text(response, encoding="utf-8")


def _trailing_stagnation(rounds: list[RoundStats]) -> tuple[int, int]:
    stagnant = failures = 0
    for st in reversed(rounds):
        if st.failed:
            failures += 1
            continue
        break
    for st in reversed(rounds):
        if st.failed:
            continue
        if st.new_unique:
            break
        stagnant += 1
    return stagnant, failures


def run(hin: Hin, cfg: RunConfig, run_dir=None, *, provider=None,
        excluded_facts: Iterable | None = None, resume: bool = False) -> RunResult:
    """Evolve the buffer for ``cfg.target_relation`` for at most ``cfg.max_rounds`` rounds.

    The loop stops early once ``stagnation_rounds`` successful rounds in a row
    add nothing new. A provider failure marks its round as failed; more than
    ``max_consecutive_failures`` failures in a row abort the run, after the
    partial buffer has been written. With ``run_dir`` every round is persisted,
    and ``resume=True`` continues an interrupted run from its files.
    """
    r_q = cfg.target_relation
    L = cfg.max_length
    excluded = list(excluded_facts) if excluded_facts is not None else None
    rd = _RunDir(run_dir) if run_dir is not None else None
    schema = build_schema_graph(hin)

    if resume and rd is not None and rd.exists():
        meta = rd.read_meta()
        catalog = AtomCatalog.from_dict(meta["catalog"])
        buffer = ReplayBuffer.load(rd.path / BUFFER_FILE, cfg.buffer)
        rounds = rd.read_rounds()
        if meta.get("status") in ("finished", "aborted") and "stopped_at_round" in meta:
            return RunResult(buffer, rounds, catalog, meta["stop_reason"], meta["stopped_at_round"])
    else:
        buffer, catalog = bootstrap(hin, cfg, excluded)
        rounds = []
        if rd is not None:
            rd.init(cfg, catalog)
            buffer.save(rd.path / BUFFER_FILE)

    if provider is None:
        provider = make_provider(cfg.provider, schema)

    stagnant, failures = _trailing_stagnation(rounds)
    start = rounds[-1].round + 1 if rounds else 1
    best = max([buffer.best_value("sum")] + [st.best_sum for st in rounds])

    def finish(reason: str, at: int) -> RunResult:
        if rd is not None:
            buffer.save(rd.path / BUFFER_FILE)
            rd.set_status("aborted" if reason == "aborted" else "finished",
                          stop_reason=reason, stopped_at_round=at)
        return RunResult(buffer, rounds, catalog, reason, at)

    if stagnant >= cfg.stagnation_rounds:
        return finish("stagnation", start)

    for k in range(start, cfg.max_rounds + 1):
        t0 = time.perf_counter()
        rng = rng_stream(cfg.rng_seed, "round", k)
        if cfg.refresh_catalog:
            catalog = _catalog_from_buffer(hin, buffer, cfg)
        shots = buffer.sample_few_shot(rng) if cfg.include_few_shot else []
        prompt = build_prompt(PromptSpec(
            target_relation=r_q, max_length=L,
            candidate_relations=list(catalog.relations), candidate_types=list(catalog.types),
            few_shot=[(it.metapath, it.score.coverage, it.score.confidence) for it in shots],
            include_background=cfg.include_background, include_few_shot=cfg.include_few_shot,
            include_scores=cfg.include_scores, describe=cfg.describe,
        ))
        try:
            raw = provider.generate(prompt, rng)
        except ProviderError as exc:
            failures += 1
            st = RoundStats(k, 1, 0, 0, {}, 0, len(buffer), best, time.perf_counter() - t0,
                            failed=True, error=f"{exc} (status={exc.status})")
            rounds.append(st)
            log.warning("round %d failed: %s", k, exc)
            if rd is not None:
                rd.save_prompt(k, prompt, None)
                rd.append_round(st)
            if failures > cfg.max_consecutive_failures:
                finish("aborted", k + 1)
                raise RunAborted(f"{failures} consecutive provider failures; "
                                 f"partial results kept after round {k}") from exc
            continue
        failures = 0
        seqs, dropped = parse_lines(raw.lines)
        report = clean(hin, schema, catalog, seqs, r_q, L, cfg.min_similarity)
        fresh = [m for m in report.accepted if (m, r_q) not in buffer]
        scores = batch_score(hin, fresh, r_q, excluded, workers=cfg.score_workers,
                             cap=cfg.frontier_cap)
        items = [ScoredMetaPath(m, s, r_q, k) for m, s in zip(fresh, scores)
                 if not isinstance(s, EvoPathError)]
        n_new = buffer.insert(items)
        best = max(best, buffer.best_value("sum"))
        st = RoundStats(k, 1, len(seqs), dropped, report.summary(), n_new, len(buffer), best,
                        time.perf_counter() - t0)
        rounds.append(st)
        log.info("round %d: %d parsed, %d new, best %.4f", k, len(seqs), n_new, best)
        if rd is not None:
            rd.save_prompt(k, prompt, raw.text)
            buffer.save(rd.path / BUFFER_FILE)
            rd.append_round(st)
        stagnant = stagnant + 1 if n_new == 0 else 0
        if stagnant >= cfg.stagnation_rounds:
            return finish("stagnation", k + 1)
    return finish("max_rounds", max(start, cfg.max_rounds + 1))
