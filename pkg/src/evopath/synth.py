"""Synthetic HINs with one planted meta-path at controlled confidence and coverage.

World: persons and organisations (both agents), cities, regions and countries
(all places). Every city lies in one region and one country. The planted rule

    Person -[wasBornIn]-> City -[isLocatedIn]-> Country   explains   isCitizenOf

holds for a chosen share of born persons (confidence). Extra citizenships
outside the rule set the coverage. Structural distractors keep the
ancestor-typed variants of the rule strictly below it:

* organisations founded (``wasBornIn``) in cities lower ``Agent``/``ROOT`` heads,
* city-in-region facts lower ``Place``/``ROOT`` tails,
* persons born in regions lower ``Place`` middles.

Noise relations (``livesIn``, ``worksFor``, ``knows``, ``twinnedWith``) give
competing rules and dilute random walks.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .hin import Hin, load_hin
from .matcher import MetaPath

TARGET = "isCitizenOf"
PLANTED = MetaPath(("Person", "City", "Country"), ("wasBornIn", "isLocatedIn"))
DAG = [("Person", "Agent"), ("Organization", "Agent"),
       ("City", "Place"), ("Country", "Place"), ("Region", "Place")]


@dataclass
class SynthSpec:
    confidence: float = 0.9
    coverage: float = 0.8
    n_persons: int = 300
    n_cities: int = 40
    n_countries: int = 8
    n_regions: int = 16
    n_orgs: int = 30
    live_in_citizen_country: float = 0.5
    knows_degree: int = 0
    twins_per_city: int = 0
    noise: bool = True
    seed: int = 0

    def validate(self):
        if not 0.0 < self.confidence <= 1.0 or not 0.0 < self.coverage <= 1.0:
            raise ConfigError("confidence and coverage must lie in (0, 1]")
        if min(self.n_persons, self.n_cities, self.n_regions, self.n_orgs) < 1:
            raise ConfigError("entity counts must be >= 1")
        if self.n_countries < 2:
            raise ConfigError("need at least two countries")
        if self.n_regions < self.n_countries:
            raise ConfigError("need at least one region per country")


@dataclass
class PlantedTruth:
    target_relation: str
    types: list[str]
    relations: list[str]
    confidence: float
    coverage: float
    support_both: int
    support_rq: int
    support_m: int

    @property
    def metapath(self) -> MetaPath:
        return MetaPath(tuple(self.types), tuple(self.relations))


def make_planted(spec: SynthSpec):
    """Return ``(fact_rows, type_rows, dag_rows, truth)`` for ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    P = [f"person{i}" for i in range(spec.n_persons)]
    C = [f"city{i}" for i in range(spec.n_cities)]
    K = [f"country{i}" for i in range(spec.n_countries)]
    R = [f"region{i}" for i in range(spec.n_regions)]
    O = [f"org{i}" for i in range(spec.n_orgs)]
    types = ([(p, "Person") for p in P] + [(c, "City") for c in C] + [(k, "Country") for k in K]
             + [(r, "Region") for r in R] + [(o, "Organization") for o in O])
    facts: set[tuple[str, str, str]] = set()

    region_country = [i % spec.n_countries for i in range(spec.n_regions)]
    for r, k in zip(R, region_country):
        facts.add((r, "isLocatedIn", K[k]))
    city_region = rng.integers(spec.n_regions, size=spec.n_cities)
    city_country = [region_country[i] for i in city_region]
    for c, reg, k in zip(C, city_region, city_country):
        facts.add((c, "isLocatedIn", K[k]))
        facts.add((c, "isLocatedIn", R[reg]))

    birth = rng.integers(spec.n_cities, size=spec.n_persons)
    birth_country = [city_country[b] for b in birth]
    for p, b in zip(P, birth):
        facts.add((p, "wasBornIn", C[b]))

    n_m = spec.n_persons
    both = round(spec.confidence * n_m)
    if both < 1:
        raise ConfigError(f"confidence {spec.confidence} leaves no rule-consistent citizen")
    n_rq = round(both / spec.coverage)
    extra = n_rq - both
    capacity = spec.n_persons * (spec.n_countries - 1)
    if extra > capacity:
        raise ConfigError(f"coverage {spec.coverage} needs {extra} extra citizenships, "
                          f"only {capacity} possible")
    citizens = rng.permutation(spec.n_persons)[:both]
    for i in citizens:
        facts.add((P[i], TARGET, K[birth_country[i]]))
    # extra citizenships never in the birth country, so they sit outside the rule
    slots = [(i, k) for i in range(spec.n_persons) for k in range(spec.n_countries)
             if k != birth_country[i]]
    for j in rng.choice(len(slots), size=extra, replace=False):
        i, k = slots[j]
        facts.add((P[i], TARGET, K[k]))

    # distractors
    for o in O:
        facts.add((o, "wasBornIn", C[rng.integers(spec.n_cities)]))
        facts.add((o, "isLocatedIn", K[rng.integers(spec.n_countries)]))
    n_region_births = max(1, spec.n_persons // 10)
    for i in rng.choice(spec.n_persons, size=n_region_births, replace=False):
        facts.add((P[i], "wasBornIn", R[rng.integers(spec.n_regions)]))

    if spec.noise:
        citizenship = {}
        for h, r, t in sorted(facts):
            if r == TARGET:
                citizenship.setdefault(h, t)
        for p in P:
            if p in citizenship and rng.random() < spec.live_in_citizen_country:
                facts.add((p, "livesIn", citizenship[p]))
            else:
                facts.add((p, "livesIn", K[rng.integers(spec.n_countries)]))
            facts.add((p, "worksFor", O[rng.integers(spec.n_orgs)]))
            for q in rng.choice(spec.n_persons, size=spec.knows_degree, replace=False):
                if P[q] != p:
                    facts.add((p, "knows", P[q]))
        for c in C:
            for k in rng.choice(spec.n_countries, size=min(spec.twins_per_city, spec.n_countries),
                                replace=False):
                facts.add((c, "twinnedWith", K[k]))

    truth = _truth(facts, n_m, both, n_rq)
    return sorted(facts), types, list(DAG), truth


def _truth(facts, n_m, both, n_rq) -> PlantedTruth:
    # n_m: every person has exactly one City birth fact and each city one country
    return PlantedTruth(TARGET, list(PLANTED.types), list(PLANTED.relations),
                        float(Fraction(both, n_m)), float(Fraction(both, n_rq)), both, n_rq, n_m)


def planted_hin(spec: SynthSpec) -> tuple[Hin, PlantedTruth]:
    facts, types, dag, truth = make_planted(spec)
    return load_hin(facts, types, dag), truth


def write_planted(directory, spec: SynthSpec) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    facts, types, dag, truth = make_planted(spec)
    out = {"facts": directory / "facts.tsv", "types": directory / "types.tsv",
           "dag": directory / "dag.tsv", "truth": directory / "truth.json"}
    out["facts"].write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in facts))
    out["types"].write_text("".join(f"{e}\t{t}\n" for e, t in types))
    out["dag"].write_text("".join(f"{c}\t{p}\n" for c, p in dag))
    record = {"spec": asdict(spec), "truth": asdict(truth), "rendered": truth.metapath.render()}
    out["truth"].write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return out
