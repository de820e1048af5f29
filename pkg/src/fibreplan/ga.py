"""Genetic algorithm over the two-level PDO genotype.

Variation acts on the binary placement mask only; after every change the
client assignment is rebuilt (closest-PDO allocation plus local search)
before the individual is scored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import numpy as np

from .allocation import assign
from .errors import ConfigurationError
from .fitness import Caches, evaluate
from .genotype import Genotype, Individual
from .model import BusinessRules, NetworkMap

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GAConfig:
    """Evolution parameters.

    ``mutation_rate=None`` means ``2 / len(pdo_mask)``. Crossover is gated
    per parent pair by ``crossover_rate``; within a crossover each mask
    position is swapped with ``crossover_gene_prob``.
    """

    population_size: int = 100
    generations: int = 100
    mutation_rate: float | None = None
    crossover_rate: float = 0.85
    crossover_gene_prob: float = 0.5
    tournament_size: int = 5
    elitism_fraction: float = 0.10
    init_density: float = 0.5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigurationError("population_size must be >= 2")
        if self.generations < 0:
            raise ConfigurationError("generations must be >= 0")
        if self.tournament_size < 1 or self.tournament_size > self.population_size:
            raise ConfigurationError("tournament_size must lie in [1, population_size]")
        for name in ("crossover_rate", "crossover_gene_prob", "elitism_fraction", "init_density"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ConfigurationError("mutation_rate must lie in [0, 1]")

    def rate_for(self, n_genes: int) -> float:
        if self.mutation_rate is not None:
            return self.mutation_rate
        return min(1.0, 2.0 / n_genes) if n_genes else 0.0

    @property
    def n_elite(self) -> int:
        return min(self.population_size - 1, max(1, int(round(self.elitism_fraction * self.population_size))))

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], **overrides: Any) -> "GAConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigurationError(f"unknown GA parameter '{key}'")
            if key == "mutation_rate" and str(raw).strip().lower() in ("", "none", "auto"):
                kwargs[key] = None
                continue
            try:
                kwargs[key] = int(raw) if types[key] == "int" else float(raw)
            except ValueError as exc:
                raise ConfigurationError(f"GA parameter {key}: invalid value {raw!r}") from exc
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)


@dataclass
class RunStats:
    """Per-generation trace of one run. Index 0 is the initial population."""

    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    best_ever: list[float] = field(default_factory=list)
    evaluations: int = 0
    cache_hits: int = 0

    def record(self, population: list[Individual], best_ever: float) -> None:
        fit = np.array([ind.fitness for ind in population])
        self.best.append(float(fit.min()))
        self.mean.append(float(fit.mean()))
        self.best_ever.append(float(best_ever))


class Evaluator:
    """Repairs and scores genotypes, memoised on the placement mask.

    Repair and scoring are deterministic functions of the mask, so reuse
    cannot change a run's outcome.
    """

    def __init__(self, net: NetworkMap, rules: BusinessRules, caches: Caches | None = None):
        self.net = net
        self.rules = rules
        self.caches = caches or Caches(net, rules)
        self._memo: dict[bytes, Individual] = {}
        self.evaluations = 0
        self.hits = 0

    def __call__(self, genotype: Genotype) -> Individual:
        key = genotype.key
        hit = self._memo.get(key)
        if hit is not None:
            self.hits += 1
            return Individual(hit.genotype.copy(), hit.cost, hit.feasible)
        repaired = repair(genotype, self.net, self.rules, self.caches)
        ind = evaluate(repaired, self.net, self.rules, self.caches)
        self.evaluations += 1
        self._memo[key] = ind
        return Individual(repaired.copy(), ind.cost, ind.feasible)


def random_genotype(net: NetworkMap, density: float, rng: np.random.Generator) -> Genotype:
    mask = (rng.random(len(net.candidates)) < density).astype(np.int8)
    return Genotype(mask, np.full(len(net.clients), -1, dtype=np.int64), stale=True)


def init_population(
    net: NetworkMap,
    rules: BusinessRules,
    config: GAConfig,
    rng: np.random.Generator,
    evaluator: Evaluator | None = None,
) -> list[Individual]:
    if config.population_size < 2:
        raise ConfigurationError("population_size must be >= 2")
    evaluator = evaluator or Evaluator(net, rules)
    return [evaluator(random_genotype(net, config.init_density, rng)) for _ in range(config.population_size)]


def bitflip_mutation(genotype: Genotype, rate: float, rng: np.random.Generator) -> Genotype:
    """Flip each mask bit independently with probability ``rate``."""
    if not 0 <= rate <= 1:
        raise ValueError("mutation rate must lie in [0, 1]")
    flips = rng.random(len(genotype.pdo_mask)) < rate
    if not flips.any():
        return genotype.copy()
    mask = genotype.pdo_mask.copy()
    mask[flips] ^= 1
    return Genotype(mask, genotype.assignment.copy(), stale=True)


def uniform_crossover(
    parent_a: Genotype, parent_b: Genotype, gene_prob: float, rng: np.random.Generator
) -> tuple[Genotype, Genotype]:
    """Swap each mask position between the children with probability ``gene_prob``."""
    if len(parent_a.pdo_mask) != len(parent_b.pdo_mask):
        raise ValueError("parents have different mask lengths")
    swap = rng.random(len(parent_a.pdo_mask)) < gene_prob
    a, b = parent_a.pdo_mask.copy(), parent_b.pdo_mask.copy()
    a[swap], b[swap] = parent_b.pdo_mask[swap], parent_a.pdo_mask[swap]
    return (
        Genotype(a, parent_a.assignment.copy(), stale=True),
        Genotype(b, parent_b.assignment.copy(), stale=True),
    )


def crossover_pair(
    parent_a: Genotype, parent_b: Genotype, config: GAConfig, rng: np.random.Generator
) -> tuple[Genotype, Genotype]:
    """Apply uniform crossover with probability ``crossover_rate``, else copy."""
    if rng.random() < config.crossover_rate:
        return uniform_crossover(parent_a, parent_b, config.crossover_gene_prob, rng)
    return parent_a.copy(), parent_b.copy()


def repair(genotype: Genotype, net: NetworkMap, rules: BusinessRules, caches: Caches) -> Genotype:
    """Rebuild the assignment level from scratch against the current mask."""
    assignment = assign(genotype.pdo_mask, net, rules, caches.drops)
    return Genotype(genotype.pdo_mask.copy(), assignment, stale=False)


def tournament_select(population: list[Individual], k: int, rng: np.random.Generator) -> Individual:
    """Best (lowest fitness) of ``k`` picks drawn uniformly with replacement."""
    if not population:
        raise RuntimeError("cannot select from an empty population")
    picks = rng.integers(0, len(population), size=k)
    return min((population[i] for i in picks), key=lambda ind: ind.fitness)


def evolve(
    net: NetworkMap,
    rules: BusinessRules,
    config: GAConfig,
    rng: np.random.Generator | None = None,
    caches: Caches | None = None,
) -> tuple[Individual, RunStats]:
    """Run the generational loop and return the best individual seen."""
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    evaluator = Evaluator(net, rules, caches)
    population = init_population(net, rules, config, rng, evaluator)
    rate = config.rate_for(len(net.candidates))
    n_elite = config.n_elite
    n_offspring = config.population_size - n_elite

    stats = RunStats()
    best = min(population, key=lambda ind: ind.fitness)
    stats.record(population, best.fitness)

    for gen in range(1, config.generations + 1):
        ranked = sorted(population, key=lambda ind: ind.fitness)
        offspring: list[Individual] = []
        while len(offspring) < n_offspring:
            pa = tournament_select(population, config.tournament_size, rng)
            pb = tournament_select(population, config.tournament_size, rng)
            for child in crossover_pair(pa.genotype, pb.genotype, config, rng):
                child = bitflip_mutation(child, rate, rng)
                offspring.append(evaluator(child))
        population = ranked[:n_elite] + offspring[:n_offspring]
        gen_best = min(population, key=lambda ind: ind.fitness)
        if gen_best.fitness < best.fitness:
            best = gen_best
        stats.record(population, best.fitness)
        logger.debug("generation %d best %.1f mean %.1f", gen, stats.best[-1], stats.mean[-1])

    stats.evaluations = evaluator.evaluations
    stats.cache_hits = evaluator.hits
    return best, stats
