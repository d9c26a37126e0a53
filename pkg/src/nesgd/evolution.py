"""Population lifecycle: retrain-based fitness, selection, variation, logging.

One run trains a base network to convergence, then evolves retain/reinit
masks over its parameter blocks. An individual's fitness is the validation
accuracy of the network after its mask is applied and the result is
retrained with a small rate on retained blocks and a larger rate on
reinitialized ones. Parents come from binary tournaments; survivors from
truncation on (optionally suppression-adjusted) fitness with an elitist
guarantee for the raw best.

Every random decision is seeded through ``derive_seed``, so evaluations are
pure functions of (config, dataset, individual) and a generation can be
evaluated serially or in parallel with identical results.
"""

from __future__ import annotations

import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, NonFiniteLossError, ShapeError, StateError
from .genome import Genome, apply_genome, random_genome
from .nn import (
    Model,
    TrainConfig,
    WeightSnapshot,
    build_model,
    clone_model,
    evaluate_accuracy,
    restore,
    sgd_train,
    snapshot,
)
from .seeding import derive_seed
from .suppression import (
    CROWDING_SIZE_THRESHOLD,
    agglomerate,
    build_distance_matrix,
    suppress,
)

logger = logging.getLogger("nesgd")


@dataclass
class Individual:
    id: int
    genome: Genome
    raw_fitness: float | None = None
    adjusted_fitness: float | None = None
    birth_generation: int = 0
    parent_ids: tuple[int, ...] = ()


@dataclass
class Population:
    members: list[Individual]
    generation: int
    suppressed_count: int = 0  # suppressions applied while selecting this population


@dataclass
class EvolutionConfig:
    population_size: int
    max_generations: int
    crossover_probability: float
    mutation_probability: float
    train: TrainConfig
    seed: int
    elitism: bool = True
    suppression_enabled: bool = True

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigurationError("population_size must be >= 2")
        if self.max_generations < 1:
            raise ConfigurationError("max_generations must be >= 1")
        for name in ("crossover_probability", "mutation_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {p}")


@dataclass
class GenerationLog:
    generation: int
    best_raw: float
    median_raw: float
    min_raw: float
    nabla: float
    suppressed_count: int
    best_genome: str
    wall_time_seconds: float


@dataclass
class RunResult:
    best: Individual
    logs: list[GenerationLog]
    best_snapshot: WeightSnapshot  # retrained weights of the best individual
    alpha_accuracy: float  # validation accuracy of the base model (plain SGD)


def _members(population) -> list[Individual]:
    return population.members if isinstance(population, Population) else list(population)


def selection_fitness(individual: Individual) -> float:
    """Adjusted fitness when a selection pass has assigned one, else raw."""
    if individual.adjusted_fitness is not None:
        return individual.adjusted_fitness
    if individual.raw_fitness is None:
        raise StateError(f"individual {individual.id} has no fitness yet")
    return individual.raw_fitness


def _retrained_model(
    individual: Individual,
    base: WeightSnapshot,
    template: Model,
    dataset: Dataset,
    config: EvolutionConfig,
) -> Model:
    """Apply the mask to the base snapshot and retrain; pure for fixed config."""
    reinit_rng = np.random.default_rng(
        derive_seed(config.seed, individual.birth_generation, individual.id, "reinit")
    )
    mixed, retained = apply_genome(base, individual.genome, reinit_rng)
    model = restore(clone_model(template), mixed)
    lr_map = {
        block_id: config.train.lr_retained if keep else config.train.lr_reinit
        for block_id, keep in retained.items()
    }
    train_cfg = replace(
        config.train,
        seed=derive_seed(config.seed, individual.birth_generation, individual.id, "retrain"),
    )
    model, _ = sgd_train(
        model, dataset.arrays("train"), train_cfg, lr_map, epochs=config.train.epochs_beta
    )
    return model


def evaluate_fitness(
    individual: Individual,
    base_snapshot_alpha: WeightSnapshot,
    model_template: Model,
    dataset: Dataset,
    config: EvolutionConfig,
) -> float:
    """Validation accuracy after masked retraining; 0.0 if training diverges."""
    try:
        model = _retrained_model(individual, base_snapshot_alpha, model_template, dataset, config)
    except NonFiniteLossError as exc:
        logger.warning(
            "individual %d (genome %s): %s; fitness set to 0",
            individual.id,
            individual.genome.text,
            exc,
        )
        return 0.0
    return evaluate_accuracy(model, dataset.arrays("validation"))


def binary_tournament(population, rng: np.random.Generator) -> Individual:
    """Draw two members uniformly with replacement, keep the fitter one."""
    members = _members(population)
    if not members:
        raise StateError("empty population")
    a = members[int(rng.integers(len(members)))]
    b = members[int(rng.integers(len(members)))]
    fa, fb = selection_fitness(a), selection_fitness(b)
    if fa > fb:
        return a
    if fb > fa:
        return b
    return a if rng.random() < 0.5 else b


def crossover(
    g1: Genome, g2: Genome, crossover_probability: float, rng: np.random.Generator
) -> "tuple[Genome, Genome]":
    """Single-point crossover with the given probability, else clones."""
    if len(g1) != len(g2):
        raise ShapeError(f"genome lengths differ: {len(g1)} vs {len(g2)}")
    n = len(g1)
    if n < 2:
        raise ConfigurationError("crossover needs genomes of length >= 2")
    if rng.random() < crossover_probability:
        cut = int(rng.integers(1, n))
        return (
            Genome(g1.bits[:cut] + g2.bits[cut:]),
            Genome(g2.bits[:cut] + g1.bits[cut:]),
        )
    return g1, g2


def mutate(genome: Genome, mutation_probability: float, rng: np.random.Generator) -> Genome:
    """Flip each bit independently with the given probability."""
    flips = rng.random(len(genome)) < mutation_probability
    return Genome(tuple(1 - b if f else b for b, f in zip(genome.bits, flips)))


def generate_offspring(
    population,
    config: EvolutionConfig,
    rng: np.random.Generator,
    start_id: int = 0,
    generation: int = 0,
) -> list[Individual]:
    """Tournament -> crossover -> mutate until m offspring exist.

    If m is odd the final pair contributes only its first child.
    """
    members = _members(population)
    m = config.population_size
    offspring: list[Individual] = []
    while len(offspring) < m:
        p1 = binary_tournament(members, rng)
        p2 = binary_tournament(members, rng)
        c1, c2 = crossover(p1.genome, p2.genome, config.crossover_probability, rng)
        for child in (mutate(c1, config.mutation_probability, rng),
                      mutate(c2, config.mutation_probability, rng)):
            if len(offspring) < m:
                offspring.append(
                    Individual(
                        id=start_id + len(offspring),
                        genome=child,
                        birth_generation=generation,
                        parent_ids=(p1.id, p2.id),
                    )
                )
    return offspring


def environmental_selection(
    combined: list[Individual], config: EvolutionConfig, generation: int = 0
) -> Population:
    """Pick m survivors from the 2m parent+offspring pool.

    With suppression enabled the pool is clustered and each crowded
    cluster's weakest member has its adjusted fitness damped before the
    truncation; otherwise adjusted fitness just mirrors raw. The raw-fitness
    best survives unconditionally under elitism. Ties break to lowest id.
    """
    m = config.population_size
    if len(combined) != 2 * m:
        raise StateError(f"expected {2 * m} individuals at selection, got {len(combined)}")
    for ind in combined:
        if ind.raw_fitness is None:
            raise StateError(f"individual {ind.id} unevaluated at selection")

    suppressed_count = 0
    if config.suppression_enabled:
        matrix = build_distance_matrix([ind.genome for ind in combined])
        clusters = agglomerate(matrix, m)
        adjusted = suppress(clusters, [ind.raw_fitness for ind in combined])
        for ind, value in zip(combined, adjusted):
            ind.adjusted_fitness = float(value)
        suppressed_count = sum(
            1 for c in clusters.clusters if len(c) > CROWDING_SIZE_THRESHOLD
        )
    else:
        for ind in combined:
            ind.adjusted_fitness = ind.raw_fitness

    survivors: list[Individual] = []
    pool = list(combined)
    if config.elitism:
        elite = min(pool, key=lambda ind: (-ind.raw_fitness, ind.id))
        survivors.append(elite)
        pool = [ind for ind in pool if ind is not elite]
    pool.sort(key=lambda ind: (-ind.adjusted_fitness, ind.id))
    survivors.extend(pool[: m - len(survivors)])
    survivors.sort(key=lambda ind: ind.id)
    return Population(survivors, generation, suppressed_count)


def nabla(population) -> float:
    """Spread of the population: max raw fitness minus min raw fitness."""
    members = _members(population)
    if not members:
        raise StateError("empty population")
    raws = []
    for ind in members:
        if ind.raw_fitness is None:
            raise StateError(f"individual {ind.id} has no raw fitness")
        raws.append(ind.raw_fitness)
    return max(raws) - min(raws)


def _evaluate_all(
    individuals: list[Individual],
    base: WeightSnapshot,
    template: Model,
    dataset: Dataset,
    config: EvolutionConfig,
    parallel: int,
) -> None:
    """Fill raw_fitness for every individual, committing in id order."""
    todo = sorted(individuals, key=lambda ind: ind.id)
    if parallel == 1 or len(todo) <= 1:
        for ind in todo:
            ind.raw_fitness = evaluate_fitness(ind, base, template, dataset, config)
        return
    workers = parallel if parallel > 0 else (os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(
                lambda ind: evaluate_fitness(ind, base, template, dataset, config), todo
            )
        )
    for ind, fitness in zip(todo, results):
        ind.raw_fitness = fitness


def _best_of(candidates: list[Individual], incumbent: Individual | None) -> Individual:
    pool = list(candidates) if incumbent is None else [incumbent] + list(candidates)
    return min(pool, key=lambda ind: (-ind.raw_fitness, ind.id))


def run(
    config: EvolutionConfig,
    dataset: Dataset,
    architecture_descriptor,
    parallel: int = 1,
    on_generation=None,
) -> RunResult:
    """Full pipeline: converge the base net, then evolve masks for T generations.

    ``on_generation(log, population)`` fires after every environmental
    selection so callers can stream logs to disk. Deterministic for a fixed
    (config, dataset, descriptor); ``parallel`` never changes any result.
    """
    master = config.seed
    model = build_model(architecture_descriptor, derive_seed(master, 0, 0, "model_init"))
    alpha_cfg = replace(config.train, seed=derive_seed(master, 0, 0, "alpha_train"))
    fresh_rates = {b.block_id: config.train.lr_reinit for b in model.partition.blocks}
    model, _ = sgd_train(model, dataset.arrays("train"), alpha_cfg, fresh_rates)
    base = snapshot(model, "alpha")
    alpha_accuracy = evaluate_accuracy(model, dataset.arrays("validation"))
    logger.info("base model converged: validation accuracy %.4f", alpha_accuracy)

    n_blocks = model.partition.n
    m = config.population_size
    pop_rng = np.random.default_rng(derive_seed(master, 0, 0, "population_init"))
    members = [
        Individual(id=i, genome=random_genome(n_blocks, pop_rng), birth_generation=0)
        for i in range(m)
    ]
    _evaluate_all(members, base, model, dataset, config, parallel)
    best = _best_of(members, None)

    next_id = m
    logs: list[GenerationLog] = []
    for t in range(1, config.max_generations + 1):
        tic = time.perf_counter()
        offspring_rng = np.random.default_rng(derive_seed(master, t, 0, "offspring"))
        offspring = generate_offspring(
            members, config, offspring_rng, start_id=next_id, generation=t
        )
        next_id += len(offspring)
        _evaluate_all(offspring, base, model, dataset, config, parallel)
        combined = members + offspring
        population = environmental_selection(combined, config, generation=t)
        members = population.members
        best = _best_of(combined, best)

        raws = [ind.raw_fitness for ind in members]
        leader = min(members, key=lambda ind: (-ind.raw_fitness, ind.id))
        log = GenerationLog(
            generation=t,
            best_raw=max(raws),
            median_raw=float(statistics.median(raws)),
            min_raw=min(raws),
            nabla=max(raws) - min(raws),
            suppressed_count=population.suppressed_count,
            best_genome=leader.genome.text,
            wall_time_seconds=time.perf_counter() - tic,
        )
        logs.append(log)
        logger.info(
            "generation %d: best %.4f median %.4f spread %.4f",
            t,
            log.best_raw,
            log.median_raw,
            log.nabla,
        )
        if on_generation is not None:
            on_generation(log, population)

    best_model = _retrained_model(best, base, model, dataset, config)
    return RunResult(
        best=best,
        logs=logs,
        best_snapshot=snapshot(best_model, "beta"),
        alpha_accuracy=alpha_accuracy,
    )
