"""Clonal-selection optimizer over bit-encoded allocations.

Each antibody is one allocation encoded as a bit string. A generation
re-scores affinities over the current population, keeps the better
half, clones it in proportion to affinity, bit-flip mutates the clones
(keeping a mutant only when it scores strictly better than its parent),
re-normalizes affinities over the union of clones and mutants, truncates
back to the population size, and finally re-injects the best solution
seen so far if truncation dropped it.

Affinity is a decreasing transform of the two objectives normalized
within the population, ``exp(-(w_E * E_hat + w_M * M_hat))``, so the
population-best in both objectives scores 1.0. Because those bounds move
every generation, cross-generation progress is tracked on the raw
weighted objective ``w_E * energy + w_M * makespan``; the trace reports
it through a fixed scale set from the initial population so the reported
best affinity is non-decreasing run-wide.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import Evaluator, ObjectiveVector, weighted_objective
from .model import decode

__all__ = [
    "IcsaConfig",
    "Individual",
    "PopulationBounds",
    "GenerationRecord",
    "RunTrace",
    "affinity",
    "initialize",
    "select_top_half",
    "clone",
    "mutate",
    "improve_or_keep",
    "next_generation",
    "run",
]

TRACE_HEADER = "generation,best_affinity,best_makespan_s,best_energy_j,mean_affinity"


@dataclass(frozen=True)
class IcsaConfig:
    """Optimizer parameters.

    ``mutation_prob=None`` resolves to 2 / genome length at run time.
    ``clone_factor`` scales the clone pool to roughly
    ``clone_factor * population_size`` copies per generation.
    """

    population_size: int = 50
    mutation_prob: float = None
    max_generations: int = 200
    clone_factor: float = 1.0
    energy_weight: float = 0.5
    makespan_weight: float = 0.5
    seed: int = 0
    energy_formula: str = "physical"
    affinity_formula: str = "corrected"

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2 != 0:
            raise ValueError(f"population_size must be even and >= 4, got {self.population_size}")
        if self.mutation_prob is not None and not (0 <= self.mutation_prob <= 1):
            raise ValueError(f"mutation_prob must be in [0, 1], got {self.mutation_prob}")
        if self.max_generations < 1:
            raise ValueError(f"max_generations must be >= 1, got {self.max_generations}")
        if not (self.clone_factor > 0):
            raise ValueError(f"clone_factor must be > 0, got {self.clone_factor}")
        if self.energy_weight < 0 or self.makespan_weight < 0:
            raise ValueError("objective weights must be >= 0")
        if abs(self.energy_weight + self.makespan_weight - 1.0) > 1e-9:
            raise ValueError("energy_weight + makespan_weight must equal 1")
        if self.affinity_formula not in ("corrected", "literal"):
            raise ValueError(f"unknown affinity formula {self.affinity_formula!r}")


@dataclass(frozen=True)
class Individual:
    """An antibody: genome, its objectives, and its population-relative affinity."""

    genome: object
    objectives: ObjectiveVector
    affinity: float = 0.0


@dataclass(frozen=True)
class PopulationBounds:
    """Objective ranges of one population, used to normalize affinities."""

    energy_min: float
    energy_max: float
    makespan_min: float
    makespan_max: float

    @classmethod
    def of(cls, objectives):
        energies = [o.total_energy for o in objectives]
        makespans = [o.makespan for o in objectives]
        return cls(min(energies), max(energies), min(makespans), max(makespans))


def _normalized(value, lo, hi):
    # Degenerate range (single member or all equal) maps to the best score.
    if hi <= lo:
        return 0.0
    return min(1.0, max(0.0, (value - lo) / (hi - lo)))


def affinity(objectives, bounds, energy_weight=0.5, makespan_weight=0.5, formula="corrected"):
    """Affinity of one solution against its population's objective bounds.

    The corrected form is ``exp(-(w_E * E_hat + w_M * M_hat))`` with both
    objectives min-max normalized over the population, so lower energy and
    makespan give higher affinity, with 1.0 for the population-best in
    both. ``formula="literal"`` keeps the raw increasing form
    ``exp(E + Ms)`` for comparison; it rewards what the model minimizes
    and overflows to inf on large instances.
    """
    if formula == "literal":
        try:
            return math.exp(objectives.total_energy + objectives.makespan)
        except OverflowError:
            return float("inf")
    e_hat = _normalized(objectives.total_energy, bounds.energy_min, bounds.energy_max)
    m_hat = _normalized(objectives.makespan, bounds.makespan_min, bounds.makespan_max)
    return math.exp(-(energy_weight * e_hat + makespan_weight * m_hat))


def _rescore(population, config, bounds=None):
    if bounds is None:
        bounds = PopulationBounds.of([ind.objectives for ind in population])
    return [
        replace(
            ind,
            affinity=affinity(
                ind.objectives,
                bounds,
                config.energy_weight,
                config.makespan_weight,
                config.affinity_formula,
            ),
        )
        for ind in population
    ]


class _BestArchive:
    """All-time best solution by raw weighted objective (size-1 elite library)."""

    def __init__(self, energy_weight, makespan_weight):
        self.energy_weight = energy_weight
        self.makespan_weight = makespan_weight
        self.score = float("inf")
        self.genome = None
        self.objectives = None

    def update(self, genome, objectives):
        score = weighted_objective(objectives, self.energy_weight, self.makespan_weight)
        if score < self.score:
            self.score = score
            self.genome = genome
            self.objectives = objectives


class _RunState:
    """Evaluation context shared across generation steps of one run."""

    def __init__(self, config, problem):
        if problem.n < 1 or problem.m < 1:
            raise ValueError(
                f"problem must have at least one task and one resource, "
                f"got n={problem.n}, m={problem.m}"
            )
        self.config = config
        self.problem = problem
        self.evaluator = Evaluator(problem, formula=config.energy_formula)
        self.archive = _BestArchive(config.energy_weight, config.makespan_weight)
        length = problem.genome_length
        self.mutation_prob = (
            config.mutation_prob if config.mutation_prob is not None else min(1.0, 2.0 / length)
        )
        self.trace_scale = 1.0

    def eval_genome(self, genome):
        alloc = decode(genome, self.problem.n, self.problem.m, self.problem.resources)
        objectives = self.evaluator.evaluate_arrays(alloc.resource_idx, alloc.level_idx)
        self.archive.update(genome, objectives)
        return objectives

    def seed_archive(self, population):
        for ind in population:
            self.archive.update(ind.genome, ind.objectives)

    def trace_affinity(self):
        return math.exp(-self.archive.score / self.trace_scale)


def initialize(config, problem, rng=None, _state=None):
    """Population of uniformly random, evaluated antibodies."""
    from .model import BitGenome

    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = _state if _state is not None else _RunState(config, problem)
    length = problem.genome_length
    bits = rng.integers(0, 2, size=(config.population_size, length), dtype=np.uint8)
    population = []
    for row in bits:
        genome = BitGenome(row)
        population.append(Individual(genome, state.eval_genome(genome)))
    return _rescore(population, config)


def select_top_half(population):
    """The ceil(S/2) highest-affinity members.

    Ties break toward lower makespan, then lower energy, then lower index,
    so selection is deterministic.
    """
    order = sorted(
        range(len(population)),
        key=lambda i: (
            -population[i].affinity,
            population[i].objectives.makespan,
            population[i].objectives.total_energy,
            i,
        ),
    )
    keep = (len(population) + 1) // 2
    return [population[i] for i in order[:keep]]


def clone(selected, config):
    """Clone pool: member i gets max(1, round(beta * S * aff_i / sum aff)) copies."""
    affs = np.array([ind.affinity for ind in selected], dtype=float)
    total = affs.sum()
    budget = config.clone_factor * config.population_size
    if not np.isfinite(total) or total <= 0:
        counts = [max(1, round(budget / len(selected)))] * len(selected)
    else:
        counts = [max(1, round(budget * a / total)) for a in affs]
    pool = []
    for ind, c in zip(selected, counts):
        pool.extend([ind] * c)
    return pool


def mutate(individual, pm, rng, state, bounds):
    """Flip each bit independently with probability pm and re-evaluate.

    The mutant's affinity is computed against ``bounds`` so it is directly
    comparable with its parent.
    """
    from .model import BitGenome

    flips = rng.random(len(individual.genome)) < pm
    if not flips.any():
        mutant_bits = individual.genome.bits
    else:
        mutant_bits = individual.genome.bits ^ flips.astype(np.uint8)
    genome = BitGenome(mutant_bits)
    objectives = state.eval_genome(genome)
    aff = affinity(
        objectives,
        bounds,
        state.config.energy_weight,
        state.config.makespan_weight,
        state.config.affinity_formula,
    )
    return Individual(genome, objectives, aff)


def improve_or_keep(parent, mutant):
    """The mutant replaces its parent only on strict affinity improvement."""
    return mutant if mutant.affinity > parent.affinity else parent


def next_generation(population, config, problem, rng, _state=None):
    """One generation step; returns a new population of the same size.

    Clones of the better half and their filtered mutants are pooled,
    affinities are re-normalized over that pool, the top S survive, and
    the best-ever solution is re-inserted over the worst survivor if the
    pool lost it.
    """
    state = _state if _state is not None else _RunState(config, problem)
    if _state is None:
        state.seed_archive(population)
    population = _rescore(population, config)
    bounds_in = PopulationBounds.of([ind.objectives for ind in population])
    selected = select_top_half(population)
    clones = clone(selected, config)
    mutants = [
        improve_or_keep(parent, mutate(parent, state.mutation_prob, rng, state, bounds_in))
        for parent in clones
    ]
    union = clones + mutants
    union_bounds = PopulationBounds.of([ind.objectives for ind in union])
    union = _rescore(union, config, union_bounds)
    order = sorted(
        range(len(union)),
        key=lambda i: (
            -union[i].affinity,
            union[i].objectives.makespan,
            union[i].objectives.total_energy,
            i,
        ),
    )
    survivors = [union[i] for i in order[: config.population_size]]
    elite_bits = state.archive.genome.bits
    if not any(np.array_equal(ind.genome.bits, elite_bits) for ind in survivors):
        elite = Individual(
            state.archive.genome,
            state.archive.objectives,
            affinity(
                state.archive.objectives,
                union_bounds,
                config.energy_weight,
                config.makespan_weight,
                config.affinity_formula,
            ),
        )
        survivors[-1] = elite
    return survivors


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_affinity: float
    best_makespan: float
    best_energy: float
    mean_affinity: float


@dataclass
class RunTrace:
    """Per-generation convergence log plus the best solution of the run.

    ``best_affinity`` is the run-fixed transform of the best-ever weighted
    objective (non-decreasing by construction); ``mean_affinity`` is the
    mean of the population's own per-generation affinities.
    """

    records: list = field(default_factory=list)
    best: Individual = None
    evaluations: int = 0
    wall_time_s: float = 0.0

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(TRACE_HEADER + "\n")
            for r in self.records:
                fh.write(
                    f"{r.generation},{r.best_affinity!r},{r.best_makespan!r},"
                    f"{r.best_energy!r},{r.mean_affinity!r}\n"
                )


def run(config, problem):
    """Full optimization run; returns (best allocation, trace).

    Deterministic for a fixed (seed, config, problem) triple.
    """
    started = time.perf_counter()
    state = _RunState(config, problem)
    rng = np.random.default_rng(config.seed)
    population = initialize(config, problem, rng, _state=state)
    state.trace_scale = max(
        weighted_objective(ind.objectives, config.energy_weight, config.makespan_weight)
        for ind in population
    )
    if state.trace_scale <= 0:
        state.trace_scale = 1.0
    trace = RunTrace()

    def record(generation):
        trace.records.append(
            GenerationRecord(
                generation=generation,
                best_affinity=state.trace_affinity(),
                best_makespan=state.archive.objectives.makespan,
                best_energy=state.archive.objectives.total_energy,
                mean_affinity=float(np.mean([ind.affinity for ind in population])),
            )
        )

    record(0)
    for generation in range(1, config.max_generations + 1):
        population = next_generation(population, config, problem, rng, _state=state)
        record(generation)
    trace.best = Individual(
        state.archive.genome, state.archive.objectives, state.trace_affinity()
    )
    trace.evaluations = state.evaluator.evaluations
    trace.wall_time_s = time.perf_counter() - started
    best_alloc = decode(state.archive.genome, problem.n, problem.m, problem.resources)
    return best_alloc, trace
