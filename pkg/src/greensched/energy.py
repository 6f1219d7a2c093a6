"""Power, energy, and makespan evaluation for DVFS allocations.

Dynamic power at an operating point is ``gamma * v^2 * f``. Running a
task at reduced frequency stretches its completion time by ``1/f``.
Energy for one task defaults to the physically consistent reading,
power times actual (stretched) duration, which collapses to
``gamma * v^2 * ct``; the literal reading ``gamma * f * v^2 * ct`` with
``ct`` the full-frequency time is kept behind ``formula="literal"`` for
comparison. Idle time is spent in the sleep state and costs
``gamma * v_sleep * f_sleep`` per second (voltage unsquared), plus a
flat per-resource load term.

All functions are pure; callers may evaluate many allocations in
parallel as long as results are merged in a deterministic order.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ObjectiveVector",
    "power",
    "scaled_completion_time",
    "task_energy",
    "resource_energy",
    "makespan",
    "evaluate",
    "weighted_objective",
    "Evaluator",
]

_FORMULAS = ("physical", "literal")


@dataclass(frozen=True)
class ObjectiveVector:
    """Total energy (J) and makespan (s) of one allocation."""

    total_energy: float
    makespan: float

    def __post_init__(self):
        if not (np.isfinite(self.total_energy) and self.total_energy >= 0):
            raise ValueError(f"total_energy must be finite and >= 0, got {self.total_energy}")
        if not (np.isfinite(self.makespan) and self.makespan >= 0):
            raise ValueError(f"makespan must be finite and >= 0, got {self.makespan}")

    def to_dict(self):
        return {"energy_j": self.total_energy, "makespan_s": self.makespan}


def power(gamma, level):
    """Dynamic power (W) at an operating point: gamma * v^2 * f."""
    return gamma * level.voltage**2 * level.frequency


def scaled_completion_time(ct, level):
    """Completion time (s) when running at a reduced frequency: ct / f."""
    return ct / level.frequency


def task_energy(gamma, level, ct, formula="physical"):
    """Energy (J) to complete one task whose full-frequency time is ct.

    ``physical``: power times stretched duration, gamma * v^2 * ct.
    ``literal``: gamma * f * v^2 * ct with the unstretched ct.
    """
    if formula == "physical":
        return power(gamma, level) * scaled_completion_time(ct, level)
    if formula == "literal":
        return gamma * level.frequency * level.voltage**2 * ct
    raise ValueError(f"unknown energy formula {formula!r}")


def resource_energy(res, assigned, idle, formula="physical"):
    """Cumulative energy (J) of one resource.

    ``assigned`` is a sequence of (ct, level) pairs for its tasks; idle
    seconds are spent in the sleep state. Adds the resource's flat load
    term on top.
    """
    if idle < 0:
        raise ValueError(f"idle must be >= 0, got {idle}")
    total = 0.0
    for ct, level in assigned:
        total += task_energy(res.gamma, level, ct, formula=formula)
    total += res.gamma * res.sleep_level.voltage * res.sleep_level.frequency * idle
    total += res.lambda_
    return total


def makespan(completion_times):
    """Largest completion time; 0 for an empty schedule."""
    times = list(completion_times)
    return max(times) if times else 0.0


def weighted_objective(objectives, energy_weight=0.5, makespan_weight=0.5):
    """Scalar score minimized by the optimizers: w_E * energy + w_M * makespan."""
    return energy_weight * objectives.total_energy + makespan_weight * objectives.makespan


class Evaluator:
    """Precomputed arrays for evaluating many allocations of one problem.

    The analytic model runs all tasks from time zero, serially per
    resource in ascending task id; a resource sleeps from its own finish
    until the global makespan.
    """

    def __init__(self, problem, formula="physical"):
        if formula not in _FORMULAS:
            raise ValueError(f"unknown energy formula {formula!r}")
        self.problem = problem
        self.formula = formula
        m = problem.m
        k_max = problem.k_max
        self._v2 = np.zeros((m, k_max))
        self._f = np.ones((m, k_max))
        for j, res in enumerate(problem.resources):
            volts = np.array([lv.voltage for lv in res.dvfs_table])
            freqs = np.array([lv.frequency for lv in res.dvfs_table])
            k = res.levels
            self._v2[j, :k] = volts**2
            self._f[j, :k] = freqs
            if k < k_max:  # padding; never indexed by a valid allocation
                self._v2[j, k:] = volts[-1] ** 2
                self._f[j, k:] = freqs[-1]
        self._gamma = np.array([r.gamma for r in problem.resources])
        self._sleep_w = np.array(
            [r.gamma * r.sleep_level.voltage * r.sleep_level.frequency for r in problem.resources]
        )
        self._lambda_total = float(sum(r.lambda_ for r in problem.resources))
        self._k_per = np.array([r.levels for r in problem.resources], dtype=np.int64)
        self._rows = np.arange(problem.n)
        self.evaluations = 0

    def evaluate_arrays(self, resource_idx, level_idx):
        """Objectives for an allocation given as two index arrays (validated by caller)."""
        self.evaluations += 1
        m = self.problem.m
        ct = self.problem.etc.ct[self._rows, resource_idx]
        freq = self._f[resource_idx, level_idx]
        busy = np.bincount(resource_idx, weights=ct / freq, minlength=m)
        ms = float(busy.max()) if busy.size else 0.0
        idle = ms - busy
        e_task = self._gamma[resource_idx] * self._v2[resource_idx, level_idx] * ct
        if self.formula == "literal":
            e_task = e_task * freq
        total = float(e_task.sum() + self._sleep_w @ idle + self._lambda_total)
        return ObjectiveVector(total, ms)

    def evaluate(self, alloc):
        if alloc.n != self.problem.n:
            raise ValueError(f"allocation has {alloc.n} genes, problem has {self.problem.n} tasks")
        alloc.validate(self.problem.resources)
        return self.evaluate_arrays(alloc.resource_idx, alloc.level_idx)


def evaluate(alloc, tasks, resources, etc, formula="physical"):
    """Objectives of one allocation: total energy and makespan.

    All tasks start at time zero and run serially per resource in
    ascending task id; idle time is the gap between a resource's finish
    and the global makespan.
    """
    from .model import Problem

    return Evaluator(Problem(tuple(tasks), tuple(resources), etc), formula=formula).evaluate(alloc)
