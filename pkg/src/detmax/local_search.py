"""Exchange-graph local search for determinant maximization under a matroid."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from detmax import matroid as mt
from detmax.exchange_graph import Cycle, build, find_min_f_violating_cycle
from detmax.instance import Instance
from detmax.linalg import EPS_RANK, GramState, gram_build

log = logging.getLogger(__name__)

LOG2 = math.log(2.0)
IMPROVEMENT_SLACK = 1e-9


class InvariantViolation(RuntimeError):
    """A guaranteed post-condition failed; this points at a bug, not at the input."""


@dataclass
class SolveConfig:
    max_iters: int | None = None  # None: derive the cap from the log-det range
    eps_rank: float = EPS_RANK
    use_sparsify: bool = True
    max_half_len_override: int | None = None
    seed: int = 0
    fw_iters: int = 500

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class IterationRecord:
    cycle_arcs: int
    cycle_weight: float
    log_det_before: float
    log_det_after: float
    cycle: Cycle = field(repr=False)

    @property
    def improvement_ln(self) -> float:
        return self.log_det_after - self.log_det_before

    @property
    def improvement_factor(self) -> float:
        return math.exp(min(self.improvement_ln, 700.0))

    def to_dict(self) -> dict:
        return {
            "cycle_arcs": self.cycle_arcs,
            "cycle_weight_ln": self.cycle_weight,
            "log_det_before_ln": self.log_det_before,
            "log_det_after_ln": self.log_det_after,
            "improvement_ln": self.improvement_ln,
            "improvement_factor": self.improvement_factor,
            "added": list(self.cycle.added),
            "removed": list(self.cycle.removed),
        }


@dataclass
class SolveReport:
    final_set: tuple[int, ...]
    log_det: float
    iterations: int
    per_iteration: list[IterationRecord]
    sparsified_support: tuple[int, ...] | None
    initial_set: tuple[int, ...] = ()
    initial_log_det: float = -math.inf
    iteration_cap: int = 0
    converged: bool = True
    relaxation_value: float | None = None
    config: SolveConfig | None = None

    @property
    def value(self) -> float:
        """The determinant itself (0 when no basis spans)."""
        return 0.0 if self.log_det == -math.inf else math.exp(min(self.log_det, 709.0))

    def to_dict(self) -> dict:
        finite = math.isfinite(self.log_det)
        return {
            "final_set": list(self.final_set),
            "log_det_ln": self.log_det if finite else None,
            "value": self.value if finite and self.log_det < 709.0 else (0 if not finite else None),
            "iterations": self.iterations,
            "iteration_cap": self.iteration_cap,
            "converged": self.converged,
            "initial_set": list(self.initial_set),
            "initial_log_det_ln": self.initial_log_det if math.isfinite(self.initial_log_det) else None,
            "per_iteration": [r.to_dict() for r in self.per_iteration],
            "sparsified_support": None if self.sparsified_support is None else list(self.sparsified_support),
            "relaxation_value_ln": self.relaxation_value,
            "config": asdict(self.config) if self.config is not None else None,
        }


@dataclass
class StepResult:
    new_set: tuple[int, ...]
    new_gram: GramState
    cycle: Cycle


def initialize(instance: Instance, eps_rank: float = EPS_RANK) -> tuple[int, ...] | None:
    """A basis that spans ``R^d``; ``None`` means every basis has determinant 0."""
    return mt.linear_matroid_intersection_basis(instance.matroid, instance.vectors, eps_rank=eps_rank)


def step(
    instance: Instance,
    s,
    gram: GramState | None = None,
    max_half_len: int | None = None,
    eps_rank: float = EPS_RANK,
) -> StepResult | None:
    """Exchange along a minimal f-violating cycle of ``G(S)``; ``None`` if there is none."""
    s = tuple(sorted(s))
    if gram is None:
        gram = gram_build(instance.vectors, s, eps_rank)
    graph = build(instance, s, gram, eps_rank)
    cycle = find_min_f_violating_cycle(graph, max_half_len if max_half_len is not None else instance.dim)
    if cycle is None:
        return None
    new_set = tuple(sorted((set(s) - set(cycle.removed)) | set(cycle.added)))
    if len(new_set) != len(s) or not mt.is_independent(instance.matroid, new_set):
        raise InvariantViolation(f"exchange along {cycle.vertices} left the matroid")
    new_gram = gram_build(instance.vectors, new_set, eps_rank)
    if not new_gram.log_det > gram.log_det + LOG2 - IMPROVEMENT_SLACK:
        raise InvariantViolation(
            f"exchange along {cycle.vertices} changed log det by {new_gram.log_det - gram.log_det:.6g} < log 2"
        )
    return StepResult(new_set, new_gram, cycle)


def log_det_upper_bound(instance: Instance) -> float:
    """``d log trace(sum_i v_i v_i^T)``, an upper bound on any basis' log det."""
    trace = float(np.sum(instance.vectors**2))
    return instance.dim * math.log(trace) if trace > 0 else -math.inf


def auto_iteration_cap(instance: Instance, initial_log_det: float) -> int:
    upper = log_det_upper_bound(instance)
    return max(int(math.ceil((upper - initial_log_det) / LOG2)), 0) + 1


def solve(instance: Instance, config: SolveConfig | None = None, initial=None) -> SolveReport:
    """Run support sparsification (optional), initialization, then exchanges until none applies.

    ``initial`` overrides the starting basis; it must be a spanning basis
    of the (possibly restricted) matroid.
    """
    config = config or SolveConfig()
    support = None
    relax_value = None
    work = instance

    if config.use_sparsify and initial is None:
        from detmax.sparsify import sparsify

        start = initialize(instance, config.eps_rank)
        if start is None:
            return SolveReport((), -math.inf, 0, [], None, config=config)
        work, support, relax = sparsify(instance, iters=config.fw_iters, start=start)
        relax_value = relax.value

    s = tuple(sorted(initial)) if initial is not None else initialize(work, config.eps_rank)
    if s is None:
        return SolveReport((), -math.inf, 0, [], support, config=config, relaxation_value=relax_value)
    gram = gram_build(work.vectors, s, config.eps_rank)
    if gram.singular or not mt.is_basis(work.matroid, s):
        raise ValueError("initial set must be a spanning basis")

    cap = config.max_iters if config.max_iters is not None else auto_iteration_cap(work, gram.log_det)
    report = SolveReport(
        final_set=s,
        log_det=gram.log_det,
        iterations=0,
        per_iteration=[],
        sparsified_support=support,
        initial_set=s,
        initial_log_det=gram.log_det,
        iteration_cap=cap,
        relaxation_value=relax_value,
        config=config,
    )
    max_half = config.max_half_len_override
    while True:
        res = step(work, s, gram, max_half, config.eps_rank)
        if res is None:
            break
        if report.iterations >= cap:
            report.converged = False
            log.warning("stopped at the iteration cap (%d) with an exchange still available", cap)
            break
        report.per_iteration.append(
            IterationRecord(res.cycle.length, res.cycle.weight, gram.log_det, res.new_gram.log_det, res.cycle)
        )
        log.debug("iteration %d: log det %.6g -> %.6g", report.iterations + 1, gram.log_det, res.new_gram.log_det)
        s, gram = res.new_set, res.new_gram
        report.iterations += 1
    report.final_set = s
    report.log_det = gram.log_det
    return report
