"""Counterexample search: restarted Nelder–Mead over unconstrained instance parameters."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np
from scipy.optimize import minimize

from .channels import (
    Ensemble,
    KrausChannel,
    incoherent_channel,
    local_channel,
    party_dim,
    trace_preserving_amplitudes,
)
from .checks import CheckResult, run_property
from .config import SolverConfig
from .errors import ArgumentError, FlagCheckError
from .flags import computational_flag_basis
from .instances import state_dims
from .measures import MeasureDescriptor, get_measure
from .qstate import DensityMatrix, rng_for
from .tracker import EvaluationTracker

logger = logging.getLogger(__name__)

SEARCHABLE = ("strong_mono", "flag_sup", "flag_sub", "convexity", "two_copy", "flag_additivity")

# solver used inside the objective; the winner is re-checked with the caller's solver
SEARCH_SOLVER = SolverConfig(tol=1e-5, max_iter=200, restarts=1, retries=0)

# objective value for parameter points that fail to build a valid instance
_PENALTY = 1.0

# uniform row draws tried before falling back to permutations
ROW_DRAWS = 20


class _BudgetExhausted(Exception):
    """Raised inside the objective to stop the optimizer at the evaluation budget."""


@dataclass
class SearchOutcome:
    """Best instance found by a violation search, re-checked with the full solver."""

    measure_id: str
    property: str
    best_violation: float
    instance: dict
    evaluations: int
    seed: int
    restarts: int = 0
    check: CheckResult | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "measure_id": self.measure_id,
            "property": self.property,
            "best_violation": self.best_violation,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "restarts": self.restarts,
            "verdict": self.check.verdict if self.check else None,
            "instance": self.instance,
        }


def _state_from(x: np.ndarray, dims: tuple[int, ...]) -> DensityMatrix:
    """ρ = GG†/tr(GG†) for the complex square factor G packed in x."""
    n = math.prod(dims)
    g = x[: n * n].reshape(n, n) + 1j * x[n * n:].reshape(n, n)
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, dims, validate=False)


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - np.max(x))
    return z / z.sum()


class _Layout:
    """
    Slices of the real parameter vector for one restart.

    Discrete choices (ensemble size, Kraus count, target rows, the
    acting party) are drawn once per restart and held fixed while the
    continuous parameters move.
    """

    def __init__(self, desc: MeasureDescriptor, prop: str, d: int, rng: np.random.Generator,
                 ensemble_max: int, n_kraus_max: int):
        self.desc = desc
        self.prop = prop
        self.dims = state_dims(desc.theory, d)
        self.dim = math.prod(self.dims)
        state_size = 2 * self.dim * self.dim
        self.sizes: list[tuple[str, int]] = []

        if prop == "strong_mono":
            self.sizes.append(("state", state_size))
            self.n_kraus = int(rng.integers(2, max(2, n_kraus_max) + 1))
            if desc.theory == "coherence":
                self.rows = self._draw_rows(rng)
                self.sizes.append(("channel", 2 * self.n_kraus * self.dim))
            else:
                self.party = int(rng.integers(0, 2))
                dp = party_dim(self.dims, (0, 1), self.party)
                self.factor_shape = (dp * self.n_kraus, dp)
                self.sizes.append(("channel", 2 * dp * self.n_kraus * dp))
        elif prop == "two_copy":
            self.sizes.append(("state", state_size))
        else:
            fit = max(2, desc.max_dim // self.dim) if prop != "convexity" else ensemble_max
            self.members = int(rng.integers(2, max(2, min(ensemble_max, fit)) + 1))
            for i in range(self.members):
                self.sizes.append((f"member{i}", state_size))
            self.sizes.append(("weights", self.members))

    @property
    def size(self) -> int:
        return sum(n for _, n in self.sizes)

    def _draw_rows(self, rng: np.random.Generator) -> np.ndarray:
        """Target rows per Kraus operator, uniform so that columns may merge."""
        for _ in range(ROW_DRAWS):
            rows = rng.integers(0, self.dim, size=(self.n_kraus, self.dim))
            # a column colliding with n_kraus earlier ones has no amplitude left
            if all(
                np.count_nonzero(np.any(rows[:, :j] == rows[:, j:j + 1], axis=0)) < self.n_kraus
                for j in range(self.dim)
            ):
                return rows
        return np.array([rng.permutation(self.dim) for _ in range(self.n_kraus)])

    def _split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        out, start = {}, 0
        for name, n in self.sizes:
            out[name] = x[start:start + n]
            start += n
        return out

    def _channel(self, x: np.ndarray) -> KrausChannel:
        if self.desc.theory == "coherence":
            half = x.size // 2
            amps = (x[:half] + 1j * x[half:]).reshape(self.n_kraus, self.dim)
            return incoherent_channel(self.rows, trace_preserving_amplitudes(self.rows, amps))
        half = x.size // 2
        factor = (x[:half] + 1j * x[half:]).reshape(self.factor_shape)
        return local_channel(factor, self.dims, (0, 1), self.party)

    def instance(self, x: np.ndarray) -> dict[str, Any]:
        """Decoded check instance for parameter vector x."""
        parts = self._split(np.asarray(x, dtype=float))
        if self.prop == "strong_mono":
            return {"state": _state_from(parts["state"], self.dims), "channel": self._channel(parts["channel"])}
        if self.prop == "two_copy":
            return {"state": _state_from(parts["state"], self.dims)}
        states = tuple(_state_from(parts[f"member{i}"], self.dims) for i in range(self.members))
        ens = Ensemble(_softmax(parts["weights"]), states)
        if self.prop == "convexity":
            return {"ensemble": ens}
        return {"ensemble": ens, "basis": computational_flag_basis(self.members, self.desc.theory)}


class ViolationSearch:
    """
    Maximizes the signed violation of one property for one measure.

    Each restart draws a fresh layout and starting point from the
    (seed, restart) stream and runs Nelder–Mead until its share of the
    evaluation budget is spent. Objective evaluations use a cheap c_tr
    solver; the best instance is re-checked with `solver` at the end and
    that re-check sets `best_violation`.
    """

    def __init__(
        self,
        measure: str | MeasureDescriptor,
        prop: str,
        d: int,
        budget: int,
        seed: int = 0,
        solver: SolverConfig | None = None,
        tol: float | None = None,
        ensemble_max: int = 3,
        n_kraus_max: int = 3,
        on_progress: Callable[[dict], None] | None = None,
    ):
        if prop not in SEARCHABLE:
            raise ArgumentError(f"Cannot search property {prop}; searchable: {', '.join(SEARCHABLE)}")
        if budget < 1:
            raise ArgumentError(f"budget must be >= 1, got {budget}")
        self.desc = get_measure(measure)
        self.prop = prop
        self.d = d
        self.budget = budget
        self.seed = seed
        self.solver = solver
        self.tol = tol
        self.ensemble_max = ensemble_max
        self.n_kraus_max = n_kraus_max
        self.on_progress = on_progress
        self._tracker = EvaluationTracker(budget)
        self._search_solver = replace(SEARCH_SOLVER, seed=seed)
        self._best = -math.inf
        self._best_point: tuple[_Layout, np.ndarray] | None = None

    def _emit(self, event_type: str, **kwargs) -> None:
        if self.on_progress is None:
            return
        event = {
            "type": event_type,
            "measure_id": self.desc.id,
            "property": self.prop,
            "evaluations": self._tracker.call_count,
            "budget": self.budget,
            **kwargs,
        }
        try:
            self.on_progress(event)
        except Exception as e:
            logger.warning("progress callback error: %s", e)

    def _objective(self, layout: _Layout, x: np.ndarray) -> float:
        if self._tracker.exhausted:
            raise _BudgetExhausted()

        def run() -> float:
            try:
                result = run_property(self.desc, self.prop, layout.instance(x), self.tol, self._search_solver)
            except FlagCheckError:
                return -_PENALTY
            return result.violation

        violation = self._tracker.timed(self.desc.id, run)
        if violation > self._best:
            self._best = violation
            self._best_point = (layout, np.array(x, copy=True))
        return -violation

    def run(self) -> SearchOutcome:
        restart = 0
        while not self._tracker.exhausted:
            rng = rng_for(self.seed, restart)
            layout = _Layout(self.desc, self.prop, self.d, rng, self.ensemble_max, self.n_kraus_max)
            x0 = rng.standard_normal(layout.size)
            share = max(50 * layout.size, self.budget // 10)
            maxfev = min(self._tracker.remaining or 0, share)
            try:
                minimize(
                    lambda x: self._objective(layout, x),
                    x0,
                    method="Nelder-Mead",
                    options={"maxfev": maxfev, "xatol": 1e-10, "fatol": 1e-12, "adaptive": True},
                )
            except _BudgetExhausted:
                pass
            restart += 1
            self._emit("search_restart", restart=restart, best_violation=self._best)

        outcome = self._finish(restart)
        self._emit("search_complete", restart=restart, best_violation=outcome.best_violation)
        return outcome

    def _finish(self, restarts: int) -> SearchOutcome:
        if self._best_point is None:
            raise ArgumentError("Search produced no valid instance")
        layout, x = self._best_point
        check = run_property(self.desc, self.prop, layout.instance(x), self.tol, self.solver, seed=self.seed)
        if check.verdict == "inconclusive":
            logger.warning("search winner is inconclusive: %s", check.details.get("reason", ""))
        return SearchOutcome(
            measure_id=self.desc.id,
            property=self.prop,
            best_violation=check.violation,
            instance=check.instance,
            evaluations=self._tracker.call_count,
            seed=self.seed,
            restarts=restarts,
            check=check,
        )


def search_violation(
    m: str | MeasureDescriptor,
    prop: str,
    d: int,
    budget: int,
    seed: int = 0,
    solver: SolverConfig | None = None,
    tol: float | None = None,
    on_progress: Callable[[dict], None] | None = None,
) -> SearchOutcome:
    """
    Search for the largest violation of `prop` by measure m on dimension d.

    Args:
        m: Measure id or descriptor
        prop: One of SEARCHABLE
        d: Local dimension (states live on d, or d ⊗ d for entanglement)
        budget: Maximum number of objective evaluations
        seed: Master seed; the outcome is deterministic given it
        solver: Solver settings for the final re-check
        tol: Verdict tolerance for the final re-check
        on_progress: Optional event callback

    Returns:
        SearchOutcome whose best_violation <= 0 when nothing was found

    Raises:
        ArgumentError: On an unsearchable property or a budget below 1
    """
    return ViolationSearch(m, prop, d, budget, seed, solver, tol, on_progress=on_progress).run()
