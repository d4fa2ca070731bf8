"""Batch runner: property sweeps, searches and regularization probes driven by a RunConfig."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .checks import FLAG_ADDITIVE_IMPLIES, CheckResult, check_sandwich, estimate_regularization, run_property
from .config import DEFAULT_LIMITS, DEFAULT_SOLVER, Limits, RunConfig, SolverConfig, thread_count
from .errors import FormatError
from .flags import computational_flag_basis
from .formats import dumps_qstate, read_qstate
from .instances import (
    decode_instance,
    random_ensemble,
    random_flag_basis,
    random_free_channel,
    random_free_state,
    random_state,
    state_dims,
)
from .measures import MeasureDescriptor, get_measure
from .qstate import random_pure, rng_for
from .search import ViolationSearch

logger = logging.getLogger(__name__)


def make_instance(
    desc: MeasureDescriptor,
    prop: str,
    d: int,
    rng: np.random.Generator,
    config: RunConfig,
) -> dict[str, Any]:
    """Random instance parts for one property check at local dimension d."""
    theory = desc.theory
    if prop in ("flag_additivity", "flag_sup", "flag_sub"):
        size = int(rng.integers(1, config.ensemble_max + 1))
        return {"ensemble": random_ensemble(theory, d, size, rng), "basis": random_flag_basis(theory, size, rng)}
    if prop in ("strong_mono", "monotonicity"):
        rho = random_state(theory, d, rng)
        n_kraus = int(rng.integers(1, config.n_kraus_max + 1))
        return {"state": rho, "channel": random_free_channel(theory, rho, n_kraus, rng)}
    if prop == "convexity":
        size = int(rng.integers(1, config.ensemble_max + 1))
        return {"ensemble": random_ensemble(theory, d, size, rng)}
    if prop == "two_copy":
        return {"state": random_state(theory, d, rng)}
    if prop == "n_copy":
        return {"state": random_state(theory, d, rng), "N": config.nmax}
    if prop == "full_additivity":
        return {"state": random_state(theory, d, rng), "sigma": random_state(theory, d, rng)}
    if prop == "omega_identity":
        return {
            "state": random_state(theory, d, rng),
            "sigma": random_state(theory, d, rng),
            "basis": computational_flag_basis(2, theory),
        }
    if prop == "free_padding":
        return {"state": random_state(theory, d, rng), "delta": random_free_state(theory, 2, rng)}
    if prop == "faithfulness":
        free = bool(rng.random() < 0.5)
        if free:
            rho = random_free_state(theory, d, rng)
        else:
            dims = state_dims(theory, d)
            rho = random_pure(int(np.prod(dims)), rng, dims).density()
        return {"state": rho, "free": free}
    if prop == "sandwich":
        return {
            "rho1": random_state(theory, d, rng),
            "rho2": random_state(theory, d, rng),
            "p1": config.p1,
            "basis": computational_flag_basis(2, theory),
            "N": config.nmax,
            "delta_typ": config.delta_typ,
        }
    raise FormatError(f"No instance generator for property {prop}")


def is_unexpected(result: CheckResult) -> bool:
    """A violation of a property implied by flag additivity, by a measure known to be flag additive."""
    desc = get_measure(result.measure_id)
    return result.verdict == "violated" and desc.known_flag_additive and result.property in FLAG_ADDITIVE_IMPLIES


class SweepRunner:
    """
    Runs the configured command and collects results deterministically.

    Every job derives its random stream from (master seed, job index) and
    results are sorted by index, so output does not depend on the thread
    count.
    """

    def __init__(
        self,
        config: RunConfig,
        on_progress: Callable[[dict], None] | None = None,
        solver: SolverConfig | None = None,
        threads: int | None = None,
        limits: Limits | None = None,
    ):
        self.config = config
        self.on_progress = on_progress
        self.solver = solver or DEFAULT_SOLVER
        self.threads = threads if threads is not None else thread_count()
        self.limits = limits or DEFAULT_LIMITS

    def _emit(self, event_type: str, **kwargs) -> None:
        if self.on_progress is None:
            return
        try:
            self.on_progress({"type": event_type, **kwargs})
        except Exception as e:
            logger.warning("progress callback error: %s", e)

    def jobs(self) -> list[tuple[int, str, str, int]]:
        """(index, measure, property, d) for every trial, in index order."""
        out = []
        index = 0
        for measure in self.config.measures:
            for prop in self.config.properties:
                for d in self.config.dims:
                    for _ in range(self.config.trials):
                        out.append((index, measure, prop, d))
                        index += 1
        return out

    def _run_job(self, job: tuple[int, str, str, int]) -> CheckResult:
        index, measure, prop, d = job
        desc = get_measure(measure)
        rng = rng_for(self.config.master_seed, index)
        parts = make_instance(desc, prop, d, rng, self.config)
        result = run_property(
            desc,
            prop,
            parts,
            tol=self.config.tol_for(measure),
            solver=self.solver,
            limits=self.limits,
            seed=self.config.master_seed,
            index=index,
        )
        result.details["d"] = d
        return result

    def check(self) -> list[CheckResult]:
        """Run the property sweep."""
        jobs = self.jobs()
        self._emit("sweep_start", total=len(jobs))
        results: list[CheckResult] = []
        if self.threads <= 1:
            for job in jobs:
                result = self._run_job(job)
                results.append(result)
                self._emit("instance_done", index=result.index, total=len(jobs), verdict=result.verdict)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                futures = [executor.submit(self._run_job, job) for job in jobs]
                for future in as_completed(futures):
                    result = future.result()
                    results.append(result)
                    self._emit("instance_done", index=result.index, total=len(jobs), verdict=result.verdict)
        results.sort(key=lambda r: r.index)
        self._emit("sweep_complete", total=len(results))
        return results

    def replay_witness(self, path: str) -> CheckResult:
        """
        Re-check a stored search witness.

        Raises:
            FormatError: If the witness file is malformed
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            measure, prop, instance = data["measure_id"], data["property"], data["instance"]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise FormatError(f"Malformed witness file {path}: {e}")
        parts = decode_instance(instance)
        return run_property(
            measure,
            prop,
            parts,
            tol=self.config.tol_for(measure),
            solver=self.solver,
            limits=self.limits,
            seed=int(data.get("seed", 0)),
        )

    def search(self) -> dict:
        """Run a violation search for the single configured measure and property."""
        measure, prop = self.config.measures[0], self.config.properties[0]
        search = ViolationSearch(
            measure,
            prop,
            self.config.dims[0],
            self.config.budget,
            seed=self.config.master_seed,
            solver=self.solver,
            tol=self.config.tol_for(measure),
            on_progress=self.on_progress,
        )
        return search.run().to_dict()

    def regularize(self) -> tuple[list[dict], list[CheckResult]]:
        """
        Per-copy regularization tables, plus sandwich checks when configured.

        With a state file only one table per measure is produced.
        """
        tables: list[dict] = []
        sandwiches: list[CheckResult] = []
        trials = 1 if self.config.state_path else self.config.trials
        dims = self.config.dims[:1] if self.config.state_path else self.config.dims
        index = 0
        for measure in self.config.measures:
            desc = get_measure(measure)
            for d in dims:
                for _ in range(trials):
                    rng = rng_for(self.config.master_seed, index)
                    if self.config.state_path:
                        rho = read_qstate(self.config.state_path)
                    else:
                        rho = random_state(desc.theory, d, rng)

                    def on_row(row: dict, i: int = index) -> None:
                        self._emit("regularize_row", index=i, measure_id=desc.id, **row)

                    estimate = estimate_regularization(
                        desc, rho, self.config.nmax, self.solver, self.limits, self.config.tol_for(measure), on_row
                    )
                    tables.append({
                        "index": index,
                        "measure_id": desc.id,
                        "state": dumps_qstate(rho),
                        "rows": estimate.rows,
                        "trend": estimate.trend,
                        "converged": estimate.converged,
                    })
                    if self.config.sandwich:
                        parts = make_instance(desc, "sandwich", d, rng, self.config)
                        sandwiches.append(
                            check_sandwich(
                                desc, parts["rho1"], parts["rho2"], parts["p1"], parts["basis"], parts["N"],
                                parts["delta_typ"], self.config.tol_for(measure), self.solver, self.limits,
                                self.config.master_seed, index,
                            )
                        )
                    index += 1
        return tables, sandwiches
