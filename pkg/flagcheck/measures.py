"""
Resource measures behind a uniform evaluation interface.

Coherence: l1-norm, relative entropy and trace-norm coherence.
Entanglement: negativity and two-qubit entanglement of formation.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import linprog
from tenacity import retry, retry_if_result, stop_after_attempt

from .config import DEFAULT_SOLVER, SolverConfig
from .errors import ArgumentError, CapabilityError
from .qstate import DensityMatrix, dephase, partial_transpose, trace_norm, von_neumann_entropy
from .tracker import EvaluationTracker
from .types import Theory

logger = logging.getLogger(__name__)

NONNEGATIVE_SLACK = 1e-9
C_TR_MAX_DIM = 16
BARRIER_GROWTH = 20.0
BARRIER_T_MAX = 1e14
CENTERING_TOL = 1e-9
EIGEN_MERGE = 1e-6
QUADRATIC_REGION = 0.05
ARMIJO = 0.25
MIN_STEP = 1e-12


@dataclass(frozen=True)
class MeasureDescriptor:
    """Static metadata of a measure: theory, capacity and analytic expectations."""

    id: str
    theory: Theory
    max_dim: int
    supports_flagged_eval: bool
    known_flag_additive: bool
    description: str = ""


@dataclass(frozen=True)
class SolverReport:
    """Value of one measure evaluation plus solver diagnostics."""

    value: float
    iterations: int = 0
    gap_estimate: float = 0.0
    converged: bool = True


def c_l1(rho: DensityMatrix) -> float:
    """Σ_{i≠j} |ρ_ij|."""
    m = np.abs(rho.matrix)
    return float(np.sum(m) - np.sum(np.diag(m)))


def c_rel_ent(rho: DensityMatrix) -> float:
    """S(Δ(ρ)) − S(ρ) in bits."""
    return max(0.0, von_neumann_entropy(dephase(rho)) - von_neumann_entropy(rho))


# --- trace-norm coherence -------------------------------------------------
#
# min over the simplex of ‖ρ − diag(q)‖₁ = min 2·Tr P over P ≥ 0, P ≥ ρ − diag(q).
# P is eliminated per eigenvalue of ρ − diag(q), leaving a log-barrier in q
# that is followed by damped Newton steps as the barrier weight t grows.


def _barrier_terms(lam: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-eigenvalue barrier φ(λ) = 2tp − log p − log(p − λ) at its optimal p.

    Returns:
        (φ, φ', φ'', dual weights φ'/t) with the weights in (0, 2)
    """
    u = t * lam
    s = np.hypot(u, 1.0)
    # 2t(p − λ) and 2tp, each written to avoid cancellation
    lower = np.where(u > 0, 1.0 + 1.0 / (s + u), 1.0 - u + s)
    upper = np.where(u < 0, 1.0 + 1.0 / (s - u), 1.0 + u + s)
    value = upper - np.log(upper / (2 * t)) - np.log(lower / (2 * t))
    d1 = 2 * t / lower
    spread = np.where(u > 0, 1.0 / (s + u), s - u)
    d2 = 2 * t * t * (spread / s) / lower**2
    return value, d1, d2, 2.0 / lower


def _barrier_value(m: np.ndarray, q: np.ndarray, t: float) -> float:
    lam = np.linalg.eigvalsh(m - np.diag(q))
    return float(np.sum(_barrier_terms(lam, t)[0]) - np.sum(np.log(q)))


def _newton_step(m: np.ndarray, q: np.ndarray, t: float):
    """Newton direction on {Σq = 1}, its decrement, and the eigen data at q."""
    lam, v = np.linalg.eigh(m - np.diag(q))
    _, d1, d2, weights = _barrier_terms(lam, t)
    grad = -((np.abs(v) ** 2) @ d1) - 1.0 / q
    # second derivative of a spectral function: divided differences of φ'
    diff = lam[:, None] - lam[None, :]
    close = np.abs(diff) < EIGEN_MERGE / t
    slope = np.where(
        close,
        0.5 * (d2[:, None] + d2[None, :]),
        (d1[:, None] - d1[None, :]) / np.where(close, 1.0, diff),
    )
    c = (v.conj()[:, :, None] * v[:, None, :]).reshape(q.size, -1)
    hess = np.real((c * slope.ravel()) @ c.conj().T) + np.diag(1.0 / q**2)
    z = np.linalg.solve(hess, np.column_stack([grad, np.ones_like(q)]))
    step = -z[:, 0] + (z[:, 0].sum() / z[:, 1].sum()) * z[:, 1]
    return step, float(-grad @ step), lam, v, weights


def _step_size(m: np.ndarray, q: np.ndarray, t: float, step: np.ndarray, decrement: float) -> float:
    """Backtracking size that keeps q > 0; 0.0 when no decrease can be found."""
    shrinking = step < 0
    size = 1.0
    if shrinking.any():
        size = min(1.0, 0.99 * float(np.min(-q[shrinking] / step[shrinking])))
    if decrement < QUADRATIC_REGION:
        return size
    current = _barrier_value(m, q, t)
    while size > MIN_STEP:
        if _barrier_value(m, q + size * step, t) <= current - ARMIJO * size * decrement:
            return size
        size *= 0.5
    return 0.0


def _dual_value(m: np.ndarray, v: np.ndarray, s: np.ndarray) -> float:
    # W = V diag(s) V† with ‖W‖ ≤ 1 gives Tr Wρ − max_j W_jj ≤ min_q f(q)
    a = np.real(np.einsum("jk,jl,lk->k", v.conj(), m, v))
    weights = np.abs(v) ** 2
    return float(s @ a - np.max(weights @ s))


def _lp_bound(m: np.ndarray, v: np.ndarray) -> float:
    """Best dual bound with W diagonal in the eigenbasis v, by linear programming."""
    d = v.shape[0]
    a = np.real(np.einsum("jk,jl,lk->k", v.conj(), m, v))
    weights = np.abs(v) ** 2
    # variables (s_1..s_d, t): maximize a·s − t subject to weights @ s ≤ t
    c = np.concatenate([-a, [1.0]])
    a_ub = np.hstack([weights, -np.ones((d, 1))])
    bounds = [(-1.0, 1.0)] * d + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(d), bounds=bounds, method="highs")
    if res.status != 0:
        return -math.inf
    return _dual_value(m, v, np.clip(res.x[:d], -1.0, 1.0))


@dataclass
class _Bounds:
    """Best value seen and best certified lower bound, shared across restarts."""

    upper: float = math.inf
    lower: float = 0.0
    basis: np.ndarray | None = None

    def update(self, m: np.ndarray, lam: np.ndarray, v: np.ndarray, weights: np.ndarray) -> None:
        value = float(np.sum(np.abs(lam)))
        if value < self.upper:
            self.upper, self.basis = value, v
        self.lower = max(self.lower, _dual_value(m, v, weights - 1.0))

    @property
    def gap(self) -> float:
        return max(0.0, self.upper - self.lower)


def _follow_path(m: np.ndarray, q: np.ndarray, budget: int, tol: float, bounds: _Bounds) -> int:
    """
    Follow the barrier path from an interior q until the certified gap is
    within tol, the Newton budget is spent or t passes BARRIER_T_MAX.

    Returns:
        Newton steps taken
    """
    t = 1.0
    steps = 0
    while steps < budget and t <= BARRIER_T_MAX:
        while steps < budget:
            try:
                step, decrement, lam, v, weights = _newton_step(m, q, t)
            except np.linalg.LinAlgError:
                return steps
            steps += 1
            bounds.update(m, lam, v, weights)
            if bounds.gap <= tol:
                return steps
            if decrement / 2 <= CENTERING_TOL:
                break
            size = _step_size(m, q, t, step, decrement)
            if size == 0.0:
                break
            q = q + size * step
            q = q / q.sum()
        t *= BARRIER_GROWTH
    return steps


def _solve_trace_coherence(m: np.ndarray, config: SolverConfig, max_iter: int) -> SolverReport:
    d = m.shape[0]
    rng = np.random.default_rng(config.seed)
    bounds = _Bounds()
    iterations = 0
    for restart in range(max(1, config.restarts)):
        if restart == 0:
            q0 = 0.5 * (np.clip(np.real(np.diag(m)), 0.0, None) + 1.0 / d)
        else:
            q0 = 0.5 * (rng.dirichlet(np.ones(d)) + 1.0 / d)
        iterations += _follow_path(m, q0 / q0.sum(), max(1, max_iter - iterations), config.tol, bounds)
        if bounds.gap <= config.tol or iterations >= max_iter:
            break
    if bounds.gap > config.tol and bounds.basis is not None:
        bounds.lower = max(bounds.lower, _lp_bound(m, bounds.basis))
    gap = bounds.gap
    return SolverReport(value=bounds.upper, iterations=iterations, gap_estimate=gap, converged=gap <= config.tol)


def c_tr(rho: DensityMatrix, solver: SolverConfig | None = None) -> SolverReport:
    """
    Trace-norm coherence min over incoherent δ of ‖ρ − δ‖₁.

    Solved over the diagonal simplex by a log-barrier interior-point
    method: damped Newton steps re-center q each time the barrier weight
    grows. Every Newton step yields a dual certificate, so `gap_estimate`
    is the best value minus a rigorous lower bound. Later restarts start
    from random interior points. A non-converged solve is retried with a
    doubled Newton budget up to `solver.retries` times before the best
    result is returned unconverged.

    Raises:
        CapabilityError: If the dimension exceeds 16
    """
    if rho.dim > C_TR_MAX_DIM:
        raise CapabilityError(f"c_tr supports dimension <= {C_TR_MAX_DIM}, got {rho.dim}")
    config = solver or DEFAULT_SOLVER
    m = rho.matrix
    caps: list[int] = []

    @retry(
        stop=stop_after_attempt(1 + config.retries),
        retry=retry_if_result(lambda report: not report.converged),
        retry_error_callback=lambda state: state.outcome.result(),
    )
    def attempt() -> SolverReport:
        max_iter = config.max_iter * 2 ** len(caps)
        caps.append(max_iter)
        return _solve_trace_coherence(m, config, max_iter)

    report = attempt()
    if not report.converged:
        logger.warning(
            "c_tr did not converge after %d attempt(s): value=%.9g gap=%.3e",
            len(caps), report.value, report.gap_estimate,
        )
    return report


# --- entanglement ---------------------------------------------------------


def negativity(rho: DensityMatrix, cut: Iterable[int] | None = None) -> float:
    """
    (‖ρ^{T_B}‖₁ − 1)/2 across a bipartition.

    Args:
        rho: State whose subsystems form the two parties
        cut: Subsystem indices of the second party (B); defaults to the
            subsystems labelled 1 in rho.party_labels

    Raises:
        ArgumentError: If the cut is empty, covers every subsystem, or has
            an invalid index
    """
    n = len(rho.dims)
    if cut is None:
        side_b = [i for i, p in enumerate(rho.party_labels) if p == 1]
    else:
        side_b = sorted(set(int(i) for i in cut))
    if not side_b or len(side_b) == n or any(i < 0 or i >= n for i in side_b):
        raise ArgumentError(f"Invalid bipartition {side_b} for {n} subsystems")
    value = 0.5 * (trace_norm(partial_transpose(rho, side_b)) - 1.0)
    return max(0.0, value)


_SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho: DensityMatrix) -> float:
    """Wootters concurrence max(0, λ₁−λ₂−λ₃−λ₄) of a two-qubit state."""
    if rho.dims != (2, 2):
        raise CapabilityError(f"concurrence needs dims (2, 2), got {rho.dims}")
    m = rho.matrix
    tilde = _SIGMA_YY @ m.conj() @ _SIGMA_YY
    w, v = np.linalg.eigh(m)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    lam2 = np.linalg.eigvalsh(root @ tilde @ root)
    lam = np.sort(np.sqrt(np.clip(lam2, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def _binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def eof_2q(rho: DensityMatrix) -> float:
    """
    Entanglement of formation of a two-qubit state, in bits.

    Raises:
        CapabilityError: If dims are not (2, 2)
    """
    c = min(1.0, concurrence(rho))
    return _binary_entropy(0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - c * c))))


# --- registry -------------------------------------------------------------


MEASURES: dict[str, MeasureDescriptor] = {
    "c_l1": MeasureDescriptor("c_l1", "coherence", 4096, True, True, "l1-norm of coherence"),
    "c_rel_ent": MeasureDescriptor("c_rel_ent", "coherence", 4096, True, True, "relative entropy of coherence (bits)"),
    "c_tr": MeasureDescriptor("c_tr", "coherence", C_TR_MAX_DIM, True, False, "trace-norm coherence"),
    "negativity": MeasureDescriptor("negativity", "entanglement", 4096, True, True, "negativity across the party split"),
    "eof_2q": MeasureDescriptor("eof_2q", "entanglement", 4, False, True, "two-qubit entanglement of formation (bits)"),
}

_CLOSED_FORM: dict[str, Callable[[DensityMatrix], float]] = {
    "c_l1": c_l1,
    "c_rel_ent": c_rel_ent,
    "negativity": negativity,
    "eof_2q": eof_2q,
}


def get_measure(measure: str | MeasureDescriptor) -> MeasureDescriptor:
    """Look up a descriptor by id (descriptors pass through)."""
    if isinstance(measure, MeasureDescriptor):
        return measure
    try:
        return MEASURES[measure]
    except KeyError:
        raise ArgumentError(f"Unknown measure id: {measure}")


def check_capability(desc: MeasureDescriptor, rho: DensityMatrix) -> None:
    """
    Raise CapabilityError when desc cannot evaluate states shaped like rho.

    Raises:
        CapabilityError: Dimension above desc.max_dim, or a non-(2, 2) state for eof_2q
    """
    if rho.dim > desc.max_dim:
        raise CapabilityError(f"{desc.id} supports dimension <= {desc.max_dim}, got {rho.dim}")
    if desc.id == "eof_2q" and rho.dims != (2, 2):
        raise CapabilityError(f"eof_2q needs dims (2, 2), got {rho.dims}")
    if desc.theory == "entanglement" and len(rho.dims) < 2:
        raise CapabilityError(f"{desc.id} needs a state with at least two subsystems")


def evaluate(
    measure: str | MeasureDescriptor,
    rho: DensityMatrix,
    solver: SolverConfig | None = None,
    tracker: EvaluationTracker | None = None,
) -> SolverReport:
    """
    Evaluate a measure on a state.

    Args:
        measure: Measure id or descriptor
        rho: State to evaluate
        solver: Solver settings for c_tr (defaults otherwise)
        tracker: Optional evaluation counter

    Returns:
        SolverReport; closed-form measures report zero iterations and gap

    Raises:
        CapabilityError: If the measure cannot evaluate this state
        ArgumentError: On an unknown measure id
    """
    desc = get_measure(measure)
    check_capability(desc, rho)

    def run() -> SolverReport:
        if desc.id == "c_tr":
            return c_tr(rho, solver)
        return SolverReport(value=_CLOSED_FORM[desc.id](rho))

    report = tracker.timed(desc.id, run) if tracker is not None else run()
    if report.value < -NONNEGATIVE_SLACK:
        raise ArgumentError(f"{desc.id} returned negative value {report.value!r}")
    if report.value < 0.0:
        report = SolverReport(0.0, report.iterations, report.gap_estimate, report.converged)
    return report
