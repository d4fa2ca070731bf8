"""
Property checkers for resource measures.

Each checker evaluates both sides of one inequality or identity on a
concrete instance and returns a CheckResult with a verdict. Capability
gaps and unconverged solves produce an inconclusive verdict carrying a
reason instead of raising. Bridges turn a violation of one property into
a violation of the equivalent one, and the audit runs paired sweeps to
look for cross-property contradictions.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Literal

import numpy as np

from .channels import Ensemble, KrausChannel, apply, is_free, selective_apply
from .config import DEFAULT_LIMITS, DEFAULT_TOLERANCES, Limits, SolverConfig
from .errors import ArgumentError, CapabilityError, CapacityError
from .flags import (
    FlagBasis,
    computational_flag_basis,
    copy_bounds,
    flag_measurement_channel,
    flagged_state,
    omega,
    typical_decomposition,
)
from .instances import (
    decode_instance,
    encode_instance,
    free_pure_state,
    instance_digest,
    random_ensemble,
    random_flag_basis,
    random_free_channel,
    random_state,
)
from .measures import MeasureDescriptor, evaluate, get_measure
from .qstate import (
    DensityMatrix,
    basis_state,
    rng_for,
    tensor,
    tensor_all,
    tensor_power,
    trace_distance,
)
from .tracker import EvaluationTracker
from .types import Verdict

logger = logging.getLogger(__name__)

Relation = Literal["eq", "ge", "le", "zero", "positive", "between"]

# lhs/rhs relation each property asserts
RELATIONS: dict[str, Relation] = {
    "flag_additivity": "eq",
    "flag_sup": "ge",
    "flag_sub": "le",
    "strong_mono": "ge",
    "convexity": "ge",
    "two_copy": "eq",
    "n_copy": "eq",
    "full_additivity": "eq",
    "omega_identity": "eq",
    "sandwich": "between",
    "free_padding": "eq",
    "monotonicity": "ge",
    "faithfulness": "zero",
}

# properties implied by flag additivity; a violation by a flag-additive measure is unexpected
FLAG_ADDITIVE_IMPLIES = frozenset(
    {"flag_additivity", "flag_sup", "flag_sub", "strong_mono", "convexity", "free_padding", "sandwich"}
)


@dataclass
class CheckResult:
    """One property-check verdict with its replayable instance."""

    measure_id: str
    property: str
    lhs: float
    rhs: float
    residual: float
    tol: float
    verdict: Verdict
    instance_digest: str
    seed: int = 0
    index: int = 0
    details: dict[str, Any] = field(default_factory=dict)
    instance: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def violation(self) -> float:
        """Signed amount by which the property fails (positive means violated)."""
        return signed_violation(self.property, self.lhs, self.rhs, self.details)

    def to_dict(self, include_instance: bool = True) -> dict:
        data = asdict(self)
        if not include_instance:
            data.pop("instance")
        return data

    def replay(self, solver: SolverConfig | None = None, limits: Limits | None = None) -> "CheckResult":
        """Recompute this result from its stored instance."""
        return run_property(
            self.measure_id,
            self.property,
            decode_instance(self.instance),
            tol=self.tol,
            solver=solver,
            limits=limits,
            seed=self.seed,
            index=self.index,
        )


def signed_violation(prop: str, lhs: float, rhs: float, details: dict | None = None) -> float:
    relation = RELATIONS[prop]
    if prop == "faithfulness" and not (details or {}).get("free", True):
        relation = "positive"
    if relation == "eq":
        return abs(lhs - rhs)
    if relation == "ge":
        return rhs - lhs
    if relation == "le":
        return lhs - rhs
    if relation == "zero":
        return lhs
    if relation == "positive":
        return -lhs
    lower = (details or {}).get("lower", lhs)
    return max(lower - lhs, lhs - rhs)


class _Meter:
    """Evaluates a measure and remembers whether any solve failed to converge."""

    def __init__(self, desc: MeasureDescriptor, solver: SolverConfig | None, tracker: EvaluationTracker | None):
        self.desc = desc
        self.solver = solver
        self.tracker = tracker
        self.unconverged = 0
        self.max_gap = 0.0

    def __call__(self, rho: DensityMatrix) -> float:
        report = evaluate(self.desc, rho, self.solver, self.tracker)
        if not report.converged:
            self.unconverged += 1
        self.max_gap = max(self.max_gap, report.gap_estimate)
        return report.value


def _default_tol(desc: MeasureDescriptor, tol: float | None) -> float:
    return DEFAULT_TOLERANCES.get(desc.id, 1e-9) if tol is None else tol


def _verdict(relation: Relation, lhs: float, rhs: float, tol: float, details: dict) -> Verdict:
    if relation == "eq":
        return "violated" if abs(lhs - rhs) > tol else "holds"
    if relation == "ge":
        return "violated" if rhs - lhs > tol else "holds"
    if relation == "le":
        return "violated" if lhs - rhs > tol else "holds"
    if relation == "zero":
        return "violated" if abs(lhs) > tol else "holds"
    if relation == "positive":
        return "violated" if lhs <= tol else "holds"
    lower = details["lower"]
    return "violated" if lower - lhs > tol or lhs - rhs > tol else "holds"


def _result(
    desc: MeasureDescriptor,
    prop: str,
    lhs: float,
    rhs: float,
    tol: float,
    meter: _Meter,
    encoded: dict,
    seed: int,
    index: int,
    details: dict | None = None,
    relation: Relation | None = None,
) -> CheckResult:
    details = dict(details or {})
    verdict = _verdict(relation or RELATIONS[prop], lhs, rhs, tol, details)
    if meter.unconverged:
        verdict = "inconclusive"
        details["reason"] = f"solver did not converge in {meter.unconverged} evaluation(s)"
        details["max_gap"] = meter.max_gap
    return CheckResult(
        measure_id=desc.id,
        property=prop,
        lhs=float(lhs),
        rhs=float(rhs),
        residual=float(lhs - rhs),
        tol=tol,
        verdict=verdict,
        instance_digest=instance_digest(encoded),
        seed=seed,
        index=index,
        details=details,
        instance=encoded,
    )


def _inconclusive(
    desc: MeasureDescriptor,
    prop: str,
    tol: float,
    encoded: dict,
    seed: int,
    index: int,
    reason: str,
    details: dict | None = None,
) -> CheckResult:
    details = dict(details or {})
    details["reason"] = reason
    return CheckResult(
        measure_id=desc.id,
        property=prop,
        lhs=0.0,
        rhs=0.0,
        residual=0.0,
        tol=tol,
        verdict="inconclusive",
        instance_digest=instance_digest(encoded),
        seed=seed,
        index=index,
        details=details,
        instance=encoded,
    )


def _guarded(
    desc: MeasureDescriptor,
    prop: str,
    tol: float,
    parts: dict,
    seed: int,
    index: int,
    body: Callable[[dict], CheckResult],
) -> CheckResult:
    encoded = encode_instance(parts)
    try:
        return body(encoded)
    except CapabilityError as e:
        logger.debug("%s/%s inconclusive: %s", desc.id, prop, e)
        return _inconclusive(desc, prop, tol, encoded, seed, index, f"capability: {e}")


# --- flag additivity family -----------------------------------------------


def _flag_check(
    prop: str,
    m: str | MeasureDescriptor,
    ens: Ensemble,
    basis: FlagBasis,
    tol: float | None,
    solver: SolverConfig | None,
    tracker: EvaluationTracker | None,
    limits: Limits | None,
    seed: int,
    index: int,
) -> CheckResult:
    desc = get_measure(m)
    tol = _default_tol(desc, tol)

    def body(encoded: dict) -> CheckResult:
        if not desc.supports_flagged_eval:
            raise CapabilityError(f"{desc.id} cannot evaluate flagged states")
        meter = _Meter(desc, solver, tracker)
        lhs = meter(flagged_state(ens, basis, limits))
        branch_values = [meter(s) for s in ens.states]
        rhs = float(sum(p * v for p, v in zip(ens.weights, branch_values)))
        return _result(desc, prop, lhs, rhs, tol, meter, encoded, seed, index, {"branch_values": branch_values})

    return _guarded(desc, prop, tol, {"ensemble": ens, "basis": basis}, seed, index, body)


def check_flag_additivity(
    m: str | MeasureDescriptor,
    ens: Ensemble,
    basis: FlagBasis,
    tol: float | None = None,
    solver: SolverConfig | None = None,
    tracker: EvaluationTracker | None = None,
    limits: Limits | None = None,
    seed: int = 0,
    index: int = 0,
) -> CheckResult:
    """
    M(Σ p_i ρ_i ⊗ |φ_i⟩⟨φ_i|) = Σ p_i M(ρ_i).

    lhs is the flagged-state value, rhs the ensemble average; holds iff
    |lhs − rhs| <= tol.
    """
    return _flag_check("flag_additivity", m, ens, basis, tol, solver, tracker, limits, seed, index)


def check_flag_sup(m, ens, basis, tol=None, solver=None, tracker=None, limits=None, seed=0, index=0) -> CheckResult:
    """M(flagged) >= Σ p_i M(ρ_i) within tol."""
    return _flag_check("flag_sup", m, ens, basis, tol, solver, tracker, limits, seed, index)


def check_flag_sub(m, ens, basis, tol=None, solver=None, tracker=None, limits=None, seed=0, index=0) -> CheckResult:
    """M(flagged) <= Σ p_i M(ρ_i) within tol."""
    return _flag_check("flag_sub", m, ens, basis, tol, solver, tracker, limits, seed, index)


# --- monotonicity and convexity -------------------------------------------


def _require_free(desc: MeasureDescriptor, rho: DensityMatrix, ch: KrausChannel) -> None:
    if not is_free(ch, desc.theory, rho.party_labels):
        raise ArgumentError(f"Channel is not free in the {desc.theory} theory")


def check_strong_mono(
    m: str | MeasureDescriptor,
    rho: DensityMatrix,
    ch: KrausChannel,
    tol: float | None = None,
    solver: SolverConfig | None = None,
    tracker: EvaluationTracker | None = None,
    limits: Limits | None = None,
    seed: int = 0,
    index: int = 0,
) -> CheckResult:
    """
    M(ρ) >= Σ p_i M(ρ_i) over the selective outcomes of a free channel.

    Raises:
        ArgumentError: If the channel is not free for the measure's theory
    """
    desc = get_measure(m)
    tol = _default_tol(desc, tol)
    _require_free(desc, rho, ch)

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        ens = selective_apply(ch, rho)
        lhs = meter(rho)
        values = [meter(s) for s in ens.states]
        rhs = float(sum(p * v for p, v in zip(ens.weights, values)))
        details = {
            "outcome_weights": [float(p) for p in ens.weights],
            "outcome_values": values,
            "renormalization_residual": ens.renormalization_residual,
        }
        return _result(desc, "strong_mono", lhs, rhs, tol, meter, encoded, seed, index, details)

    return _guarded(desc, "strong_mono", tol, {"state": rho, "channel": ch}, seed, index, body)


def check_monotonicity(
    m: str | MeasureDescriptor,
    rho: DensityMatrix,
    ch: KrausChannel,
    tol: float | None = None,
    solver: SolverConfig | None = None,
    tracker: EvaluationTracker | None = None,
    seed: int = 0,
    index: int = 0,
) -> CheckResult:
    """
    M(ρ) >= M(Λ(ρ)) for a free channel Λ.

    Raises:
        ArgumentError: If the channel is not free for the measure's theory
    """
    desc = get_measure(m)
    tol = _default_tol(desc, tol)
    _require_free(desc, rho, ch)

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        lhs = meter(rho)
        rhs = meter(apply(ch, rho))
        return _result(desc, "monotonicity", lhs, rhs, tol, meter, encoded, seed, index)

    return _guarded(desc, "monotonicity", tol, {"state": rho, "channel": ch}, seed, index, body)


def check_convexity(
    m: str | MeasureDescriptor,
    ens: Ensemble,
    tol: float | None = None,
    solver: SolverConfig | None = None,
    tracker: EvaluationTracker | None = None,
    seed: int = 0,
    index: int = 0,
) -> CheckResult:
    """Σ p_i M(ρ_i) >= M(Σ p_i ρ_i)."""
    desc = get_measure(m)
    tol = _default_tol(desc, tol)

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        values = [meter(s) for s in ens.states]
        lhs = float(sum(p * v for p, v in zip(ens.weights, values)))
        rhs = meter(ens.average())
        return _result(desc, "convexity", lhs, rhs, tol, meter, encoded, seed, index, {"branch_values": values})

    return _guarded(desc, "convexity", tol, {"ensemble": ens}, seed, index, body)


# --- additivity family ----------------------------------------------------


def check_two_copy(m, rho: DensityMatrix, tol=None, solver=None, tracker=None, limits=None, seed=0, index=0) -> CheckResult:
    """M(ρ⊗ρ) = 2M(ρ)."""
    desc = get_measure(m)
    tol = _default_tol(desc, tol)

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        lhs = meter(tensor(rho, rho, limits))
        rhs = 2.0 * meter(rho)
        return _result(desc, "two_copy", lhs, rhs, tol, meter, encoded, seed, index)

    return _guarded(desc, "two_copy", tol, {"state": rho}, seed, index, body)


def check_n_copy(
    m, rho: DensityMatrix, N: int, tol=None, solver=None, tracker=None, limits=None, seed=0, index=0
) -> CheckResult:
    """
    M(ρ^⊗N) = N·M(ρ).

    Raises:
        CapacityError: If N exceeds the copy cap or d^N the dimension cap
    """
    desc = get_measure(m)
    tol = _default_tol(desc, tol)
    limits = limits or DEFAULT_LIMITS
    if N < 1 or N > limits.copy_cap:
        raise CapacityError(f"N={N} outside [1, {limits.copy_cap}]")

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        lhs = meter(tensor_power(rho, N, limits))
        rhs = N * meter(rho)
        return _result(desc, "n_copy", lhs, rhs, tol, meter, encoded, seed, index, {"N": N})

    return _guarded(desc, "n_copy", tol, {"state": rho, "N": N}, seed, index, body)


def _pad(rho: DensityMatrix, like: DensityMatrix, side: str) -> DensityMatrix:
    """ρ ⊗ δ (side "right") or δ ⊗ ρ (side "left") with δ = |0⟩⟨0| shaped like `like`."""
    delta = DensityMatrix(basis_state(like.dim, 0).matrix, like.dims, like.parties, validate=False)
    return tensor(rho, delta) if side == "right" else tensor(delta, rho)


def check_full_additivity(
    m, rho: DensityMatrix, sigma: DensityMatrix, tol=None, solver=None, tracker=None, limits=None, seed=0, index=0
) -> CheckResult:
    """
    M(ρ⊗σ) = M(ρ) + M(σ).

    When ρ and σ live on different spaces, the padded residual on
    ρ⊗δ₂ and δ₁⊗σ (a common space) is reported in details as well.
    """
    desc = get_measure(m)
    tol = _default_tol(desc, tol)

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        m_rho, m_sigma = meter(rho), meter(sigma)
        lhs = meter(tensor(rho, sigma, limits))
        rhs = m_rho + m_sigma
        details: dict[str, Any] = {}
        if rho.dims != sigma.dims:
            rho_p, sigma_p = _pad(rho, sigma, "right"), _pad(sigma, rho, "left")
            padded = meter(tensor(rho_p, sigma_p, limits)) - meter(rho_p) - meter(sigma_p)
            details["padded_residual"] = float(padded)
        return _result(desc, "full_additivity", lhs, rhs, tol, meter, encoded, seed, index, details)

    return _guarded(desc, "full_additivity", tol, {"state": rho, "sigma": sigma}, seed, index, body)


def check_omega_identity(
    m,
    rho: DensityMatrix,
    sigma: DensityMatrix,
    tol=None,
    basis: FlagBasis | None = None,
    solver=None,
    tracker=None,
    limits=None,
    seed=0,
    index=0,
) -> CheckResult:
    """
    M(ρ⊗σ) = 4M(ω) − M(ρ) − M(σ) for ω = ½ρ⊗|φ₁⟩⟨φ₁| + ½σ⊗|φ₂⟩⟨φ₂|.

    Prerequisites are checked first: flag additivity on ω and two-copy
    additivity for ρ, σ and ω. A failed prerequisite gives an inconclusive
    result naming it. The intermediate expansion
    M(ω⊗ω) = ¼M(ρ⊗ρ) + ½M(ρ⊗σ) + ¼M(σ⊗σ) is reported as
    details["expansion_residual"] and must also hold within tol. States on
    different spaces are first padded with free states onto a common space.
    """
    desc = get_measure(m)
    tol = _default_tol(desc, tol)
    basis = basis or computational_flag_basis(2, desc.theory)
    parts = {"state": rho, "sigma": sigma, "basis": basis}

    def body(encoded: dict) -> CheckResult:
        r, s = rho, sigma
        details: dict[str, Any] = {}
        if r.dims != s.dims:
            r, s = _pad(rho, sigma, "right"), _pad(sigma, rho, "left")
            details["padded"] = True
        meter = _Meter(desc, solver, tracker)
        m_r, m_s = meter(r), meter(s)
        w = omega(r, s, basis, limits)
        m_w = meter(w)
        flag_residual = m_w - 0.5 * (m_r + m_s)
        details["flag_additivity_residual"] = float(flag_residual)
        if abs(flag_residual) > tol:
            return _inconclusive(desc, "omega_identity", tol, encoded, seed, index,
                                 "prerequisite failed: flag_additivity(omega)", details)

        m_rr = meter(tensor(r, r, limits))
        m_ss = meter(tensor(s, s, limits))
        m_ww = meter(tensor(w, w, limits))
        for name, two, one in (("rho", m_rr, m_r), ("sigma", m_ss, m_s), ("omega", m_ww, m_w)):
            details[f"two_copy_residual_{name}"] = float(two - 2.0 * one)
            if abs(two - 2.0 * one) > tol:
                return _inconclusive(desc, "omega_identity", tol, encoded, seed, index,
                                     f"prerequisite failed: two_copy({name})", details)

        m_rs = meter(tensor(r, s, limits))
        m_sr = meter(tensor(s, r, limits))
        expansion = m_ww - (0.25 * m_rr + 0.5 * m_rs + 0.25 * m_ss)
        details["expansion_residual"] = float(expansion)
        details["swap_residual"] = float(m_rs - m_sr)
        lhs = m_rs
        rhs = 4.0 * m_w - m_r - m_s
        result = _result(desc, "omega_identity", lhs, rhs, tol, meter, encoded, seed, index, details)
        if result.verdict == "holds" and abs(expansion) > tol:
            result.verdict = "violated"
        return result

    return _guarded(desc, "omega_identity", tol, parts, seed, index, body)


# --- axioms -----------------------------------------------------------------


def check_free_padding(
    m, rho: DensityMatrix, delta: DensityMatrix | None = None, tol=None, solver=None, tracker=None, seed=0, index=0
) -> CheckResult:
    """M(ρ⊗δ) = M(ρ) for a free state δ (|0⟩⟨0| of the theory by default)."""
    desc = get_measure(m)
    tol = _default_tol(desc, tol)
    if delta is None:
        delta = free_pure_state(desc.theory, 2)
    if desc.theory == "entanglement" and delta.parties is None and len(delta.dims) == 1:
        delta = delta.with_parties((1,))

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        lhs = meter(tensor(rho, delta))
        rhs = meter(rho)
        return _result(desc, "free_padding", lhs, rhs, tol, meter, encoded, seed, index)

    return _guarded(desc, "free_padding", tol, {"state": rho, "delta": delta}, seed, index, body)


def check_faithfulness(m, rho: DensityMatrix, free: bool, tol=None, solver=None, tracker=None, seed=0, index=0) -> CheckResult:
    """
    M(ρ) = 0 when ρ is free, M(ρ) > tol otherwise.

    `free` is the caller's knowledge of the state, not something computed here.
    """
    desc = get_measure(m)
    tol = _default_tol(desc, tol)

    def body(encoded: dict) -> CheckResult:
        meter = _Meter(desc, solver, tracker)
        value = meter(rho)
        relation: Relation = "zero" if free else "positive"
        return _result(desc, "faithfulness", value, 0.0, tol, meter, encoded, seed, index,
                       {"free": free}, relation=relation)

    return _guarded(desc, "faithfulness", tol, {"state": rho, "free": bool(free)}, seed, index, body)


# --- bridges ----------------------------------------------------------------


def bridge_mono_violation_to_flag(
    m,
    rho: DensityMatrix,
    ch: KrausChannel,
    basis: FlagBasis | None = None,
    tol=None,
    solver=None,
    limits=None,
) -> tuple[Ensemble, CheckResult]:
    """
    Turn a strong-monotonicity violation into a flag-supadditivity violation.

    The selective outcomes of the free channel form the ensemble; flagging
    them with `basis` (computational by default) gives the state Λ̃(ρ).
    Since M(ρ) >= M(Λ̃(ρ)) for a monotone measure, the flag_sup violation
    is at least the strong-mono one. details records both magnitudes and
    the monotone slack M(ρ) − M(Λ̃(ρ)).

    Raises:
        ArgumentError: If (ρ, ch) is not a strong-mono violation, or the
            basis length differs from the outcome count
    """
    desc = get_measure(m)
    mono = check_strong_mono(desc, rho, ch, tol, solver, limits=limits)
    if mono.verdict != "violated":
        raise ArgumentError(f"No strong monotonicity violation to bridge (verdict {mono.verdict})")
    ens = selective_apply(ch, rho)
    basis = basis or computational_flag_basis(len(ens), desc.theory)
    if len(basis) != len(ens):
        raise ArgumentError(f"Flag basis has {len(basis)} vectors for {len(ens)} outcomes")
    sup = check_flag_sup(desc, ens, basis, tol, solver, limits=limits)
    mono_violation = mono.rhs - mono.lhs
    flag_violation = sup.rhs - sup.lhs
    slack = mono.lhs - sup.lhs
    sup.details.update({
        "strong_mono_violation": mono_violation,
        "flag_sup_violation": flag_violation,
        "monotone_slack": slack,
        "postcondition_holds": bool(flag_violation >= mono_violation - 1e-9),
    })
    if slack < -sup.tol:
        logger.warning("%s increased under the flagged channel by %.3e", desc.id, -slack)
    return ens, sup


def bridge_flag_violation_to_mono(
    m,
    ens: Ensemble,
    basis: FlagBasis,
    tol=None,
    solver=None,
    limits=None,
) -> tuple[DensityMatrix, KrausChannel, CheckResult]:
    """
    Turn a flag-supadditivity violation into a strong-monotonicity violation.

    Returns the flagged state and the flag-measurement channel (a free
    operation); its outcomes are ρ_i ⊗ |φ_i⟩⟨φ_i|, so under free padding
    Σ p_i M(ρ_i ⊗ φ_i) = Σ p_i M(ρ_i) > M(flagged).

    Raises:
        ArgumentError: If the ensemble does not violate flag_sup, or free
            padding fails beyond tol on a member
    """
    desc = get_measure(m)
    sup = check_flag_sup(desc, ens, basis, tol, solver, limits=limits)
    if sup.verdict != "violated":
        raise ArgumentError(f"No flag supadditivity violation to bridge (verdict {sup.verdict})")
    rho = flagged_state(ens, basis, limits)
    channel = flag_measurement_channel(basis, ens.dims)
    meter = _Meter(desc, solver, None)
    padding = []
    for i, s in enumerate(ens.states):
        flagged_member = flagged_state(Ensemble(np.array([1.0]), (s,)), FlagBasis((basis.vectors[i],), basis.theory))
        padding.append(meter(flagged_member) - sup.details["branch_values"][i])
    if any(abs(x) > sup.tol for x in padding):
        raise ArgumentError(f"Free padding fails on the ensemble: residuals {padding}")
    mono = check_strong_mono(desc, rho, channel, tol, solver, limits=limits)
    mono.details.update({
        "flag_sup_violation": sup.rhs - sup.lhs,
        "strong_mono_violation": mono.rhs - mono.lhs,
        "padding_residuals": [float(x) for x in padding],
    })
    return rho, channel, mono


# --- regularization, sandwich, continuity ---------------------------------


@dataclass
class RegularizationEstimate:
    """Per-copy values M(ρ^⊗N)/N for N = 1..n_max and their trend."""

    measure_id: str
    rows: list[dict]
    trend: str
    converged: bool

    def per_copy(self) -> list[float]:
        return [row["per_copy"] for row in self.rows]


def _trend(values: list[float], tol: float) -> str:
    diffs = np.diff(values)
    if len(diffs) == 0 or np.all(np.abs(diffs) <= tol):
        return "constant"
    if np.all(diffs >= -tol):
        return "increasing"
    if np.all(diffs <= tol):
        return "decreasing"
    return "mixed"


def estimate_regularization(
    m,
    rho: DensityMatrix,
    n_max: int,
    solver: SolverConfig | None = None,
    limits: Limits | None = None,
    tol: float | None = None,
    on_row: Callable[[dict], None] | None = None,
) -> RegularizationEstimate:
    """
    M(ρ^⊗N)/N for N = 1..n_max, with the trend classified as
    constant, increasing, decreasing or mixed.

    Raises:
        CapacityError: If d^n_max exceeds the dimension cap or n_max the copy cap
        CapabilityError: If the measure cannot evaluate ρ^⊗n_max
    """
    desc = get_measure(m)
    limits = limits or DEFAULT_LIMITS
    tol = _default_tol(desc, tol)
    if n_max < 1 or n_max > limits.copy_cap:
        raise CapacityError(f"n_max={n_max} outside [1, {limits.copy_cap}]")
    if rho.dim**n_max > limits.dim_cap:
        raise CapacityError(f"Dimension {rho.dim}^{n_max} exceeds cap {limits.dim_cap}")
    if rho.dim**n_max > desc.max_dim:
        raise CapabilityError(f"{desc.id} supports dimension <= {desc.max_dim}, got {rho.dim}^{n_max}")
    meter = _Meter(desc, solver, None)
    rows = []
    power = rho
    for n in range(1, n_max + 1):
        if n > 1:
            power = tensor(power, rho, limits)
        value = meter(power)
        row = {"N": n, "value": value, "per_copy": value / n}
        rows.append(row)
        if on_row is not None:
            on_row(row)
    trend = _trend([r["per_copy"] for r in rows], tol)
    return RegularizationEstimate(desc.id, rows, trend, meter.unconverged == 0)


def _copies(rho1: DensityMatrix, k1: int, rho2: DensityMatrix, k2: int, limits: Limits | None) -> DensityMatrix:
    factors = [rho1] * k1 + [rho2] * k2
    if not factors:
        return DensityMatrix(np.ones((1, 1), dtype=complex), (1,), validate=False)
    return tensor_all(factors, limits)


def check_sandwich(
    m,
    rho1: DensityMatrix,
    rho2: DensityMatrix,
    p1: float,
    basis: FlagBasis,
    N: int,
    delta_typ: float,
    tol=None,
    solver=None,
    limits=None,
    seed=0,
    index=0,
) -> CheckResult:
    """
    Finite-N monotonicity sandwich around the typical part.

    lower = M(ρ₁^⊗⌊Np₁(1−δ)⌋ ⊗ ρ₂^⊗⌊Np₂(1−δ)⌋),
    upper = M(ρ₁^⊗⌈Np₁(1+δ)⌉ ⊗ ρ₂^⊗⌈Np₂(1+δ)⌉),
    holds iff lower <= M(ρ_typ) <= upper within tol. lhs is M(ρ_typ), rhs
    the upper bound, details["lower"] the lower bound. Flag additivity on
    the two-flag ensemble is checked first; its failure gives an
    inconclusive result. details["flag_additive_value"] is
    Σ_k (w_k/T) M(ρ₁^⊗k ⊗ ρ₂^⊗(N−k)), which equals M(ρ_typ) for
    flag-additive measures.
    """
    desc = get_measure(m)
    tol = _default_tol(desc, tol)
    parts = {"rho1": rho1, "rho2": rho2, "p1": p1, "basis": basis, "N": N, "delta_typ": delta_typ}

    def body(encoded: dict) -> CheckResult:
        ens = Ensemble(np.array([p1, 1.0 - p1]), (rho1, rho2))
        pre = check_flag_additivity(desc, ens, basis, tol, solver, limits=limits)
        if pre.verdict != "holds":
            return _inconclusive(desc, "sandwich", tol, encoded, seed, index,
                                 f"prerequisite failed: flag_additivity ({pre.verdict})",
                                 {"flag_additivity_residual": pre.residual})
        decomp = typical_decomposition(rho1, rho2, p1, basis, N, delta_typ, limits)
        meter = _Meter(desc, solver, None)
        value = meter(decomp.rho_typ)
        k_lo, k_hi = copy_bounds(p1, N, delta_typ)
        m_lo, m_hi = copy_bounds(1.0 - p1, N, delta_typ)
        lower = meter(_copies(rho1, k_lo, rho2, m_lo, limits))
        upper = meter(_copies(rho1, k_hi, rho2, m_hi, limits))
        p2 = 1.0 - p1
        additive = 0.0
        for k in range(decomp.k_range[0], decomp.k_range[1] + 1):
            w = math.comb(N, k) * p1**k * p2 ** (N - k) / decomp.weight_T
            additive += w * meter(_copies(rho1, k, rho2, N - k, limits))
        details = {
            "lower": lower,
            "upper": upper,
            "epsilon": decomp.epsilon,
            "weight_T": decomp.weight_T,
            "k_range": list(decomp.k_range),
            "flag_additive_value": additive,
        }
        return _result(desc, "sandwich", value, upper, tol, meter, encoded, seed, index, details)

    return _guarded(desc, "sandwich", tol, parts, seed, index, body)


def continuity_ratio(m, rho: DensityMatrix, sigma: DensityMatrix, solver: SolverConfig | None = None) -> dict:
    """
    |M(ρ) − M(σ)| / log₂ d next to the trace distance ½‖ρ − σ‖₁.

    Raises:
        ArgumentError: If the states differ in dimension or d < 2
    """
    desc = get_measure(m)
    if rho.dims != sigma.dims:
        raise ArgumentError(f"continuity_ratio needs states on the same space: {rho.dims} vs {sigma.dims}")
    if rho.dim < 2:
        raise ArgumentError("continuity_ratio needs dimension >= 2")
    meter = _Meter(desc, solver, None)
    difference = abs(meter(rho) - meter(sigma))
    return {
        "trace_distance": trace_distance(rho, sigma),
        "difference": difference,
        "ratio": difference / math.log2(rho.dim),
    }


# --- dispatch and audit ------------------------------------------------------


# instance parts each property's checker reads; optional ones are read with .get
INSTANCE_PARTS: dict[str, tuple[str, ...]] = {
    "flag_additivity": ("ensemble", "basis"),
    "flag_sup": ("ensemble", "basis"),
    "flag_sub": ("ensemble", "basis"),
    "strong_mono": ("state", "channel"),
    "monotonicity": ("state", "channel"),
    "convexity": ("ensemble",),
    "two_copy": ("state",),
    "n_copy": ("state", "N"),
    "full_additivity": ("state", "sigma"),
    "omega_identity": ("state", "sigma"),
    "free_padding": ("state",),
    "faithfulness": ("state", "free"),
    "sandwich": ("rho1", "rho2", "p1", "basis", "N", "delta_typ"),
}


def run_property(
    m: str | MeasureDescriptor,
    prop: str,
    parts: dict[str, Any],
    tol: float | None = None,
    solver: SolverConfig | None = None,
    limits: Limits | None = None,
    tracker: EvaluationTracker | None = None,
    seed: int = 0,
    index: int = 0,
) -> CheckResult:
    """
    Run the checker for `prop` on a decoded instance.

    Raises:
        ArgumentError: On an unknown property or missing instance parts
    """
    if prop not in INSTANCE_PARTS:
        raise ArgumentError(f"Unknown property: {prop}")
    missing = [name for name in INSTANCE_PARTS[prop] if name not in parts]
    if missing:
        raise ArgumentError(f"Instance for {prop} is missing part(s): {', '.join(missing)}")
    p = parts
    if prop in ("flag_additivity", "flag_sup", "flag_sub"):
        return _flag_check(prop, m, p["ensemble"], p["basis"], tol, solver, tracker, limits, seed, index)
    if prop == "strong_mono":
        return check_strong_mono(m, p["state"], p["channel"], tol, solver, tracker, limits, seed, index)
    if prop == "monotonicity":
        return check_monotonicity(m, p["state"], p["channel"], tol, solver, tracker, seed, index)
    if prop == "convexity":
        return check_convexity(m, p["ensemble"], tol, solver, tracker, seed, index)
    if prop == "two_copy":
        return check_two_copy(m, p["state"], tol, solver, tracker, limits, seed, index)
    if prop == "n_copy":
        return check_n_copy(m, p["state"], p["N"], tol, solver, tracker, limits, seed, index)
    if prop == "full_additivity":
        return check_full_additivity(m, p["state"], p["sigma"], tol, solver, tracker, limits, seed, index)
    if prop == "omega_identity":
        return check_omega_identity(m, p["state"], p["sigma"], tol, p.get("basis"), solver, tracker, limits, seed, index)
    if prop == "free_padding":
        return check_free_padding(m, p["state"], p.get("delta"), tol, solver, tracker, seed, index)
    if prop == "faithfulness":
        return check_faithfulness(m, p["state"], p["free"], tol, solver, tracker, seed, index)
    return check_sandwich(m, p["rho1"], p["rho2"], p["p1"], p["basis"], p["N"], p["delta_typ"], tol, solver,
                          limits, seed, index)


def audit_flag_equivalence(
    m,
    trials: int,
    dims: list[int],
    seed: int = 0,
    search_budget: int = 0,
    ensemble_max: int = 4,
    n_kraus_max: int = 6,
    tol: float | None = None,
    solver: SolverConfig | None = None,
) -> dict:
    """
    Paired sweeps of flag_sup, flag_sub, strong_mono and convexity.

    Every strong-mono violation is pushed through the bridge to flag_sup
    and every flag_sup violation through the bridge back; a bridge that
    fails to reproduce the violation counts as a contradiction, as does an
    instance where flag_sub holds but convexity fails. With a positive
    `search_budget`, a strong-mono counterexample search adds its witness
    to the sample.

    Returns:
        Dict with per-property counts, contradiction and bridge tallies,
        and `consistent` (no contradictions)
    """
    desc = get_measure(m)
    props = ("flag_sup", "flag_sub", "strong_mono", "convexity")
    counts = {p: {"holds": 0, "violated": 0, "inconclusive": 0} for p in props}
    contradictions = 0
    bridged = 0
    index = 0
    for d in dims:
        for _ in range(trials):
            rng = rng_for(seed, index)
            size = int(rng.integers(1, ensemble_max + 1))
            ens = random_ensemble(desc.theory, d, size, rng)
            basis = random_flag_basis(desc.theory, size, rng)
            rho = random_state(desc.theory, d, rng)
            ch = random_free_channel(desc.theory, rho, int(rng.integers(1, n_kraus_max + 1)), rng)
            results = {
                "flag_sup": check_flag_sup(desc, ens, basis, tol, solver, seed=seed, index=index),
                "flag_sub": check_flag_sub(desc, ens, basis, tol, solver, seed=seed, index=index),
                "strong_mono": check_strong_mono(desc, rho, ch, tol, solver, seed=seed, index=index),
                "convexity": check_convexity(desc, ens, tol, solver, seed=seed, index=index),
            }
            for p, r in results.items():
                counts[p][r.verdict] += 1
            if results["flag_sub"].verdict == "holds" and results["convexity"].verdict == "violated":
                contradictions += 1
            if results["strong_mono"].verdict == "violated":
                contradictions += _bridge_to_flag_fails(desc, rho, ch, tol, solver)
                bridged += 1
            if results["flag_sup"].verdict == "violated":
                contradictions += _bridge_to_mono_fails(desc, ens, basis, tol, solver)
                bridged += 1
            index += 1

    searched = None
    if search_budget > 0:
        from .search import search_violation

        outcome = search_violation(desc, "strong_mono", dims[0], search_budget, seed, solver=solver)
        searched = outcome.best_violation
        verdict = outcome.check.verdict
        counts["strong_mono"][verdict] += 1
        if verdict == "violated":
            parts = decode_instance(outcome.instance)
            contradictions += _bridge_to_flag_fails(desc, parts["state"], parts["channel"], tol, solver)
            bridged += 1

    return {
        "measure_id": desc.id,
        "counts": counts,
        "contradictions": contradictions,
        "bridged": bridged,
        "search_best_violation": searched,
        "consistent": contradictions == 0,
    }


# alias
audit_theorem1 = audit_flag_equivalence


def _bridge_to_flag_fails(desc, rho, ch, tol, solver) -> int:
    try:
        _, sup = bridge_mono_violation_to_flag(desc, rho, ch, tol=tol, solver=solver)
    except CapabilityError:
        return 0
    return 0 if sup.verdict in ("violated", "inconclusive") else 1


def _bridge_to_mono_fails(desc, ens, basis, tol, solver) -> int:
    try:
        _, _, mono = bridge_flag_violation_to_mono(desc, ens, basis, tol=tol, solver=solver)
    except (CapabilityError, CapacityError):
        return 0
    except ArgumentError:
        # free padding failed on a member, which the bridge needs
        return 1
    return 0 if mono.verdict in ("violated", "inconclusive") else 1
