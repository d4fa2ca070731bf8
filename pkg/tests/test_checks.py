"""Tests for property checkers, bridges and regularization probes."""

import numpy as np
import pytest

from flagcheck.channels import (
    Ensemble,
    dephasing_channel,
    identity_channel,
    random_incoherent_channel,
    random_local_channel,
    unitary_channel,
)
from flagcheck.checks import (
    FLAG_ADDITIVE_IMPLIES,
    CheckResult,
    audit_flag_equivalence,
    audit_theorem1,
    bridge_flag_violation_to_mono,
    bridge_mono_violation_to_flag,
    check_convexity,
    check_faithfulness,
    check_flag_additivity,
    check_flag_sub,
    check_flag_sup,
    check_free_padding,
    check_full_additivity,
    check_monotonicity,
    check_n_copy,
    check_omega_identity,
    check_sandwich,
    check_strong_mono,
    check_two_copy,
    continuity_ratio,
    estimate_regularization,
    run_property,
    signed_violation,
)
from flagcheck.config import Limits, SolverConfig
from flagcheck.errors import ArgumentError, CapabilityError, CapacityError
from flagcheck.flags import computational_flag_basis
from flagcheck.instances import random_ensemble, random_flag_basis
from flagcheck.qstate import (
    DensityMatrix,
    basis_state,
    bell_state,
    maximally_coherent_state,
    maximally_mixed,
    plus_state,
    random_density,
    random_incoherent_state,
    rng_for,
    werner_state,
)
from flagcheck.tracker import EvaluationTracker


# certification target for the c_tr counterexample tests
LOOSE = SolverConfig(tol=1e-6)


def embedded_plus() -> DensityMatrix:
    """|+⟩ on the first two levels of a qutrit."""
    m = np.zeros((3, 3), dtype=complex)
    m[:2, :2] = 0.5
    return DensityMatrix(m, (3,))


@pytest.fixture
def trace_counterexample():
    """Ensemble and flags on which trace-norm coherence is not flag additive."""
    ens = Ensemble(np.array([0.5, 0.5]), (embedded_plus(), maximally_coherent_state(3)))
    return ens, computational_flag_basis(2)


class TestFlagAdditivity:
    """Flag additivity and its one-sided halves."""

    @pytest.mark.parametrize("measure", ["c_l1", "c_rel_ent"])
    def test_closed_form_coherence_is_flag_additive(self, measure):
        """Random ensembles with random flags never break it."""
        for i in range(5):
            rng = rng_for(21, i)
            ens = random_ensemble("coherence", 3, 3, rng)
            result = check_flag_additivity(measure, ens, random_flag_basis("coherence", 3, rng))
            assert result.verdict == "holds"
            assert abs(result.residual) <= result.tol

    def test_negativity_is_flag_additive(self):
        """Flags on the second party leave negativity additive."""
        rng = rng_for(5)
        ens = random_ensemble("entanglement", 2, 2, rng)
        result = check_flag_additivity("negativity", ens, random_flag_basis("entanglement", 2, rng))
        assert result.verdict == "holds"

    def test_trace_coherence_violation(self, trace_counterexample):
        """Flagged c_tr is 1 against an average of 7/6."""
        ens, basis = trace_counterexample
        result = check_flag_additivity("c_tr", ens, basis, tol=1e-4, solver=LOOSE)
        assert result.verdict == "violated"
        assert result.lhs == pytest.approx(1.0, abs=1e-5)
        assert result.rhs == pytest.approx(7 / 6, abs=1e-5)
        assert result.details["branch_values"] == pytest.approx([1.0, 4 / 3], abs=1e-5)

    def test_trace_coherence_sup_and_sub(self, trace_counterexample):
        """The counterexample breaks flag_sup by 1/6 and satisfies flag_sub."""
        ens, basis = trace_counterexample
        sup = check_flag_sup("c_tr", ens, basis, tol=1e-4, solver=LOOSE)
        sub = check_flag_sub("c_tr", ens, basis, tol=1e-4, solver=LOOSE)
        assert sup.verdict == "violated"
        assert sup.violation == pytest.approx(1 / 6, abs=1e-5)
        assert sub.verdict == "holds"

    @pytest.mark.parametrize("i", range(20))
    def test_trace_coherence_flag_sub_on_qutrits(self, i):
        """c_tr keeps flag subadditivity on random qutrit ensembles."""
        rng = rng_for(300, i)
        ens = random_ensemble("coherence", 3, 2, rng)
        result = check_flag_sub("c_tr", ens, random_flag_basis("coherence", 2, rng))
        assert result.verdict == "holds"
        assert "reason" not in result.details

    def test_eof_is_inconclusive(self):
        """eof_2q cannot evaluate flagged states."""
        ens = Ensemble(np.array([1.0]), (bell_state(),))
        result = check_flag_additivity("eof_2q", ens, computational_flag_basis(1, "entanglement"))
        assert result.verdict == "inconclusive"
        assert result.details["reason"].startswith("capability")

    def test_tracker_counts_evaluations(self):
        """One flagged and one per-member evaluation."""
        tracker = EvaluationTracker()
        ens = Ensemble(np.array([0.5, 0.5]), (plus_state(), basis_state(2, 0)))
        check_flag_additivity("c_l1", ens, computational_flag_basis(2), tracker=tracker)
        assert tracker.call_count == 3

    def test_unconverged_solver_is_inconclusive(self, trace_counterexample):
        """A starved c_tr solve turns the verdict inconclusive."""
        ens, basis = trace_counterexample
        starved = SolverConfig(tol=1e-15, max_iter=1, restarts=1, retries=0)
        result = check_flag_additivity("c_tr", ens, basis, solver=starved)
        assert result.verdict == "inconclusive"
        assert "did not converge" in result.details["reason"]


class TestMonotonicity:
    """Strong and plain monotonicity under free channels."""

    @pytest.mark.parametrize("measure", ["c_l1", "c_rel_ent"])
    def test_strong_mono_holds_for_incoherent_channels(self, measure):
        """Closed-form coherence measures are strong monotones."""
        for i in range(4):
            rng = rng_for(33, i)
            rho = random_density(3, 3, rng)
            ch = random_incoherent_channel(3, 3, rng)
            assert check_strong_mono(measure, rho, ch).verdict == "holds"

    def test_strong_mono_details(self):
        """Outcome weights and values are recorded."""
        result = check_strong_mono("c_l1", plus_state(), dephasing_channel(2))
        assert result.details["outcome_weights"] == pytest.approx([0.5, 0.5])
        assert result.details["outcome_values"] == pytest.approx([0.0, 0.0])
        assert result.lhs == pytest.approx(1.0)
        assert result.rhs == pytest.approx(0.0)

    def test_negativity_local_channels(self):
        """Negativity does not grow under local operations."""
        rng = rng_for(2)
        rho = werner_state(0.8)
        ch = random_local_channel((2, 2), (0, 1), 1, 3, rng)
        assert check_strong_mono("negativity", rho, ch).verdict == "holds"
        assert check_monotonicity("negativity", rho, ch).verdict == "holds"

    def test_non_free_channel_rejected(self):
        """A Hadamard is not a free coherence operation."""
        h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        with pytest.raises(ArgumentError):
            check_strong_mono("c_l1", basis_state(2, 0), unitary_channel(h))
        with pytest.raises(ArgumentError):
            check_monotonicity("c_l1", basis_state(2, 0), unitary_channel(h))

    def test_monotonicity_under_dephasing(self):
        """Dephasing removes all coherence."""
        result = check_monotonicity("c_rel_ent", plus_state(), dephasing_channel(2))
        assert result.verdict == "holds"
        assert result.rhs == pytest.approx(0.0, abs=1e-12)


class TestConvexity:
    """Σ p_i M(ρ_i) >= M(Σ p_i ρ_i)."""

    @pytest.mark.parametrize("measure", ["c_l1", "c_rel_ent", "c_tr"])
    def test_convex_measures(self, measure):
        """Random ensembles satisfy convexity."""
        ens = random_ensemble("coherence", 2, 3, rng_for(8))
        assert check_convexity(measure, ens).verdict == "holds"

    @pytest.mark.parametrize("i", range(20))
    def test_trace_coherence_on_qutrits(self, i):
        """c_tr is convex on random qutrit ensembles of two to four members."""
        rng = rng_for(400, i)
        ens = random_ensemble("coherence", 3, int(rng.integers(2, 5)), rng)
        result = check_convexity("c_tr", ens)
        assert result.verdict == "holds"
        assert "reason" not in result.details

    def test_mixing_plus_and_minus(self):
        """Mixing |+⟩ and |−⟩ equally destroys coherence."""
        minus = DensityMatrix(np.array([[0.5, -0.5], [-0.5, 0.5]]), (2,))
        ens = Ensemble(np.array([0.5, 0.5]), (plus_state(), minus))
        result = check_convexity("c_l1", ens)
        assert result.lhs == pytest.approx(1.0)
        assert result.rhs == pytest.approx(0.0)
        assert result.verdict == "holds"


class TestAdditivity:
    """Tensor additivity checks."""

    def test_c_rel_ent_two_copy(self):
        """Relative entropy of coherence is additive."""
        assert check_two_copy("c_rel_ent", random_density(3, 2, rng_for(4))).verdict == "holds"

    def test_c_l1_two_copy_violated(self):
        """c_l1(|+⟩⊗|+⟩) = 3 ≠ 2."""
        result = check_two_copy("c_l1", plus_state())
        assert result.verdict == "violated"
        assert result.lhs == pytest.approx(3.0)
        assert result.rhs == pytest.approx(2.0)

    def test_n_copy(self):
        """N copies of |+⟩ under c_rel_ent give N bits."""
        result = check_n_copy("c_rel_ent", plus_state(), 4)
        assert result.verdict == "holds"
        assert result.lhs == pytest.approx(4.0)
        assert result.details["N"] == 4

    def test_n_copy_capacity(self):
        """N above the copy cap raises CapacityError."""
        with pytest.raises(CapacityError):
            check_n_copy("c_l1", plus_state(), 3, limits=Limits(copy_cap=2))

    def test_full_additivity(self):
        """c_rel_ent(ρ⊗σ) = c_rel_ent(ρ) + c_rel_ent(σ)."""
        rng = rng_for(6)
        result = check_full_additivity("c_rel_ent", random_density(2, 2, rng), random_density(2, 1, rng))
        assert result.verdict == "holds"
        assert "padded_residual" not in result.details

    def test_full_additivity_padded(self):
        """States on different spaces also get the padded residual."""
        result = check_full_additivity("c_rel_ent", plus_state(), maximally_coherent_state(3))
        assert result.verdict == "holds"
        assert result.details["padded_residual"] == pytest.approx(0.0, abs=1e-9)

    def test_omega_identity_c_rel_ent(self):
        """The ω identity holds for an additive, flag-additive measure."""
        rng = rng_for(7)
        result = check_omega_identity("c_rel_ent", random_density(2, 2, rng), random_density(2, 2, rng))
        assert result.verdict == "holds"
        assert result.details["expansion_residual"] == pytest.approx(0.0, abs=1e-9)
        assert result.details["swap_residual"] == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("i", range(15))
    def test_omega_identity_over_qubit_pairs(self, i):
        """The ω identity and its expansion hold for c_rel_ent on random qubit pairs."""
        rng = rng_for(500, i)
        rho = random_density(2, int(rng.integers(1, 3)), rng)
        sigma = random_density(2, int(rng.integers(1, 3)), rng)
        result = check_omega_identity("c_rel_ent", rho, sigma)
        assert result.verdict == "holds"
        assert abs(result.details["expansion_residual"]) <= 1e-9
        assert abs(result.lhs - result.rhs) <= 1e-8

    @pytest.mark.parametrize("i", range(15))
    def test_c_l1_two_copy_is_multiplicative(self, i):
        """1 + c_l1(ρ⊗ρ) = (1 + c_l1(ρ))² on random qutrits."""
        result = check_two_copy("c_l1", random_density(3, 2, rng_for(600, i)))
        assert 1.0 + result.lhs == pytest.approx((1.0 + result.rhs / 2) ** 2, abs=1e-9)

    def test_omega_identity_pads_mismatched_dims(self):
        """Different spaces are padded onto a common one first."""
        result = check_omega_identity("c_rel_ent", plus_state(), maximally_coherent_state(3))
        assert result.details["padded"] is True
        assert result.verdict == "holds"

    def test_omega_identity_prerequisite(self):
        """c_l1 is not two-copy additive, so the identity is inconclusive."""
        result = check_omega_identity("c_l1", plus_state(), plus_state())
        assert result.verdict == "inconclusive"
        assert result.details["reason"] == "prerequisite failed: two_copy(rho)"


class TestAxioms:
    """Free padding and faithfulness."""

    @pytest.mark.parametrize("measure", ["c_l1", "c_rel_ent", "c_tr"])
    def test_free_padding_coherence(self, measure):
        """Appending |0⟩⟨0| changes nothing."""
        assert check_free_padding(measure, plus_state()).verdict == "holds"

    def test_free_padding_negativity(self):
        """A free flag on the second party leaves negativity unchanged."""
        result = check_free_padding("negativity", bell_state())
        assert result.verdict == "holds"
        assert result.lhs == pytest.approx(0.5)

    def test_faithful_on_free_state(self):
        """Free states measure zero."""
        rho = random_incoherent_state(3, rng_for(1))
        assert check_faithfulness("c_rel_ent", rho, True).verdict == "holds"

    def test_faithful_on_resource_state(self):
        """Resource states measure strictly positive."""
        result = check_faithfulness("c_l1", plus_state(), False)
        assert result.verdict == "holds"
        assert result.violation < 0

    def test_faithfulness_violation(self):
        """A resource state claimed free is flagged."""
        result = check_faithfulness("c_l1", plus_state(), True)
        assert result.verdict == "violated"
        assert result.violation == pytest.approx(1.0)

    def test_signed_violation_relations(self):
        """Violation sign follows the property's relation."""
        assert signed_violation("flag_sup", 1.0, 1.5) == pytest.approx(0.5)
        assert signed_violation("flag_sub", 1.0, 1.5) == pytest.approx(-0.5)
        assert signed_violation("two_copy", 3.0, 2.0) == pytest.approx(1.0)
        assert signed_violation("sandwich", 1.0, 2.0, {"lower": 0.5}) == pytest.approx(-0.5)


class TestBridges:
    """Conversions between strong-mono and flag-sup violations."""

    def test_flag_violation_becomes_mono_violation(self, trace_counterexample):
        """Measuring the flag of the counterexample breaks strong monotonicity by 1/6."""
        ens, basis = trace_counterexample
        rho, channel, mono = bridge_flag_violation_to_mono("c_tr", ens, basis, tol=1e-4, solver=LOOSE)
        assert rho.dims == (3, 2)
        assert channel.n_kraus == 2
        assert mono.verdict == "violated"
        assert mono.details["strong_mono_violation"] == pytest.approx(1 / 6, abs=1e-5)
        assert mono.details["padding_residuals"] == pytest.approx([0.0, 0.0], abs=1e-5)

    def test_round_trip_through_both_bridges(self, trace_counterexample):
        """The mono violation bridges back to a flag_sup violation at least as large."""
        ens, basis = trace_counterexample
        rho, channel, _ = bridge_flag_violation_to_mono("c_tr", ens, basis, tol=1e-4, solver=LOOSE)
        outcomes, sup = bridge_mono_violation_to_flag("c_tr", rho, channel, tol=1e-4, solver=LOOSE)
        assert len(outcomes) == 2
        assert sup.verdict == "violated"
        assert sup.details["postcondition_holds"]
        assert sup.details["flag_sup_violation"] >= sup.details["strong_mono_violation"] - 1e-6

    def test_no_mono_violation(self):
        """Bridging needs an actual violation."""
        with pytest.raises(ArgumentError):
            bridge_mono_violation_to_flag("c_l1", plus_state(), dephasing_channel(2))

    def test_no_flag_violation(self):
        """Flag-additive measures have nothing to bridge."""
        ens = Ensemble(np.array([0.5, 0.5]), (plus_state(), basis_state(2, 0)))
        with pytest.raises(ArgumentError):
            bridge_flag_violation_to_mono("c_l1", ens, computational_flag_basis(2))

    def test_audit_is_consistent(self):
        """Paired sweeps of c_l1 show no contradictions."""
        audit = audit_flag_equivalence("c_l1", trials=3, dims=[2], seed=4)
        assert audit["consistent"]
        assert audit["contradictions"] == 0
        assert sum(audit["counts"]["flag_sup"].values()) == 3
        assert audit["counts"]["strong_mono"]["violated"] == 0
        assert audit["search_best_violation"] is None

    def test_audit_alias(self):
        """audit_theorem1 is the same audit under its other name."""
        assert audit_theorem1 is audit_flag_equivalence
        audit = audit_theorem1("c_rel_ent", trials=2, dims=[2], seed=1)
        assert audit["measure_id"] == "c_rel_ent"
        assert audit["consistent"]


class TestRegularization:
    """Per-copy values and the typical-part sandwich."""

    def test_c_l1_of_plus_grows(self):
        """c_l1(|+⟩^⊗N)/N = (2^N − 1)/N."""
        estimate = estimate_regularization("c_l1", plus_state(), 3)
        assert estimate.per_copy() == pytest.approx([1.0, 1.5, 7 / 3])
        assert estimate.trend == "increasing"
        assert estimate.converged

    def test_c_rel_ent_is_constant(self):
        """An additive measure has a flat per-copy table."""
        estimate = estimate_regularization("c_rel_ent", plus_state(), 3)
        assert estimate.per_copy() == pytest.approx([1.0, 1.0, 1.0])
        assert estimate.trend == "constant"

    def test_rows_reported(self):
        """on_row sees every row in order."""
        seen = []
        estimate_regularization("c_l1", plus_state(), 2, on_row=seen.append)
        assert [row["N"] for row in seen] == [1, 2]

    def test_capacity(self):
        """n_max above the copy cap raises CapacityError."""
        with pytest.raises(CapacityError):
            estimate_regularization("c_l1", plus_state(), 13)

    def test_c_tr_dimension(self):
        """c_tr cannot go past 16 dimensions."""
        with pytest.raises(CapabilityError):
            estimate_regularization("c_tr", plus_state(), 5)

    def test_sandwich_holds_for_c_rel_ent(self):
        """M(ρ_typ) sits between the copy-count bounds."""
        result = check_sandwich(
            "c_rel_ent", plus_state(), basis_state(2, 1), 0.3, computational_flag_basis(2), 3, 0.3
        )
        assert result.verdict == "holds"
        assert result.details["lower"] <= result.lhs + 1e-9
        assert result.lhs <= result.details["upper"] + 1e-9
        assert result.details["flag_additive_value"] == pytest.approx(result.lhs, abs=1e-8)
        assert result.details["k_range"] == [0, 2]

    def test_sandwich_needs_flag_additivity(self):
        """c_tr fails the prerequisite on the counterexample pair."""
        result = check_sandwich(
            "c_tr", embedded_plus(), maximally_coherent_state(3), 0.5, computational_flag_basis(2), 1, 0.0
        )
        assert result.verdict == "inconclusive"
        assert result.details["reason"].startswith("prerequisite failed")

    def test_continuity_ratio(self):
        """Difference over log₂ d next to the trace distance."""
        out = continuity_ratio("c_l1", plus_state(), basis_state(2, 0))
        assert out["difference"] == pytest.approx(1.0)
        assert out["ratio"] == pytest.approx(1.0)
        assert out["trace_distance"] == pytest.approx(np.sqrt(0.5))

    def test_continuity_ratio_needs_same_space(self):
        """States must share dims."""
        with pytest.raises(ArgumentError):
            continuity_ratio("c_l1", plus_state(), maximally_mixed(3))


class TestDispatch:
    """run_property and replay."""

    def test_unknown_property(self):
        """Unknown property names raise ArgumentError."""
        with pytest.raises(ArgumentError):
            run_property("c_l1", "triangle", {"state": plus_state()})

    def test_missing_part(self):
        """Missing instance parts raise ArgumentError."""
        with pytest.raises(ArgumentError):
            run_property("c_l1", "two_copy", {})

    def test_missing_part_is_named(self):
        """The error names every missing part."""
        with pytest.raises(ArgumentError, match="channel"):
            run_property("c_l1", "strong_mono", {"state": plus_state()})

    def test_checker_key_errors_propagate(self, monkeypatch):
        """A KeyError raised inside a checker is not reported as a missing part."""

        def broken(*args, **kwargs):
            raise KeyError("branch_values")

        monkeypatch.setattr("flagcheck.checks.check_two_copy", broken)
        with pytest.raises(KeyError, match="branch_values"):
            run_property("c_l1", "two_copy", {"state": plus_state()})

    def test_replay_reproduces_result(self):
        """A stored instance replays to the same verdict and values."""
        ch = random_incoherent_channel(2, 2, rng_for(3))
        result = run_property("c_l1", "strong_mono", {"state": plus_state(), "channel": ch}, seed=9, index=4)
        again = result.replay()
        assert again.verdict == result.verdict
        assert again.lhs == pytest.approx(result.lhs, abs=1e-12)
        assert again.instance_digest == result.instance_digest
        assert again.index == 4

    def test_to_dict_without_instance(self):
        """The instance can be left out of the dict form."""
        result = run_property("c_l1", "free_padding", {"state": plus_state()})
        data = result.to_dict(include_instance=False)
        assert "instance" not in data
        assert data["verdict"] == "holds"

    def test_identity_channel_is_free(self):
        """The identity is free in both theories."""
        assert run_property("c_l1", "monotonicity",
                            {"state": plus_state(), "channel": identity_channel(2)}).verdict == "holds"

    def test_flag_additive_implications(self):
        """Tensor additivity is not implied by flag additivity."""
        assert "strong_mono" in FLAG_ADDITIVE_IMPLIES
        assert "two_copy" not in FLAG_ADDITIVE_IMPLIES

    def test_check_result_violation(self):
        """violation uses the property's relation."""
        result = CheckResult("c_l1", "flag_sup", 1.0, 2.0, -1.0, 1e-9, "violated", "x")
        assert result.violation == pytest.approx(1.0)
