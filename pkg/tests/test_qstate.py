"""Tests for dense states and their operations."""

import math

import numpy as np
import pytest

from flagcheck.config import Limits
from flagcheck.errors import ArgumentError, CapacityError, InvariantError
from flagcheck.qstate import (
    DensityMatrix,
    PureState,
    basis_state,
    bell_state,
    dephase,
    eigh,
    is_incoherent_state,
    maximally_coherent_state,
    maximally_mixed,
    mix,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    plus_state,
    purity,
    random_density,
    random_incoherent_state,
    random_separable_state,
    random_unitary,
    rng_for,
    tensor,
    tensor_power,
    trace_distance,
    trace_norm,
    von_neumann_entropy,
    werner_state,
)


class TestDensityMatrix:
    """Construction-time invariants."""

    def test_valid_state(self):
        """A proper state keeps its dims and default party labels."""
        rho = DensityMatrix(np.eye(4) / 4, (2, 2))
        assert rho.dim == 4
        assert rho.party_labels == (0, 1)

    def test_wrong_trace_rejected(self):
        """Trace other than 1 raises InvariantError."""
        with pytest.raises(InvariantError):
            DensityMatrix(np.eye(2), (2,))

    def test_non_hermitian_rejected(self):
        """Non-Hermitian matrices are rejected."""
        m = np.array([[0.5, 0.1], [0.2, 0.5]])
        with pytest.raises(InvariantError):
            DensityMatrix(m, (2,))

    def test_negative_eigenvalue_rejected(self):
        """A Hermitian unit-trace matrix with a negative eigenvalue is rejected."""
        m = np.array([[0.5, 0.8], [0.8, 0.5]])
        with pytest.raises(InvariantError):
            DensityMatrix(m, (2,))

    def test_dims_must_multiply(self):
        """dims must multiply to the matrix size."""
        with pytest.raises(InvariantError):
            DensityMatrix(np.eye(4) / 4, (2, 3))

    def test_bad_party_labels(self):
        """Party labels must cover every subsystem with 0 or 1."""
        with pytest.raises(InvariantError):
            DensityMatrix(np.eye(4) / 4, (2, 2), (0, 2))

    def test_matrix_is_read_only(self):
        """Stored matrices cannot be mutated in place."""
        rho = plus_state()
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    def test_pure_state_norm_checked(self):
        """PureState rejects unnormalized vectors."""
        with pytest.raises(InvariantError):
            PureState(np.array([1.0, 1.0]), (2,))


class TestComposition:
    """Tensor products, reductions and reorderings."""

    def test_tensor_dims_and_parties(self):
        """Two unlabelled single systems stay unlabelled."""
        rho = tensor(plus_state(), basis_state(3, 1))
        assert rho.dims == (2, 3)
        assert rho.parties is None
        assert rho.party_labels == (0, 1)

    def test_tensor_of_bipartite_states_concatenates_labels(self):
        """Labels concatenate for multi-subsystem factors."""
        rho = tensor(bell_state(), bell_state())
        assert rho.party_labels == (0, 1, 0, 1)

    def test_tensor_power_capacity(self):
        """Exceeding the dimension cap raises CapacityError."""
        with pytest.raises(CapacityError):
            tensor_power(plus_state(), 5, Limits(dim_cap=16))

    def test_tensor_power_zero_rejected(self):
        """n must be at least 1."""
        with pytest.raises(ArgumentError):
            tensor_power(plus_state(), 0)

    def test_partial_trace_of_bell_is_mixed(self):
        """Either half of a Bell pair is maximally mixed."""
        reduced = partial_trace(bell_state(), [0])
        assert reduced.allclose(maximally_mixed(2))

    def test_partial_trace_of_product(self):
        """Tracing out one factor of a product returns the other."""
        rho = tensor(plus_state(), basis_state(3, 2))
        assert partial_trace(rho, [1]).allclose(basis_state(3, 2))
        assert partial_trace(rho, [0]).allclose(plus_state())

    def test_partial_trace_bad_index(self):
        """Out-of-range indices raise ArgumentError."""
        with pytest.raises(ArgumentError):
            partial_trace(bell_state(), [2])
        with pytest.raises(ArgumentError):
            partial_trace(bell_state(), [])

    def test_partial_transpose_bell_has_negative_eigenvalue(self):
        """The partial transpose of a Bell state has eigenvalue −1/2."""
        w = np.linalg.eigvalsh(partial_transpose(bell_state(), 1))
        assert w[0] == pytest.approx(-0.5)

    def test_permute_subsystems_swaps_factors(self):
        """Swapping the factors of a ⊗ b gives b ⊗ a."""
        a, b = plus_state(), basis_state(3, 1)
        swapped = permute_subsystems(tensor(a, b), [1, 0])
        assert swapped.dims == (3, 2)
        assert swapped.allclose(tensor(b, a))

    def test_permute_rejects_non_permutation(self):
        """Repeated indices are rejected."""
        with pytest.raises(ArgumentError):
            permute_subsystems(bell_state(), [0, 0])


class TestSpectra:
    """Eigensolvers, norms and entropies."""

    def test_jacobi_matches_lapack(self):
        """Both eigensolvers return the same spectrum."""
        rho = random_density(5, 5, rng_for(3))
        w_lapack, _ = eigh(rho.matrix, "lapack")
        w_jacobi, v_jacobi = eigh(rho.matrix, "jacobi")
        assert np.allclose(w_lapack, w_jacobi, atol=1e-10)
        recon = v_jacobi @ np.diag(w_jacobi) @ v_jacobi.conj().T
        assert np.allclose(recon, rho.matrix, atol=1e-10)

    def test_eigh_descending(self):
        """Eigenvalues come back in descending order."""
        w, _ = eigh(np.diag([0.1, 0.7, 0.2]).astype(complex))
        assert list(w) == pytest.approx([0.7, 0.2, 0.1])

    def test_eigh_rejects_non_hermitian(self):
        """Non-Hermitian input raises ArgumentError."""
        with pytest.raises(ArgumentError):
            eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_eigh_unknown_method(self):
        """Unknown solver names raise ArgumentError."""
        with pytest.raises(ArgumentError):
            eigh(np.eye(2), "qr")

    def test_trace_norm_non_hermitian(self):
        """Non-Hermitian input uses singular values."""
        assert trace_norm(np.array([[0.0, 2.0], [0.0, 0.0]])) == pytest.approx(2.0)

    def test_trace_distance_orthogonal(self):
        """Orthogonal pure states are at distance 1."""
        assert trace_distance(basis_state(2, 0), basis_state(2, 1)) == pytest.approx(1.0)

    def test_entropy_values(self):
        """Pure states have zero entropy, I/d has log2 d."""
        assert von_neumann_entropy(plus_state()) == pytest.approx(0.0, abs=1e-12)
        assert von_neumann_entropy(maximally_mixed(4)) == pytest.approx(2.0)

    def test_purity(self):
        """Tr ρ² is 1 for pure and 1/d for maximally mixed states."""
        assert purity(bell_state()) == pytest.approx(1.0)
        assert purity(maximally_mixed(3)) == pytest.approx(1 / 3)


class TestGenerators:
    """Random and named states."""

    def test_rng_for_is_deterministic(self):
        """Same (seed, index) gives the same stream, different index a different one."""
        a = rng_for(7, 2).standard_normal(4)
        b = rng_for(7, 2).standard_normal(4)
        c = rng_for(7, 3).standard_normal(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_random_density_rank(self):
        """A rank-r Ginibre state has r nonzero eigenvalues."""
        rho = random_density(4, 2, rng_for(1))
        w = np.linalg.eigvalsh(rho.matrix)
        assert int(np.sum(w > 1e-10)) == 2

    def test_random_density_bad_rank(self):
        """rank outside [1, d] raises ArgumentError."""
        with pytest.raises(ArgumentError):
            random_density(3, 4, rng_for(0))

    def test_random_unitary_is_unitary(self):
        """U†U = I."""
        u = random_unitary(4, rng_for(2))
        assert np.allclose(u.conj().T @ u, np.eye(4))

    def test_incoherent_state_is_diagonal(self):
        """Random incoherent states are diagonal."""
        assert is_incoherent_state(random_incoherent_state(4, rng_for(5)))
        assert not is_incoherent_state(plus_state())

    def test_dephase(self):
        """Dephasing |+⟩ gives I/2."""
        assert dephase(plus_state()).allclose(maximally_mixed(2))

    def test_separable_state_has_positive_partial_transpose(self):
        """Mixtures of product states stay PPT."""
        rho = random_separable_state((2, 2), rng_for(4))
        assert np.linalg.eigvalsh(partial_transpose(rho, 1))[0] > -1e-12

    def test_maximally_coherent_entries(self):
        """Every entry of |ψ_d⟩⟨ψ_d| is 1/d."""
        assert np.allclose(maximally_coherent_state(3).matrix, np.full((3, 3), 1 / 3))

    def test_werner_range(self):
        """Werner weights outside [0, 1] are rejected."""
        assert werner_state(1.0).allclose(bell_state())
        with pytest.raises(ArgumentError):
            werner_state(1.5)

    def test_mix(self):
        """Equal mixture of |0⟩ and |1⟩ is I/2."""
        assert mix([0.5, 0.5], [basis_state(2, 0), basis_state(2, 1)]).allclose(maximally_mixed(2))

    def test_mix_rejects_mismatched_dims(self):
        """States on different spaces cannot be mixed."""
        with pytest.raises(ArgumentError):
            mix([0.5, 0.5], [plus_state(), basis_state(3, 0)])

    def test_basis_state_range(self):
        """Index outside [0, d) raises ArgumentError."""
        with pytest.raises(ArgumentError):
            basis_state(2, 2)

    def test_plus_state_is_half_everywhere(self):
        """|+⟩⟨+| has all entries 1/2."""
        assert np.allclose(plus_state().matrix, np.full((2, 2), 0.5))
        assert math.isclose(np.trace(plus_state().matrix).real, 1.0)
