"""Flag bases, flagged states, the ω mixture, symmetrized tensors and typical parts."""

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable

import numpy as np

from .channels import Ensemble, KrausChannel
from .config import DEFAULT_LIMITS, Limits
from .errors import ArgumentError, CapacityError, DegenerateError
from .qstate import DensityMatrix, PureState, _trusted, check_dim
from .types import Theory

ORTHONORMAL_TOL = 1e-12
ENTRY_TOL = 1e-12
# floor/ceil snap to integers within this slack of N·p products
INTEGER_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class FlagBasis:
    """
    Ordered flag vectors on a common flag space.

    Construction only checks the shape; orthonormality and freeness are
    checked by `validate_flag_basis`.
    """

    vectors: tuple[PureState, ...]
    theory: Theory = "coherence"

    def __post_init__(self):
        vectors = tuple(self.vectors)
        if not vectors:
            raise ArgumentError("A flag basis needs at least one vector")
        dims = vectors[0].dims
        if any(v.dims != dims for v in vectors):
            raise ArgumentError("Flag vectors must share dims")
        if len(vectors) > vectors[0].dim:
            raise ArgumentError(f"{len(vectors)} flags do not fit in dimension {vectors[0].dim}")
        if self.theory not in ("coherence", "entanglement"):
            raise ArgumentError(f"Unknown theory: {self.theory}")
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.vectors[0].dims

    @property
    def dim(self) -> int:
        return self.vectors[0].dim

    def projector(self, i: int) -> np.ndarray:
        return self.vectors[i].projector()


def _is_free_vector(v: PureState) -> bool:
    # one nonzero amplitude: a computational basis vector up to phase, which
    # is also a product of computational vectors on any subsystem split
    return int(np.sum(np.abs(v.amplitudes) > ENTRY_TOL)) == 1


def validate_flag_basis(basis: FlagBasis) -> bool:
    """True iff the vectors are orthonormal and each is free in the basis theory."""
    mat = np.array([v.amplitudes for v in basis.vectors])
    gram = mat.conj() @ mat.T
    if np.max(np.abs(gram - np.eye(len(basis)))) > ORTHONORMAL_TOL:
        return False
    return all(_is_free_vector(v) for v in basis.vectors)


def _require_valid(basis: FlagBasis) -> None:
    if not validate_flag_basis(basis):
        raise ArgumentError("Flag basis is not an orthonormal set of free vectors")


def computational_flag_basis(n: int, theory: Theory = "coherence", dim: int | None = None) -> FlagBasis:
    """|0⟩, …, |n−1⟩ on a flag register of dimension max(n, dim)."""
    size = max(n, dim or n)
    if n < 1:
        raise ArgumentError(f"Need at least one flag, got {n}")
    eye = np.eye(size, dtype=complex)
    return FlagBasis(tuple(PureState(eye[i], (size,)) for i in range(n)), theory)


def product_flag_basis(dims: Iterable[int], theory: Theory = "entanglement") -> FlagBasis:
    """All products of computational vectors over `dims`, lexicographic order."""
    dims = tuple(int(x) for x in dims)
    total = math.prod(dims)
    eye = np.eye(total, dtype=complex)
    vectors = []
    for digits in product(*(range(x) for x in dims)):
        index = int(np.ravel_multi_index(digits, dims))
        vectors.append(PureState(eye[index], dims))
    return FlagBasis(tuple(vectors), theory)


def tensor_flag_basis(a: FlagBasis, b: FlagBasis) -> FlagBasis:
    """{|φ_i⟩ ⊗ |χ_j⟩}, i-major order."""
    if a.theory != b.theory:
        raise ArgumentError(f"Cannot combine {a.theory} and {b.theory} flag bases")
    vectors = tuple(
        PureState(np.kron(u.amplitudes, v.amplitudes), u.dims + v.dims)
        for u in a.vectors
        for v in b.vectors
    )
    return FlagBasis(vectors, a.theory)


def flag_dims_and_parties(states_dims: tuple[int, ...], parties: tuple[int, ...], basis: FlagBasis):
    """dims and party labels of a state with the flag register appended on the second party."""
    return states_dims + basis.dims, parties + (1,) * len(basis.dims)


def flagged_state(ens: Ensemble, basis: FlagBasis, limits: Limits | None = None) -> DensityMatrix:
    """
    Σ p_i ρ_i ⊗ |φ_i⟩⟨φ_i| with the flag register appended rightmost.

    The flag register joins the second party.

    Raises:
        ArgumentError: If lengths differ or the basis is invalid
        CapacityError: If the flagged dimension exceeds the cap
    """
    if len(basis) != len(ens):
        raise ArgumentError(f"Flag basis has {len(basis)} vectors for {len(ens)} ensemble members")
    _require_valid(basis)
    check_dim(ens.states[0].dim * basis.dim, limits)
    m = sum(p * np.kron(s.matrix, basis.projector(i)) for i, (p, s) in enumerate(zip(ens.weights, ens.states)))
    dims, parties = flag_dims_and_parties(ens.dims, ens.states[0].party_labels, basis)
    return _trusted(m, dims, parties)


def flag_measurement_channel(basis: FlagBasis, system_dims: tuple[int, ...]) -> KrausChannel:
    """
    Measurement of the flag register: Kraus operators I ⊗ |φ_i⟩⟨φ_i|.

    When the flags do not span the register, the complementary projector is
    added as a final Kraus operator.
    """
    _require_valid(basis)
    system_dims = tuple(system_dims)
    eye = np.eye(math.prod(system_dims))
    projectors = [basis.projector(i) for i in range(len(basis))]
    rest = np.eye(basis.dim) - sum(projectors)
    if np.max(np.abs(rest)) > ENTRY_TOL:
        projectors.append(rest)
    ops = tuple(np.kron(eye, p) for p in projectors)
    dims = system_dims + basis.dims
    return KrausChannel(ops, dims, dims)


def omega(rho: DensityMatrix, sigma: DensityMatrix, basis: FlagBasis, limits: Limits | None = None) -> DensityMatrix:
    """
    ½ρ⊗|φ₁⟩⟨φ₁| + ½σ⊗|φ₂⟩⟨φ₂|.

    Raises:
        ArgumentError: If the dims differ or the basis does not have two vectors
    """
    if rho.dims != sigma.dims:
        raise ArgumentError(f"omega needs states on the same space: {rho.dims} vs {sigma.dims}")
    if len(basis) != 2:
        raise ArgumentError(f"omega needs a two-element flag basis, got {len(basis)}")
    return flagged_state(Ensemble(np.array([0.5, 0.5]), (rho, sigma)), basis, limits)


def distinct_arrangements(multiplicities: Iterable[int]) -> list[tuple[int, ...]]:
    """All distinct orderings of a multiset of factor indices, lexicographic."""
    counts = [int(c) for c in multiplicities]
    if any(c < 0 for c in counts):
        raise ArgumentError(f"Multiplicities must be nonnegative, got {counts}")
    total = sum(counts)
    out: list[tuple[int, ...]] = []
    prefix: list[int] = []

    def extend() -> None:
        if len(prefix) == total:
            out.append(tuple(prefix))
            return
        for i, c in enumerate(counts):
            if c:
                counts[i] -= 1
                prefix.append(i)
                extend()
                prefix.pop()
                counts[i] += 1

    extend()
    return out


def symmetrized_tensor(
    factors: list[tuple[DensityMatrix | np.ndarray, int]],
    limits: Limits | None = None,
) -> np.ndarray:
    """
    Sum over all distinct arrangements of the factor multiset.

    Factors may be unnormalized matrices; zero-multiplicity factors are
    skipped. Terms are added in lexicographic arrangement order.

    Raises:
        CapacityError: If the total multiplicity or product dimension exceeds the caps
    """
    limits = limits or DEFAULT_LIMITS
    mats = [np.asarray(f.matrix if isinstance(f, DensityMatrix) else f, dtype=complex) for f, _ in factors]
    mults = [int(k) for _, k in factors]
    total = sum(mults)
    if total < 1:
        raise ArgumentError("symmetrized_tensor needs a total multiplicity >= 1")
    if total > limits.copy_cap:
        raise CapacityError(f"{total} copies exceed cap {limits.copy_cap}")
    check_dim(math.prod(mats[i].shape[0] ** k for i, k in enumerate(mults)), limits)
    result = None
    for arrangement in distinct_arrangements(mults):
        term = mats[arrangement[0]]
        for i in arrangement[1:]:
            term = np.kron(term, mats[i])
        result = term if result is None else result + term
    return result


@dataclass(frozen=True)
class TypicalWeights:
    """k-range and binomial masses of the typical part, without matrices."""

    k_range: tuple[int, int]
    weight_T: float
    epsilon: float
    N: int
    p1: float
    delta_typ: float

    def ks(self) -> range:
        return range(self.k_range[0], self.k_range[1] + 1)


def _floor(x: float) -> int:
    return math.floor(x + INTEGER_SNAP)


def _ceil(x: float) -> int:
    return math.ceil(x - INTEGER_SNAP)


def copy_bounds(p: float, N: int, delta_typ: float) -> tuple[int, int]:
    """(⌊Np(1−δ)⌋, ⌈Np(1+δ)⌉) clipped to [0, N]."""
    return max(0, _floor(N * p * (1.0 - delta_typ))), min(N, _ceil(N * p * (1.0 + delta_typ)))


def _check_typical_args(p1: float, N: int, delta_typ: float) -> None:
    if not 0.0 < p1 <= 0.5:
        raise ArgumentError(f"p1 must be in (0, 1/2], got {p1}")
    if N < 1:
        raise ArgumentError(f"N must be >= 1, got {N}")
    if delta_typ < 0:
        raise ArgumentError(f"delta_typ must be >= 0, got {delta_typ}")


def typical_weights(p1: float, N: int, delta_typ: float) -> TypicalWeights:
    """
    k-range, T = Σ_k C(N,k) p₁^k p₂^{N−k} and ε = 1 − T.

    Raises:
        ArgumentError: If p1 is outside (0, 1/2], N < 1 or delta_typ < 0
        DegenerateError: If the k-range is empty
    """
    _check_typical_args(p1, N, delta_typ)
    lo, hi = copy_bounds(p1, N, delta_typ)
    if lo > hi:
        raise DegenerateError(f"Empty typical range [{lo}, {hi}] for N={N}, p1={p1}, delta={delta_typ}")
    p2 = 1.0 - p1
    weight = sum(math.comb(N, k) * p1**k * p2 ** (N - k) for k in range(lo, hi + 1))
    return TypicalWeights((lo, hi), weight, max(0.0, 1.0 - weight), N, p1, delta_typ)


@dataclass(frozen=True, eq=False)
class TypicalDecomposition:
    """ρ^⊗N = (1 − ε)ρ_typ + ε ρ_atyp for a two-flag state."""

    rho_typ: DensityMatrix
    epsilon: float
    weight_T: float
    k_range: tuple[int, int]
    N: int
    delta_typ: float
    p1: float


def _flagged_branches(rho1: DensityMatrix, rho2: DensityMatrix, basis: FlagBasis) -> tuple[np.ndarray, np.ndarray]:
    if rho1.dims != rho2.dims:
        raise ArgumentError(f"Branch states must share dims: {rho1.dims} vs {rho2.dims}")
    if len(basis) != 2:
        raise ArgumentError(f"Typical decomposition needs a two-element flag basis, got {len(basis)}")
    _require_valid(basis)
    return np.kron(rho1.matrix, basis.projector(0)), np.kron(rho2.matrix, basis.projector(1))


def _power_layout(rho: DensityMatrix, basis: FlagBasis, N: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    dims, parties = flag_dims_and_parties(rho.dims, rho.party_labels, basis)
    return dims * N, parties * N


def _weighted_sum(
    branches: tuple[np.ndarray, np.ndarray],
    p1: float,
    N: int,
    ks: Iterable[int],
    limits: Limits | None,
) -> np.ndarray:
    p2 = 1.0 - p1
    total = None
    for k in ks:
        term = p1**k * p2 ** (N - k) * symmetrized_tensor([(branches[0], k), (branches[1], N - k)], limits)
        total = term if total is None else total + term
    return total


def two_flag_state(rho1: DensityMatrix, rho2: DensityMatrix, p1: float, basis: FlagBasis) -> DensityMatrix:
    """p₁ρ₁⊗|φ₁⟩⟨φ₁| + p₂ρ₂⊗|φ₂⟩⟨φ₂|."""
    return flagged_state(Ensemble(np.array([p1, 1.0 - p1]), (rho1, rho2)), basis)


def typical_decomposition(
    rho1: DensityMatrix,
    rho2: DensityMatrix,
    p1: float,
    basis: FlagBasis,
    N: int,
    delta_typ: float,
    limits: Limits | None = None,
) -> TypicalDecomposition:
    """
    Typical part of the N-fold two-flag state.

    ρ_typ = (1/T) Σ_{k∈k_range} p₁^k p₂^{N−k} S(ρ̃₁^{⊗k}, ρ̃₂^{⊗(N−k)}) with
    ρ̃_i = ρ_i ⊗ |φ_i⟩⟨φ_i| and T the binomial mass of the k-range.

    Raises:
        ArgumentError: On p1 outside (0, 1/2], mismatched dims or a bad basis
        DegenerateError: If the k-range is empty
        CapacityError: If the N-fold dimension exceeds the cap
    """
    weights = typical_weights(p1, N, delta_typ)
    branches = _flagged_branches(rho1, rho2, basis)
    check_dim(branches[0].shape[0] ** N, limits)
    m = _weighted_sum(branches, p1, N, weights.ks(), limits) / weights.weight_T
    dims, parties = _power_layout(rho1, basis, N)
    return TypicalDecomposition(
        rho_typ=_trusted(m, dims, parties),
        epsilon=weights.epsilon,
        weight_T=weights.weight_T,
        k_range=weights.k_range,
        N=N,
        delta_typ=delta_typ,
        p1=p1,
    )


def atypical_part(
    decomp: TypicalDecomposition,
    rho1: DensityMatrix,
    rho2: DensityMatrix,
    basis: FlagBasis,
    limits: Limits | None = None,
) -> DensityMatrix | None:
    """
    Normalized complement of the typical part, or None when ε <= 1e-12.

    Built from the k outside the typical range, which equals
    (ρ^⊗N − (1−ε)ρ_typ)/ε.
    """
    if decomp.epsilon <= 1e-12:
        return None
    lo, hi = decomp.k_range
    outside = [k for k in range(decomp.N + 1) if k < lo or k > hi]
    branches = _flagged_branches(rho1, rho2, basis)
    m = _weighted_sum(branches, decomp.p1, decomp.N, outside, limits)
    dims, parties = _power_layout(rho1, basis, decomp.N)
    return _trusted(m / np.trace(m).real, dims, parties)
