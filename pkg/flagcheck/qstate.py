"""Dense states over small Hilbert spaces: composition, reductions, spectra, norms, entropies."""

import math
from dataclasses import InitVar, dataclass
from functools import reduce
from typing import Iterable

import numpy as np

from .config import DEFAULT_LIMITS, Limits
from .errors import ArgumentError, CapacityError, InvariantError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
NORM_TOL = 1e-12
ENTROPY_CUTOFF = 1e-12


def check_dim(d: int, limits: Limits | None = None) -> None:
    """Raise CapacityError when a dense dimension exceeds the cap."""
    cap = (limits or DEFAULT_LIMITS).dim_cap
    if d > cap:
        raise CapacityError(f"Dimension {d} exceeds cap {cap}")


def rng_for(master_seed: int, index: int = 0) -> np.random.Generator:
    """Independent random stream for task `index` of a run seeded by `master_seed`."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _hermitian_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Hermitian, unit-trace, positive-semidefinite matrix with subsystem dims.

    `parties` optionally labels each subsystem with the party it belongs to
    (0 or 1) for bipartite entanglement measures. Without labels the first
    subsystem is party 0 and the rest are party 1.

    Construction checks shape, finiteness, Hermiticity and trace always; the
    spectral PSD check runs unless `validate=False` (used by operations that
    preserve positivity by construction).
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    parties: tuple[int, ...] | None = None
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        m = np.array(self.matrix, dtype=complex)
        dims = tuple(int(x) for x in self.dims)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantError(f"Density matrix must be square, got shape {m.shape}")
        if not dims or any(x < 1 for x in dims) or math.prod(dims) != m.shape[0]:
            raise InvariantError(f"dims {dims} do not multiply to {m.shape[0]}")
        if not np.all(np.isfinite(m)):
            raise InvariantError("Density matrix has non-finite entries")
        if _hermitian_residual(m) > HERMITIAN_TOL:
            raise InvariantError("Density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > TRACE_TOL:
            raise InvariantError(f"Trace {np.trace(m).real!r} is not 1")
        if validate:
            smallest = float(np.linalg.eigvalsh(m)[0])
            if smallest < -PSD_TOL:
                raise InvariantError(f"Smallest eigenvalue {smallest!r} below -{PSD_TOL}")
        parties = self.parties
        if parties is not None:
            parties = tuple(int(x) for x in parties)
            if len(parties) != len(dims) or any(x not in (0, 1) for x in parties):
                raise InvariantError(f"parties {parties} must label each of {len(dims)} subsystems with 0 or 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "parties", parties)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def party_labels(self) -> tuple[int, ...]:
        """Effective party label of every subsystem."""
        if self.parties is not None:
            return self.parties
        return (0,) + (1,) * (len(self.dims) - 1)

    def with_parties(self, parties: Iterable[int]) -> "DensityMatrix":
        """Same state with explicit party labels."""
        return DensityMatrix(self.matrix, self.dims, tuple(parties), validate=False)

    def allclose(self, other: "DensityMatrix", atol: float = 1e-12) -> bool:
        """Entrywise comparison of two states on the same space."""
        return self.dims == other.dims and bool(np.max(np.abs(self.matrix - other.matrix)) <= atol)


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector with subsystem dims."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        dims = tuple(int(x) for x in self.dims)
        if math.prod(dims) != v.shape[0]:
            raise InvariantError(f"dims {dims} do not multiply to {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise InvariantError("Amplitudes have non-finite entries")
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise InvariantError(f"Norm {np.linalg.norm(v)!r} is not 1")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self, parties: tuple[int, ...] | None = None) -> DensityMatrix:
        return DensityMatrix(self.projector(), self.dims, parties, validate=False)


def _trusted(matrix: np.ndarray, dims: tuple[int, ...], parties: tuple[int, ...] | None = None) -> DensityMatrix:
    """Wrap a matrix positive by construction; re-Hermitize and fix the trace drift."""
    m = 0.5 * (matrix + matrix.conj().T)
    tr = np.trace(m).real
    if abs(tr - 1.0) > 1e-9:
        raise InvariantError(f"Trace {tr!r} drifted from 1")
    return DensityMatrix(m / tr, dims, parties, validate=False)


def _tensor_parties(a: DensityMatrix, b: DensityMatrix) -> tuple[int, ...] | None:
    if a.parties is None and b.parties is None and len(a.dims) == 1 and len(b.dims) == 1:
        return None
    return a.party_labels + b.party_labels


def tensor(a: DensityMatrix, b: DensityMatrix, limits: Limits | None = None) -> DensityMatrix:
    """
    Kronecker product a ⊗ b.

    Party labels concatenate; two unlabelled single-subsystem factors stay
    unlabelled (so the default A:B split applies to the product).

    Raises:
        CapacityError: If the product dimension exceeds the cap
    """
    check_dim(a.dim * b.dim, limits)
    return DensityMatrix(
        np.kron(a.matrix, b.matrix),
        a.dims + b.dims,
        _tensor_parties(a, b),
        validate=False,
    )


def tensor_all(states: Iterable[DensityMatrix], limits: Limits | None = None) -> DensityMatrix:
    """Left-to-right tensor product of a nonempty sequence of states."""
    states = list(states)
    if not states:
        raise ArgumentError("tensor_all needs at least one state")
    check_dim(math.prod(s.dim for s in states), limits)
    return reduce(lambda x, y: tensor(x, y, limits), states)


def tensor_power(rho: DensityMatrix, n: int, limits: Limits | None = None) -> DensityMatrix:
    """ρ^⊗n for n >= 1."""
    if n < 1:
        raise ArgumentError(f"tensor power needs n >= 1, got {n}")
    return tensor_all([rho] * n, limits)


def _check_indices(indices: Iterable[int], n: int) -> list[int]:
    idx = sorted(set(int(i) for i in indices))
    if not idx:
        raise ArgumentError("Subsystem index set is empty")
    for i in idx:
        if i < 0 or i >= n:
            raise ArgumentError(f"Subsystem index {i} out of range for {n} subsystems")
    return idx


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """
    Reduced state on the kept subsystems (ascending order).

    Raises:
        ArgumentError: If keep is empty or has an invalid index
    """
    n = len(rho.dims)
    kept = _check_indices(keep, n)
    traced = [i for i in range(n) if i not in kept]
    dims = rho.dims
    dk = math.prod(dims[i] for i in kept)
    dt = math.prod(dims[i] for i in traced) if traced else 1
    t = rho.matrix.reshape(dims + dims)
    perm = kept + traced + [n + i for i in kept] + [n + i for i in traced]
    t = t.transpose(perm).reshape(dk, dt, dk, dt)
    reduced = np.einsum("ijkj->ik", t)
    labels = rho.party_labels
    parties = tuple(labels[i] for i in kept) if rho.parties is not None else None
    return _trusted(reduced, tuple(dims[i] for i in kept), parties)


def partial_transpose(rho: DensityMatrix, subsystem: int | Iterable[int]) -> np.ndarray:
    """
    Transpose the indices of the named subsystem(s) only.

    Raises:
        ArgumentError: If a subsystem index is invalid
    """
    n = len(rho.dims)
    targets = _check_indices([subsystem] if isinstance(subsystem, (int, np.integer)) else subsystem, n)
    t = rho.matrix.reshape(rho.dims + rho.dims)
    perm = list(range(2 * n))
    for i in targets:
        perm[i], perm[n + i] = perm[n + i], perm[i]
    return t.transpose(perm).reshape(rho.dim, rho.dim)


def permute_subsystems(rho: DensityMatrix, order: Iterable[int]) -> DensityMatrix:
    """Reorder tensor factors: new subsystem k is old subsystem order[k]."""
    order = [int(i) for i in order]
    n = len(rho.dims)
    if sorted(order) != list(range(n)):
        raise ArgumentError(f"{order} is not a permutation of {n} subsystems")
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = t.transpose(order + [n + i for i in order]).reshape(rho.dim, rho.dim)
    labels = rho.party_labels
    parties = tuple(labels[i] for i in order) if rho.parties is not None else None
    return DensityMatrix(t, tuple(rho.dims[i] for i in order), parties, validate=False)


def _require_hermitian(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ArgumentError(f"Expected a square matrix, got shape {h.shape}")
    if _hermitian_residual(h) > HERMITIAN_TOL:
        raise ArgumentError("Matrix is not Hermitian within 1e-12")
    return h


def jacobi_eigh(h: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigensolver for a complex Hermitian matrix.

    Each rotation is a phase fix of column q followed by the real symmetric
    Jacobi rotation, so U = diag(1, e^{-iφ}) R on the (p, q) plane. Sweeps
    stop when the off-diagonal Frobenius mass drops below `tol` (scaled by
    the matrix norm when that exceeds 1).

    Returns:
        (eigenvalues ascending, eigenvectors as columns)
    """
    a = np.array(_require_hermitian(h), dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float(np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2))))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r < 1e-300:
                    continue
                phase = apq / r
                tau = (a[q, q].real - a[p, p].real) / (2.0 * r)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                u = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                pq = [p, q]
                a[:, pq] = a[:, pq] @ u
                a[pq, :] = u.conj().T @ a[pq, :]
                a[p, q] = a[q, p] = 0.0
                v[:, pq] = v[:, pq] @ u
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigh(h: np.ndarray, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Args:
        h: Hermitian matrix (within 1e-12 entrywise)
        method: "lapack" (numpy) or "jacobi" (cyclic Jacobi)

    Returns:
        (eigenvalues descending, eigenvectors as matching columns)

    Raises:
        ArgumentError: If h is not Hermitian or method is unknown
    """
    h = _require_hermitian(h)
    if method == "lapack":
        w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    elif method == "jacobi":
        w, v = jacobi_eigh(h)
    else:
        raise ArgumentError(f"Unknown eigensolver: {method}")
    return w[::-1].copy(), v[:, ::-1].copy()


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values; sum of |eigenvalues| for Hermitian input."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError(f"trace_norm expects a square matrix, got {a.shape}")
    if _hermitian_residual(a) <= HERMITIAN_TOL:
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T)))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """½‖ρ − σ‖₁."""
    if rho.dim != sigma.dim:
        raise ArgumentError(f"Dimension mismatch: {rho.dim} vs {sigma.dim}")
    return 0.5 * trace_norm(rho.matrix - sigma.matrix)


def spectrum(rho: DensityMatrix) -> np.ndarray:
    """Eigenvalues, negatives within the PSD tolerance clipped to zero, descending."""
    w = np.linalg.eigvalsh(rho.matrix)[::-1]
    return np.where(w < ENTROPY_CUTOFF, 0.0, w)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """−Σ λ log₂ λ in bits, eigenvalues below 1e-12 treated as 0."""
    w = spectrum(rho)
    w = w[w > 0]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def purity(rho: DensityMatrix) -> float:
    """Tr ρ²."""
    return float(np.real(np.vdot(rho.matrix, rho.matrix)))


def dephase(rho: DensityMatrix) -> DensityMatrix:
    """Zero all off-diagonal entries (projection onto the incoherent set)."""
    return DensityMatrix(np.diag(np.diag(rho.matrix).real).astype(complex), rho.dims, rho.parties, validate=False)


def is_incoherent_state(rho: DensityMatrix, tol: float = 1e-12) -> bool:
    """True if every off-diagonal entry is below tol in magnitude."""
    off = rho.matrix - np.diag(np.diag(rho.matrix))
    return bool(np.max(np.abs(off)) <= tol) if off.size else True


def random_density(
    d: int,
    rank: int,
    rng: np.random.Generator,
    dims: tuple[int, ...] | None = None,
) -> DensityMatrix:
    """
    Random state GG†/Tr(GG†) with G a d×rank complex Ginibre matrix.

    Raises:
        ArgumentError: If rank is outside [1, d]
    """
    if rank < 1 or rank > d:
        raise ArgumentError(f"rank must be in [1, {d}], got {rank}")
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    return _trusted(m / np.trace(m).real, dims or (d,))


def random_pure(d: int, rng: np.random.Generator, dims: tuple[int, ...] | None = None) -> PureState:
    """Haar-random pure state."""
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(v / np.linalg.norm(v), dims or (d,))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_incoherent_state(d: int, rng: np.random.Generator) -> DensityMatrix:
    """Random diagonal state with Dirichlet-distributed populations."""
    return _trusted(np.diag(rng.dirichlet(np.ones(d))).astype(complex), (d,))


def random_product_state(dims: tuple[int, ...], rng: np.random.Generator) -> DensityMatrix:
    """Tensor product of independent random full-rank local states (default party split)."""
    m = tensor_all([random_density(d, d, rng) for d in dims]).matrix
    return DensityMatrix(m, tuple(dims), validate=False)


def random_separable_state(dims: tuple[int, ...], rng: np.random.Generator, terms: int = 4) -> DensityMatrix:
    """Convex mixture of `terms` random product states."""
    weights = rng.dirichlet(np.ones(terms))
    m = sum(w * random_product_state(dims, rng).matrix for w in weights)
    return _trusted(m, tuple(dims))


def basis_state(d: int, i: int, dims: tuple[int, ...] | None = None) -> DensityMatrix:
    """|i⟩⟨i| in dimension d."""
    if i < 0 or i >= d:
        raise ArgumentError(f"Basis index {i} out of range for dimension {d}")
    m = np.zeros((d, d), dtype=complex)
    m[i, i] = 1.0
    return DensityMatrix(m, dims or (d,), validate=False)


def maximally_mixed(d: int, dims: tuple[int, ...] | None = None) -> DensityMatrix:
    """I/d."""
    return DensityMatrix(np.eye(d, dtype=complex) / d, dims or (d,), validate=False)


def maximally_coherent_state(d: int) -> DensityMatrix:
    """|ψ_d⟩⟨ψ_d| with |ψ_d⟩ = Σ|i⟩/√d."""
    return DensityMatrix(np.full((d, d), 1.0 / d, dtype=complex), (d,), validate=False)


def plus_state() -> DensityMatrix:
    """|+⟩⟨+|."""
    return maximally_coherent_state(2)


def bell_state() -> DensityMatrix:
    """(|00⟩+|11⟩)/√2 on dims (2, 2)."""
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1.0 / math.sqrt(2.0)
    return PureState(v, (2, 2)).density()


def werner_state(p: float) -> DensityMatrix:
    """p|Φ+⟩⟨Φ+| + (1−p) I/4 on two qubits."""
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"Werner weight must be in [0, 1], got {p}")
    m = p * bell_state().matrix + (1.0 - p) * np.eye(4) / 4.0
    return DensityMatrix(m, (2, 2), validate=False)


def mix(weights: Iterable[float], states: Iterable[DensityMatrix]) -> DensityMatrix:
    """Σ p_i ρ_i for states on a common space."""
    weights = list(weights)
    states = list(states)
    if not states or len(weights) != len(states):
        raise ArgumentError("mix needs equal-length nonempty weights and states")
    dims = states[0].dims
    if any(s.dims != dims for s in states):
        raise ArgumentError("mix needs states with identical dims")
    m = sum(w * s.matrix for w, s in zip(weights, states))
    return _trusted(m, dims, states[0].parties)
