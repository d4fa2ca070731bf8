"""Kraus channels, freeness predicates, selective application and random free channels."""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Literal

import numpy as np

from .errors import ArgumentError, InvariantError
from .qstate import DensityMatrix, _trusted, check_dim
from .types import Theory

if TYPE_CHECKING:
    from .flags import FlagBasis

logger = logging.getLogger(__name__)

TP_TOL = 1e-10
ENTRY_TOL = 1e-12
DROP_PROBABILITY = 1e-14
WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Channel Λ(ρ) = Σ K_n ρ K_n† given by trace-preserving Kraus operators."""

    kraus_ops: tuple[np.ndarray, ...]
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]

    def __post_init__(self):
        in_dims = tuple(int(x) for x in self.in_dims)
        out_dims = tuple(int(x) for x in self.out_dims)
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise InvariantError("A channel needs at least one Kraus operator")
        shape = (math.prod(out_dims), math.prod(in_dims))
        for k in ops:
            if k.shape != shape:
                raise InvariantError(f"Kraus operator shape {k.shape} != {shape}")
            if not np.all(np.isfinite(k)):
                raise InvariantError("Kraus operator has non-finite entries")
            k.setflags(write=False)
        residual = _tp_residual(ops)
        if residual > TP_TOL:
            raise InvariantError(f"Not trace preserving: max |Σ K†K − I| = {residual!r}")
        object.__setattr__(self, "kraus_ops", ops)
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)

    @property
    def n_kraus(self) -> int:
        return len(self.kraus_ops)

    @property
    def in_dim(self) -> int:
        return math.prod(self.in_dims)

    @property
    def out_dim(self) -> int:
        return math.prod(self.out_dims)


def _tp_residual(ops: Iterable[np.ndarray]) -> float:
    ops = list(ops)
    total = sum(k.conj().T @ k for k in ops)
    return float(np.max(np.abs(total - np.eye(total.shape[0]))))


def is_trace_preserving(ch: KrausChannel, tol: float = TP_TOL) -> bool:
    return _tp_residual(ch.kraus_ops) <= tol


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Probability-weighted states {p_i, ρ_i} on a common space."""

    weights: np.ndarray
    states: tuple[DensityMatrix, ...]
    renormalization_residual: float = field(default=0.0)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        states = tuple(self.states)
        if len(states) == 0 or len(w) != len(states):
            raise InvariantError(f"Ensemble needs equal-length nonempty weights and states ({len(w)} vs {len(states)})")
        if np.any(w < 0):
            raise InvariantError("Ensemble weights must be nonnegative")
        if abs(float(np.sum(w)) - 1.0) > WEIGHT_TOL:
            raise InvariantError(f"Ensemble weights sum to {float(np.sum(w))!r}")
        dims = states[0].dims
        if any(s.dims != dims for s in states):
            raise InvariantError("Ensemble states must share identical dims")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.states[0].dims

    def average(self) -> DensityMatrix:
        """Σ p_i ρ_i."""
        m = sum(p * s.matrix for p, s in zip(self.weights, self.states))
        return _trusted(m, self.dims, self.states[0].parties)


def _output_parties(ch: KrausChannel, rho: DensityMatrix) -> tuple[int, ...] | None:
    # Registers appended after the input subsystems join the second party
    if ch.out_dims == rho.dims:
        return rho.parties
    if ch.out_dims[: len(rho.dims)] == rho.dims:
        return rho.party_labels + (1,) * (len(ch.out_dims) - len(rho.dims))
    return None


def _check_input(ch: KrausChannel, rho: DensityMatrix) -> None:
    if rho.dim != ch.in_dim:
        raise ArgumentError(f"Channel input dimension {ch.in_dim} != state dimension {rho.dim}")


def apply(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """
    Σ K ρ K†.

    Raises:
        ArgumentError: On dimension mismatch
    """
    _check_input(ch, rho)
    out = sum(k @ rho.matrix @ k.conj().T for k in ch.kraus_ops)
    return _trusted(out, ch.out_dims, _output_parties(ch, rho))


def selective_apply(ch: KrausChannel, rho: DensityMatrix) -> Ensemble:
    """
    Post-selected outcomes {p_i, K_i ρ K_i†/p_i}.

    Outcomes with p_i < 1e-14 are dropped and the remaining weights
    renormalized; the dropped mass is kept as `renormalization_residual`.

    Raises:
        ArgumentError: On dimension mismatch
    """
    _check_input(ch, rho)
    parties = _output_parties(ch, rho)
    weights, states = [], []
    for k in ch.kraus_ops:
        branch = k @ rho.matrix @ k.conj().T
        p = float(np.trace(branch).real)
        if p < DROP_PROBABILITY:
            continue
        weights.append(p)
        states.append(_trusted(branch / p, ch.out_dims, parties))
    total = float(sum(weights))
    residual = abs(1.0 - total)
    if residual > 1e-9:
        logger.warning("selective_apply: dropped outcomes carry mass %.3e", residual)
    return Ensemble(np.array(weights) / total, tuple(states), renormalization_residual=residual)


def is_incoherent(ch: KrausChannel, tol: float = ENTRY_TOL) -> bool:
    """True iff every Kraus operator has at most one entry above tol per column."""
    for k in ch.kraus_ops:
        if np.any(np.sum(np.abs(k) > tol, axis=0) > 1):
            return False
    return True


def embed_operator(op: np.ndarray, dims: tuple[int, ...], targets: Iterable[int]) -> np.ndarray:
    """
    Operator acting as `op` on the target subsystems (in the given order) and
    as identity on the rest. `op` must be square on the targets' joint space.
    """
    dims = tuple(dims)
    targets = [int(t) for t in targets]
    n = len(dims)
    if sorted(set(targets)) != sorted(targets) or any(t < 0 or t >= n for t in targets):
        raise ArgumentError(f"Invalid target subsystems {targets} for dims {dims}")
    rest = [i for i in range(n) if i not in targets]
    dt = math.prod(dims[i] for i in targets)
    if op.shape != (dt, dt):
        raise ArgumentError(f"Operator shape {op.shape} does not match target dimension {dt}")
    dr = math.prod(dims[i] for i in rest) if rest else 1
    full = np.kron(op, np.eye(dr))
    order = targets + rest
    shape = tuple(dims[i] for i in order)
    t = full.reshape(shape + shape)
    inverse = [order.index(i) for i in range(n)]
    t = t.transpose(inverse + [n + i for i in inverse])
    d = math.prod(dims)
    return t.reshape(d, d)


def is_one_local(ch: KrausChannel, parties: Iterable[int]) -> bool:
    """
    True iff every Kraus operator acts on the subsystems of a single party.

    `parties` labels each input subsystem with 0 or 1. Channels that change
    dimensions are not recognized as local.
    """
    labels = tuple(parties)
    dims = ch.in_dims
    if ch.out_dims != dims or len(labels) != len(dims):
        return False
    for party in (0, 1):
        own = [i for i, p in enumerate(labels) if p == party]
        other = [i for i, p in enumerate(labels) if p != party]
        if not own:
            continue
        dp = math.prod(dims[i] for i in own)
        dq = math.prod(dims[i] for i in other) if other else 1
        n = len(dims)
        order = own + other
        local = True
        for k in ch.kraus_ops:
            t = k.reshape(dims + dims).transpose(order + [n + i for i in order]).reshape(dp, dq, dp, dq)
            block = t[:, 0, :, 0]
            if np.max(np.abs(t - np.einsum("ac,bd->abcd", block, np.eye(dq)))) > ENTRY_TOL:
                local = False
                break
        if local:
            return True
    return False


def is_free(ch: KrausChannel, theory: Theory, parties: Iterable[int] | None = None) -> bool:
    """Freeness predicate of the theory: incoherent, or 1-local across the party split."""
    if theory == "coherence":
        return is_incoherent(ch)
    if parties is None:
        parties = (0,) + (1,) * (len(ch.in_dims) - 1)
    return is_one_local(ch, parties)


def identity_channel(dims: int | tuple[int, ...]) -> KrausChannel:
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    return KrausChannel((np.eye(math.prod(dims)),), dims, dims)


def dephasing_channel(d: int) -> KrausChannel:
    """Complete dephasing: Kraus operators |i⟩⟨i|."""
    ops = []
    for i in range(d):
        k = np.zeros((d, d), dtype=complex)
        k[i, i] = 1.0
        ops.append(k)
    return KrausChannel(tuple(ops), (d,), (d,))


def unitary_channel(u: np.ndarray, dims: int | tuple[int, ...] | None = None) -> KrausChannel:
    u = np.asarray(u, dtype=complex)
    dims = (u.shape[0],) if dims is None else ((dims,) if isinstance(dims, int) else tuple(dims))
    return KrausChannel((u,), dims, dims)


def projective_measurement(vectors: Iterable[np.ndarray], dims: tuple[int, ...]) -> KrausChannel:
    """Kraus operators |v_i⟩⟨v_i| of an orthonormal basis."""
    ops = tuple(np.outer(v, np.conj(v)) for v in vectors)
    return KrausChannel(ops, dims, dims)


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """second ∘ first, Kraus operators B_m A_n."""
    if second.in_dim != first.out_dim:
        raise ArgumentError(f"Cannot compose: {first.out_dim} -> {second.in_dim}")
    ops = tuple(b @ a for b in second.kraus_ops for a in first.kraus_ops)
    return KrausChannel(ops, first.in_dims, second.out_dims)


def random_incoherent_channel(d: int, n_kraus: int, rng: np.random.Generator, max_tries: int = 20) -> KrausChannel:
    """
    Random incoherent channel on dimension d with n_kraus operators.

    Column j of K_n holds the single entry a_{nj} at row r_n(j), with
    a_{·j} a random complex unit vector and r_n(j) uniform over rows. When
    two columns share a row inside some K_n, a_{·j} is projected orthogonal
    to the earlier column's colliding amplitudes so that Σ K†K = I stays
    exact; targets are resampled when that leaves no room, and after
    `max_tries` the column falls back to rows unused in each K_n.

    Raises:
        ArgumentError: If n_kraus < 1 or d < 1
    """
    if n_kraus < 1 or d < 1:
        raise ArgumentError(f"Need d >= 1 and n_kraus >= 1, got d={d}, n_kraus={n_kraus}")
    rows = np.zeros((n_kraus, d), dtype=int)
    amps = np.zeros((n_kraus, d), dtype=complex)
    for j in range(d):
        for attempt in range(max_tries + 1):
            if attempt < max_tries:
                targets = rng.integers(0, d, size=n_kraus)
            else:
                targets = np.array([
                    rng.choice([r for r in range(d) if r not in set(rows[n, :j])]) for n in range(n_kraus)
                ])
            constraints = []
            for jp in range(j):
                mask = targets == rows[:, jp]
                if np.any(mask):
                    constraints.append(np.where(mask, amps[:, jp], 0.0))
            g = rng.standard_normal(n_kraus) + 1j * rng.standard_normal(n_kraus)
            if constraints:
                basis, _ = np.linalg.qr(np.array(constraints).T)
                g = g - basis @ (basis.conj().T @ g)
            norm = np.linalg.norm(g)
            if norm > 1e-8:
                rows[:, j] = targets
                amps[:, j] = g / norm
                break
    return incoherent_channel(rows, amps)


def incoherent_channel(rows: np.ndarray, amps: np.ndarray) -> KrausChannel:
    """
    Channel with (K_n)_{rows[n, j], j} = amps[n, j] and zeros elsewhere.

    Raises:
        InvariantError: If the columns do not make the channel trace preserving
    """
    rows = np.asarray(rows, dtype=int)
    amps = np.asarray(amps, dtype=complex)
    n_kraus, d = amps.shape
    ops = []
    for n in range(n_kraus):
        k = np.zeros((d, d), dtype=complex)
        k[rows[n], np.arange(d)] = amps[n]
        ops.append(k)
    return KrausChannel(tuple(ops), (d,), (d,))


def trace_preserving_amplitudes(rows: np.ndarray, amps: np.ndarray) -> np.ndarray:
    """
    Column-by-column projection that makes incoherent_channel(rows, out) trace preserving.

    Each column is projected orthogonal to the colliding amplitudes of the
    earlier columns (those sharing a row inside some K_n) and normalized.

    Raises:
        ArgumentError: If a column has no room left after the projection
    """
    rows = np.asarray(rows, dtype=int)
    out = np.zeros(np.shape(amps), dtype=complex)
    for j in range(out.shape[1]):
        g = np.asarray(amps, dtype=complex)[:, j]
        constraints = [np.where(rows[:, jp] == rows[:, j], out[:, jp], 0.0) for jp in range(j)]
        constraints = [c for c in constraints if np.any(c)]
        if constraints:
            basis, _ = np.linalg.qr(np.array(constraints).T)
            g = g - basis @ (basis.conj().T @ g)
        norm = np.linalg.norm(g)
        if norm < 1e-12:
            raise ArgumentError(f"Degenerate channel column {j}")
        out[:, j] = g / norm
    return out


def random_local_channel(
    dims: tuple[int, ...],
    parties: Iterable[int],
    party: int,
    n_kraus: int,
    rng: np.random.Generator,
) -> KrausChannel:
    """
    Random channel acting only on the subsystems of one party.

    Kraus operators are blocks of a random Stinespring isometry on that
    party's joint space, embedded with identity on the other party.
    """
    dp = party_dim(dims, parties, party)
    check_dim(dp * n_kraus)
    z = rng.standard_normal((dp * n_kraus, dp)) + 1j * rng.standard_normal((dp * n_kraus, dp))
    return local_channel(z, dims, parties, party)


def party_dim(dims: tuple[int, ...], parties: Iterable[int], party: int) -> int:
    """Joint dimension of the subsystems labelled `party`."""
    targets = [i for i, p in enumerate(parties) if p == party]
    if not targets:
        raise ArgumentError(f"No subsystem belongs to party {party}")
    return math.prod(dims[i] for i in targets)


def local_channel(factor: np.ndarray, dims: tuple[int, ...], parties: Iterable[int], party: int) -> KrausChannel:
    """
    Local channel from a (d_p·n, d_p) complex factor.

    The factor is orthonormalized into a Stinespring isometry whose d_p-row
    blocks become the Kraus operators on `party`'s subsystems.
    """
    labels = tuple(parties)
    targets = [i for i, p in enumerate(labels) if p == party]
    dp = party_dim(dims, labels, party)
    factor = np.asarray(factor, dtype=complex)
    if factor.shape[1] != dp or factor.shape[0] % dp:
        raise ArgumentError(f"Factor shape {factor.shape} does not fit party dimension {dp}")
    v, _ = np.linalg.qr(factor)
    n_kraus = factor.shape[0] // dp
    ops = tuple(embed_operator(v[n * dp:(n + 1) * dp, :], dims, targets) for n in range(n_kraus))
    return KrausChannel(ops, tuple(dims), tuple(dims))


def embed_local(
    ch: KrausChannel,
    other_dim: int | tuple[int, ...],
    side: Literal["left", "right"] = "right",
) -> KrausChannel:
    """
    Extend a channel by identity on another system.

    `side` names where the other system sits: "right" gives K ⊗ I,
    "left" gives I ⊗ K.
    """
    other = (other_dim,) if isinstance(other_dim, int) else tuple(other_dim)
    eye = np.eye(math.prod(other))
    if side == "right":
        ops = tuple(np.kron(k, eye) for k in ch.kraus_ops)
        return KrausChannel(ops, ch.in_dims + other, ch.out_dims + other)
    if side == "left":
        ops = tuple(np.kron(eye, k) for k in ch.kraus_ops)
        return KrausChannel(ops, other + ch.in_dims, other + ch.out_dims)
    raise ArgumentError(f"side must be 'left' or 'right', got {side!r}")


def flagged_channel(ch: KrausChannel, basis: "FlagBasis") -> KrausChannel:
    """
    Λ̃(ρ) = Σ K_n ρ K_n† ⊗ |φ_n⟩⟨φ_n|, Kraus operators K_n ⊗ |φ_n⟩.

    Raises:
        ArgumentError: If the basis length differs from the Kraus count
    """
    if len(basis.vectors) != ch.n_kraus:
        raise ArgumentError(f"Flag basis has {len(basis.vectors)} vectors for {ch.n_kraus} Kraus operators")
    ops = tuple(np.kron(k, v.amplitudes.reshape(-1, 1)) for k, v in zip(ch.kraus_ops, basis.vectors))
    return KrausChannel(ops, ch.in_dims, ch.out_dims + basis.dims)
