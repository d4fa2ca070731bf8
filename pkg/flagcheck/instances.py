"""Random instance generators per theory and the JSON-safe instance codec used for replay."""

import hashlib
import json
from typing import Any

import numpy as np

from .channels import Ensemble, KrausChannel, random_incoherent_channel, random_local_channel
from .errors import FormatError
from .flags import FlagBasis
from .formats import dumps_kraus, dumps_qstate, format_entry, loads_kraus, loads_qstate
from .qstate import (
    DensityMatrix,
    PureState,
    basis_state,
    random_density,
    random_incoherent_state,
    random_product_state,
    random_separable_state,
)
from .types import Theory


def state_dims(theory: Theory, d: int) -> tuple[int, ...]:
    """Coherence states live on one d-level system; entanglement states on d ⊗ d."""
    return (d,) if theory == "coherence" else (d, d)


def random_state(theory: Theory, d: int, rng: np.random.Generator) -> DensityMatrix:
    """Random state of random rank on the theory's space for local dimension d."""
    dims = state_dims(theory, d)
    total = int(np.prod(dims))
    rank = int(rng.integers(1, total + 1))
    return random_density(total, rank, rng, dims)


def random_free_state(theory: Theory, d: int, rng: np.random.Generator) -> DensityMatrix:
    if theory == "coherence":
        return random_incoherent_state(d, rng)
    return random_separable_state(state_dims(theory, d), rng)


def free_pure_state(theory: Theory, d: int) -> DensityMatrix:
    """|0⟩⟨0| (coherence) or |00⟩⟨00| (entanglement)."""
    dims = state_dims(theory, d)
    return basis_state(int(np.prod(dims)), 0, dims)


def random_ensemble(theory: Theory, d: int, size: int, rng: np.random.Generator) -> Ensemble:
    weights = rng.dirichlet(np.ones(size))
    return Ensemble(weights, tuple(random_state(theory, d, rng) for _ in range(size)))


def random_flag_basis(theory: Theory, n: int, rng: np.random.Generator) -> FlagBasis:
    """n computational flags in a random order with random phases, on an n-level register."""
    order = rng.permutation(n)
    phases = np.exp(2j * np.pi * rng.random(n))
    vectors = []
    for i in range(n):
        v = np.zeros(n, dtype=complex)
        v[order[i]] = phases[i]
        vectors.append(PureState(v, (n,)))
    return FlagBasis(tuple(vectors), theory)


def random_free_channel(theory: Theory, rho: DensityMatrix, n_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Random incoherent channel, or a random channel local to one party of rho."""
    if theory == "coherence":
        return random_incoherent_channel(rho.dim, n_kraus, rng)
    party = int(rng.integers(0, 2))
    return random_local_channel(rho.dims, rho.party_labels, party, n_kraus, rng)


# --- codec ----------------------------------------------------------------


def encode_basis(basis: FlagBasis) -> dict:
    return {
        "theory": basis.theory,
        "dims": list(basis.dims),
        "vectors": [[format_entry(complex(z)) for z in v.amplitudes] for v in basis.vectors],
    }


def decode_basis(data: dict) -> FlagBasis:
    dims = tuple(data["dims"])
    vectors = tuple(PureState(np.array([complex(z) for z in v]), dims) for v in data["vectors"])
    return FlagBasis(vectors, data["theory"])


def encode_ensemble(ens: Ensemble) -> dict:
    return {"weights": [float(w) for w in ens.weights], "states": [dumps_qstate(s) for s in ens.states]}


def decode_ensemble(data: dict) -> Ensemble:
    return Ensemble(np.array(data["weights"], dtype=float), tuple(loads_qstate(s) for s in data["states"]))


def encode_instance(parts: dict[str, Any]) -> dict:
    """
    JSON-safe form of a check instance.

    States become QSTATE text, channels KRAUS text, ensembles and bases
    nested dicts; numbers and strings pass through.
    """
    out = {}
    for key, value in parts.items():
        if isinstance(value, DensityMatrix):
            out[key] = {"qstate": dumps_qstate(value)}
        elif isinstance(value, KrausChannel):
            out[key] = {"kraus": dumps_kraus(value)}
        elif isinstance(value, Ensemble):
            out[key] = {"ensemble": encode_ensemble(value)}
        elif isinstance(value, FlagBasis):
            out[key] = {"basis": encode_basis(value)}
        elif isinstance(value, (bool, int, float, str)) or value is None:
            out[key] = value
        elif isinstance(value, np.integer):
            out[key] = int(value)
        elif isinstance(value, np.floating):
            out[key] = float(value)
        else:
            raise FormatError(f"Cannot encode instance part {key!r} of type {type(value).__name__}")
    return out


def decode_instance(data: dict) -> dict[str, Any]:
    """
    Inverse of encode_instance.

    Raises:
        FormatError: On malformed parts
    """
    out = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if "qstate" in value:
                out[key] = loads_qstate(value["qstate"])
            elif "kraus" in value:
                out[key] = loads_kraus(value["kraus"])
            elif "ensemble" in value:
                out[key] = decode_ensemble(value["ensemble"])
            elif "basis" in value:
                out[key] = decode_basis(value["basis"])
            else:
                raise FormatError(f"Unknown instance part {key!r}")
        else:
            out[key] = value
    return out


def instance_digest(encoded: dict) -> str:
    """Stable short fingerprint of an encoded instance."""
    payload = json.dumps(encoded, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
