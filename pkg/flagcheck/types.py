"""Shared type aliases for the flagcheck toolkit."""

from typing import Literal

Theory = Literal["coherence", "entanglement"]

Verdict = Literal["holds", "violated", "inconclusive"]

PROPERTIES: tuple[str, ...] = (
    "flag_additivity",
    "flag_sup",
    "flag_sub",
    "strong_mono",
    "convexity",
    "two_copy",
    "n_copy",
    "full_additivity",
    "omega_identity",
    "sandwich",
    "free_padding",
    "monotonicity",
    "faithfulness",
)

MEASURE_IDS: tuple[str, ...] = ("c_l1", "c_rel_ent", "c_tr", "negativity", "eof_2q")
