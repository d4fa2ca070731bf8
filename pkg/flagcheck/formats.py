"""QSTATE v1 and KRAUS v1 text formats for states and channels."""

import math
import os

import numpy as np

from .channels import KrausChannel
from .errors import FlagCheckError, FormatError
from .qstate import DensityMatrix

QSTATE_VERSION = "1"
KRAUS_VERSION = "1"


def format_entry(z: complex) -> str:
    """`<re><sign><im>j` with 17 significant digits."""
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_matrix(m: np.ndarray) -> str:
    return "\n".join(" ".join(format_entry(complex(z)) for z in row) for row in m)


def parse_matrix_block(lines: list[str], rows: int, cols: int) -> np.ndarray:
    """
    Parse `rows` lines of `cols` whitespace-separated complex entries.

    Raises:
        FormatError: On wrong row/column counts or unparsable entries
    """
    if len(lines) != rows:
        raise FormatError(f"Expected {rows} matrix rows, got {len(lines)}")
    out = np.empty((rows, cols), dtype=complex)
    for i, line in enumerate(lines):
        tokens = line.split()
        if len(tokens) != cols:
            raise FormatError(f"Row {i}: expected {cols} entries, got {len(tokens)}")
        for j, tok in enumerate(tokens):
            try:
                out[i, j] = complex(tok)
            except ValueError:
                raise FormatError(f"Row {i}: bad complex entry {tok!r}")
    return out


def _parse_header(line: str, magic: str, version: str) -> dict[str, str]:
    tokens = line.split()
    if len(tokens) < 2 or tokens[0] != magic:
        raise FormatError(f"Expected '{magic} {version} ...' header, got {line!r}")
    if tokens[1] != version:
        raise FormatError(f"Unsupported {magic} version {tokens[1]!r}")
    fields = {}
    for tok in tokens[2:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise FormatError(f"Malformed header field {tok!r}")
        fields[key] = value
    return fields


def _int_field(fields: dict[str, str], key: str) -> int:
    try:
        return int(fields[key])
    except KeyError:
        raise FormatError(f"Header is missing '{key}='")
    except ValueError:
        raise FormatError(f"Header field {key}={fields[key]!r} is not an integer")


def _dims_field(fields: dict[str, str], key: str, default: tuple[int, ...]) -> tuple[int, ...]:
    if key not in fields:
        return default
    try:
        return tuple(int(x) for x in fields[key].split(","))
    except ValueError:
        raise FormatError(f"Header field {key}={fields[key]!r} is not an integer list")


def _join(values: tuple[int, ...]) -> str:
    return ",".join(str(v) for v in values)


def dumps_qstate(rho: DensityMatrix) -> str:
    """Serialize a state as QSTATE v1 text."""
    header = f"qstate {QSTATE_VERSION} dim={rho.dim} dims={_join(rho.dims)}"
    if rho.parties is not None:
        header += f" parties={_join(rho.parties)}"
    return header + "\n" + format_matrix(rho.matrix) + "\n"


def loads_qstate(text: str) -> DensityMatrix:
    """
    Parse QSTATE v1 text into a validated DensityMatrix.

    Raises:
        FormatError: On syntax errors or states violating the DensityMatrix invariants
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("Empty QSTATE text")
    fields = _parse_header(lines[0], "qstate", QSTATE_VERSION)
    d = _int_field(fields, "dim")
    dims = _dims_field(fields, "dims", (d,))
    parties = _dims_field(fields, "parties", ()) or None
    m = parse_matrix_block(lines[1:], d, d)
    try:
        return DensityMatrix(m, dims, parties)
    except FlagCheckError as e:
        raise FormatError(f"Invalid state: {e}")


def dumps_kraus(ch: KrausChannel) -> str:
    """Serialize a channel as KRAUS v1 text, operators separated by blank lines."""
    header = (
        f"kraus {KRAUS_VERSION} n={ch.n_kraus} in={ch.in_dim} out={ch.out_dim}"
        f" in_dims={_join(ch.in_dims)} out_dims={_join(ch.out_dims)}"
    )
    blocks = [format_matrix(k) for k in ch.kraus_ops]
    return header + "\n" + "\n\n".join(blocks) + "\n"


def loads_kraus(text: str) -> KrausChannel:
    """
    Parse KRAUS v1 text into a validated KrausChannel.

    Raises:
        FormatError: On syntax errors, wrong operator count, or a channel
            that is not trace preserving
    """
    raw = text.strip("\n").split("\n")
    if not raw or not raw[0].strip():
        raise FormatError("Empty KRAUS text")
    fields = _parse_header(raw[0], "kraus", KRAUS_VERSION)
    n = _int_field(fields, "n")
    d_in = _int_field(fields, "in")
    d_out = _int_field(fields, "out")
    in_dims = _dims_field(fields, "in_dims", (d_in,))
    out_dims = _dims_field(fields, "out_dims", (d_out,))
    if math.prod(in_dims) != d_in or math.prod(out_dims) != d_out:
        raise FormatError("Subsystem dims do not match in/out dimensions")

    blocks: list[list[str]] = []
    current: list[str] = []
    for line in raw[1:]:
        if line.strip():
            current.append(line)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    if len(blocks) != n:
        raise FormatError(f"Header declares {n} operators, found {len(blocks)}")

    ops = tuple(parse_matrix_block(b, d_out, d_in) for b in blocks)
    try:
        return KrausChannel(ops, in_dims, out_dims)
    except FlagCheckError as e:
        raise FormatError(f"Invalid channel: {e}")


def _atomic_write(path: str, text: str) -> None:
    tmp_path = path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp_path, path)


def write_qstate(path: str, rho: DensityMatrix) -> None:
    _atomic_write(path, dumps_qstate(rho))


def read_qstate(path: str) -> DensityMatrix:
    with open(path, encoding="utf-8") as f:
        return loads_qstate(f.read())


def write_kraus(path: str, ch: KrausChannel) -> None:
    _atomic_write(path, dumps_kraus(ch))


def read_kraus(path: str) -> KrausChannel:
    with open(path, encoding="utf-8") as f:
        return loads_kraus(f.read())
