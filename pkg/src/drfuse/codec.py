"""Bit-efficient wire format for reduced estimates.

A reduced estimate (y_M, R_M, M) with diagonal R_M and orthonormal rows in M
is fully determined by the scaled rows Phi = R_M M: the row norms give back
the diagonal of R_M and the mutual orthogonality of the rows makes part of
Phi redundant.  Row i (0-based) can omit i components, because the receiver
recovers them from the i linear equations  phi_j . phi_i = 0, j < i.  A rank-m
message in dimension n2 therefore carries

    m + sum_i (n2 - i)  =  m (2 n2 - m + 3) / 2

scalars instead of the n2 (n2 + 3) / 2 of a full estimate, at the price of
m (m - 1) / 2 small column indices on the wire.

Layout (little-endian): magic 0xDF, version 0x01, m (u8), n2 (u8), flags
(u8: bit0 = 8-bit column indices, set when n2 > 16; bit1 = oversize fallback,
no components dropped), dropped column indices (two 4-bit indices per byte,
zero-padded, unless bit0), then y_M and the kept components of Phi row-major,
all IEEE-754 binary32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import CorruptMessageError, FramingError, InputError
from .fusion import ReducedEstimate

MAGIC = 0xDF
VERSION = 0x01
_FLAG_WIDE_INDEX = 0x01
_FLAG_OVERSIZE = 0x02


@dataclass
class WireMessage:
    """A reduced estimate pressed into its transmitted pieces.

    phi_rows[i] holds the kept components of row i of Phi = R_M M in
    ascending column order; dropped[i] holds the omitted column indices of
    that row, also ascending.  An oversize message drops nothing.
    """

    m: int
    n2: int
    y_m: np.ndarray
    phi_rows: list[np.ndarray]
    dropped: tuple[tuple[int, ...], ...]
    oversize: bool = field(default=False)

    def scalar_count(self) -> int:
        """Number of float payload scalars (the mean plus kept components)."""
        return self.m + sum(len(r) for r in self.phi_rows)


@dataclass(frozen=True)
class CostReport:
    """Exact scalar/bit accounting for one (n2, m) operating point.

    ratio and extra_bits_ratio are exact rationals: scalars of a reduced
    message over a full one, and index-bit overhead over payload bits
    (4-bit indices against 32-bit floats).
    """

    n2: int
    m: int
    n_dr: int
    n_full: int
    n_dca: int
    ratio: Fraction
    extra_bits_ratio: Fraction


def cost_report(n2: int, m: int) -> CostReport:
    """Message-size accounting for rank-m messages in dimension n2."""
    if n2 < 1 or m < 1 or m > n2:
        raise InputError(f"need 1 <= m <= n2, got m={m}, n2={n2}")
    n_dr = m * (2 * n2 - m + 3) // 2
    n_full = n2 * (n2 + 3) // 2
    return CostReport(
        n2=n2,
        m=m,
        n_dr=n_dr,
        n_full=n_full,
        n_dca=2 * n2,
        ratio=Fraction(n_dr, n_full),
        extra_bits_ratio=Fraction(m - 1, 8 * (2 * n2 - m + 3)),
    )


def _check_encodable(est: ReducedEstimate) -> tuple[np.ndarray, np.ndarray]:
    """Wire contract: diagonal positive cov, orthonormal mapping rows."""
    cov = est.cov
    off = cov - np.diag(np.diag(cov))
    scale = np.abs(cov).max()
    if np.abs(off).max() > 1e-9 * scale:
        raise InputError("cov must be diagonal to encode")
    diag = np.diag(cov)
    if np.any(diag <= 0.0):
        raise InputError("cov diagonal must be positive")
    gram = est.mapping @ est.mapping.T
    if np.abs(gram - np.eye(est.m)).max() > 1e-9:
        raise InputError("mapping rows must be orthonormal to encode")
    if est.n > 255 or est.m > 255:
        raise InputError("wire format carries dimensions up to 255")
    return diag, est.mapping


def _greedy_drop(phi_prev: np.ndarray, n2: int, count: int, det_rtol: float):
    """Pick `count` columns to drop from the next row.

    Grows the set one column at a time, each step keeping the column that
    maximizes |det| of the leading square subsystem of the recovery matrix
    (rows = previously sent rows restricted to the chosen columns).  Returns
    the ascending index tuple, or None when the final system's determinant
    falls below det_rtol times the Hadamard bound of its rows.
    """
    chosen: list[int] = []
    for t in range(1, count + 1):
        best_c, best_det = -1, -1.0
        for c in range(n2):
            if c in chosen:
                continue
            sub = phi_prev[:t, chosen + [c]]
            det = abs(np.linalg.det(sub))
            if det > best_det:
                best_det, best_c = det, c
        chosen.append(best_c)
    cols = sorted(chosen)
    a = phi_prev[:count, cols]
    bound = float(np.prod(np.linalg.norm(a, axis=1)))
    if not np.isfinite(bound) or abs(np.linalg.det(a)) < det_rtol * bound:
        return None
    return tuple(cols)


_WIRE_ACCURACY = 1e-7  # reconstruction bound, relative to each quantity's own scale


def _oversize_message(est: ReducedEstimate, phi: np.ndarray) -> WireMessage:
    m, n2 = phi.shape
    return WireMessage(
        m=m, n2=n2, y_m=est.mean.copy(),
        phi_rows=[phi[i].copy() for i in range(m)],
        dropped=tuple(() for _ in range(m)), oversize=True,
    )


def _survives_quantization(est: ReducedEstimate, msg: WireMessage) -> bool:
    """Run the receiver's recovery on binary32-quantized rows.

    The dropped components exist only implicitly on the wire, so the sender
    checks that quantization noise pushed through the recovery solve still
    lands inside the advertised accuracy (mapping rows have unit scale).
    """
    trial = WireMessage(
        m=msg.m, n2=msg.n2, y_m=msg.y_m,
        phi_rows=[r.astype(np.float32).astype(float) for r in msg.phi_rows],
        dropped=msg.dropped, oversize=False,
    )
    try:
        back = decode(trial)
    except CorruptMessageError:
        return False
    diag = np.diag(est.cov)
    if np.abs(np.diag(back.cov) - diag).max() > _WIRE_ACCURACY * diag.max():
        return False
    return bool(np.abs(back.mapping - est.mapping).max() <= _WIRE_ACCURACY)


def encode(est: ReducedEstimate, det_rtol: float = 1e-8) -> WireMessage:
    """Press a reduced estimate into its wire pieces.

    Row i of Phi = R_M M omits i components, chosen per row by greedy
    column pivoting so the receiver's recovery system stays well conditioned.
    If any row admits no sufficiently conditioned index set, or the simulated
    receiver cannot rebuild the binary32-quantized rows to wire accuracy, the
    whole message falls back to dropping nothing and sets the oversize flag.
    """
    diag, mapping = _check_encodable(est)
    phi = diag[:, None] * mapping
    m, n2 = phi.shape
    dropped: list[tuple[int, ...]] = [()]
    for i in range(1, m):
        cols = _greedy_drop(phi, n2, i, det_rtol)
        if cols is None:
            return _oversize_message(est, phi)
        dropped.append(cols)
    rows = []
    for i in range(m):
        keep = np.setdiff1d(np.arange(n2), np.asarray(dropped[i], dtype=int))
        rows.append(phi[i, keep])
    msg = WireMessage(
        m=m, n2=n2, y_m=est.mean.copy(), phi_rows=rows,
        dropped=tuple(dropped), oversize=False,
    )
    if m > 1 and not _survives_quantization(est, msg):
        return _oversize_message(est, phi)
    return msg


def _validate_frame(msg: WireMessage) -> None:
    if msg.m < 1 or msg.n2 < msg.m:
        raise FramingError(f"bad dimensions m={msg.m}, n2={msg.n2}")
    if len(msg.phi_rows) != msg.m or len(msg.dropped) != msg.m:
        raise FramingError("row count disagrees with m")
    for i in range(msg.m):
        want = 0 if msg.oversize else i
        idx = msg.dropped[i]
        if len(idx) != want:
            raise FramingError(f"row {i} must drop {want} components, got {len(idx)}")
        if len(set(idx)) != len(idx) or any(not 0 <= c < msg.n2 for c in idx):
            raise FramingError(f"row {i} has invalid dropped indices {idx}")
        if len(msg.phi_rows[i]) != msg.n2 - len(idx):
            raise FramingError(f"row {i} kept-component count is wrong")


def decode(msg: WireMessage) -> ReducedEstimate:
    """Reconstruct (y_M, R_M, M) from the transmitted pieces.

    Dropped components of row i solve the orthogonality equations against
    rows 0..i-1; a singular recovery system means the message is corrupt.
    """
    _validate_frame(msg)
    m, n2 = msg.m, msg.n2
    phi = np.zeros((m, n2))
    for i in range(m):
        cols = np.asarray(msg.dropped[i], dtype=int)
        keep = np.setdiff1d(np.arange(n2), cols)
        phi[i, keep] = msg.phi_rows[i]
        if cols.size:
            a = phi[:i, cols]
            b = -phi[:i, keep] @ phi[i, keep]
            try:
                x = np.linalg.solve(a, b)
            except np.linalg.LinAlgError as exc:
                raise CorruptMessageError(f"row {i} recovery system is singular") from exc
            if not np.all(np.isfinite(x)):
                raise CorruptMessageError(f"row {i} recovery produced non-finite values")
            phi[i, cols] = x
    norms = np.linalg.norm(phi, axis=1)
    if np.any(norms <= 0.0):
        raise CorruptMessageError("a reconstructed row has zero norm")
    return ReducedEstimate(
        mean=np.asarray(msg.y_m, dtype=float).copy(),
        cov=np.diag(norms),
        mapping=phi / norms[:, None],
    )


def serialize(msg: WireMessage) -> bytes:
    """Byte layout described in the module docstring; floats are binary32."""
    _validate_frame(msg)
    if msg.n2 > 255 or msg.m > 255:
        raise InputError("wire format carries dimensions up to 255")
    wide = msg.n2 > 16
    flags = (_FLAG_WIDE_INDEX if wide else 0) | (_FLAG_OVERSIZE if msg.oversize else 0)
    out = bytearray([MAGIC, VERSION, msg.m, msg.n2, flags])
    idx = [c for row in msg.dropped for c in row]
    if wide:
        out.extend(idx)
    else:
        for j in range(0, len(idx), 2):
            hi = idx[j] << 4
            lo = idx[j + 1] if j + 1 < len(idx) else 0
            out.append(hi | lo)
    floats = list(np.asarray(msg.y_m, dtype=float))
    for row in msg.phi_rows:
        floats.extend(np.asarray(row, dtype=float))
    out.extend(struct.pack(f"<{len(floats)}f", *floats))
    return bytes(out)


def deserialize(data: bytes) -> WireMessage:
    """Parse bytes back into a WireMessage; any length mismatch is a framing error."""
    if len(data) < 5:
        raise FramingError("message shorter than its header")
    magic, version, m, n2, flags = data[0], data[1], data[2], data[3], data[4]
    if magic != MAGIC:
        raise FramingError(f"bad magic byte 0x{magic:02x}")
    if version != VERSION:
        raise FramingError(f"unsupported version {version}")
    if m < 1 or n2 < m:
        raise FramingError(f"bad dimensions m={m}, n2={n2}")
    wide = bool(flags & _FLAG_WIDE_INDEX)
    oversize = bool(flags & _FLAG_OVERSIZE)
    if flags & ~(_FLAG_WIDE_INDEX | _FLAG_OVERSIZE):
        raise FramingError(f"unknown flag bits 0x{flags:02x}")
    if wide != (n2 > 16):
        raise FramingError("index-width flag disagrees with n2")
    n_idx = 0 if oversize else m * (m - 1) // 2
    pos = 5
    idx: list[int] = []
    if wide:
        if len(data) < pos + n_idx:
            raise FramingError("truncated index section")
        idx = list(data[pos : pos + n_idx])
        pos += n_idx
    else:
        nbytes = (n_idx + 1) // 2
        if len(data) < pos + nbytes:
            raise FramingError("truncated index section")
        for j in range(n_idx):
            byte = data[pos + j // 2]
            idx.append((byte >> 4) if j % 2 == 0 else (byte & 0x0F))
        if n_idx % 2 == 1 and (data[pos + nbytes - 1] & 0x0F) != 0:
            raise FramingError("nonzero padding nibble")
        pos += nbytes
    dropped: list[tuple[int, ...]] = []
    at = 0
    for i in range(m):
        take = 0 if oversize else i
        dropped.append(tuple(idx[at : at + take]))
        at += take
    counts = [n2 - len(d) for d in dropped]
    n_floats = m + sum(counts)
    if len(data) != pos + 4 * n_floats:
        raise FramingError(
            f"payload length mismatch: expected {pos + 4 * n_floats} bytes, got {len(data)}"
        )
    vals = struct.unpack(f"<{n_floats}f", data[pos:])
    y_m = np.asarray(vals[:m], dtype=float)
    rows = []
    at = m
    for c in counts:
        rows.append(np.asarray(vals[at : at + c], dtype=float))
        at += c
    msg = WireMessage(
        m=m, n2=n2, y_m=y_m, phi_rows=rows, dropped=tuple(dropped), oversize=oversize
    )
    _validate_frame(msg)
    return msg
