"""Gate-level circuits: the Gray-code oracle with threshold compression,
FABLE / S-FABLE assembly, gate counting and OpenQASM-style text.

Qubit layout for an ``n``-qubit matrix (width ``2n + 1``):

* qubit 0 -- rotation ancilla,
* qubits ``1..n`` -- row register (ancilla register of the block encoding),
* qubits ``n+1..2n`` -- column register (the data register).

Gray transition bit ``b`` is controlled by qubit ``2n - b``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from . import kernels
from .angles import AngleSet
from .linalg import gray_rank


class GateKind(IntEnum):
    RY = kernels.RY
    CNOT = kernels.CNOT
    H = kernels.H
    SWAP = kernels.SWAP


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    target: int
    control: int | None = None
    partner: int | None = None
    angle: float = 0.0

    def __post_init__(self):
        if self.kind == GateKind.CNOT and (self.control is None or self.control == self.target):
            raise ValueError("CNOT needs a control distinct from its target")
        if self.kind == GateKind.SWAP and (self.partner is None or self.partner == self.target):
            raise ValueError("SWAP needs a partner distinct from its target")


@dataclass(frozen=True)
class CircuitMeta:
    method: str | None = None
    delta: float | None = None
    alpha: float | None = None


class Circuit:
    """Immutable ordered gate list, stored as parallel numpy arrays.

    ``q0`` holds the target (first qubit for SWAP); ``q1`` the control, the
    SWAP partner, or -1.
    """

    __slots__ = ("width", "kind", "q0", "q1", "angle", "meta")

    def __init__(self, width, kind=(), q0=(), q1=(), angle=(), meta=None):
        kind = np.asarray(kind, dtype=np.int8)
        q0 = np.asarray(q0, dtype=np.int32)
        q1 = np.asarray(q1, dtype=np.int32)
        angle = np.asarray(angle, dtype=np.float64)
        if not (kind.shape == q0.shape == q1.shape == angle.shape):
            raise ValueError("gate arrays must have equal length")
        if kind.size:
            two = (kind == GateKind.CNOT) | (kind == GateKind.SWAP)
            if q0.min() < 0 or q0.max() >= width or np.any(q1[two] < 0) or q1.max() >= width:
                raise ValueError(f"qubit index out of range for width {width}")
            if np.any(q1[two] == q0[two]):
                raise ValueError("two-qubit gate acts twice on the same qubit")
        for arr in (kind, q0, q1, angle):
            arr.setflags(write=False)
        object.__setattr__(self, "width", int(width))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "angle", angle)
        object.__setattr__(self, "meta", meta or CircuitMeta())

    def __setattr__(self, name, value):
        raise AttributeError("Circuit is immutable")

    def __len__(self):
        return int(self.kind.size)

    def __iter__(self):
        for k, a, b, t in zip(self.kind.tolist(), self.q0.tolist(), self.q1.tolist(), self.angle.tolist()):
            kind = GateKind(k)
            if kind == GateKind.CNOT:
                yield Gate(kind, a, control=b)
            elif kind == GateKind.SWAP:
                yield Gate(kind, a, partner=b)
            else:
                yield Gate(kind, a, angle=t)

    @property
    def gates(self) -> list[Gate]:
        return list(self)

    @classmethod
    def from_gates(cls, width, gates, meta=None) -> Circuit:
        rows = []
        for g in gates:
            other = g.control if g.kind == GateKind.CNOT else g.partner if g.kind == GateKind.SWAP else -1
            rows.append((int(g.kind), g.target, other, g.angle))
        if not rows:
            return cls(width, meta=meta)
        kind, q0, q1, angle = zip(*rows)
        return cls(width, kind, q0, q1, angle, meta)

    def with_meta(self, **changes) -> Circuit:
        return Circuit(self.width, self.kind, self.q0, self.q1, self.angle, replace(self.meta, **changes))

    def __add__(self, other: Circuit) -> Circuit:
        if other.width != self.width:
            raise ValueError("cannot concatenate circuits of different width")
        return Circuit(
            self.width,
            np.concatenate((self.kind, other.kind)),
            np.concatenate((self.q0, other.q0)),
            np.concatenate((self.q1, other.q1)),
            np.concatenate((self.angle, other.angle)),
            self.meta,
        )

    def __repr__(self):
        return f"Circuit(width={self.width}, gates={len(self)}, meta={self.meta})"


def _layer(width, kind, qubits, partners=None) -> Circuit:
    qubits = list(qubits)
    q1 = [-1] * len(qubits) if partners is None else list(partners)
    return Circuit(width, [kind] * len(qubits), qubits, q1, [0.0] * len(qubits))


def oracle_positions(angles: AngleSet, delta: float = 0.0, keep=None):
    """Gray positions and angles of the rotations that survive compression."""
    if keep is None:
        keep = angles.keep_mask(delta)
    return angles.positions[keep], angles.values[keep]


def build_oracle(angles: AngleSet, delta: float = 0.0, keep=None) -> Circuit:
    """Gray-code uniformly controlled ``R_y`` oracle with dropped rotations merged out.

    Walking Gray positions in order, a rotation ``R_y(2 t_j)`` on qubit 0 is
    kept when ``|t_j| >= delta`` (or when ``keep`` selects it).  CNOTs of
    skipped steps all target qubit 0, so they commute; they are collected as
    a parity mask and flushed, one CNOT per set bit, before the next kept
    rotation and once more at the end of the cycle.
    """
    positions, values = oracle_positions(angles, delta, keep)
    m = 2 * angles.n
    positions = np.ascontiguousarray(positions, dtype=np.int64)
    total = positions.size + int(kernels.oracle_cnot_total(positions))
    kind = np.empty(total, dtype=np.int8)
    q0 = np.empty(total, dtype=np.int32)
    q1 = np.empty(total, dtype=np.int32)
    angle = np.empty(total, dtype=np.float64)
    filled = kernels.oracle_fill(positions, np.ascontiguousarray(2.0 * values), m, kind, q0, q1, angle)
    assert filled == total
    return Circuit(m + 1, kind, q0, q1, angle, CircuitMeta(method="ORACLE", delta=delta))


def recover_angles(c: Circuit) -> AngleSet:
    """Transformed angles carried by the oracle inside an assembled circuit.

    Tracks the parity code of the CNOTs hitting qubit 0; each rotation on
    qubit 0 then sits at Gray position ``gray_rank(code)`` and carries half
    its ``R_y`` angle.  Gates on other qubits are ignored.
    """
    if c.width % 2 == 0:
        raise ValueError("expected an odd-width (2n+1) circuit")
    m = c.width - 1
    code = 0
    found: dict[int, float] = {}
    for k, t, ctl, a in zip(c.kind.tolist(), c.q0.tolist(), c.q1.tolist(), c.angle.tolist()):
        if t != 0:
            continue
        if k == kernels.CNOT:
            code ^= 1 << (m - ctl)
        elif k == kernels.RY:
            pos = int(gray_rank(code))
            found[pos] = found.get(pos, 0.0) + 0.5 * a
        else:
            raise ValueError("qubit 0 may only carry rotations and CNOT targets")
    pos = np.array(sorted(found), dtype=np.int64)
    return AngleSet(m // 2, pos, np.array([found[p] for p in pos.tolist()]))


def assemble_fable(oracle: Circuit, n: int) -> Circuit:
    """Wrap an oracle as ``(H_row) SWAP O_A (H_row)``; subnormalization ``1/2**n``."""
    width = 2 * n + 1
    if oracle.width != width:
        raise ValueError(f"oracle width {oracle.width} does not match 2n+1 = {width}")
    row = range(1, n + 1)
    h = _layer(width, GateKind.H, row)
    swaps = _layer(width, GateKind.SWAP, row, [q + n for q in row])
    out = h + oracle + swaps + h
    return out.with_meta(method="FABLE", alpha=1.0 / 2**n)


def assemble_sfable(oracle: Circuit, n: int, norm: float) -> Circuit:
    """FABLE circuit conjugated by Hadamards on the data register.

    ``norm`` is the factor the encoded matrix was divided by before its angles
    were computed; the subnormalization becomes ``1 / (2**n * norm)``.
    """
    if not norm > 0:
        raise ValueError("norm must be positive")
    width = 2 * n + 1
    inner = assemble_fable(oracle, n)
    h = _layer(width, GateKind.H, range(n + 1, 2 * n + 1))
    return (h + inner + h).with_meta(method="SFABLE", alpha=1.0 / (2**n * norm))


@dataclass(frozen=True)
class GateCounts:
    rotations: int = 0
    cnots: int = 0
    hadamards: int = 0
    swaps: int = 0

    @property
    def total(self) -> int:
        return self.rotations + self.cnots + self.hadamards + self.swaps

    def as_dict(self) -> dict:
        return {"rotations": self.rotations, "cnots": self.cnots, "hadamards": self.hadamards,
                "swaps": self.swaps, "total": self.total}


def count_gates(c: Circuit, expand_swaps: bool = False) -> GateCounts:
    """Gate tally by kind; ``expand_swaps`` books each SWAP as three CNOTs."""
    tally = np.bincount(c.kind.astype(np.int64), minlength=4)
    rot, cx, h, sw = (int(x) for x in tally[:4])
    if expand_swaps:
        cx, sw = cx + 3 * sw, 0
    return GateCounts(rot, cx, h, sw)


def predict_counts(angles: AngleSet, method: str, delta: float = 0.0, keep=None) -> GateCounts:
    """Counts of the assembled circuit (SWAPs expanded) without building it."""
    positions, _ = oracle_positions(angles, delta, keep)
    n = angles.n
    cnots = int(kernels.oracle_cnot_total(np.ascontiguousarray(positions, dtype=np.int64)))
    hadamards = 2 * n if method == "FABLE" else 4 * n
    return GateCounts(int(positions.size), cnots + 3 * n, hadamards, 0)


# --------------------------------------------------------------------------
# Text form
# --------------------------------------------------------------------------

_META_RE = re.compile(r"^//\s*fablekit\s+(.*)$")
_QREG_RE = re.compile(r"^qreg\s+q\[(\d+)\];$")
_GATE_RE = re.compile(
    r"^(?:ry\((?P<angle>[^)]+)\)\s+q\[(?P<t>\d+)\]"
    r"|cx\s+q\[(?P<c>\d+)\],\s*q\[(?P<ct>\d+)\]"
    r"|h\s+q\[(?P<h>\d+)\]"
    r"|swap\s+q\[(?P<a>\d+)\],\s*q\[(?P<b>\d+)\]);$"
)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _meta_line(meta: CircuitMeta) -> str | None:
    fields = [f"{k}={_fmt(v) if isinstance(v, float) else v}"
              for k, v in (("method", meta.method), ("alpha", meta.alpha), ("delta", meta.delta))
              if v is not None]
    return "// fablekit " + " ".join(fields) if fields else None


def iter_text(c: Circuit):
    """Yield the lines of :func:`emit_text` (useful for streaming to a file)."""
    yield "OPENQASM 2.0;"
    yield 'include "qelib1.inc";'
    meta = _meta_line(c.meta)
    if meta:
        yield meta
    yield f"qreg q[{c.width}];"
    for k, a, b, t in zip(c.kind.tolist(), c.q0.tolist(), c.q1.tolist(), c.angle.tolist()):
        if k == kernels.RY:
            yield f"ry({_fmt(t)}) q[{a}];"
        elif k == kernels.CNOT:
            yield f"cx q[{b}],q[{a}];"
        elif k == kernels.H:
            yield f"h q[{a}];"
        else:
            yield f"swap q[{a}],q[{b}];"


def emit_text(c: Circuit) -> str:
    """OpenQASM-2 listing, one gate per line, angles with 17 significant digits."""
    return "\n".join(iter_text(c)) + "\n"


def parse_text(text: str) -> Circuit:
    """Read back the grammar written by :func:`emit_text`."""
    width = None
    meta = {}
    kind, q0, q1, angle = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line in ("OPENQASM 2.0;", 'include "qelib1.inc";'):
            continue
        m = _META_RE.match(line)
        if m:
            for item in m.group(1).split():
                key, _, val = item.partition("=")
                meta[key] = val if key == "method" else float(val)
            continue
        if line.startswith("//"):
            continue
        m = _QREG_RE.match(line)
        if m:
            width = int(m.group(1))
            continue
        m = _GATE_RE.match(line)
        if m is None or width is None:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        if m.group("t") is not None:
            row = (kernels.RY, int(m.group("t")), -1, float(m.group("angle")))
        elif m.group("c") is not None:
            row = (kernels.CNOT, int(m.group("ct")), int(m.group("c")), 0.0)
        elif m.group("h") is not None:
            row = (kernels.H, int(m.group("h")), -1, 0.0)
        else:
            row = (kernels.SWAP, int(m.group("a")), int(m.group("b")), 0.0)
        for dst, v in zip((kind, q0, q1, angle), row):
            dst.append(v)
    if width is None:
        raise ValueError("missing qreg declaration")
    return Circuit(width, kind, q0, q1, angle, CircuitMeta(**meta))
