"""Exact state-vector kernel for one photon and at most one ancilla.

Qubit ordering is fixed: index 0 is the photon polarization, index 1 is the
eavesdropper's ancilla when one is attached.  Amplitudes are stored in
Kronecker order, so for two qubits the amplitude index is ``2*q0 + q1``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

__all__ = [
    "Basis",
    "QuantumRegister",
    "MeasurementOutcome",
    "RandomStream",
    "CorruptStateError",
    "prepare",
    "tensor",
    "apply_cnot",
    "apply_hadamard",
    "measure",
    "detach",
]

MAX_QUBITS = 2
NORM_TOLERANCE = 1e-9
_ZERO_PROBABILITY = 1e-12
_INV_SQRT2 = math.sqrt(0.5)


class Basis(enum.Enum):
    Z = "Z"
    X = "X"


class RandomStream(Protocol):
    def random(self) -> float: ...


class CorruptStateError(ValueError):
    """Raised when a register cannot carry a valid quantum state."""


class QuantumRegister:
    """Immutable list of ``2**num_qubits`` complex amplitudes."""

    __slots__ = ("amplitudes", "num_qubits")

    amplitudes: tuple[complex, ...]
    num_qubits: int

    def __init__(self, amplitudes: Sequence[complex]):
        amps = tuple(complex(a) for a in amplitudes)
        if len(amps) not in (2, 4):
            raise CorruptStateError(
                f"register needs 2 or 4 amplitudes, got {len(amps)}"
            )
        norm = sum(abs(a) ** 2 for a in amps)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise CorruptStateError(f"register is not normalized (|psi|^2 = {norm!r})")
        self.amplitudes = amps
        self.num_qubits = 1 if len(amps) == 2 else 2

    @classmethod
    def _trusted(cls, amps: tuple[complex, ...]) -> QuantumRegister:
        # Skips validation; only for kernel operations that preserve the norm.
        reg = object.__new__(cls)
        reg.amplitudes = amps
        reg.num_qubits = 1 if len(amps) == 2 else 2
        return reg

    def norm_squared(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes)

    def allclose(self, other: QuantumRegister | Sequence[complex], atol: float = 1e-12) -> bool:
        amps = other.amplitudes if isinstance(other, QuantumRegister) else tuple(other)
        return len(amps) == len(self.amplitudes) and all(
            abs(a - b) <= atol for a, b in zip(self.amplitudes, amps)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuantumRegister):
            return NotImplemented
        return self.amplitudes == other.amplitudes

    def __hash__(self) -> int:
        return hash(self.amplitudes)

    def __repr__(self) -> str:
        body = ", ".join(_fmt_amp(a) for a in self.amplitudes)
        return f"QuantumRegister([{body}])"


def _fmt_amp(a: complex) -> str:
    return f"{a.real:.6g}" if a.imag == 0 else f"{a:.6g}"


@dataclass(frozen=True)
class MeasurementOutcome:
    bit: int
    post_state: QuantumRegister


_PREPARED = {
    (Basis.Z, 0): (1 + 0j, 0j),
    (Basis.Z, 1): (0j, 1 + 0j),
    (Basis.X, 0): (complex(_INV_SQRT2), complex(_INV_SQRT2)),
    (Basis.X, 1): (complex(_INV_SQRT2), complex(-_INV_SQRT2)),
}


def prepare(basis: Basis, bit: int) -> QuantumRegister:
    """Single-qubit eigenstate of ``basis`` encoding ``bit``."""
    try:
        return QuantumRegister._trusted(_PREPARED[basis, bit])
    except KeyError:
        raise ValueError(f"cannot prepare basis={basis!r} bit={bit!r}") from None


def tensor(a: QuantumRegister, b: QuantumRegister) -> QuantumRegister:
    """Kronecker product; the qubits of ``a`` come first."""
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise ValueError(
            f"tensor product would hold {a.num_qubits + b.num_qubits} qubits "
            f"(maximum {MAX_QUBITS})"
        )
    x0, x1 = a.amplitudes
    y0, y1 = b.amplitudes
    return QuantumRegister._trusted((x0 * y0, x0 * y1, x1 * y0, x1 * y1))


def _check_index(reg: QuantumRegister, idx: int) -> None:
    if not 0 <= idx < reg.num_qubits:
        raise IndexError(f"qubit index {idx} out of range for {reg.num_qubits}-qubit register")


def _mask(reg: QuantumRegister, idx: int) -> int:
    return 1 << (reg.num_qubits - 1 - idx)


def apply_cnot(reg: QuantumRegister, control: int, target: int) -> QuantumRegister:
    if reg.num_qubits != 2:
        raise ValueError("CNOT needs a two-qubit register")
    _check_index(reg, control)
    _check_index(reg, target)
    if control == target:
        raise ValueError("control and target must differ")
    a00, a01, a10, a11 = reg.amplitudes
    if control == 0:
        return QuantumRegister._trusted((a00, a01, a11, a10))
    return QuantumRegister._trusted((a00, a11, a10, a01))


def apply_hadamard(reg: QuantumRegister, idx: int) -> QuantumRegister:
    _check_index(reg, idx)
    mask = _mask(reg, idx)
    amps = reg.amplitudes
    out = list(amps)
    for i in range(len(amps)):
        if i & mask:
            continue
        lo, hi = amps[i], amps[i | mask]
        out[i] = (lo + hi) * _INV_SQRT2
        out[i | mask] = (lo - hi) * _INV_SQRT2
    return QuantumRegister._trusted(tuple(out))


def outcome_probabilities(reg: QuantumRegister, idx: int, basis: Basis = Basis.Z) -> tuple[float, float]:
    """Exact Born-rule probabilities ``(p0, p1)`` for measuring qubit ``idx``."""
    _check_index(reg, idx)
    if basis is Basis.X:
        reg = apply_hadamard(reg, idx)
    mask = _mask(reg, idx)
    p0 = p1 = 0.0
    for i, a in enumerate(reg.amplitudes):
        w = a.real * a.real + a.imag * a.imag
        if i & mask:
            p1 += w
        else:
            p0 += w
    return p0, p1


def measure(reg: QuantumRegister, idx: int, basis: Basis, rng: RandomStream) -> MeasurementOutcome:
    """Projective measurement of one qubit, sampled by the Born rule.

    X-basis measurement conjugates the qubit with a Hadamard so that a single
    Z-projection path serves both bases.  The post-state is renormalized.
    """
    _check_index(reg, idx)
    if basis is Basis.X:
        reg = apply_hadamard(reg, idx)
    amps = reg.amplitudes
    w = [a.real * a.real + a.imag * a.imag for a in amps]
    if reg.num_qubits == 1:
        p0, p1 = w
    elif idx == 0:
        p0, p1 = w[0] + w[1], w[2] + w[3]
    else:
        p0, p1 = w[0] + w[2], w[1] + w[3]
    if p0 < _ZERO_PROBABILITY and p1 < _ZERO_PROBABILITY:
        raise CorruptStateError("both measurement outcomes have vanishing probability")
    bit = 0 if rng.random() < p0 / (p0 + p1) else 1
    scale = 1 / math.sqrt(p1 if bit else p0)
    if reg.num_qubits == 1:
        post_amps = (0j, amps[1] * scale) if bit else (amps[0] * scale, 0j)
    else:
        mask = _mask(reg, idx)
        want = mask if bit else 0
        post_amps = tuple(a * scale if (i & mask) == want else 0j for i, a in enumerate(amps))
    post = QuantumRegister._trusted(post_amps)
    if basis is Basis.X:
        post = apply_hadamard(post, idx)
    return MeasurementOutcome(bit, post)


def detach(reg: QuantumRegister, keep: int, atol: float = 1e-12) -> QuantumRegister:
    """Return the single-qubit factor ``keep`` of a two-qubit product state.

    Raises ``ValueError`` when the register is entangled, since then no
    pure single-qubit factor exists.
    """
    if reg.num_qubits != 2:
        raise ValueError("detach needs a two-qubit register")
    _check_index(reg, keep)
    a00, a01, a10, a11 = reg.amplitudes
    if abs(a00 * a11 - a01 * a10) > atol:
        raise ValueError("register is entangled; cannot detach a qubit")
    # The 2x2 amplitude matrix has rank one: its columns (rows, for keep=1)
    # are proportional.  Take the heavier one; it carries the kept factor up
    # to a scalar.
    if keep == 0:
        u, v = (a00, a10), (a01, a11)
    else:
        u, v = (a00, a01), (a10, a11)
    wu = abs(u[0]) ** 2 + abs(u[1]) ** 2
    wv = abs(v[0]) ** 2 + abs(v[1]) ** 2
    vec, w = (u, wu) if wu >= wv else (v, wv)
    # Fix the global phase so the leading nonzero amplitude is real positive.
    lead = vec[0] if abs(vec[0]) > atol else vec[1]
    scale = abs(lead) / lead
    if abs(w - 1.0) > 1e-15:
        scale /= math.sqrt(w)
    if scale == 1:
        return QuantumRegister._trusted(vec)
    return QuantumRegister._trusted((vec[0] * scale, vec[1] * scale))
