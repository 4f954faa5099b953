"""Eavesdropper strategies and the per-round memory they keep.

Every strategy sees only the photon (its state, wavelength tag and
apparatus origin) and its own memory.  It never sees Bob's mode or Alice's
basis; whatever it learns about them leaks through the modeled physics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Optional

from .channel import Mode, Origin, PhotonInFlight, WavelengthTag
from .quantum import (
    Basis,
    QuantumRegister,
    RandomStream,
    apply_cnot,
    detach,
    measure,
    prepare,
    tensor,
)

__all__ = [
    "EveStrategy",
    "NoEve",
    "InterceptResendForward",
    "MeasureReturnZ",
    "Tagging",
    "Fingerprint",
    "EveMemory",
    "SequencingError",
    "STRATEGIES",
    "strategy_from_name",
]

_BLANK = QuantumRegister._trusted((1 + 0j, 0j))


class SequencingError(RuntimeError):
    """A hook was called out of order or left the ancilla in a bad state."""


@dataclass
class EveMemory:
    ancilla: Optional[QuantumRegister] = None
    round_id: Optional[int] = None
    readouts: list[tuple[int, int]] = field(default_factory=list)
    classifications: list[tuple[int, Mode]] = field(default_factory=list)

    def begin_round(self, round_id: int) -> None:
        if self.ancilla is not None:
            raise SequencingError(f"ancilla still attached when round {round_id} began")
        self.round_id = round_id

    def log_bit(self, bit: int) -> None:
        self.readouts.append((self.round_id, bit))

    def log_mode(self, mode: Mode) -> None:
        self.classifications.append((self.round_id, mode))


def _measure_photon_z(photon: PhotonInFlight, memory: EveMemory, rng: RandomStream) -> PhotonInFlight:
    out = measure(photon.register, photon.photon_qubit, Basis.Z, rng)
    memory.log_bit(out.bit)
    return photon.with_register(out.post_state)


@dataclass(frozen=True)
class EveStrategy:
    """Base strategy: a passive channel."""

    name: ClassVar[str] = "none"

    def on_forward(self, photon: PhotonInFlight, memory: EveMemory, rng: RandomStream) -> PhotonInFlight:
        return photon

    def on_return(self, photon: PhotonInFlight, memory: EveMemory, rng: RandomStream) -> PhotonInFlight:
        return photon

    def finish_round(self, memory: EveMemory, round_id: int) -> tuple[Optional[int], Optional[Mode]]:
        if memory.ancilla is not None:
            raise SequencingError(f"ancilla still attached at end of round {round_id}")
        bit = memory.readouts[-1][1] if memory.readouts and memory.readouts[-1][0] == round_id else None
        mode = (
            memory.classifications[-1][1]
            if memory.classifications and memory.classifications[-1][0] == round_id
            else None
        )
        return bit, mode

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class NoEve(EveStrategy):
    name: ClassVar[str] = "none"


@dataclass(frozen=True)
class InterceptResendForward(EveStrategy):
    """Measure every forward photon in Z and resend the result."""

    name: ClassVar[str] = "intercept_resend_forward"

    def on_forward(self, photon, memory, rng):
        out = measure(photon.register, photon.photon_qubit, Basis.Z, rng)
        memory.log_bit(out.bit)
        return PhotonInFlight(prepare(Basis.Z, out.bit), photon.tag, photon.direction, Origin.EVE)


@dataclass(frozen=True)
class MeasureReturnZ(EveStrategy):
    """Measure every photon on the return line in Z."""

    name: ClassVar[str] = "measure_return_z"

    def on_return(self, photon, memory, rng):
        return _measure_photon_z(photon, memory, rng)


@dataclass(frozen=True)
class Tagging(EveStrategy):
    """CNOT the photon into a blank ancilla and shift its wavelength.

    On the way back a still-shifted photon was reflected (CTRL), so the CNOT
    is undone and the ancilla returns to |0>.  An unshifted photon is Bob's
    fresh SIFT resend; the ancilla then holds his measured bit.
    """

    name: ClassVar[str] = "tagging"
    untag_on_return: bool = False

    def on_forward(self, photon, memory, rng):
        if memory.ancilla is not None:
            raise SequencingError("ancilla slot already occupied on forward pass")
        joint = apply_cnot(tensor(photon.register, _BLANK), 0, 1)
        memory.ancilla = joint
        return PhotonInFlight(joint, WavelengthTag.SHIFTED, photon.direction, photon.origin)

    def on_return(self, photon, memory, rng):
        if memory.ancilla is None:
            raise SequencingError("returned photon but no ancilla is attached")
        joint = photon.register
        if joint.num_qubits != 2:
            raise SequencingError("ancilla is no longer attached to the returned photon")
        if photon.tag is WavelengthTag.SHIFTED:
            memory.log_mode(Mode.CTRL)
            restored = apply_cnot(joint, 0, 1)
            if abs(restored.amplitudes[1]) > 1e-12 or abs(restored.amplitudes[3]) > 1e-12:
                # Channel noise broke the correlation; the ancilla is discarded.
                restored = measure(restored, 1, Basis.Z, rng).post_state
            memory.ancilla = None
            tag = WavelengthTag.ORIGINAL if self.untag_on_return else photon.tag
            return PhotonInFlight(detach(restored, 0), tag, photon.direction, photon.origin)
        memory.log_mode(Mode.SIFT)
        out = measure(joint, 1, Basis.Z, rng)
        memory.log_bit(out.bit)
        memory.ancilla = None
        return photon.with_register(detach(out.post_state, 0))

    def params(self) -> dict:
        return {"untag_on_return": self.untag_on_return}


@dataclass(frozen=True)
class Fingerprint(EveStrategy):
    """Recognize Bob's fresh photons by apparatus differences.

    ``d`` is the probability that a Bob-emitted photon is identified.
    Photons from Alice are never mistaken for Bob's.
    """

    name: ClassVar[str] = "fingerprint"
    d: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.d <= 1.0:
            raise ValueError(f"d must lie in [0, 1], got {self.d!r}")

    def on_return(self, photon, memory, rng):
        if photon.origin is not Origin.BOB or not rng.random() < self.d:
            return photon
        memory.log_mode(Mode.SIFT)
        return _measure_photon_z(photon, memory, rng)

    def params(self) -> dict:
        return {"d": self.d}


STRATEGIES: dict[str, type[EveStrategy]] = {
    cls.name: cls for cls in (NoEve, InterceptResendForward, MeasureReturnZ, Tagging, Fingerprint)
}


def strategy_from_name(name: str, **params) -> EveStrategy:
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None
    return cls(**params)

