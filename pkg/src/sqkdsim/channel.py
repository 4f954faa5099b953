"""What travels on the simulated quantum channel."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .quantum import QuantumRegister


class WavelengthTag(enum.Enum):
    """Classical side-channel label: the original wavelength or a shifted one.

    Detectors register both values identically; only the eavesdropper's
    discriminator can tell them apart.
    """

    ORIGINAL = "Original"
    SHIFTED = "Shifted"


class Direction(enum.Enum):
    FORWARD = "Forward"
    RETURN = "Return"


class Mode(enum.Enum):
    CTRL = "CTRL"
    SIFT = "SIFT"


class Origin(enum.Enum):
    """Which apparatus emitted the photon currently in flight."""

    ALICE = "Alice"
    BOB = "Bob"
    EVE = "Eve"


@dataclass(frozen=True, slots=True)
class PhotonInFlight:
    """A photon on the channel.

    ``register`` is one qubit, or two when the eavesdropper's ancilla is
    attached (photon at index 0, ancilla at index 1).  ``origin`` models the
    apparatus fingerprint; honest parties never read it.
    """

    register: QuantumRegister
    tag: WavelengthTag = WavelengthTag.ORIGINAL
    direction: Direction = Direction.FORWARD
    origin: Origin = Origin.ALICE
    photon_qubit: int = 0

    def with_register(self, register: QuantumRegister) -> PhotonInFlight:
        return PhotonInFlight(register, self.tag, self.direction, self.origin, self.photon_qubit)


def check_direction(photon: PhotonInFlight, expected: Direction) -> None:
    if photon.direction is not expected:
        raise ValueError(f"photon is on the {photon.direction.value} leg, expected {expected.value}")
