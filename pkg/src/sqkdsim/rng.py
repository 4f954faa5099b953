"""Per-round random streams derived from a master seed.

Round ``i`` of a run keyed by ``seed`` reads the fixed block of
``ROUND_DRAWS`` uniforms starting at Philox counter offset ``i * ROUND_DRAWS``.
Because Philox is counter-based, any contiguous slice of rounds can be
regenerated on its own, so serial and chunked-parallel execution draw
identical numbers.
"""
from __future__ import annotations

from typing import Iterator

import numpy as np

ROUND_DRAWS = 24  # multiple of 4: Philox advances in blocks of four words
_BLOCK_ROUNDS = 4096
_SEED_MASK = (1 << 64) - 1


class RoundStream:
    """Finite stream of uniforms in [0, 1) owned by a single round."""

    __slots__ = ("_values", "_pos")

    def __init__(self, values: list[float]):
        self._values = values
        self._pos = 0

    def random(self) -> float:
        try:
            v = self._values[self._pos]
        except IndexError:
            raise RuntimeError(f"round drew more than {len(self._values)} random numbers") from None
        self._pos += 1
        return v

    @property
    def used(self) -> int:
        return self._pos


def _generator(seed: int, first_round: int) -> np.random.Generator:
    bitgen = np.random.Philox(key=seed & _SEED_MASK)
    if first_round:
        bitgen = bitgen.advance(first_round * ROUND_DRAWS // 4)
    return np.random.Generator(bitgen)


def round_streams(seed: int, start: int, stop: int) -> Iterator[RoundStream]:
    """Yield the streams for rounds ``start .. stop-1`` in order."""
    gen = _generator(seed, start)
    pos = start
    while pos < stop:
        n = min(_BLOCK_ROUNDS, stop - pos)
        for row in gen.random((n, ROUND_DRAWS)).tolist():
            yield RoundStream(row)
        pos += n


def round_stream(seed: int, round_id: int) -> RoundStream:
    return next(round_streams(seed, round_id, round_id + 1))
