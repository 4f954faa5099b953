"""Round state machine for the classical-Bob protocol and the run driver.

One round runs in this order::

    alice_prepare -> eve.on_forward -> [noise] -> bob_process
                  -> eve.on_return  -> [noise] -> alice_verify -> eve.finish_round

followed by the public announcement of mode and basis and, for SIFT_Z
rounds, the coin deciding whether the key bit is disclosed for checking.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from .adversary import EveMemory, EveStrategy
from .analysis import RunReport, build_report
from .channel import Direction, Mode, Origin, PhotonInFlight, WavelengthTag, check_direction
from .config import RunConfig
from .quantum import Basis, QuantumRegister, RandomStream, detach, measure, prepare, tensor
from .rng import round_streams
from .transcript import CHECK_CATEGORIES, RoundCategory, RoundRecord, SiftResult

__all__ = [
    "alice_prepare",
    "bob_process",
    "alice_verify",
    "run_round",
    "sift",
    "simulate_rounds",
    "run_protocol",
]

log = logging.getLogger(__name__)


def alice_prepare(rng: RandomStream) -> tuple[Basis, int, PhotonInFlight]:
    basis = Basis.Z if rng.random() < 0.5 else Basis.X
    bit = 0 if rng.random() < 0.5 else 1
    return basis, bit, PhotonInFlight(prepare(basis, bit))


def _replace_photon(register: QuantumRegister, bit: int) -> QuantumRegister:
    """Swap the photon qubit of a Z-collapsed register for a fresh ``|bit>``."""
    fresh = prepare(Basis.Z, bit)
    if register.num_qubits == 1:
        return fresh
    return tensor(fresh, detach(register, 1))


def bob_process(
    photon: PhotonInFlight, rng: RandomStream, sift_probability: float = 0.5
) -> tuple[Mode, Optional[int], PhotonInFlight]:
    """Classical Bob: reflect the photon (CTRL) or measure and resend it (SIFT).

    The resent photon is produced by Bob's own source, so it carries the
    original wavelength and Bob's apparatus origin.
    """
    check_direction(photon, Direction.FORWARD)
    if not rng.random() < sift_probability:
        return Mode.CTRL, None, PhotonInFlight(
            photon.register, photon.tag, Direction.RETURN, photon.origin
        )
    out = measure(photon.register, photon.photon_qubit, Basis.Z, rng)
    fresh = _replace_photon(out.post_state, out.bit)
    return Mode.SIFT, out.bit, PhotonInFlight(fresh, WavelengthTag.ORIGINAL, Direction.RETURN, Origin.BOB)


def alice_verify(photon: PhotonInFlight, alice_basis: Basis, mode: Mode, rng: RandomStream) -> int:
    """Alice measures the returned photon: CTRL in her basis, SIFT in Z."""
    check_direction(photon, Direction.RETURN)
    basis = alice_basis if mode is Mode.CTRL else Basis.Z
    return measure(photon.register, photon.photon_qubit, basis, rng).bit


def _noise(photon: PhotonInFlight, p_noise: float, rng: RandomStream) -> PhotonInFlight:
    # Depolarizing in the classical sense: the photon is replaced by a random
    # Z eigenstate.  An attached ancilla collapses with the discarded photon.
    if not p_noise or not rng.random() < p_noise:
        return photon
    collapsed = measure(photon.register, photon.photon_qubit, Basis.Z, rng).post_state
    bit = 0 if rng.random() < 0.5 else 1
    return photon.with_register(_replace_photon(collapsed, bit))


def run_round(
    round_id: int,
    strategy: EveStrategy,
    eve_memory: EveMemory,
    rng: RandomStream,
    *,
    sift_probability: float = 0.5,
    check_sample_fraction: float = 0.2,
    p_noise: float = 0.0,
) -> RoundRecord:
    eve_memory.begin_round(round_id)
    basis, bit, photon = alice_prepare(rng)
    photon = strategy.on_forward(photon, eve_memory, rng)
    photon = _noise(photon, p_noise, rng)
    mode, bob_bit, photon = bob_process(photon, rng, sift_probability)
    photon = strategy.on_return(photon, eve_memory, rng)
    photon = _noise(photon, p_noise, rng)
    return_bit = alice_verify(photon, basis, mode, rng)
    eve_bit, eve_mode = strategy.finish_round(eve_memory, round_id)
    disclose = rng.random() < check_sample_fraction
    return RoundRecord(
        round_id=round_id,
        alice_basis=basis,
        alice_bit=bit,
        mode=mode,
        bob_bit=bob_bit,
        alice_return_bit=return_bit,
        eve_bit=eve_bit,
        eve_classified_mode=eve_mode,
        disclosed=disclose and mode is Mode.SIFT and basis is Basis.Z,
    )


def sift(records: list[RoundRecord]) -> SiftResult:
    """Public discussion: keep SIFT_Z as raw key, collect check pairs."""
    result = SiftResult()
    checks = result.check_sets
    for rec in records:
        cat = rec.category
        if cat is RoundCategory.SIFT_Z:
            result.raw_key_pairs.append((rec.alice_bit, rec.bob_bit))
            result.raw_key_disclosed.append(rec.disclosed)
            result.raw_key_rounds.append(rec.round_id)
            if rec.disclosed:
                checks[cat].append((rec.alice_bit, rec.bob_bit))
        elif cat in CHECK_CATEGORIES:
            checks[cat].append((rec.alice_bit, rec.alice_return_bit))
    return result


def simulate_rounds(config: RunConfig, start: int, stop: int) -> list[RoundRecord]:
    """Run rounds ``start .. stop-1`` of ``config``; used for chunked execution."""
    strategy = config.strategy
    memory = EveMemory()
    kwargs = dict(
        sift_probability=config.sift_probability,
        check_sample_fraction=config.check_sample_fraction,
        p_noise=config.p_noise,
    )
    return [
        run_round(rid, strategy, memory, stream, **kwargs)
        for rid, stream in enumerate(round_streams(config.seed, start, stop), start)
    ]


def _simulate_chunk(args: tuple[RunConfig, int, int]) -> list[RoundRecord]:
    return simulate_rounds(*args)


def run_protocol(
    config: RunConfig, workers: int = 1, chunk_size: int = 16384
) -> tuple[list[RoundRecord], RunReport]:
    """Drive ``config.rounds`` rounds and analyze the transcript.

    With ``workers > 1`` rounds are split into chunks executed in separate
    processes.  Each round owns its random stream, so the transcript does not
    depend on ``workers`` or ``chunk_size``.
    """
    if config.rounds < 1:
        raise ValueError("rounds must be at least 1")
    if workers <= 1:
        records = simulate_rounds(config, 0, config.rounds)
    else:
        bounds = [
            (config, lo, min(lo + chunk_size, config.rounds))
            for lo in range(0, config.rounds, chunk_size)
        ]
        log.debug("running %d rounds in %d chunks on %d workers", config.rounds, len(bounds), workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_simulate_chunk, bounds))
        records = sorted((r for chunk in chunks for r in chunk), key=lambda r: r.round_id)
    return records, build_report(records, sift(records), config)
