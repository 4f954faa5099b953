import math
import random

import pytest

from conftest import HIGH, LOW, S, ScriptedStream
from sqkdsim.adversary import (
    EveMemory,
    Fingerprint,
    InterceptResendForward,
    MeasureReturnZ,
    NoEve,
    SequencingError,
    Tagging,
    strategy_from_name,
)
from sqkdsim.analysis import Verdict
from sqkdsim.channel import Direction, Mode, Origin, PhotonInFlight, WavelengthTag
from sqkdsim.config import RunConfig
from sqkdsim.protocol import alice_verify, bob_process, run_protocol, simulate_rounds
from sqkdsim.quantum import Basis, QuantumRegister, prepare
from sqkdsim.transcript import RoundCategory


def forward(amps):
    return PhotonInFlight(QuantumRegister(amps))


class TestOnForward:
    def test_tagging_ground_state(self):
        memory = EveMemory()
        out = Tagging().on_forward(forward([1, 0]), memory, random.Random(0))
        assert out.register.allclose([1, 0, 0, 0], atol=0)
        assert out.tag is WavelengthTag.SHIFTED
        assert memory.ancilla is not None

    def test_tagging_plus_makes_bell_state(self):
        out = Tagging().on_forward(forward([S, S]), EveMemory(), random.Random(0))
        assert out.register.allclose([S, 0, 0, S])
        assert out.tag is WavelengthTag.SHIFTED

    def test_tagging_occupied_slot(self):
        memory = EveMemory(ancilla=QuantumRegister([1, 0, 0, 0]))
        with pytest.raises(SequencingError):
            Tagging().on_forward(forward([1, 0]), memory, random.Random(0))

    def test_intercept_resend_collapses(self):
        rng = random.Random(3)
        n = 10_000
        zeros = 0
        for _ in range(n):
            memory = EveMemory()
            out = InterceptResendForward().on_forward(forward([S, S]), memory, rng)
            bit = memory.readouts[-1][1]
            assert out.register.allclose([1, 0] if bit == 0 else [0, 1], atol=0)
            zeros += bit == 0
        assert abs(zeros / n - 0.5) <= 4 * math.sqrt(0.25 / n)

    @pytest.mark.parametrize("strategy", [NoEve(), MeasureReturnZ(), Fingerprint(1.0)])
    def test_identity_on_forward(self, strategy):
        photon = forward([S, -S])
        assert strategy.on_forward(photon, EveMemory(), random.Random(0)) is photon


class TestOnReturn:
    def test_tagging_undoes_ctrl(self):
        memory = EveMemory(ancilla=QuantumRegister([S, 0, 0, S]))
        photon = PhotonInFlight(QuantumRegister([S, 0, 0, S]), WavelengthTag.SHIFTED, Direction.RETURN)
        out = Tagging().on_return(photon, memory, random.Random(0))
        assert out.register.num_qubits == 1
        assert out.register.allclose([S, S])
        assert memory.ancilla is None
        assert memory.readouts == []
        assert memory.classifications[-1][1] is Mode.CTRL
        assert out.tag is WavelengthTag.SHIFTED

    def test_tagging_untag_on_return(self):
        memory = EveMemory(ancilla=QuantumRegister([1, 0, 0, 0]))
        photon = PhotonInFlight(QuantumRegister([1, 0, 0, 0]), WavelengthTag.SHIFTED, Direction.RETURN)
        out = Tagging(untag_on_return=True).on_return(photon, memory, random.Random(0))
        assert out.tag is WavelengthTag.ORIGINAL

    def test_tagging_reads_ancilla_on_fresh_photon(self):
        memory = EveMemory(ancilla=QuantumRegister([S, 0, 0, S]))
        photon = PhotonInFlight(QuantumRegister([0, 0, 0, 1]), WavelengthTag.ORIGINAL, Direction.RETURN, Origin.BOB)
        out = Tagging().on_return(photon, memory, random.Random(0))
        assert memory.readouts[-1][1] == 1
        assert out.register.allclose([0, 1], atol=0)
        assert memory.classifications[-1][1] is Mode.SIFT

    def test_tagging_empty_slot(self):
        photon = PhotonInFlight(QuantumRegister([1, 0, 0, 0]), WavelengthTag.SHIFTED, Direction.RETURN)
        with pytest.raises(SequencingError):
            Tagging().on_return(photon, EveMemory(), random.Random(0))

    def test_measure_return_z_disturbs_ctrl_x(self):
        rng = random.Random(5)
        n = 10_000
        errors = 0
        for _ in range(n):
            photon = PhotonInFlight(prepare(Basis.X, 0), direction=Direction.RETURN)
            out = MeasureReturnZ().on_return(photon, EveMemory(), rng)
            assert out.register.allclose([1, 0], atol=0) or out.register.allclose([0, 1], atol=0)
            errors += alice_verify(out, Basis.X, Mode.CTRL, rng)
        # exact: 1/2 (Z collapse, then an unbiased X outcome)
        assert abs(errors / n - 0.5) <= 4 * math.sqrt(0.25 / n)

    def test_fingerprint_ignores_alice_photons(self):
        memory = EveMemory()
        photon = PhotonInFlight(prepare(Basis.X, 0), direction=Direction.RETURN)
        assert Fingerprint(1.0).on_return(photon, memory, ScriptedStream([0.0])) is photon
        assert memory.readouts == []

    def test_fingerprint_identifies_bob(self):
        memory = EveMemory()
        photon = PhotonInFlight(prepare(Basis.Z, 1), direction=Direction.RETURN, origin=Origin.BOB)
        Fingerprint(0.5).on_return(photon, memory, ScriptedStream([LOW, LOW]))
        assert memory.readouts[-1][1] == 1
        Fingerprint(0.5).on_return(photon, memory, ScriptedStream([HIGH]))
        assert len(memory.readouts) == 1

    def test_fingerprint_range(self):
        with pytest.raises(ValueError):
            Fingerprint(1.5)


class TestFinishRound:
    def _round(self, strategy, mode_draw, bit_draw=LOW):
        memory = EveMemory()
        memory.begin_round(7)
        rng = ScriptedStream([mode_draw])
        photon = strategy.on_forward(PhotonInFlight(prepare(Basis.Z, 0 if bit_draw == LOW else 1)), memory, rng)
        _, _, photon = bob_process(photon, rng)
        strategy.on_return(photon, memory, rng)
        return strategy.finish_round(memory, 7)

    def test_tagging_ctrl(self):
        assert self._round(Tagging(), HIGH) == (None, Mode.CTRL)

    def test_tagging_sift_bit0(self):
        assert self._round(Tagging(), LOW) == (0, Mode.SIFT)

    def test_none(self):
        assert self._round(NoEve(), LOW) == (None, None)

    def test_non_empty_slot(self):
        memory = EveMemory(ancilla=QuantumRegister([1, 0, 0, 0]))
        with pytest.raises(SequencingError):
            Tagging().finish_round(memory, 0)

    def test_stale_log_not_reported(self):
        memory = EveMemory()
        memory.begin_round(1)
        memory.log_bit(1)
        memory.begin_round(2)
        assert NoEve().finish_round(memory, 2) == (None, None)


@pytest.fixture(scope="module")
def records():
    return simulate_rounds(RunConfig(rounds=20_000, seed=21, strategy=Tagging()), 0, 20_000)


class TestTaggingInvariants:
    def test_perfect_mode_classification(self, records):
        assert all(r.eve_classified_mode is r.mode for r in records)

    def test_perfect_extraction(self, records):
        sift_rounds = [r for r in records if r.mode is Mode.SIFT]
        assert sift_rounds
        assert all(r.eve_bit == r.bob_bit for r in sift_rounds)

    def test_zero_disturbance(self, records):
        for r in records:
            if r.category in (RoundCategory.CTRL_Z, RoundCategory.CTRL_X, RoundCategory.SIFT_Z):
                assert r.alice_return_bit == r.alice_bit
            else:
                assert r.alice_return_bit == r.bob_bit

    @pytest.mark.parametrize("basis", list(Basis))
    @pytest.mark.parametrize("bit", [0, 1])
    @pytest.mark.parametrize("mode_draw", [LOW, HIGH])
    def test_released_photon_matches_honest_channel(self, basis, bit, mode_draw):
        for seed in range(20):
            draws = [mode_draw]
            honest_rng = ScriptedStream(draws, fallback_seed=seed)
            eve_rng = ScriptedStream(draws, fallback_seed=seed)
            _, _, honest = bob_process(PhotonInFlight(prepare(basis, bit)), honest_rng)
            memory = EveMemory()
            tagging = Tagging()
            photon = tagging.on_forward(PhotonInFlight(prepare(basis, bit)), memory, eve_rng)
            _, _, photon = bob_process(photon, eve_rng)
            released = tagging.on_return(photon, memory, eve_rng)
            assert released.register.allclose(honest.register, atol=1e-12)
            assert memory.ancilla is None


class TestOtherStrategies:
    @pytest.mark.parametrize("d", [0.0, 0.5, 1.0])
    def test_fingerprint_known_fraction(self, d):
        _, report = run_protocol(RunConfig(rounds=10_000, seed=31, strategy=Fingerprint(d)))
        n = report.raw_key_length
        assert abs(report.eve_known_fraction - d) <= 4 * math.sqrt(d * (1 - d) / n) + 1e-12
        assert report.verdict is Verdict.CONTINUE
        assert all(report.mismatches[c] == 0 for c in RoundCategory)

    def test_intercept_resend_ctrl_z_clean(self):
        _, report = run_protocol(RunConfig(rounds=10_000, seed=32, strategy=InterceptResendForward()))
        assert report.mismatches[RoundCategory.CTRL_Z] == 0
        assert report.mismatches[RoundCategory.CTRL_X] > 0

    def test_strategy_from_name(self):
        assert strategy_from_name("fingerprint", d=0.3) == Fingerprint(0.3)
        with pytest.raises(ValueError):
            strategy_from_name("bogus")
