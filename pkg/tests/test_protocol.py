import math
import random
from collections import Counter

import pytest

from conftest import HIGH, LOW, S, ScriptedStream
from sqkdsim.adversary import EveMemory, InterceptResendForward, NoEve, Tagging
from sqkdsim.analysis import Verdict
from sqkdsim.channel import Direction, Mode, Origin, PhotonInFlight, WavelengthTag
from sqkdsim.config import ConfigError, RunConfig
from sqkdsim.protocol import alice_prepare, alice_verify, bob_process, run_protocol, run_round, sift, simulate_rounds
from sqkdsim.quantum import Basis, QuantumRegister, prepare
from sqkdsim.transcript import RoundCategory, RoundRecord


def returned(amps, tag=WavelengthTag.ORIGINAL):
    return PhotonInFlight(QuantumRegister(amps), tag, Direction.RETURN)


class TestAlicePrepare:
    def test_forced_z0(self):
        basis, bit, photon = alice_prepare(ScriptedStream([LOW, LOW]))
        assert (basis, bit) == (Basis.Z, 0)
        assert photon.register.allclose([1, 0], atol=0)
        assert photon.tag is WavelengthTag.ORIGINAL
        assert photon.direction is Direction.FORWARD

    def test_forced_x1(self):
        basis, bit, photon = alice_prepare(ScriptedStream([HIGH, HIGH]))
        assert (basis, bit) == (Basis.X, 1)
        assert photon.register.allclose([S, -S])

    def test_uniform_pairs(self):
        rng = random.Random(0)
        counts = Counter(alice_prepare(rng)[:2] for _ in range(10_000))
        assert len(counts) == 4
        for c in counts.values():
            assert 0.23 <= c / 10_000 <= 0.27


class TestBobProcess:
    def test_ctrl_reflects_untouched(self):
        reg = QuantumRegister([S, S])
        photon = PhotonInFlight(reg, WavelengthTag.SHIFTED)
        mode, bob_bit, out = bob_process(photon, ScriptedStream([HIGH]))
        assert mode is Mode.CTRL and bob_bit is None
        assert out.register is reg
        assert out.tag is WavelengthTag.SHIFTED
        assert out.direction is Direction.RETURN

    def test_sift_measures_and_resends_fresh(self):
        photon = PhotonInFlight(prepare(Basis.Z, 1), WavelengthTag.SHIFTED)
        mode, bob_bit, out = bob_process(photon, ScriptedStream([LOW, LOW]))
        assert (mode, bob_bit) == (Mode.SIFT, 1)
        assert out.register.allclose([0, 1], atol=0)
        assert out.tag is WavelengthTag.ORIGINAL
        assert out.origin is Origin.BOB
        assert out.direction is Direction.RETURN

    def test_sift_on_bell_state(self):
        # Partial Z measurement of (|00>+|11>)/sqrt2 leaves |b>|b> with p = 1/2.
        rng = random.Random(4)
        n = 10_000
        zeros = 0
        for _ in range(n):
            photon = PhotonInFlight(QuantumRegister([S, 0, 0, S]), WavelengthTag.SHIFTED)
            _, b, out = bob_process(photon, ScriptedStream([LOW], fallback_seed=rng.random()))
            expected = [1, 0, 0, 0] if b == 0 else [0, 0, 0, 1]
            assert out.register.allclose(expected)
            zeros += b == 0
        assert abs(zeros / n - 0.5) <= 4 * math.sqrt(0.25 / n)

    def test_rejects_return_leg(self):
        with pytest.raises(ValueError):
            bob_process(returned([1, 0]), random.Random(0))


class TestAliceVerify:
    def test_undisturbed_plus(self):
        rng = random.Random(0)
        assert all(alice_verify(returned([S, S]), Basis.X, Mode.CTRL, rng) == 0 for _ in range(200))

    def test_sift_measures_z(self):
        assert alice_verify(returned([0, 1]), Basis.X, Mode.SIFT, random.Random(0)) == 1

    def test_collapsed_ctrl_x_errs_half_the_time(self):
        rng = random.Random(1)
        n = 10_000
        errors = sum(alice_verify(returned([1, 0]), Basis.X, Mode.CTRL, rng) for _ in range(n))
        assert abs(errors / n - 0.5) <= 4 * math.sqrt(0.25 / n)

    def test_accepts_shifted_photon(self):
        assert alice_verify(returned([1, 0], WavelengthTag.SHIFTED), Basis.Z, Mode.CTRL, random.Random(0)) == 0

    def test_rejects_forward_leg(self):
        with pytest.raises(ValueError):
            alice_verify(PhotonInFlight(prepare(Basis.Z, 0)), Basis.Z, Mode.CTRL, random.Random(0))


class TestRunRound:
    def test_honest_sift_z1(self):
        # basis Z, bit 1, SIFT; remaining draws are measurements and disclosure
        rec = run_round(0, NoEve(), EveMemory(), ScriptedStream([LOW, HIGH, LOW]))
        assert rec.category is RoundCategory.SIFT_Z
        assert rec.bob_bit == 1
        assert rec.alice_return_bit == 1
        assert rec.eve_bit is None

    def test_tagging_ctrl_x0_no_error(self):
        for seed in range(200):
            rec = run_round(seed, Tagging(), EveMemory(), ScriptedStream([HIGH, LOW, HIGH], fallback_seed=seed))
            assert rec.category is RoundCategory.CTRL_X
            assert rec.alice_return_bit == 0
            assert rec.eve_classified_mode is Mode.CTRL
            assert rec.eve_bit is None

    def test_tagging_sift_z1_extracts_bit(self):
        rec = run_round(0, Tagging(), EveMemory(), ScriptedStream([LOW, HIGH, LOW]))
        assert rec.bob_bit == 1
        assert rec.eve_bit == 1
        assert rec.eve_classified_mode is Mode.SIFT

    def test_hooks_called_once_each(self):
        calls = []

        class Spy(NoEve):
            def on_forward(self, photon, memory, rng):
                calls.append("forward")
                return photon

            def on_return(self, photon, memory, rng):
                calls.append("return")
                return photon

        run_round(0, Spy(), EveMemory(), random.Random(0))
        assert calls == ["forward", "return"]

    def test_record_is_frozen(self):
        rec = run_round(0, NoEve(), EveMemory(), random.Random(0))
        with pytest.raises(AttributeError):
            rec.alice_bit = 1


def _rec(i, basis, bit, mode, bob=None, ret=None, disclosed=False):
    return RoundRecord(i, basis, bit, mode, bob, ret, disclosed=disclosed)


class TestSift:
    def test_one_per_category(self):
        records = [
            _rec(0, Basis.Z, 0, Mode.CTRL, ret=0),
            _rec(1, Basis.X, 1, Mode.CTRL, ret=1),
            _rec(2, Basis.Z, 1, Mode.SIFT, bob=1, ret=1, disclosed=True),
            _rec(3, Basis.X, 0, Mode.SIFT, bob=1, ret=1),
        ]
        result = sift(records)
        assert result.raw_key_pairs == [(1, 1)]
        assert result.raw_key_disclosed == [True]
        assert result.check_sets[RoundCategory.CTRL_Z] == [(0, 0)]
        assert result.check_sets[RoundCategory.CTRL_X] == [(1, 1)]
        assert result.check_sets[RoundCategory.SIFT_Z] == [(1, 1)]
        assert RoundCategory.SIFT_X not in result.check_sets

    def test_undisclosed_key_not_checked(self):
        result = sift([_rec(0, Basis.Z, 1, Mode.SIFT, bob=1, ret=1)])
        assert result.raw_key_pairs == [(1, 1)]
        assert result.check_sets[RoundCategory.SIFT_Z] == []

    def test_empty(self):
        result = sift([])
        assert result.raw_key_pairs == []
        assert all(v == [] for v in result.check_sets.values())

    def test_honest_raw_key_length(self):
        records = simulate_rounds(RunConfig(rounds=10_000, seed=3), 0, 10_000)
        assert 2300 <= len(sift(records).raw_key_pairs) <= 2700


class TestRunProtocol:
    def test_honest(self):
        records, report = run_protocol(RunConfig(rounds=10_000, seed=1))
        assert len(records) == 10_000
        assert report.verdict is Verdict.CONTINUE
        assert all(report.qber[c] == 0.0 for c in (RoundCategory.CTRL_Z, RoundCategory.CTRL_X, RoundCategory.SIFT_Z))

    def test_tagging(self):
        _, report = run_protocol(RunConfig(rounds=10_000, seed=2, strategy=Tagging()))
        assert report.verdict is Verdict.CONTINUE
        assert report.eve_agreement == 1.0

    def test_intercept_resend(self):
        _, report = run_protocol(RunConfig(rounds=10_000, seed=3, strategy=InterceptResendForward()))
        assert 0.46 <= report.qber[RoundCategory.CTRL_X] <= 0.54
        assert report.verdict is Verdict.ABORT

    def test_zero_rounds_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(rounds=0, seed=1)


@pytest.fixture(scope="module")
def honest():
    return run_protocol(RunConfig(rounds=20_000, seed=8))


class TestInvariants:
    def test_honest_purity(self, honest):
        records, _ = honest
        result = sift(records)
        assert all(a == b for a, b in result.raw_key_pairs)
        for pairs in result.check_sets.values():
            assert all(e == o for e, o in pairs)

    def test_category_partition(self, honest):
        records, report = honest
        assert sum(report.counts.values()) == len(records)
        assert Counter(r.category for r in records) == Counter({c: n for c, n in report.counts.items() if n})

    def test_raw_key_uniform(self, honest):
        records, _ = honest
        key = [a for a, _ in sift(records).raw_key_pairs]
        n = len(key)
        assert abs(sum(key) - n / 2) <= 4 * math.sqrt(n / 4)

    def test_determinism_across_chunking(self):
        cfg = RunConfig(rounds=3000, seed=99, strategy=Tagging(), p_noise=0.05)
        serial, rep1 = run_protocol(cfg)
        chunked = simulate_rounds(cfg, 0, 1000) + simulate_rounds(cfg, 1000, 2999) + simulate_rounds(cfg, 2999, 3000)
        assert serial == chunked
        parallel, rep2 = run_protocol(cfg, workers=2, chunk_size=700)
        assert serial == parallel
        assert rep1 == rep2

    def test_seed_changes_transcript(self):
        a = simulate_rounds(RunConfig(rounds=50, seed=1), 0, 50)
        b = simulate_rounds(RunConfig(rounds=50, seed=2), 0, 50)
        assert a != b

    def test_mode_secrecy_tags(self):
        rng = random.Random(12)
        for _ in range(500):
            tag = rng.choice(list(WavelengthTag))
            photon = PhotonInFlight(prepare(Basis.X, 0), tag)
            mode, _, out = bob_process(photon, rng)
            assert out.tag is (tag if mode is Mode.CTRL else WavelengthTag.ORIGINAL)

    def test_noise_introduces_errors(self):
        _, report = run_protocol(RunConfig(rounds=5000, seed=4, p_noise=0.2))
        assert report.qber[RoundCategory.CTRL_Z] > 0.1
