"""Exhaustive branch enumeration with exact arithmetic.

Every random choice in a round (Alice's basis and bit, Bob's mode, noise,
Eve's identification coin, the disclosure coin and every Born-rule outcome)
is expanded into a branch.  Amplitudes live in Q(sqrt 2), represented exactly
with :class:`fractions.Fraction`, and branch vectors are kept *unnormalized*:
the probability of a leaf is its classical weight times the squared norm of
its vector, so no square roots are ever taken.

This module deliberately shares no code with the floating-point simulator
beyond the enums and configuration types; it is the reference the Monte
Carlo results are checked against.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .channel import Mode
from .config import RunConfig
from .quantum import Basis
from .transcript import CHECK_CATEGORIES, RoundCategory

__all__ = ["Surd", "ExactResult", "BranchBudgetExceeded", "enumerate_exact", "round_distribution"]

MAX_EXACT_ROUNDS = 6
DEFAULT_BRANCH_BUDGET = 100_000


class BranchBudgetExceeded(RuntimeError):
    pass


class Surd:
    """Exact real number ``a + b*sqrt(2)`` with rational ``a`` and ``b``."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    def __add__(self, other: Surd) -> Surd:
        return Surd(self.a + other.a, self.b + other.b)

    def __sub__(self, other: Surd) -> Surd:
        return Surd(self.a - other.a, self.b - other.b)

    def __neg__(self) -> Surd:
        return Surd(-self.a, -self.b)

    def __mul__(self, other: Surd) -> Surd:
        return Surd(self.a * other.a + 2 * self.b * other.b, self.a * other.b + self.b * other.a)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Surd(other)
        if not isinstance(other, Surd):
            return NotImplemented
        return self.a == other.a and self.b == other.b

    def __hash__(self) -> int:
        return hash((self.a, self.b))

    def __bool__(self) -> bool:
        return bool(self.a or self.b)

    def rational(self) -> Fraction:
        if self.b:
            raise ArithmeticError(f"{self!r} is irrational")
        return self.a

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * 2 ** 0.5

    def __repr__(self) -> str:
        return f"Surd({self.a}, {self.b})"


_ZERO, _ONE = Surd(0), Surd(1)
_HALF_SQRT2 = Surd(0, Fraction(1, 2))  # 1/sqrt(2)

Vec = tuple  # tuple[Surd, ...], unnormalized


def _ket(basis: Basis, bit: int) -> Vec:
    if basis is Basis.Z:
        return (_ONE, _ZERO) if bit == 0 else (_ZERO, _ONE)
    return (_HALF_SQRT2, _HALF_SQRT2) if bit == 0 else (_HALF_SQRT2, -_HALF_SQRT2)


def _norm2(v: Vec) -> Fraction:
    total = _ZERO
    for x in v:
        total = total + x * x
    return total.rational()


def _hadamard(v: Vec, idx: int) -> Vec:
    n = 1 if len(v) == 2 else 2
    mask = 1 << (n - 1 - idx)
    out = list(v)
    for i in range(len(v)):
        if not i & mask:
            lo, hi = v[i], v[i | mask]
            out[i] = (lo + hi) * _HALF_SQRT2
            out[i | mask] = (lo - hi) * _HALF_SQRT2
    return tuple(out)


def _cnot_photon_to_ancilla(v: Vec) -> Vec:
    return (v[0], v[1], v[3], v[2])


def _measure(v: Vec, idx: int, basis: Basis) -> list[tuple[int, Vec]]:
    """Unnormalized post-measurement vectors for each nonzero outcome."""
    n = 1 if len(v) == 2 else 2
    mask = 1 << (n - 1 - idx)
    if basis is Basis.X:
        v = _hadamard(v, idx)
    out = []
    for bit in (0, 1):
        proj = tuple(x if bool(i & mask) == bool(bit) else _ZERO for i, x in enumerate(v))
        if basis is Basis.X:
            proj = _hadamard(proj, idx)
        if _norm2(proj):
            out.append((bit, proj))
    return out


def _rest_after_photon(v: Vec, bit: int) -> Vec:
    """Vector of the remaining qubits once the photon sits in Z state ``bit``."""
    return (v[bit],) if len(v) == 2 else (v[2 * bit], v[2 * bit + 1])


def _photon_with_rest(bit: int, rest: Vec) -> Vec:
    photon = _ket(Basis.Z, bit)
    return tuple(p * r for p in photon for r in rest) if len(rest) == 2 else tuple(p * rest[0] for p in photon)


@dataclass(frozen=True)
class _Branch:
    weight: Fraction
    vec: Vec = ()
    basis: Optional[Basis] = None
    bit: Optional[int] = None
    mode: Optional[Mode] = None
    bob_bit: Optional[int] = None
    return_bit: Optional[int] = None
    eve_bit: Optional[int] = None
    eve_mode: Optional[Mode] = None
    shifted: bool = False
    from_bob: bool = False
    disclosed: bool = False


def _frac(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def _split(b: _Branch, p: Fraction, **changes) -> list[_Branch]:
    return [replace(b, weight=b.weight * p, **changes)] if p else []


# -- round steps -------------------------------------------------------------


def _alice(b: _Branch) -> list[_Branch]:
    q = Fraction(1, 4)
    return [
        replace(b, weight=b.weight * q, vec=_ket(basis, bit), basis=basis, bit=bit)
        for basis in (Basis.Z, Basis.X)
        for bit in (0, 1)
    ]


def _eve_forward(name: str):
    def step(b: _Branch) -> list[_Branch]:
        if name == "intercept_resend_forward":
            return [
                replace(b, vec=_photon_with_rest(m, _rest_after_photon(v, m)), eve_bit=m)
                for m, v in _measure(b.vec, 0, Basis.Z)
            ]
        if name == "tagging":
            joint = tuple(p * a for p in b.vec for a in (_ONE, _ZERO))
            return [replace(b, vec=_cnot_photon_to_ancilla(joint), shifted=True)]
        return [b]

    return step


def _noise(p: Fraction):
    def step(b: _Branch) -> list[_Branch]:
        out = _split(b, 1 - p)
        if p:
            for m, v in _measure(b.vec, 0, Basis.Z):
                rest = _rest_after_photon(v, m)
                for r in (0, 1):
                    out.append(replace(b, weight=b.weight * p / 2, vec=_photon_with_rest(r, rest)))
        return out

    return step


def _bob(sift_p: Fraction):
    def step(b: _Branch) -> list[_Branch]:
        out = _split(b, 1 - sift_p, mode=Mode.CTRL)
        if sift_p:
            for m, v in _measure(b.vec, 0, Basis.Z):
                out.append(
                    replace(
                        b,
                        weight=b.weight * sift_p,
                        vec=_photon_with_rest(m, _rest_after_photon(v, m)),
                        mode=Mode.SIFT,
                        bob_bit=m,
                        shifted=False,
                        from_bob=True,
                    )
                )
        return out

    return step


def _eve_return(name: str, d: Fraction, untag: bool):
    def step(b: _Branch) -> list[_Branch]:
        if name == "measure_return_z":
            return [replace(b, vec=v, eve_bit=m) for m, v in _measure(b.vec, 0, Basis.Z)]
        if name == "fingerprint":
            if not b.from_bob:
                return [b]
            out = _split(b, 1 - d)
            if d:
                out += [
                    replace(b, weight=b.weight * d, vec=v, eve_bit=m, eve_mode=Mode.SIFT)
                    for m, v in _measure(b.vec, 0, Basis.Z)
                ]
            return out
        if name == "tagging":
            if b.shifted:
                v = _cnot_photon_to_ancilla(b.vec)
                return [
                    replace(b, vec=(w[e], w[2 + e]), eve_mode=Mode.CTRL, shifted=not untag)
                    for e, w in _measure(v, 1, Basis.Z)
                ]
            return [
                replace(b, vec=(v[e], v[2 + e]), eve_bit=e, eve_mode=Mode.SIFT)
                for e, v in _measure(b.vec, 1, Basis.Z)
            ]
        return [b]

    return step


def _alice_verify(b: _Branch) -> list[_Branch]:
    basis = b.basis if b.mode is Mode.CTRL else Basis.Z
    return [replace(b, vec=v, return_bit=r) for r, v in _measure(b.vec, 0, basis)]


def _disclose(f: Fraction):
    def step(b: _Branch) -> list[_Branch]:
        if b.mode is Mode.SIFT and b.basis is Basis.Z:
            return _split(b, f, disclosed=True) + _split(b, 1 - f, disclosed=False)
        return [b]

    return step


@dataclass(frozen=True)
class RoundOutcome:
    category: RoundCategory
    alice_bit: int
    bob_bit: Optional[int]
    return_bit: int
    eve_bit: Optional[int]
    eve_mode: Optional[Mode]
    disclosed: bool

    @property
    def error(self) -> Optional[bool]:
        """Whether the category's check pair mismatches (``None`` for SIFT_X)."""
        if self.category is RoundCategory.SIFT_X:
            return None
        if self.category is RoundCategory.SIFT_Z:
            return self.alice_bit != self.bob_bit
        return self.alice_bit != self.return_bit


def round_distribution(config: RunConfig, budget: int = DEFAULT_BRANCH_BUDGET) -> tuple[dict[RoundOutcome, Fraction], int]:
    """Exact distribution of one round's classical outcome, and the leaf count."""
    strategy = config.strategy
    name = strategy.name
    d = _frac(getattr(strategy, "d", 0.0))
    p_noise = _frac(config.p_noise)
    steps = [
        _alice,
        _eve_forward(name),
        _noise(p_noise),
        _bob(_frac(config.sift_probability)),
        _eve_return(name, d, config.untag_on_return),
        _noise(p_noise),
        _alice_verify,
        _disclose(_frac(config.check_sample_fraction)),
    ]
    branches = [_Branch(weight=Fraction(1))]
    for step in steps:
        branches = [nb for b in branches for nb in step(b)]
        if len(branches) > budget:
            raise BranchBudgetExceeded(f"round tree exceeds {budget} leaves")

    dist: dict[RoundOutcome, Fraction] = defaultdict(Fraction)
    for b in branches:
        p = b.weight * _norm2(b.vec)
        if not p:
            continue
        key = RoundOutcome(
            RoundCategory.of(b.mode, b.basis), b.bit, b.bob_bit, b.return_bit, b.eve_bit, b.eve_mode, b.disclosed
        )
        dist[key] += p
    total = sum(dist.values())
    if total != 1:
        raise AssertionError(f"branch probabilities sum to {total}, not 1")
    return dict(dist), len(branches)


@dataclass
class ExactResult:
    rounds: int
    leaves: int
    category_probability: dict[RoundCategory, Fraction]
    error_probability: dict[RoundCategory, Optional[Fraction]]
    eve_bob_agreement: Optional[Fraction]
    eve_alice_agreement: Optional[Fraction]
    eve_known_probability: Optional[Fraction]
    mode_classification_accuracy: Optional[Fraction]
    abort_probability: Fraction
    run_eve_agreement: Optional[Fraction]
    distribution: dict[RoundOutcome, Fraction] = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        def fmt(x):
            return None if x is None else str(x)

        return {
            "rounds": self.rounds,
            "leaves": self.leaves,
            "category_probability": {c.value: fmt(p) for c, p in self.category_probability.items()},
            "error_probability": {c.value: fmt(p) for c, p in self.error_probability.items()},
            "eve_bob_agreement": fmt(self.eve_bob_agreement),
            "eve_alice_agreement": fmt(self.eve_alice_agreement),
            "eve_known_probability": fmt(self.eve_known_probability),
            "mode_classification_accuracy": fmt(self.mode_classification_accuracy),
            "abort_probability": fmt(self.abort_probability),
            "run_eve_agreement": fmt(self.run_eve_agreement),
        }


def _ratio(num: Fraction, den: Fraction) -> Optional[Fraction]:
    return num / den if den else None


def _per_round_summary(dist: dict[RoundOutcome, Fraction]):
    cat_p = {c: Fraction(0) for c in RoundCategory}
    err_p = {c: Fraction(0) for c in RoundCategory}
    sift = sift_logged = eve_bob = 0
    key = key_logged = eve_alice = 0
    classified = classified_right = 0
    for o, p in dist.items():
        cat_p[o.category] += p
        if o.error:
            err_p[o.category] += p
        mode = Mode.CTRL if o.category in (RoundCategory.CTRL_Z, RoundCategory.CTRL_X) else Mode.SIFT
        if mode is Mode.SIFT:
            sift += p
            if o.eve_bit is not None:
                sift_logged += p
                eve_bob += p if o.eve_bit == o.bob_bit else 0
        if o.category is RoundCategory.SIFT_Z:
            key += p
            if o.eve_bit is not None:
                key_logged += p
                eve_alice += p if o.eve_bit == o.alice_bit else 0
        if o.eve_mode is not None:
            classified += p
            classified_right += p if o.eve_mode is mode else 0
    error = {
        c: (None if c is RoundCategory.SIFT_X else _ratio(err_p[c], cat_p[c])) for c in RoundCategory
    }
    return (
        cat_p,
        error,
        _ratio(eve_bob, sift_logged),
        _ratio(eve_alice, key_logged),
        _ratio(key_logged, key),
        _ratio(classified_right, classified),
    )


def _run_level(dist: dict[RoundOutcome, Fraction], rounds: int, threshold: Fraction, budget: int):
    # Collapse each round to what the run-level statistics need, then fold
    # rounds together, merging branches that reach identical tallies.
    compact: dict[tuple, Fraction] = defaultdict(Fraction)
    for o, p in dist.items():
        checked = o.category in CHECK_CATEGORIES and (o.category is not RoundCategory.SIFT_Z or o.disclosed)
        slot = CHECK_CATEGORIES.index(o.category) if checked else None
        logged = o.category is RoundCategory.SIFT_Z and o.eve_bit is not None
        compact[slot, bool(checked and o.error), logged, logged and o.eve_bit == o.alice_bit] += p

    zero = (0, 0, 0)
    states: dict[tuple, Fraction] = {(zero, zero, 0, 0): Fraction(1)}
    walked = 0
    for _ in range(rounds):
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (checks, errors, logged, correct), p in states.items():
            for (slot, err, lg, ok), q in compact.items():
                walked += 1
                if walked > budget:
                    raise BranchBudgetExceeded(f"run tree exceeds {budget} branches")
                c, e = list(checks), list(errors)
                if slot is not None:
                    c[slot] += 1
                    e[slot] += err
                nxt[tuple(c), tuple(e), logged + lg, correct + ok] += p * q
        states = nxt

    abort = Fraction(0)
    defined = agree = Fraction(0)
    for (checks, errors, logged, correct), p in states.items():
        if any(n and Fraction(k, n) > threshold for n, k in zip(checks, errors)):
            abort += p
        if logged:
            defined += p
            agree += p * Fraction(correct, logged)
    return abort, _ratio(agree, defined)


def enumerate_exact(config: RunConfig, rounds: Optional[int] = None, budget: int = DEFAULT_BRANCH_BUDGET) -> ExactResult:
    """Exact per-category error probabilities and run-level expectations.

    The seed in ``config`` is ignored.  ``rounds`` defaults to
    ``config.rounds`` and may not exceed :data:`MAX_EXACT_ROUNDS`.
    """
    n = config.rounds if rounds is None else rounds
    if not 1 <= n <= MAX_EXACT_ROUNDS:
        raise ValueError(f"exact enumeration supports 1..{MAX_EXACT_ROUNDS} rounds, got {n}")
    dist, leaves = round_distribution(config, budget)
    cat_p, error, eve_bob, eve_alice, known, classify = _per_round_summary(dist)
    abort, run_agreement = _run_level(dist, n, _frac(config.qber_threshold), budget)
    return ExactResult(
        rounds=n,
        leaves=leaves,
        category_probability=cat_p,
        error_probability=error,
        eve_bob_agreement=eve_bob,
        eve_alice_agreement=eve_alice,
        eve_known_probability=known,
        mode_classification_accuracy=classify,
        abort_probability=abort,
        run_eve_agreement=run_agreement,
        distribution=dist,
    )
