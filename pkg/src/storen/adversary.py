"""Adversarial prover strategies and the audit simulation harness.

A *strategy* is a frozen description of what a prover keeps and how it
answers challenges.  :func:`build_store` turns a strategy into a
:class:`ProverStore` whose ``retained_bits`` counts exactly the payload the
prover keeps: zero for stores that keep nothing, otherwise a 40-bit header
(one tag byte plus a 32-bit symbol count) plus the sum of per-symbol widths.
This makes retention strictly monotone in the number of kept symbols.

:func:`run_experiment` replays many independent audits against a strategy
and reports empirical pass rates next to exact analytic ones.  Trials are
reproducible: trial ``i`` of master seed ``m`` uses the seed
``sha256("storen.trial:m:i")`` (as a big-endian integer), the challenge is
drawn first, then prover answers in prover order.  Stores draw from the
trial generator only when they guess.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union

from .codes import SystematicRSCode, encode, rs_encode_systematic
from .errors import UnsupportedVariantError, UsageError
from .hash_families import (
    KIND_POLYNOMIAL,
    HashFamilyDescriptor,
    Message,
    validate_message,
)
from .protocol import (
    RNG_ALGORITHM,
    VARIANT_LINEAR,
    VARIANT_RS,
    VARIANT_SINGLE,
    VARIANT_TRIVIAL,
    ChunkPlan,
    Digest,
    chunk_messages,
    multi_linear_verify,
    multi_rs_verify,
    multi_trivial_verify,
    single_verify,
)
from .hash_families import family_fingerprint

_HEADER_BITS = 40  # tag byte + u32 symbol count, charged once per non-empty store


class Strategy:
    """Marker base class for prover strategies."""


@dataclass(frozen=True)
class Honest(Strategy):
    """Keeps the whole message and always answers correctly."""


@dataclass(frozen=True)
class PartialCodeword(Strategy):
    """Keeps the first ``t`` hash values and guesses uniformly elsewhere."""

    t: int

    def __post_init__(self):
        if self.t < 0:
            raise UsageError("t must be non-negative")


@dataclass(frozen=True)
class PartialRaw(Strategy):
    """Keeps the first ``t`` message symbols (polynomial kind only) and
    answers with the hash of the prefix plus a uniformly guessed suffix."""

    t: int

    def __post_init__(self):
        if self.t < 0:
            raise UsageError("t must be non-negative")


@dataclass(frozen=True)
class UniformGuesser(Strategy):
    """Keeps nothing; answers a uniform element of the challenge alphabet."""


@dataclass(frozen=True)
class ZeroAnswerer(Strategy):
    """Keeps nothing; always answers zero."""


@dataclass(frozen=True)
class Unresponsive(Strategy):
    """Keeps the whole message but stays silent with the given probability
    (silent every time by default); answers honestly otherwise."""

    probability: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise UsageError("probability must lie in [0, 1]")


@dataclass(frozen=True)
class Colluding(Strategy):
    """Multi-prover meta-strategy: the listed 1-based provers run ``inner``,
    everyone else is honest."""

    members: frozenset
    inner: Strategy

    def __post_init__(self):
        if not isinstance(self.members, frozenset):
            object.__setattr__(self, "members", frozenset(self.members))
        if isinstance(self.inner, Colluding):
            raise UsageError("colluding strategies do not nest")


def per_prover_strategies(provers: int, strategy) -> Tuple[Strategy, ...]:
    """Expand a strategy assignment into one concrete strategy per prover.

    Accepts a single strategy (applied to every prover), a
    :class:`Colluding` wrapper, or an explicit sequence of ``provers``
    strategies.
    """
    if isinstance(strategy, Colluding):
        if not all(isinstance(m, int) and 1 <= m <= provers for m in strategy.members):
            raise UsageError(f"colluder indices must lie in 1..{provers}")
        return tuple(
            strategy.inner if i in strategy.members else Honest()
            for i in range(1, provers + 1)
        )
    if isinstance(strategy, Strategy):
        return (strategy,) * provers
    strategies = tuple(strategy)
    if len(strategies) != provers:
        raise UsageError(f"expected {provers} strategies, got {len(strategies)}")
    for s in strategies:
        if not isinstance(s, Strategy) or isinstance(s, Colluding):
            raise UsageError("per-prover entries must be concrete strategies")
    return strategies


# --- stores -----------------------------------------------------------------


class ProverStore:
    """What one prover keeps, plus its answering behavior.

    ``stored`` is the list of ``(width_bits, value)`` symbols the prover
    physically retains; ``retained_bits`` is 0 for an empty store and
    header + sum of widths otherwise.
    """

    def __init__(self, fam: HashFamilyDescriptor, stored):
        self.family = fam
        self.stored = list(stored)

    @property
    def retained_bits(self) -> int:
        if not self.stored:
            return 0
        return _HEADER_BITS + sum(width for width, _ in self.stored)

    def answer(self, beta: int, rng: random.Random) -> Optional[int]:
        raise NotImplementedError


def _symbol_width(fam: HashFamilyDescriptor) -> int:
    return (fam.q - 1).bit_length()


def _payload_symbols(fam: HashFamilyDescriptor, x) -> list:
    """(width, value) pairs for the raw data an honest prover keeps."""
    if fam.kind == KIND_POLYNOMIAL:
        width = _symbol_width(fam)
        return [(width, sym) for sym in validate_message(fam, x)]
    value = validate_message(fam, x)
    space = 1
    for p in fam.message_primes:
        space *= p
    return [((space - 1).bit_length(), value)]


class _HonestStore(ProverStore):
    def __init__(self, fam, x, stored):
        super().__init__(fam, stored)
        self._codeword = encode(fam, x)

    def answer(self, beta, rng):
        return self._codeword[beta - 1]


class _PartialCodewordStore(ProverStore):
    def __init__(self, fam, x, t):
        codeword = encode(fam, x)
        stored = [
            ((fam.alphabet(i) - 1).bit_length(), codeword[i - 1])
            for i in range(1, t + 1)
        ]
        super().__init__(fam, stored)
        self._prefix = codeword[:t]

    def answer(self, beta, rng):
        if beta <= len(self._prefix):
            return self._prefix[beta - 1]
        return rng.randrange(self.family.alphabet(beta))


class _PartialRawStore(ProverStore):
    def __init__(self, fam, x, t):
        symbols = validate_message(fam, x)
        width = _symbol_width(fam)
        super().__init__(fam, [(width, sym) for sym in symbols[:t]])
        self._prefix = symbols[:t]
        self._k = fam.k

    def answer(self, beta, rng):
        q = self.family.q
        point = beta - 1
        value = 0
        for coeff in reversed(self._prefix):
            value = (value * point + coeff) % q
        t = len(self._prefix)
        if t == self._k:
            return value
        if point == 0:
            # the suffix never reaches the evaluation point 0; the prefix
            # pins the answer when it covers the constant term
            return value if t >= 1 else rng.randrange(q)
        # a uniform suffix contributes a uniform field element at any
        # nonzero point, so one draw suffices
        return (value + rng.randrange(q)) % q


class _UniformStore(ProverStore):
    def __init__(self, fam):
        super().__init__(fam, [])

    def answer(self, beta, rng):
        return rng.randrange(self.family.alphabet(beta))


class _ZeroStore(ProverStore):
    def __init__(self, fam):
        super().__init__(fam, [])

    def answer(self, beta, rng):
        return 0


class _UnresponsiveStore(ProverStore):
    def __init__(self, fam, x, stored, probability):
        super().__init__(fam, stored)
        self._codeword = encode(fam, x)
        self._probability = probability

    def answer(self, beta, rng):
        if rng.random() < self._probability:
            return None
        return self._codeword[beta - 1]


def build_store(
    fam: HashFamilyDescriptor,
    x: Message,
    strategy: Strategy,
    retained_payload=None,
) -> ProverStore:
    """Materialize a strategy into a store over message ``x``.

    ``retained_payload`` overrides the raw symbols an honest (or
    unresponsive) prover is charged with keeping — multi-prover engines pass
    the prover's own chunk here when ``x`` is a zero-extended message.
    """
    if isinstance(strategy, Colluding):
        raise UsageError("colluding is a multi-prover wrapper; expand it first")
    if not isinstance(strategy, Strategy):
        raise UsageError(f"not a strategy: {strategy!r}")
    if retained_payload is None:
        payload = _payload_symbols(fam, x)
    else:
        width = _symbol_width(fam)
        payload = [(width, sym) for sym in retained_payload]
    if isinstance(strategy, Honest):
        return _HonestStore(fam, x, payload)
    if isinstance(strategy, Unresponsive):
        return _UnresponsiveStore(fam, x, payload, strategy.probability)
    if isinstance(strategy, PartialCodeword):
        if strategy.t > fam.n:
            raise UsageError(f"t={strategy.t} exceeds the family size n={fam.n}")
        return _PartialCodewordStore(fam, x, strategy.t)
    if isinstance(strategy, PartialRaw):
        if fam.kind != KIND_POLYNOMIAL:
            raise UnsupportedVariantError(
                "raw-prefix retention is defined for the polynomial kind only"
            )
        if strategy.t > fam.k:
            raise UsageError(f"t={strategy.t} exceeds the message length k={fam.k}")
        return _PartialRawStore(fam, x, strategy.t)
    if isinstance(strategy, UniformGuesser):
        return _UniformStore(fam)
    if isinstance(strategy, ZeroAnswerer):
        return _ZeroStore(fam)
    raise UsageError(f"unknown strategy {strategy!r}")


# --- analytics --------------------------------------------------------------


def analytic_pass_rate(
    fam: HashFamilyDescriptor,
    x: Message,
    strategy,
    variant: str = VARIANT_SINGLE,
    plan: Optional[ChunkPlan] = None,
) -> Optional[Fraction]:
    """Exact pass probability over the challenge draw (and any guessing).

    Covers every single-prover strategy.  For multi-prover variants only the
    all-honest population has a pinned closed form (1); anything else
    returns None and must be measured empirically.
    """
    if variant != VARIANT_SINGLE:
        if plan is None:
            raise UsageError("multi-prover variants need a chunk plan")
        strategies = per_prover_strategies(plan.provers, strategy)
        if all(isinstance(s, Honest) for s in strategies):
            return Fraction(1)
        return None
    n = fam.n
    if isinstance(strategy, Honest):
        return Fraction(1)
    if isinstance(strategy, PartialCodeword):
        t = min(strategy.t, n)
        hit = Fraction(t, n)
        guess = sum(
            (Fraction(1, fam.alphabet(i)) for i in range(t + 1, n + 1)),
            Fraction(0),
        )
        return hit + guess / n
    if isinstance(strategy, PartialRaw):
        if strategy.t == fam.k:
            return Fraction(1)
        determined = 1 if strategy.t >= 1 else 0
        return Fraction(determined, n) + Fraction(n - determined, n) / fam.q
    if isinstance(strategy, UniformGuesser):
        return sum(
            (Fraction(1, fam.alphabet(i)) for i in range(1, n + 1)), Fraction(0)
        ) / n
    if isinstance(strategy, ZeroAnswerer):
        zeros = sum(1 for value in encode(fam, x) if value == 0)
        return Fraction(zeros, n)
    if isinstance(strategy, Unresponsive):
        return 1 - Fraction(strategy.probability)
    if isinstance(strategy, Colluding):
        raise UsageError("colluding applies to multi-prover variants only")
    raise UsageError(f"unknown strategy {strategy!r}")


# --- experiment engine ------------------------------------------------------


def trial_seed(master_seed: int, index: int) -> int:
    """Derived seed for trial ``index``: sha256 of a namespaced label."""
    label = f"storen.trial:{master_seed}:{index}".encode()
    return int.from_bytes(hashlib.sha256(label).digest(), "big")


@dataclass(frozen=True)
class ExperimentReport:
    """Outcome counts of one strategy replayed over many audits."""

    variant: str
    strategy_label: str
    trials: int
    passes: int
    undecidable: int
    retained_bits: int
    empirical_rate: Fraction
    analytic_rate: Optional[Fraction]
    accused_counts: Tuple[int, ...]
    master_seed: int
    rng_algorithm: str = RNG_ALGORITHM


def run_experiment(
    fam: HashFamilyDescriptor,
    x: Message,
    strategy,
    trials: int,
    master_seed: int,
    variant: str = VARIANT_SINGLE,
    plan: Optional[ChunkPlan] = None,
    r: Optional[int] = None,
    e: Optional[int] = None,
) -> ExperimentReport:
    """Replay ``trials`` independent audits of one strategy.

    Each trial draws a fresh challenge with the pinned trial-seed recipe,
    builds the verifier digest from codewords precomputed once, collects the
    answers, and runs the real verifier.  ``retained_bits`` totals the
    stores across all provers.
    """
    if trials < 1:
        raise UsageError("at least one trial required")
    if variant == VARIANT_SINGLE:
        if plan is not None:
            raise UsageError("the single variant takes no chunk plan")
        provers = 1
    elif variant in (VARIANT_TRIVIAL, VARIANT_LINEAR, VARIANT_RS):
        if plan is None:
            raise UsageError(f"the {variant} variant needs a chunk plan")
        provers = plan.provers
    else:
        raise UsageError(f"unknown variant {variant!r}")

    fingerprint = family_fingerprint(fam)
    if variant == VARIANT_SINGLE:
        stores = [build_store(fam, x, strategy)]
        codeword = encode(fam, x)

        def digest_for(beta):
            return Digest(VARIANT_SINGLE, beta, (codeword[beta - 1],), fingerprint, family=fam)

        def verify(digest, answers):
            return single_verify(digest, answers[0])

    elif variant == VARIANT_TRIVIAL:
        strategies = per_prover_strategies(provers, strategy)
        chunks = chunk_messages(fam, x, plan)
        stores = [build_store(fam, c, s) for c, s in zip(chunks, strategies)]
        chunk_codewords = [encode(fam, c) for c in chunks]

        def digest_for(beta):
            gammas = tuple(cw[beta - 1] for cw in chunk_codewords)
            return Digest(VARIANT_TRIVIAL, beta, gammas, fingerprint, family=fam)

        verify = multi_trivial_verify

    else:  # linear or rs-parity
        if fam.kind != KIND_POLYNOMIAL:
            raise UnsupportedVariantError(
                f"the {variant} variant needs the polynomial kind"
            )
        if plan.symbols != fam.k:
            raise UsageError(
                f"plan covers {plan.symbols} symbols but the family hashes {fam.k}"
            )
        strategies = per_prover_strategies(provers, strategy)
        symbols = validate_message(fam, x)
        stores = []
        part_codewords = []
        for i, strat in enumerate(strategies, start=1):
            extended = plan.zero_extended(symbols, i)
            start, stop = plan.bounds(i)
            stores.append(
                build_store(fam, extended, strat, retained_payload=symbols[start:stop])
            )
            part_codewords.append(encode(fam, extended))
        if variant == VARIANT_LINEAR:
            full_codeword = encode(fam, symbols)

            def digest_for(beta):
                return Digest(
                    VARIANT_LINEAR, beta, (full_codeword[beta - 1],), fingerprint,
                    family=fam,
                )

            verify = multi_linear_verify
        else:
            if r is None or e is None:
                raise UsageError("the rs-parity variant needs r and e")
            code = SystematicRSCode(provers, provers + 2 * r + e, fam.q)

            def digest_for(beta):
                v = [cw[beta - 1] for cw in part_codewords]
                gammas = rs_encode_systematic(code, v)[provers:]
                return Digest(
                    VARIANT_RS, beta, gammas, fingerprint, family=fam,
                    parity_budget=(r, e),
                )

            verify = multi_rs_verify

    passes = undecidable = 0
    accused_counts = [0] * provers
    n = fam.n
    for index in range(trials):
        rng = random.Random(trial_seed(master_seed, index))
        beta = rng.randrange(n) + 1
        digest = digest_for(beta)
        answers = tuple(store.answer(beta, rng) for store in stores)
        verdict = verify(digest, answers)
        if verdict.accepted:
            passes += 1
        elif verdict.outcome == "undecidable":
            undecidable += 1
        for accused in verdict.accused:
            accused_counts[accused - 1] += 1

    return ExperimentReport(
        variant=variant,
        strategy_label=repr(strategy),
        trials=trials,
        passes=passes,
        undecidable=undecidable,
        retained_bits=sum(store.retained_bits for store in stores),
        empirical_rate=Fraction(passes, trials),
        analytic_rate=analytic_pass_rate(fam, x, strategy, variant, plan),
        accused_counts=tuple(accused_counts),
        master_seed=master_seed,
    )


def sweep(
    fam: HashFamilyDescriptor,
    x: Message,
    strategies: Sequence,
    trials: int,
    master_seed: int,
    variant: str = VARIANT_SINGLE,
    plan: Optional[ChunkPlan] = None,
    r: Optional[int] = None,
    e: Optional[int] = None,
) -> list:
    """Run one experiment per strategy.  Every strategy replays the same
    challenge sequence (common random numbers), which makes rate comparisons
    across strategies sharper."""
    return [
        run_experiment(fam, x, s, trials, master_seed, variant, plan, r, e)
        for s in strategies
    ]
