"""Command line interface.

Subcommands:

- ``derive``      pick family parameters for a target collision bound
- ``preprocess``  build a challenge digest from a data file
- ``serve``       answer challenges for (a share of) a data file over TCP
- ``audit``       challenge provers over TCP and print the verdict
- ``experiment``  replay simulated audits against adversarial provers
- ``certify``     run a built-in self-check suite

Exit codes: 0 accepted/success, 1 rejected, 2 usage or protocol error,
3 undecidable audit, 4 I/O error.

Data files are raw bytes.  For the polynomial kind a file holds exactly
``count`` symbols, each big-endian in the smallest whole number of bytes
that fits the field; for karp-rabin the whole file is one big-endian
natural number (and the trivial variant splits the file into equal runs,
one number per prover).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import random
import sys
from fractions import Fraction
from pathlib import Path

from .adversary import (
    Honest,
    PartialCodeword,
    PartialRaw,
    UniformGuesser,
    Unresponsive,
    ZeroAnswerer,
    run_experiment,
)
from .codes import SystematicRSCode, rs_decode_errors_erasures, rs_encode_systematic
from .errors import ProtocolError, UsageError
from .hash_families import (
    KIND_KARP_RABIN,
    KIND_POLYNOMIAL,
    collision_probability_exact,
    derive_family,
    descriptor_from_bytes,
    descriptor_to_bytes,
    family_fingerprint,
    karp_rabin_family,
    message_space_size,
    polynomial_family,
)
from .protocol import (
    ChunkPlan,
    chunk_messages,
    digest_from_bytes,
    digest_payload_bits,
    digest_to_bytes,
    multi_linear_preprocess,
    multi_linear_verify,
    multi_rs_preprocess,
    multi_rs_verify,
    multi_trivial_preprocess,
    multi_trivial_verify,
    single_preprocess,
    single_verify,
)
from .transport import (
    ProverServer,
    honest_answerer,
    reset_consumed_digests,
    run_verifier_client,
)

_EXIT_BY_OUTCOME = {"accepted": 0, "rejected": 1, "undecidable": 3}


# --- data files --------------------------------------------------------------


def _symbol_byte_width(q: int) -> int:
    return ((q - 1).bit_length() + 7) // 8


def _read_polynomial_symbols(fam, raw: bytes, count: int) -> tuple:
    width = _symbol_byte_width(fam.q)
    if len(raw) != count * width:
        raise UsageError(
            f"data file holds {len(raw)} bytes; expected {count} symbols of "
            f"{width} byte(s) each ({count * width} bytes)"
        )
    symbols = []
    for i in range(count):
        value = int.from_bytes(raw[i * width:(i + 1) * width], "big")
        if value >= fam.q:
            raise UsageError(
                f"symbol {i + 1} is {value}, outside the field [0, {fam.q})"
            )
        symbols.append(value)
    return tuple(symbols)


def _read_message_file(fam, raw: bytes):
    if fam.kind == KIND_POLYNOMIAL:
        return _read_polynomial_symbols(fam, raw, fam.k)
    value = int.from_bytes(raw, "big")
    space = message_space_size(fam)
    if value >= space:
        raise UsageError(f"data value does not fit the message space [0, {space})")
    return value


def _read_chunked_file(fam, raw: bytes, provers: int):
    """Whole-message contents for the trivial variant: all chunks in order."""
    if fam.kind == KIND_POLYNOMIAL:
        return _read_polynomial_symbols(fam, raw, provers * fam.k)
    if provers < 1 or len(raw) % provers:
        raise UsageError(
            f"data file of {len(raw)} bytes does not split into {provers} equal runs"
        )
    run = len(raw) // provers
    space = message_space_size(fam)
    values = []
    for i in range(provers):
        value = int.from_bytes(raw[i * run:(i + 1) * run], "big")
        if value >= space:
            raise UsageError(
                f"chunk {i + 1} does not fit the message space [0, {space})"
            )
        values.append(value)
    return tuple(values)


def synthesize_message(fam, seed: int, count=None):
    """Deterministic pseudo-random message for experiments.

    ``count`` overrides the symbol count for the polynomial kind (the
    trivial variant hashes ``provers * k`` symbols) and gives the number of
    chunk values for karp-rabin.
    """
    label = f"storen.data:{seed}".encode()
    rng = random.Random(int.from_bytes(hashlib.sha256(label).digest(), "big"))
    if fam.kind == KIND_POLYNOMIAL:
        return tuple(rng.randrange(fam.q) for _ in range(count or fam.k))
    space = message_space_size(fam)
    if count is None:
        return rng.randrange(space)
    return tuple(rng.randrange(space) for _ in range(count))


# --- subcommands --------------------------------------------------------------


def _load_family(path: str):
    return descriptor_from_bytes(Path(path).read_bytes())


def _parse_hostport(text: str):
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise UsageError(f"prover address {text!r} is not host:port")
    try:
        return host, int(port)
    except ValueError:
        raise UsageError(f"prover address {text!r} has a non-numeric port")


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"--{flag} is required here")
    return value


def cmd_derive(args) -> int:
    fam = derive_family(args.kind, args.data_symbols, Fraction(args.epsilon))
    print(f"kind: {fam.kind}")
    print(f"data symbols: {fam.k}")
    print(f"challenges: {fam.n}")
    if fam.kind == KIND_POLYNOMIAL:
        print(f"field size: {fam.q}")
    else:
        print(f"largest prime: {fam.primes[-1]}")
    print(f"collision bound: {fam.epsilon_actual}")
    print(f"challenge bits: {fam.challenge_bits}")
    print(f"symbol bits: {fam.symbol_bits}")
    print(f"fingerprint: {family_fingerprint(fam).hex()}")
    if args.out:
        Path(args.out).write_bytes(descriptor_to_bytes(fam))
        print(f"descriptor: {args.out}")
    return 0


def cmd_preprocess(args) -> int:
    fam = _load_family(args.family)
    raw = Path(args.data).read_bytes()
    if args.variant == "single":
        provers = 1
        digest = single_preprocess(fam, _read_message_file(fam, raw), args.seed)
    elif args.variant == "trivial":
        provers = _require(args.provers, "provers")
        plan = ChunkPlan(provers, provers * fam.k if fam.kind == KIND_POLYNOMIAL else provers)
        x = _read_chunked_file(fam, raw, provers)
        digest = multi_trivial_preprocess(fam, x, plan, args.seed)
    else:
        provers = _require(args.provers, "provers")
        plan = ChunkPlan(provers, fam.k)
        x = _read_message_file(fam, raw)
        if args.variant == "linear":
            digest = multi_linear_preprocess(fam, x, plan, args.seed)
        else:
            r = _require(args.r, "r")
            e = _require(args.e, "e")
            digest = multi_rs_preprocess(fam, x, plan, r, e, args.seed)
    Path(args.out).write_bytes(digest_to_bytes(digest))
    print(f"variant: {digest.variant}")
    print(f"provers: {provers}")
    print(f"payload bits: {digest_payload_bits(digest)}")
    print(f"digest: {args.out}")
    return 0


def cmd_audit(args) -> int:
    digest = digest_from_bytes(Path(args.digest).read_bytes())
    if args.family:
        digest = digest.with_family(_load_family(args.family))
    addresses = [_parse_hostport(p) for p in args.prover]
    verdict = run_verifier_client(
        digest, addresses, r=args.r, e=args.e, timeout_ms=args.timeout_ms
    )
    print(f"outcome: {verdict.outcome}")
    if verdict.accused:
        print("accused: " + " ".join(str(i) for i in sorted(verdict.accused)))
    if verdict.erased:
        print("erased: " + " ".join(str(i) for i in sorted(verdict.erased)))
    return _EXIT_BY_OUTCOME[verdict.outcome]


def cmd_serve(args) -> int:
    fam = _load_family(args.family)
    raw = Path(args.data).read_bytes()
    if args.variant == "single":
        answer = honest_answerer(fam, _read_message_file(fam, raw))
    elif args.variant == "trivial":
        chunks = _require(args.chunks, "chunks")
        index = _require(args.chunk_index, "chunk-index")
        whole = _read_chunked_file(fam, raw, chunks)
        plan = ChunkPlan(chunks, chunks * fam.k if fam.kind == KIND_POLYNOMIAL else chunks)
        answer = honest_answerer(fam, chunk_messages(fam, whole, plan)[index - 1])
    else:
        chunks = _require(args.chunks, "chunks")
        index = _require(args.chunk_index, "chunk-index")
        plan = ChunkPlan(chunks, fam.k)
        x = _read_message_file(fam, raw)
        answer = honest_answerer(fam, plan.zero_extended(x, index))
    server = ProverServer(
        fam,
        answer,
        host=args.host,
        port=args.port,
        silent=args.silent,
        max_sessions=args.max_sessions,
    )
    server.start()
    try:
        host, port = server.address
        print(f"listening on {host}:{port}", flush=True)
        server.wait_closed()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


_EXPERIMENT_KEYS = {
    "kind", "k", "epsilon", "variant", "strategy", "t", "trials", "seed",
    "s", "r", "e",
}


def _parse_experiment_config(pairs) -> dict:
    config = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"expected key=value, got {item!r}")
        if key not in _EXPERIMENT_KEYS:
            raise UsageError(f"unknown experiment key {key!r}")
        if key in config:
            raise UsageError(f"duplicate experiment key {key!r}")
        config[key] = value
    for key in ("kind", "k", "epsilon", "strategy", "trials", "seed"):
        if key not in config:
            raise UsageError(f"experiment key {key!r} is required")
    return config


def cmd_experiment(args) -> int:
    config = _parse_experiment_config(args.config)
    try:
        k = int(config["k"])
        trials = int(config["trials"])
        seed = int(config["seed"])
        epsilon = Fraction(config["epsilon"])
        t_values = [int(v) for v in config["t"].split(",")] if "t" in config else None
        s = int(config["s"]) if "s" in config else None
        r = int(config["r"]) if "r" in config else None
        e = int(config["e"]) if "e" in config else None
    except ValueError as exc:
        raise UsageError(f"bad experiment value: {exc}")
    variant = config.get("variant", "single")
    fam = derive_family(config["kind"], k, epsilon)

    plan = None
    if variant == "single":
        x = synthesize_message(fam, seed)
    elif variant == "trivial":
        s = _require(s, "s")
        if fam.kind == KIND_POLYNOMIAL:
            plan = ChunkPlan(s, s * fam.k)
            x = synthesize_message(fam, seed, count=plan.symbols)
        else:
            plan = ChunkPlan(s, s)
            x = synthesize_message(fam, seed, count=s)
    elif variant in ("linear", "rs-parity"):
        s = _require(s, "s")
        plan = ChunkPlan(s, fam.k)
        x = synthesize_message(fam, seed)
    else:
        raise UsageError(f"unknown variant {config.get('variant')!r}")

    name = config["strategy"]
    if name in ("partial-codeword", "partial-raw"):
        if not t_values:
            raise UsageError(f"strategy {name!r} needs t=<comma separated counts>")
        cls = PartialCodeword if name == "partial-codeword" else PartialRaw
        plans = [(str(t), cls(t)) for t in t_values]
    else:
        flat = {
            "honest": Honest(),
            "uniform": UniformGuesser(),
            "zero": ZeroAnswerer(),
            "unresponsive": Unresponsive(),
        }
        if name not in flat:
            raise UsageError(f"unknown strategy {name!r}")
        plans = [("", flat[name])]

    writer = csv.writer(sys.stdout)
    writer.writerow(["t", "retained_bits", "trials", "passes",
                     "empirical_rate", "analytic_rate"])
    for t_label, strategy in plans:
        report = run_experiment(
            fam, x, strategy, trials, seed, variant=variant, plan=plan, r=r, e=e
        )
        writer.writerow([
            t_label,
            report.retained_bits,
            report.trials,
            report.passes,
            str(report.empirical_rate),
            "" if report.analytic_rate is None else str(report.analytic_rate),
        ])
    return 0


def cmd_certify(args) -> int:
    reset_consumed_digests()
    failures = 0

    def check(label: str, ok: bool):
        nonlocal failures
        print(("ok - " if ok else "FAIL - ") + label)
        failures += 0 if ok else 1

    fam = derive_family(KIND_POLYNOMIAL, 2, Fraction(4, 5))
    expected_n = 5 if args.sabotage else 4
    check("parameter derivation fixed point", fam.n == expected_n and fam.q == 5)

    poly = polynomial_family(k=2, n=4, q=5)
    kr = karp_rabin_family(k=2, n=4)
    check(
        "exact collision probability within bound",
        collision_probability_exact(poly) <= Fraction(1, 4)
        and collision_probability_exact(kr) <= Fraction(1, 4),
    )

    code = SystematicRSCode(2, 6, 7)
    word = list(rs_encode_systematic(code, (2, 5)))
    word[0] = (word[0] + 3) % 7
    word[4] = None
    check(
        "decoder repairs an error and an erasure",
        rs_decode_errors_erasures(code, word) == ((2, 5), frozenset({1})),
    )

    x = (1, 2)
    plan = ChunkPlan(2, 2)
    chunk_fam = polynomial_family(k=1, n=4, q=5)
    d1 = single_preprocess(poly, x, 0)
    d2 = multi_trivial_preprocess(chunk_fam, x, plan, 0)
    from .hash_families import hash_eval

    d3 = multi_linear_preprocess(poly, x, plan, 0)
    d4 = multi_rs_preprocess(poly, x, plan, 1, 0, 0)
    honest = lambda fam_, msg, beta: hash_eval(fam_, msg, beta)
    check(
        "all variants accept honest answers",
        single_verify(d1, honest(poly, x, d1.beta)).accepted
        and multi_trivial_verify(
            d2, tuple(honest(chunk_fam, (sym,), d2.beta) for sym in x)
        ).accepted
        and multi_linear_verify(
            d3, tuple(honest(poly, plan.zero_extended(x, i), d3.beta) for i in (1, 2))
        ).accepted
        and multi_rs_verify(
            d4, tuple(honest(poly, plan.zero_extended(x, i), d4.beta) for i in (1, 2))
        ).accepted,
    )

    digest = single_preprocess(poly, x, 1)
    with ProverServer(poly, honest_answerer(poly, x)) as server:
        verdict = run_verifier_client(digest, [server.address])
    check("tcp loopback audit accepts", verdict.accepted)

    guess_fam = derive_family(KIND_POLYNOMIAL, 2, Fraction(1, 2))
    report = run_experiment(
        guess_fam, synthesize_message(guess_fam, 0), UniformGuesser(),
        trials=2000, master_seed=0,
    )
    p = float(report.analytic_rate)
    slack = 3 * (p * (1 - p) / 2000) ** 0.5
    check(
        "guessing matches its analytic rate",
        abs(float(report.empirical_rate) - p) <= slack,
    )

    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storen",
        description="Storage audits from almost-universal hashing: derive "
        "parameters, build digests, serve and audit provers, and run "
        "adversary experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="pick family parameters for a collision bound")
    p.add_argument("--kind", choices=[KIND_POLYNOMIAL, KIND_KARP_RABIN], required=True)
    p.add_argument("--data-symbols", type=int, required=True,
                   help="message length k (symbols for polynomial, primes for karp-rabin)")
    p.add_argument("--epsilon", required=True,
                   help="target bound, e.g. 1/4 (the certified list-decoding "
                   "radius fraction is 1-epsilon)")
    p.add_argument("--out", help="write the 25-byte family descriptor here")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("preprocess", help="build a challenge digest from a data file")
    p.add_argument("--family", required=True, help="family descriptor file")
    p.add_argument("--variant", required=True,
                   choices=["single", "trivial", "linear", "rs-parity"])
    p.add_argument("--data", required=True, help="data file")
    p.add_argument("--seed", type=int, required=True, help="challenge sampling seed")
    p.add_argument("--out", required=True, help="digest file to write")
    p.add_argument("--provers", type=int, help="prover count s (multi-prover variants)")
    p.add_argument("--r", type=int, help="cheater budget (rs-parity)")
    p.add_argument("--e", type=int, help="silence budget (rs-parity)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("audit", help="challenge provers over TCP")
    p.add_argument("--digest", required=True, help="digest file")
    p.add_argument("--family", help="family descriptor file (needed for "
                   "linear/rs-parity and for answer range checks)")
    p.add_argument("--prover", action="append", required=True,
                   help="host:port, one per prover in prover order")
    p.add_argument("--r", type=int, help="cheater budget (rs-parity)")
    p.add_argument("--e", type=int, help="silence budget (rs-parity)")
    p.add_argument("--timeout-ms", type=int, help="per-prover network timeout")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("serve", help="answer challenges for a data file")
    p.add_argument("--family", required=True, help="family descriptor file")
    p.add_argument("--data", required=True, help="data file (the whole message)")
    p.add_argument("--variant", default="single",
                   choices=["single", "trivial", "linear", "rs-parity"])
    p.add_argument("--chunks", type=int, help="total provers s (multi-prover variants)")
    p.add_argument("--chunk-index", type=int, help="this prover's 1-based index")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0, help="0 picks a free port")
    p.add_argument("--max-sessions", type=int,
                   help="shut down after this many connections")
    p.add_argument("--silent", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("experiment", help="simulate audits against adversaries")
    p.add_argument("config", nargs="+",
                   help="key=value pairs: kind, k, epsilon, strategy, trials, "
                   "seed are required; variant, t (comma list), s, r, e optional")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("certify", help="run the built-in self-check suite")
    p.add_argument("--sabotage", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_certify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (UsageError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
