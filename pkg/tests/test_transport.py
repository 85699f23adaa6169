import socket
import struct
import time

import pytest

from storen.codes import encode
from storen.errors import ProtocolError, UsageError
from storen.hash_families import (
    family_fingerprint,
    hash_eval,
    karp_rabin_family,
    polynomial_family,
)
from storen.protocol import (
    ChunkPlan,
    multi_linear_preprocess,
    multi_rs_preprocess,
    multi_rs_verify,
    multi_trivial_preprocess,
    multi_trivial_verify,
    single_preprocess,
)
from storen.transport import (
    ERR_FINGERPRINT,
    ERR_MALFORMED,
    ERR_UNEXPECTED,
    ERR_VERSION,
    FRAME_CHALLENGE,
    FRAME_ERROR,
    FRAME_HELLO,
    PROTOCOL_VERSION,
    ProverServer,
    encode_challenge,
    encode_error,
    encode_hello,
    encode_no_response,
    encode_response,
    honest_answerer,
    query_prover,
    reset_consumed_digests,
    run_verifier_client,
)

FAM = polynomial_family(k=2, n=5, q=5)
X = (1, 2)


@pytest.fixture(autouse=True)
def _fresh_digest_registry():
    reset_consumed_digests()
    yield
    reset_consumed_digests()


def _recv_exact(sock, count):
    data = b""
    while len(data) < count:
        chunk = sock.recv(count - len(data))
        if not chunk:
            raise AssertionError("peer closed early")
        data += chunk
    return data


def test_frame_golden_bytes():
    assert encode_challenge(4) == bytes([0x01, 4, 0, 0, 0, 0, 0, 0, 0])
    assert encode_response(2) == bytes([0x02, 2, 0, 0, 0, 0, 0, 0, 0])
    assert encode_no_response() == bytes([0x03])
    assert encode_error(ERR_VERSION) == bytes([0x7F, 4, 0])
    hello = encode_hello(PROTOCOL_VERSION, b"\x00" * 32)
    assert len(hello) == 35
    assert hello[0] == FRAME_HELLO
    assert hello[1:3] == struct.pack("<H", 1)


def test_end_to_end_single_accepts():
    digest = single_preprocess(FAM, X, 0)
    with ProverServer(FAM, honest_answerer(FAM, X)) as server:
        verdict = run_verifier_client(digest, [server.address])
    assert verdict.accepted


def test_end_to_end_single_rejects_wrong_answer():
    seed = next(
        s for s in range(100) if single_preprocess(FAM, X, s).gammas[0] != 0
    )
    digest = single_preprocess(FAM, X, seed)
    with ProverServer(FAM, lambda beta: 0) as server:
        verdict = run_verifier_client(digest, [server.address])
    assert (verdict.outcome, verdict.accused) == ("rejected", frozenset({1}))


def test_silent_server_is_an_erasure():
    digest = single_preprocess(FAM, X, 1)
    with ProverServer(FAM, honest_answerer(FAM, X), silent=True) as server:
        started = time.monotonic()
        verdict = run_verifier_client(digest, [server.address], timeout_ms=400)
        elapsed = time.monotonic() - started
    assert (verdict.outcome, verdict.erased) == ("rejected", frozenset({1}))
    assert 0.3 <= elapsed < 3.0


def test_timeout_env_var(monkeypatch):
    monkeypatch.setenv("STOREN_TIMEOUT_MS", "300")
    digest = single_preprocess(FAM, X, 2)
    with ProverServer(FAM, honest_answerer(FAM, X), silent=True) as server:
        started = time.monotonic()
        verdict = run_verifier_client(digest, [server.address])
        elapsed = time.monotonic() - started
    assert verdict.erased == frozenset({1})
    assert elapsed < 2.0


def test_unreachable_prover_is_an_erasure():
    digest = single_preprocess(FAM, X, 3)
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        unused = probe.getsockname()
    verdict = run_verifier_client(digest, [unused], timeout_ms=500)
    assert verdict.erased == frozenset({1})


def test_fingerprint_mismatch_raises():
    other = karp_rabin_family(k=2, n=4)
    digest = single_preprocess(other, 4, 0)
    with ProverServer(FAM, honest_answerer(FAM, X)) as server:
        with pytest.raises(ProtocolError):
            run_verifier_client(digest, [server.address])


def test_out_of_alphabet_answer_raises():
    digest = single_preprocess(FAM, X, 4)
    with ProverServer(FAM, lambda beta: 9) as server:
        with pytest.raises(ProtocolError):
            run_verifier_client(digest, [server.address])


def test_server_error_frames_for_bad_clients():
    fp = family_fingerprint(FAM)
    with ProverServer(FAM, honest_answerer(FAM, X)) as server:
        # version from the future
        with socket.create_connection(server.address, timeout=2) as sock:
            sock.sendall(encode_hello(9, fp))
            reply = _recv_exact(sock, 3)
            assert reply == encode_error(ERR_VERSION)
        # skipping the handshake
        with socket.create_connection(server.address, timeout=2) as sock:
            sock.sendall(encode_challenge(1))
            assert _recv_exact(sock, 3) == encode_error(ERR_UNEXPECTED)
        # wrong fingerprint
        with socket.create_connection(server.address, timeout=2) as sock:
            sock.sendall(encode_hello(PROTOCOL_VERSION, b"\xEE" * 32))
            assert _recv_exact(sock, 3) == encode_error(ERR_FINGERPRINT)
        # challenge outside 1..n
        with socket.create_connection(server.address, timeout=2) as sock:
            sock.sendall(encode_hello(PROTOCOL_VERSION, fp))
            assert _recv_exact(sock, 35)[0] == FRAME_HELLO
            sock.sendall(encode_challenge(99))
            assert _recv_exact(sock, 3) == encode_error(ERR_MALFORMED)


def test_query_prover_surfaces_error_frames():
    fp = family_fingerprint(FAM)
    with ProverServer(FAM, honest_answerer(FAM, X)) as server:
        with pytest.raises(ProtocolError):
            query_prover(server.address, 99, fp, timeout_ms=2000)


def test_digest_is_single_use():
    digest = single_preprocess(FAM, X, 5)
    with ProverServer(FAM, honest_answerer(FAM, X)) as server:
        assert run_verifier_client(digest, [server.address]).accepted
        with pytest.raises(UsageError):
            run_verifier_client(digest, [server.address])
        reset_consumed_digests()
        assert run_verifier_client(digest, [server.address]).accepted


def test_trivial_two_provers_over_tcp():
    chunk_fam = polynomial_family(k=1, n=5, q=5)
    plan = ChunkPlan(2, 2)
    digest = multi_trivial_preprocess(chunk_fam, X, plan, rng_seed=0)
    honest_1 = honest_answerer(chunk_fam, (1,))
    honest_2 = honest_answerer(chunk_fam, (2,))
    with ProverServer(chunk_fam, honest_1) as s1, ProverServer(chunk_fam, honest_2) as s2:
        verdict = run_verifier_client(digest, [s1.address, s2.address])
        assert verdict.accepted
        reset_consumed_digests()
        with ProverServer(chunk_fam, lambda beta: 0) as cheat:
            verdict = run_verifier_client(digest, [s1.address, cheat.address])
    if digest.gammas[1] != 0:
        assert verdict.accused == frozenset({2})
    # address count must match the prover count
    with pytest.raises(UsageError):
        run_verifier_client(digest, [("127.0.0.1", 1)])


def test_transport_matches_direct_verify():
    chunk_fam = polynomial_family(k=1, n=5, q=5)
    plan = ChunkPlan(2, 2)
    digest = multi_trivial_preprocess(chunk_fam, X, plan, rng_seed=9)
    answers = (hash_eval(chunk_fam, (1,), digest.beta), 3)
    direct = multi_trivial_verify(digest, answers)
    with ProverServer(chunk_fam, lambda beta: answers[0]) as s1, \
            ProverServer(chunk_fam, lambda beta: 3) as s2:
        via_tcp = run_verifier_client(digest, [s1.address, s2.address])
    assert via_tcp == direct


def test_linear_two_provers_over_tcp():
    plan = ChunkPlan(2, 2)
    digest = multi_linear_preprocess(FAM, X, plan, rng_seed=4)
    a1 = honest_answerer(FAM, plan.zero_extended(X, 1))
    a2 = honest_answerer(FAM, plan.zero_extended(X, 2))
    with ProverServer(FAM, a1) as s1, ProverServer(FAM, a2) as s2:
        assert run_verifier_client(digest, [s1.address, s2.address]).accepted


def test_rs_parity_over_tcp_with_silence_and_cheating():
    plan = ChunkPlan(2, 2)
    a1 = honest_answerer(FAM, plan.zero_extended(X, 1))
    a2 = honest_answerer(FAM, plan.zero_extended(X, 2))
    digest = multi_rs_preprocess(FAM, X, plan, r=0, e=1, rng_seed=6)
    with ProverServer(FAM, a1, silent=True) as s1, ProverServer(FAM, a2) as s2:
        verdict = run_verifier_client(digest, [s1.address, s2.address], timeout_ms=400)
    assert (verdict.outcome, verdict.erased) == ("accepted", frozenset({1}))

    digest = multi_rs_preprocess(FAM, X, plan, r=1, e=0, rng_seed=6)
    honest = tuple(hash_eval(FAM, plan.zero_extended(X, i), digest.beta) for i in (1, 2))
    wrong = (honest[1] + 1) % 5
    with ProverServer(FAM, a1) as s1, ProverServer(FAM, lambda beta: wrong) as s2:
        verdict = run_verifier_client(digest, [s1.address, s2.address])
    assert multi_rs_verify(digest, (honest[0], wrong)) == verdict
    assert verdict.accused == frozenset({2})


def test_challenges_run_concurrently():
    chunk_fam = polynomial_family(k=1, n=5, q=5)
    plan = ChunkPlan(2, 2)
    digest = multi_trivial_preprocess(chunk_fam, X, plan, rng_seed=0)
    answer = honest_answerer(chunk_fam, (1,))
    with ProverServer(chunk_fam, answer, silent=True) as s1, \
            ProverServer(chunk_fam, answer, silent=True) as s2:
        started = time.monotonic()
        verdict = run_verifier_client(digest, [s1.address, s2.address], timeout_ms=500)
        elapsed = time.monotonic() - started
    assert verdict.erased == frozenset({1, 2})
    # two sequential timeouts would need at least a second
    assert elapsed < 0.95


def test_max_sessions_stops_the_server():
    digest = single_preprocess(FAM, X, 7)
    server = ProverServer(FAM, honest_answerer(FAM, X), max_sessions=1)
    server.start()
    try:
        assert run_verifier_client(digest, [server.address]).accepted
        assert server.wait_closed(timeout=5)
    finally:
        server.close()
