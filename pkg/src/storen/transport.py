"""TCP transport for remote audits.

Wire protocol (all integers little-endian, one challenge per connection):

====== ============ ======================================== ===========
type   name         payload                                  total bytes
====== ============ ======================================== ===========
0x00   HELLO        version u16, family fingerprint 32B      35
0x01   CHALLENGE    challenge index u64                      9
0x02   RESPONSE     answer u64                               9
0x03   NO_RESPONSE  (empty)                                  1
0x7F   ERROR        code u16                                 3
====== ============ ======================================== ===========

The client opens the connection, sends HELLO, and expects the server's
HELLO back (same version, same fingerprint) before sending one CHALLENGE;
the server answers RESPONSE or NO_RESPONSE and the connection is done.
Error codes: 1 fingerprint mismatch, 2 unexpected frame, 3 malformed
frame, 4 unsupported version.

Operational faults — connection refused, timeout, a clean close at a frame
boundary — count as *erasures*: the prover is treated as silent.  Protocol
violations (ERROR frames, garbage, out-of-alphabet answers, handshake
mismatches) raise :class:`ProtocolError` instead: they are evidence of a
broken or hostile peer, not of missing data.

A challenge digest is spent the moment it is sent: the module keeps a
per-process registry of consumed digests and refuses to audit with the
same one twice (:func:`reset_consumed_digests` clears it, for tests).
The client-side timeout defaults to 5000 ms and can be set with the
``STOREN_TIMEOUT_MS`` environment variable or per call.
"""

from __future__ import annotations

import os
import socket
import socketserver
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, Tuple

from .codes import encode
from .errors import ProtocolError, UsageError
from .hash_families import HashFamilyDescriptor, Message, family_fingerprint
from .protocol import (
    VARIANT_LINEAR,
    VARIANT_RS,
    VARIANT_SINGLE,
    VARIANT_TRIVIAL,
    Digest,
    Verdict,
    digest_to_bytes,
    multi_linear_verify,
    multi_rs_verify,
    multi_trivial_verify,
    single_verify,
)

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT_MS = 5000
TIMEOUT_ENV_VAR = "STOREN_TIMEOUT_MS"

FRAME_HELLO = 0x00
FRAME_CHALLENGE = 0x01
FRAME_RESPONSE = 0x02
FRAME_NO_RESPONSE = 0x03
FRAME_ERROR = 0x7F

ERR_FINGERPRINT = 1
ERR_UNEXPECTED = 2
ERR_MALFORMED = 3
ERR_VERSION = 4
_ERR_NAMES = {
    ERR_FINGERPRINT: "fingerprint mismatch",
    ERR_UNEXPECTED: "unexpected frame",
    ERR_MALFORMED: "malformed frame",
    ERR_VERSION: "unsupported version",
}


def encode_hello(version: int, fingerprint: bytes) -> bytes:
    if len(fingerprint) != 32:
        raise UsageError("fingerprint must be 32 bytes")
    return struct.pack("<BH", FRAME_HELLO, version) + fingerprint


def encode_challenge(beta: int) -> bytes:
    return struct.pack("<BQ", FRAME_CHALLENGE, beta)


def encode_response(value: int) -> bytes:
    return struct.pack("<BQ", FRAME_RESPONSE, value)


def encode_no_response() -> bytes:
    return bytes([FRAME_NO_RESPONSE])


def encode_error(code: int) -> bytes:
    return struct.pack("<BH", FRAME_ERROR, code)


def _recv_type(sock) -> Optional[int]:
    """First byte of a frame; None when the peer closed at the boundary."""
    data = sock.recv(1)
    if not data:
        return None
    return data[0]


def _recv_body(sock, count: int) -> bytes:
    data = b""
    while len(data) < count:
        chunk = sock.recv(count - len(data))
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        data += chunk
    return data


def _timeout_seconds(timeout_ms: Optional[int]) -> float:
    if timeout_ms is None:
        raw = os.environ.get(TIMEOUT_ENV_VAR)
        timeout_ms = int(raw) if raw else DEFAULT_TIMEOUT_MS
    if timeout_ms <= 0:
        raise UsageError("timeout must be positive")
    return timeout_ms / 1000.0


# --- prover side -------------------------------------------------------------


def honest_answerer(fam: HashFamilyDescriptor, x: Message) -> Callable[[int], int]:
    """Answer function of a prover that keeps all of ``x``."""
    codeword = encode(fam, x)

    def answer(beta: int) -> int:
        return codeword[beta - 1]

    return answer


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class ProverServer:
    """Serves one prover's answers over TCP.

    ``answer_fn`` maps a challenge index to an answer (or None for "no
    response").  ``silent=True`` makes the server accept connections but
    never reply — the knob for exercising client timeouts.  With
    ``max_sessions`` set, the listener shuts down after that many
    connections have been handled.
    """

    def __init__(
        self,
        fam: HashFamilyDescriptor,
        answer_fn: Callable[[int], Optional[int]],
        host: str = "127.0.0.1",
        port: int = 0,
        silent: bool = False,
        max_sessions: Optional[int] = None,
    ):
        self._fingerprint = family_fingerprint(fam)
        self._n = fam.n
        self._answer_fn = answer_fn
        self._bind = (host, port)
        self._silent = silent
        self._max_sessions = max_sessions
        self._sessions = 0
        self._lock = threading.Lock()
        self._closing = threading.Event()
        self._closed = threading.Event()
        self._server = None
        self._thread = None

    @property
    def address(self) -> Tuple[str, int]:
        if self._server is None:
            raise UsageError("server not started")
        return self._server.server_address

    def start(self) -> "ProverServer":
        if self._server is not None:
            raise UsageError("server already started")
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                outer._handle(self.request)

        self._server = _Server(self._bind, Handler)
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def _run(self):
        try:
            self._server.serve_forever(poll_interval=0.05)
        finally:
            self._closed.set()

    def _handle(self, sock):
        counted = False
        try:
            sock.settimeout(30.0)
            frame = _recv_type(sock)
            if frame is None:
                return  # probe or dead peer; not a session
            counted = True
            if frame != FRAME_HELLO:
                sock.sendall(encode_error(ERR_UNEXPECTED))
                return
            body = _recv_body(sock, 34)
            version = struct.unpack_from("<H", body)[0]
            fingerprint = body[2:]
            if version != PROTOCOL_VERSION:
                sock.sendall(encode_error(ERR_VERSION))
                return
            if fingerprint != self._fingerprint:
                sock.sendall(encode_error(ERR_FINGERPRINT))
                return
            if self._silent:
                self._closing.wait(timeout=30.0)
                return
            sock.sendall(encode_hello(PROTOCOL_VERSION, self._fingerprint))
            frame = _recv_type(sock)
            if frame is None:
                return
            if frame != FRAME_CHALLENGE:
                sock.sendall(encode_error(ERR_UNEXPECTED))
                return
            beta = struct.unpack("<Q", _recv_body(sock, 8))[0]
            if not 1 <= beta <= self._n:
                sock.sendall(encode_error(ERR_MALFORMED))
                return
            answer = self._answer_fn(beta)
            if answer is None:
                sock.sendall(encode_no_response())
            else:
                sock.sendall(encode_response(answer))
        except ProtocolError:
            try:
                sock.sendall(encode_error(ERR_MALFORMED))
            except OSError:
                pass
        except OSError:
            pass
        finally:
            if counted:
                self._finish_session()

    def _finish_session(self):
        with self._lock:
            self._sessions += 1
            done = self._max_sessions is not None and self._sessions >= self._max_sessions
        if done:
            threading.Thread(target=self._server.shutdown, daemon=True).start()

    def wait_closed(self, timeout: Optional[float] = None) -> bool:
        """Block until the listener has stopped (True) or timeout (False)."""
        return self._closed.wait(timeout)

    def close(self):
        self._closing.set()
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def __enter__(self) -> "ProverServer":
        if self._server is None:
            self.start()
        return self

    def __exit__(self, *exc):
        self.close()


# --- verifier side -----------------------------------------------------------


def query_prover(
    address: Tuple[str, int],
    beta: int,
    fingerprint: bytes,
    timeout_ms: Optional[int] = None,
) -> Optional[int]:
    """Send one challenge; return the answer, or None if the prover is
    unreachable, times out, or declines to respond."""
    timeout = _timeout_seconds(timeout_ms)
    try:
        with socket.create_connection(address, timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall(encode_hello(PROTOCOL_VERSION, fingerprint))
            frame = _recv_type(sock)
            if frame is None:
                return None
            if frame == FRAME_ERROR:
                code = struct.unpack("<H", _recv_body(sock, 2))[0]
                raise ProtocolError(
                    f"prover refused: {_ERR_NAMES.get(code, f'code {code}')}"
                )
            if frame != FRAME_HELLO:
                raise ProtocolError(f"expected HELLO, got frame type {frame:#04x}")
            body = _recv_body(sock, 34)
            version = struct.unpack_from("<H", body)[0]
            if version != PROTOCOL_VERSION:
                raise ProtocolError(f"prover speaks version {version}")
            if body[2:] != fingerprint:
                raise ProtocolError("prover serves a different hash family")
            sock.sendall(encode_challenge(beta))
            frame = _recv_type(sock)
            if frame is None:
                return None
            if frame == FRAME_RESPONSE:
                return struct.unpack("<Q", _recv_body(sock, 8))[0]
            if frame == FRAME_NO_RESPONSE:
                return None
            if frame == FRAME_ERROR:
                code = struct.unpack("<H", _recv_body(sock, 2))[0]
                raise ProtocolError(
                    f"prover refused: {_ERR_NAMES.get(code, f'code {code}')}"
                )
            raise ProtocolError(f"unexpected frame type {frame:#04x}")
    except (TimeoutError, ConnectionError):
        return None


_consumed_digests = set()
_consumed_lock = threading.Lock()


def reset_consumed_digests() -> None:
    """Forget which digests were spent (per-process registry; for tests)."""
    with _consumed_lock:
        _consumed_digests.clear()


def _mark_consumed(digest: Digest) -> None:
    key = digest_to_bytes(digest)
    with _consumed_lock:
        if key in _consumed_digests:
            raise UsageError(
                "challenge digest already spent; a digest authorizes one audit"
            )
        _consumed_digests.add(key)


def run_verifier_client(
    digest: Digest,
    addresses: Sequence[Tuple[str, int]],
    r: Optional[int] = None,
    e: Optional[int] = None,
    timeout_ms: Optional[int] = None,
) -> Verdict:
    """Audit the provers at ``addresses`` (one per prover, in prover order)
    with the digest's challenge, concurrently, and return the verdict."""
    addresses = [tuple(a) for a in addresses]
    if not addresses:
        raise UsageError("at least one prover address required")
    if digest.variant == VARIANT_SINGLE and len(addresses) != 1:
        raise UsageError("the single variant audits exactly one prover")
    if digest.variant == VARIANT_TRIVIAL and len(addresses) != len(digest.gammas):
        raise UsageError(
            f"digest expects {len(digest.gammas)} provers, got {len(addresses)}"
        )
    _mark_consumed(digest)
    fingerprint = digest.fingerprint
    with ThreadPoolExecutor(max_workers=len(addresses)) as pool:
        answers = tuple(
            pool.map(
                lambda addr: query_prover(addr, digest.beta, fingerprint, timeout_ms),
                addresses,
            )
        )
    if digest.family is not None:
        limit = digest.family.alphabet(digest.beta)
        for answer in answers:
            if answer is not None and not 0 <= answer < limit:
                raise ProtocolError(
                    f"answer {answer} outside the challenge alphabet [0, {limit})"
                )
    if digest.variant == VARIANT_SINGLE:
        return single_verify(digest, answers[0])
    if digest.variant == VARIANT_TRIVIAL:
        return multi_trivial_verify(digest, answers)
    if digest.variant == VARIANT_LINEAR:
        return multi_linear_verify(digest, answers)
    return multi_rs_verify(digest, answers, r=r, e=e)
