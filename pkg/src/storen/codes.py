"""Hash families viewed as error-correcting codes.

The block map x -> (h_1(x), ..., h_n(x)) of an almost-universal family is a
code whose relative distance is one minus the collision bound.  This module
certifies such codes exhaustively at toy sizes (distance, Johnson-radius
list sizes) and provides a small systematic Reed-Solomon codec whose
decoder corrects r errors and e erasures whenever 2r + e fits the
redundancy, reporting the exact error positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .algebra import is_prime, poly_eval_mod
from .errors import CapacityError, UsageError
from .hash_families import (
    HashFamilyDescriptor,
    KIND_POLYNOMIAL,
    enumerate_messages,
    hash_all,
    message_space_size,
)

# A received word holds one symbol per coordinate, None marking an erasure.
ERASED = None
ReceivedWord = Sequence[Optional[int]]

_DISTANCE_CAP_MESSAGES = 2048
_LIST_DECODE_CAP_MESSAGES = 10**6


def encode(fam: HashFamilyDescriptor, x) -> tuple[int, ...]:
    """Codeword of message x: all n hash values in index order."""
    return hash_all(fam, x)


def hamming_distance(u: ReceivedWord, v: ReceivedWord) -> int:
    """Mismatch count; an erased coordinate matches nothing."""
    if len(u) != len(v):
        raise UsageError(f"length mismatch: {len(u)} vs {len(v)}")
    return sum(1 for a, b in zip(u, v) if a is None or b is None or a != b)


def min_distance_exhaustive(fam: HashFamilyDescriptor) -> int:
    """Exact minimum pairwise distance, by enumerating every codeword pair."""
    count = message_space_size(fam)
    if count > _DISTANCE_CAP_MESSAGES:
        raise CapacityError(
            f"distance check enumerates {count} messages, above the cap of"
            f" {_DISTANCE_CAP_MESSAGES}"
        )
    words = [hash_all(fam, x) for x in enumerate_messages(fam)]
    best = fam.n
    for a in range(len(words)):
        wa = words[a]
        for b in range(a + 1, len(words)):
            dist = sum(1 for s, t in zip(wa, words[b]) if s != t)
            if dist < best:
                best = dist
    return best


def johnson_radius(n: int, d: int) -> int:
    """floor((1 - sqrt(1 - d/n)) * n), via exact integer square roots.

    Up to this many corrupted coordinates, the list of matching codewords
    of any code with distance d and block length n stays polynomially small.
    """
    if n < 1 or not 0 <= d <= n:
        raise UsageError(f"need 0 <= d <= n with n >= 1, got n={n}, d={d}")
    target = n * (n - d)
    s = math.isqrt(target)
    return n - s if s * s == target else n - s - 1


def johnson_list_size_bound(fam: HashFamilyDescriptor) -> int:
    """List-size bound 2 * sum of alphabet sizes at the Johnson radius."""
    return 2 * sum(fam.alphabets())


def brute_force_list_decode(
    fam: HashFamilyDescriptor, z: ReceivedWord, radius: int
) -> list:
    """All messages whose codeword is within `radius` of z, in message order.

    Cycles the entire message space, so it refuses families with more than
    a million messages.
    """
    if len(z) != fam.n:
        raise UsageError(f"received word must have {fam.n} symbols, got {len(z)}")
    for i, sym in enumerate(z):
        if sym is None:
            continue
        if not isinstance(sym, int) or not 0 <= sym < fam.alphabet(i + 1):
            raise UsageError(f"symbol {sym!r} at position {i + 1} out of range")
    if radius < 0:
        raise UsageError(f"radius must be non-negative, got {radius}")
    count = message_space_size(fam)
    if count > _LIST_DECODE_CAP_MESSAGES:
        raise CapacityError(
            f"list decoding cycles {count} messages, above the cap of"
            f" {_LIST_DECODE_CAP_MESSAGES}"
        )
    hits = []
    for x in enumerate_messages(fam):
        cw = hash_all(fam, x)
        dist = sum(1 for a, b in zip(cw, z) if b is None or a != b)
        if dist <= radius:
            hits.append(x)
    return hits


@dataclass(frozen=True)
class SystematicRSCode:
    """Reed-Solomon code over F_q evaluated at the points 0..block_len-1.

    Encoding is systematic: the first message_len codeword symbols are the
    message itself.
    """

    message_len: int
    block_len: int
    q: int

    def __post_init__(self):
        if not 1 <= self.message_len <= self.block_len:
            raise UsageError(
                f"need 1 <= message_len <= block_len, got {self.message_len},"
                f" {self.block_len}"
            )
        if not is_prime(self.q):
            raise UsageError(f"q must be prime, got {self.q}")
        if self.block_len > self.q:
            raise UsageError(
                f"block length {self.block_len} exceeds field size {self.q}"
            )


def _interpolate(points: Sequence[int], values: Sequence[int], q: int) -> list[int]:
    """Ascending coefficients of the unique degree-<len(points) interpolant."""
    coeffs = [0] * len(points)
    for j, (xj, yj) in enumerate(zip(points, values)):
        # numerator polynomial prod_{i != j} (X - x_i), built incrementally
        basis = [1]
        denom = 1
        for i, xi in enumerate(points):
            if i == j:
                continue
            basis = [
                (basis[t - 1] if t else 0) - xi * (basis[t] if t < len(basis) else 0)
                for t in range(len(basis) + 1)
            ]
            basis = [c % q for c in basis]
            denom = denom * (xj - xi) % q
        scale = yj * pow(denom, -1, q) % q
        for t, c in enumerate(basis):
            coeffs[t] = (coeffs[t] + scale * c) % q
    return coeffs


def rs_encode_systematic(code: SystematicRSCode, v: Sequence[int]) -> tuple[int, ...]:
    if len(v) != code.message_len:
        raise UsageError(f"message must have {code.message_len} symbols, got {len(v)}")
    for sym in v:
        if not isinstance(sym, int) or not 0 <= sym < code.q:
            raise UsageError(f"symbol {sym!r} outside [0, {code.q})")
    poly = _interpolate(range(code.message_len), v, code.q)
    return tuple(poly_eval_mod(poly, a, code.q) for a in range(code.block_len))


def _kernel_vector(rows: list[list[int]], ncols: int, q: int) -> list[int] | None:
    """A nonzero vector in the null space of the row list, or None."""
    matrix = [row[:] for row in rows]
    pivot_cols: list[int] = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(matrix)) if matrix[i][c]), None)
        if pivot is None:
            continue
        matrix[r], matrix[pivot] = matrix[pivot], matrix[r]
        inv = pow(matrix[r][c], -1, q)
        matrix[r] = [x * inv % q for x in matrix[r]]
        for i in range(len(matrix)):
            if i != r and matrix[i][c]:
                f = matrix[i][c]
                matrix[i] = [(a - f * b) % q for a, b in zip(matrix[i], matrix[r])]
        pivot_cols.append(c)
        r += 1
        if r == len(matrix):
            break
    free = next((c for c in range(ncols) if c not in pivot_cols), None)
    if free is None:
        return None
    sol = [0] * ncols
    sol[free] = 1
    for i, c in enumerate(pivot_cols):
        sol[c] = -matrix[i][free] % q
    return sol


def _poly_divmod(num: list[int], den: list[int], q: int) -> tuple[list[int], list[int]]:
    """Quotient and remainder of ascending-coefficient polynomials mod q."""
    den = den[:]
    while den and den[-1] == 0:
        den.pop()
    if not den:
        raise UsageError("division by the zero polynomial")
    rem = [c % q for c in num]
    while rem and rem[-1] == 0:
        rem.pop()
    if len(rem) < len(den):
        return [], rem
    quot = [0] * (len(rem) - len(den) + 1)
    lead_inv = pow(den[-1], -1, q)
    for d in range(len(rem) - 1, len(den) - 2, -1):
        factor = rem[d] * lead_inv % q
        quot[d - len(den) + 1] = factor
        if factor:
            off = d - len(den) + 1
            for t, c in enumerate(den):
                rem[off + t] = (rem[off + t] - factor * c) % q
    while rem and rem[-1] == 0:
        rem.pop()
    return quot, rem


def rs_decode_errors_erasures(
    code: SystematicRSCode, z: ReceivedWord
) -> tuple[tuple[int, ...], frozenset[int]] | None:
    """Correct errors and erasures, reporting exact 1-based error positions.

    Returns (message, error_positions) when some codeword sits within the
    budget 2*errors + erasures <= block_len - message_len of z (that
    codeword is then unique), and None when none does.  Berlekamp-Welch:
    solve for Q = P*E and an error locator E on the non-erased coordinates,
    then divide; O(block_len**3) via Gaussian elimination.
    """
    ell, m, q = code.block_len, code.message_len, code.q
    if len(z) != ell:
        raise UsageError(f"received word must have {ell} symbols, got {len(z)}")
    known = []
    for a, sym in enumerate(z):
        if sym is None:
            continue
        if not isinstance(sym, int) or not 0 <= sym < q:
            raise UsageError(f"symbol {sym!r} at position {a + 1} out of range")
        known.append((a, sym))
    erasures = ell - len(known)
    budget = ell - m
    if erasures > budget:
        return None
    r_max = (budget - erasures) // 2
    q_len = m + r_max  # coefficients of Q, deg Q <= m + r_max - 1
    e_len = r_max + 1  # coefficients of E, deg E <= r_max
    rows = []
    for a, sym in known:
        pows = [1] * (max(q_len, e_len))
        for t in range(1, len(pows)):
            pows[t] = pows[t - 1] * a % q
        rows.append(
            [pows[t] for t in range(q_len)]
            + [-sym * pows[t] % q for t in range(e_len)]
        )
    sol = _kernel_vector(rows, q_len + e_len, q)
    if sol is None:
        return None
    locator = sol[q_len:]
    if not any(locator):
        return None
    p_coeffs, rem = _poly_divmod(sol[:q_len], locator, q)
    if rem:
        return None
    if len(p_coeffs) > m:
        return None
    codeword = [poly_eval_mod(p_coeffs, a, q) for a in range(ell)]
    errors = frozenset(
        a + 1 for a, sym in known if codeword[a] != sym
    )
    if len(errors) > r_max:
        return None
    return tuple(codeword[:m]), errors
