"""Arithmetic and linear algebra over GF(2^m), m in {4, 8, 16}.

Elements are plain ints in ``[0, 2**m)``.  Vectors and matrices are numpy
integer arrays; every vectorised operation goes through the exp/log tables
built once per :class:`GF`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_MODULI = {
    4: 0b1_0011,  # x^4 + x + 1
    8: 0x11B,  # x^8 + x^4 + x^3 + x + 1
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}


class FieldError(ValueError):
    pass


class ZeroInverse(ZeroDivisionError):
    pass


class DimensionMismatch(ValueError):
    pass


class NotDecodable(Exception):
    """Raised when the coding headers do not span the full message space."""

    def __init__(self, rank: int, k: int):
        super().__init__(f"header rank {rank} < k={k}")
        self.rank = rank
        self.k = k


def _degree(p: int) -> int:
    return p.bit_length() - 1


def _polymod(a: int, b: int) -> int:
    db = _degree(b)
    while a and _degree(a) >= db:
        a ^= b << (_degree(a) - db)
    return a


def is_irreducible(poly: int) -> bool:
    """Exhaustive trial division by every polynomial of degree 1..deg/2."""
    m = _degree(poly)
    if m < 1:
        return False
    for d in range(2, 1 << (m // 2 + 1)):
        if _polymod(poly, d) == 0:
            return False
    return True


def _clmul_mod(a: int, b: int, modulus: int, m: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= modulus
    return r


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


class GF:
    """The field GF(2^m) with a fixed irreducible modulus.

    Immutable after construction; safe to share between workers.
    """

    def __init__(self, m: int = 16, modulus: int | None = None):
        if m not in DEFAULT_MODULI:
            raise FieldError(f"unsupported extension degree m={m}")
        modulus = DEFAULT_MODULI[m] if modulus is None else modulus
        if _degree(modulus) != m:
            raise FieldError(f"modulus {modulus:#x} does not have degree {m}")
        if not is_irreducible(modulus):
            raise FieldError(f"modulus {modulus:#x} is reducible")
        self.m = m
        self.q = 1 << m
        self.modulus = modulus
        self.generator = self._find_generator()
        self._build_tables()

    def __repr__(self) -> str:
        return f"GF(2^{self.m}, modulus={self.modulus:#x})"

    def __eq__(self, other) -> bool:
        return isinstance(other, GF) and (self.m, self.modulus) == (other.m, other.modulus)

    def __hash__(self) -> int:
        return hash((self.m, self.modulus))

    def __reduce__(self):
        return (GF, (self.m, self.modulus))

    def _find_generator(self) -> int:
        order = self.q - 1
        factors = _prime_factors(order)
        for g in range(2, self.q):
            if all(self._slow_pow(g, order // p) != 1 for p in factors):
                return g
        raise FieldError("no generator found")  # unreachable for irreducible moduli

    def _slow_pow(self, a: int, e: int) -> int:
        r = 1
        while e:
            if e & 1:
                r = _clmul_mod(r, a, self.modulus, self.m)
            a = _clmul_mod(a, a, self.modulus, self.m)
            e >>= 1
        return r

    def _build_tables(self) -> None:
        q, n = self.q, self.q - 1
        exp = np.zeros(4 * q + 1, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        x = 1
        for i in range(n):
            exp[i] = x
            log[x] = i
            x = _clmul_mod(x, self.generator, self.modulus, self.m)
        exp[n : 2 * n] = exp[:n]
        # log(0) points past every valid sum, into the zero tail of exp
        log[0] = 2 * q
        exp.flags.writeable = False
        log.flags.writeable = False
        self.exp = exp
        self.log = log
        self._exp_list = exp.tolist()
        self._log_list = log.tolist()

    # scalar ops

    def add(self, a: int, b: int) -> int:
        return a ^ b

    sub = add

    def mul(self, a: int, b: int) -> int:
        return self._exp_list[self._log_list[a] + self._log_list[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroInverse("0 has no multiplicative inverse")
        return self._exp_list[(self.q - 1 - self._log_list[a]) % (self.q - 1)]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 0 if e else 1
        return self._exp_list[(self._log_list[a] * e) % (self.q - 1)]

    # vectorised ops

    def vmul(self, a, b) -> np.ndarray:
        """Elementwise product with numpy broadcasting."""
        return self.exp[self.log[np.asarray(a)] + self.log[np.asarray(b)]]

    def combine(self, coeffs, rows) -> np.ndarray:
        """Return sum_i coeffs[i] * rows[i] as a single row."""
        rows = np.asarray(rows, dtype=np.int64)
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if rows.ndim != 2 or coeffs.shape != (rows.shape[0],):
            raise DimensionMismatch(f"{coeffs.shape} coefficients for rows of shape {rows.shape}")
        if rows.shape[0] == 0:
            return np.zeros(rows.shape[1], dtype=np.int64)
        prod = self.exp[self.log[rows] + self.log[coeffs][:, None]]
        return np.bitwise_xor.reduce(prod, axis=0)

    def matmul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if a.shape[1] != b.shape[0]:
            raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
        out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
        for i in range(a.shape[0]):
            out[i] = self.combine(a[i], b)
        return out

    def random(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=np.int64)

    # elimination

    def rref(self, matrix) -> tuple[np.ndarray, list[int]]:
        """Reduced row-echelon form and pivot columns.

        Pivots are the first nonzero entry at or below the current row,
        lowest row index first.
        """
        a = np.array(matrix, dtype=np.int64, copy=True)
        if a.ndim != 2:
            raise DimensionMismatch("rref expects a 2-d matrix")
        rows, cols = a.shape
        pivots: list[int] = []
        r = 0
        for c in range(cols):
            if r == rows:
                break
            nz = np.flatnonzero(a[r:, c])
            if nz.size == 0:
                continue
            p = r + int(nz[0])
            if p != r:
                a[[r, p]] = a[[p, r]]
            a[r] = self.vmul(a[r], self.inv(int(a[r, c])))
            factors = a[:, c].copy()
            factors[r] = 0
            if factors.any():
                a ^= self.exp[self.log[factors][:, None] + self.log[a[r]][None, :]]
            pivots.append(c)
            r += 1
        return a, pivots

    def rank(self, matrix) -> int:
        a = np.asarray(matrix, dtype=np.int64)
        if a.size == 0:
            return 0
        return len(self.rref(a)[1])


@dataclass(frozen=True, eq=False)
class Packet:
    """A coded packet: k header symbols followed by l payload symbols."""

    data: np.ndarray
    k: int

    @property
    def header(self) -> np.ndarray:
        return self.data[: self.k]

    @property
    def payload(self) -> np.ndarray:
        return self.data[self.k :]

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.data) - self.k

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Packet)
            and self.k == other.k
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self) -> int:
        return hash((self.k, self.data.tobytes()))

    @classmethod
    def source(cls, i: int, message, k: int) -> "Packet":
        """The packet (e_i | message) a node adds when it generates message i."""
        message = np.asarray(message, dtype=np.int64)
        data = np.zeros(k + len(message), dtype=np.int64)
        data[i] = 1
        data[k:] = message
        return cls(data, k)

    @classmethod
    def zero(cls, k: int, l: int) -> "Packet":
        return cls(np.zeros(k + l, dtype=np.int64), k)


def _shape_of(packets: Sequence[Packet]) -> tuple[int, int]:
    shapes = {(p.k, p.l) for p in packets}
    if len(shapes) > 1:
        raise DimensionMismatch(f"packets disagree on (k, l): {sorted(shapes)}")
    return shapes.pop()


def linear_combination(field: GF, coeffs: Sequence[int], vectors: Sequence[Packet], k: int | None = None, l: int | None = None) -> Packet:
    """Componentwise sum of coeffs[i] * vectors[i].

    An empty input needs ``k`` and ``l`` to size the zero vector.
    """
    if len(coeffs) != len(vectors):
        raise DimensionMismatch(f"{len(coeffs)} coefficients for {len(vectors)} vectors")
    if not vectors:
        if k is None or l is None:
            raise DimensionMismatch("empty combination needs explicit (k, l)")
        return Packet.zero(k, l)
    pk, pl = _shape_of(vectors)
    if (k is not None and k != pk) or (l is not None and l != pl):
        raise DimensionMismatch(f"vectors have (k, l)=({pk}, {pl})")
    rows = np.stack([p.data for p in vectors])
    return Packet(field.combine(coeffs, rows), pk)


def decode(field: GF, packets: Sequence[Packet], k: int) -> np.ndarray:
    """Recover the k x l message matrix from coded packets.

    Raises NotDecodable when the headers have rank < k.
    """
    if not packets:
        raise NotDecodable(0, k)
    pk, _ = _shape_of(packets)
    if pk != k:
        raise DimensionMismatch(f"packets carry k={pk}, expected {k}")
    reduced, pivots = field.rref(np.stack([p.data for p in packets]))
    header_pivots = [c for c in pivots if c < k]
    if len(header_pivots) < k:
        raise NotDecodable(len(header_pivots), k)
    return reduced[:k, k:]


def encode(field: GF, headers, messages) -> list[Packet]:
    """Packets whose payloads are headers @ messages (the consistency relation)."""
    headers = np.asarray(headers, dtype=np.int64)
    payloads = field.matmul(headers, messages)
    k = headers.shape[1]
    return [Packet(np.concatenate([h, p]), k) for h, p in zip(headers, payloads)]


def is_consistent(field: GF, packet: Packet, messages) -> bool:
    """True iff the payload equals header @ messages."""
    expected = field.combine(packet.header, np.asarray(messages, dtype=np.int64))
    return bool(np.array_equal(expected, packet.payload))


class EchelonBasis:
    """Incrementally maintained row-echelon basis, for rank tracking."""

    def __init__(self, field: GF, width: int):
        self.field = field
        self.width = width
        self._rows: dict[int, np.ndarray] = {}  # pivot column -> row with leading 1

    @property
    def rank(self) -> int:
        return len(self._rows)

    def reduce(self, vec) -> np.ndarray:
        f = self.field
        v = np.array(vec, dtype=np.int64, copy=True)
        for c, row in self._rows.items():
            if v[c]:
                v ^= f.vmul(row, int(v[c]))
        return v

    def add(self, vec) -> bool:
        """Insert vec; return True iff it increased the rank."""
        v = self.reduce(vec)
        nz = np.flatnonzero(v)
        if nz.size == 0:
            return False
        c = int(nz[0])
        self._rows[c] = self.field.vmul(v, self.field.inv(int(v[c])))
        return True

    def contains(self, vec) -> bool:
        return not self.reduce(vec).any()
