"""Bit strings over GF(2) and the Toeplitz hashing families built on them.

Everything here is pure and immutable: packed bit vectors, plain Toeplitz
matrices described by their diagonal bits (used for privacy amplification),
and LFSR-generated Toeplitz matrices keyed by 2k secret bits (used for
message authentication and error verification).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

try:
    import gmpy2

    def _bigmul(a: int, b: int) -> int:
        return int(gmpy2.mpz(a) * gmpy2.mpz(b))
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    def _bigmul(a: int, b: int) -> int:
        return a * b


class DimensionError(ValueError):
    """Operand lengths do not match the operation's shape requirements."""


class InvalidSpecError(ValueError):
    """A hashing descriptor violates its structural invariants."""


# ---------------------------------------------------------------------------
# BitString


class BitString:
    """Immutable bit vector; index 0 is the leftmost / first-transmitted bit.

    Bits are stored packed 8-per-byte with bit 0 in the most significant
    position of byte 0, which is also the wire layout (see serialize()).
    Addition of equal-length values is elementwise XOR.
    """

    __slots__ = ("_packed", "_length")

    def __init__(self, packed: np.ndarray, length: int):
        if length < 0 or packed.dtype != np.uint8:
            raise ValueError("packed uint8 buffer and nonnegative length required")
        if len(packed) != (length + 7) // 8:
            raise ValueError("packed buffer size does not match length")
        packed = packed.copy()
        # zero any padding bits so equality/popcount can work on raw bytes
        if length % 8:
            packed[-1] &= 0xFF << (8 - length % 8) & 0xFF
        packed.setflags(write=False)
        self._packed = packed
        self._length = length

    # -- constructors

    @classmethod
    def from_bits(cls, bits) -> "BitString":
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits,
                         dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("expected a flat bit sequence")
        if np.any(arr > 1):
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(arr), len(arr))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BitString":
        return cls.from_bits(arr)

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(np.zeros((n + 7) // 8, dtype=np.uint8), n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitString":
        return cls(rng.integers(0, 256, size=(n + 7) // 8, dtype=np.uint8), n)

    @classmethod
    def from_bytes(cls, raw: bytes, length: int) -> "BitString":
        buf = np.frombuffer(raw, dtype=np.uint8, count=(length + 7) // 8)
        return cls(buf.copy(), length)

    # -- views

    @property
    def length(self) -> int:
        return self._length

    def __len__(self) -> int:
        return self._length

    def to_array(self) -> np.ndarray:
        """Unpacked uint8 array of 0/1 values."""
        if self._length == 0:
            return np.zeros(0, dtype=np.uint8)
        return np.unpackbits(self._packed, count=self._length)

    def to_bytes(self) -> bytes:
        return self._packed.tobytes()

    def weight(self) -> int:
        """Number of set bits."""
        return int(np.bitwise_count(self._packed).sum())

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return BitString.from_array(self.to_array()[idx])
        i = idx if idx >= 0 else self._length + idx
        if not 0 <= i < self._length:
            raise IndexError("bit index out of range")
        return int(self._packed[i >> 3] >> (7 - (i & 7)) & 1)

    def __iter__(self):
        return iter(self.to_array())

    # -- algebra

    def __xor__(self, other: "BitString") -> "BitString":
        if self._length != other._length:
            raise DimensionError(
                f"length mismatch: {self._length} vs {other._length}")
        return BitString(self._packed ^ other._packed, self._length)

    __add__ = __xor__  # addition over GF(2)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return (self._length == other._length
                and bool(np.array_equal(self._packed, other._packed)))

    def __hash__(self) -> int:
        return hash((self._length, self._packed.tobytes()))

    def __repr__(self) -> str:
        if self._length <= 32:
            body = "".join(str(b) for b in self.to_array())
        else:
            head = "".join(str(b) for b in self.to_array()[:32])
            body = f"{head}..."
        return f"BitString({body}, len={self._length})"

    @staticmethod
    def concat(parts) -> "BitString":
        arrays = [p.to_array() for p in parts]
        if not arrays:
            return BitString.zeros(0)
        return BitString.from_array(np.concatenate(arrays))

    # -- wire format: u64 little-endian bit count, then packed bytes

    def serialize(self) -> bytes:
        return self._length.to_bytes(8, "little") + self.to_bytes()

    @classmethod
    def deserialize(cls, buf: bytes, offset: int = 0) -> tuple["BitString", int]:
        """Decode from buf at offset; returns (value, next offset)."""
        length = int.from_bytes(buf[offset:offset + 8], "little")
        nbytes = (length + 7) // 8
        end = offset + 8 + nbytes
        if len(buf) < end:
            raise ValueError("buffer truncated")
        return cls.from_bytes(buf[offset + 8:end], length), end


def one_time_pad(data: BitString, pad: BitString) -> BitString:
    """XOR encryption/decryption; involutive, requires equal lengths."""
    return data ^ pad


# ---------------------------------------------------------------------------
# Toeplitz hashing
#
# A Toeplitz matrix M of shape l x m is described by l+m-1 diagonal bits
# d = (a_{-m+1}, ..., a_0, ..., a_{l-1}) with M(i,j) = a_{i-j} = d[i-j+m-1].
# The product Mx equals coefficients m-1 .. m+l-2 of the GF(2) polynomial
# product d(z) * x(z), which we evaluate exactly through Kronecker
# substitution: each bit gets a 32-bit slot in a big integer, so digit sums
# (bounded by min(l+m-1, m) < 2^32) never carry across slots.

_SLOT = 32  # bits per coefficient slot in the Kronecker encoding


@dataclass(frozen=True)
class ToeplitzSpec:
    """Fully random Toeplitz matrix: rows x cols, keyed by rows+cols-1 bits."""

    rows: int
    cols: int
    diag: BitString

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise InvalidSpecError("negative matrix dimensions")
        want = max(self.rows + self.cols - 1, 0)
        if self.diag.length != want:
            raise InvalidSpecError(
                f"diag must hold rows+cols-1={want} bits, got {self.diag.length}")

    def dense(self) -> np.ndarray:
        """Materialize the matrix as a 0/1 uint8 array (small inputs only)."""
        d = self.diag.to_array()
        i = np.arange(self.rows)[:, None]
        j = np.arange(self.cols)[None, :]
        if self.rows == 0 or self.cols == 0:
            return np.zeros((self.rows, self.cols), dtype=np.uint8)
        return d[i - j + self.cols - 1]


def _kronecker_int(bits: np.ndarray) -> int:
    words = bits.astype("<u4")
    return int.from_bytes(words.tobytes(), "little")


def gf2_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Carry-less (GF(2)) convolution of two 0/1 arrays, exact at any size."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros(0, dtype=np.uint8)
    n_out = len(a) + len(b) - 1
    prod = _bigmul(_kronecker_int(a), _kronecker_int(b))
    raw = prod.to_bytes(4 * n_out, "little")
    words = np.frombuffer(raw, dtype="<u4", count=n_out)
    return (words & 1).astype(np.uint8)


def toeplitz_apply(spec: ToeplitzSpec, x: BitString) -> BitString:
    """Hash x with the Toeplitz matrix; bit-exact with the dense definition."""
    if x.length != spec.cols:
        raise DimensionError(
            f"input has {x.length} bits, matrix expects {spec.cols}")
    if spec.rows == 0:
        return BitString.zeros(0)
    if spec.cols == 0:
        return BitString.zeros(spec.rows)
    conv = gf2_convolve(spec.diag.to_array(), x.to_array())
    return BitString.from_array(conv[spec.cols - 1:spec.cols - 1 + spec.rows])


# ---------------------------------------------------------------------------
# GF(2) polynomial helpers (connection polynomials as int bitmasks,
# bit i = coefficient of x^i)


def gf2_poly_degree(p: int) -> int:
    return p.bit_length() - 1


def _gf2_mod(a: int, p: int) -> int:
    dp = gf2_poly_degree(p)
    while a.bit_length() - 1 >= dp and a:
        a ^= p << (a.bit_length() - 1 - dp)
    return a


def _gf2_mulmod(a: int, b: int, p: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a = _gf2_mod(a << 1, p)
    return _gf2_mod(r, p)


def _gf2_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _gf2_mod(a, b)
    return a


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def gf2_poly_is_irreducible(p: int) -> bool:
    """Rabin test: x^(2^k) = x mod p, and x^(2^(k/q)) - x coprime to p."""
    k = gf2_poly_degree(p)
    if k < 1:
        return False

    def x_pow_pow2(j: int) -> int:
        # x^(2^j) mod p by repeated squaring
        r = 0b10
        for _ in range(j):
            r = _gf2_mulmod(r, r, p)
        return r

    if x_pow_pow2(k) != _gf2_mod(0b10, p):
        return False
    for q in _prime_factors(k):
        h = x_pow_pow2(k // q) ^ 0b10
        if _gf2_gcd(p, _gf2_mod(h, p) or 0) != 1:
            return False
    return True


# ---------------------------------------------------------------------------
# LFSR-generated Toeplitz family (keyed by 2k bits)


@dataclass(frozen=True)
class LfsrToeplitzSpec:
    """k x n Toeplitz matrix whose columns are successive LFSR states.

    poly is the connection polynomial (int bitmask, bit i = coeff of x^i),
    irreducible of degree exactly tag_len with nonzero constant term; state
    is the nonzero initial register, newest bit first. Column j of the
    matrix is the register contents after j shifts, so the first column is
    the initial state itself.
    """

    tag_len: int
    msg_len: int
    poly: int
    state: BitString

    def __post_init__(self):
        k = self.tag_len
        if k < 1 or self.msg_len < 0:
            raise InvalidSpecError("tag_len must be >= 1 and msg_len >= 0")
        if gf2_poly_degree(self.poly) != k:
            raise InvalidSpecError("connection polynomial degree != tag_len")
        if not self.poly & 1:
            raise InvalidSpecError("connection polynomial needs constant term 1")
        if not gf2_poly_is_irreducible(self.poly):
            raise InvalidSpecError("connection polynomial is not irreducible")
        if self.state.length != k:
            raise InvalidSpecError("initial state must hold tag_len bits")
        if self.state.weight() == 0:
            raise InvalidSpecError("initial state must be nonzero")

    def stream(self, nbits: int) -> np.ndarray:
        """First nbits of the LFSR bit stream b_0, b_1, ...

        b_u = state[k-1-u] for u < k (the register is read newest-first),
        then b_t = sum_i c_i b_{t-k+i} over the polynomial's low taps.
        """
        k = self.tag_len
        out = np.zeros(nbits, dtype=np.uint8)
        st = self.state.to_array()
        head = min(k, nbits)
        out[:head] = st[::-1][:head]
        if nbits <= k:
            return out
        # window W keeps the last k stream bits, b_{t-1-j} at bit j
        taps = 0
        for i in range(k):
            if self.poly >> i & 1:
                taps |= 1 << (k - 1 - i)
        w = 0
        for j in range(k):
            w |= int(st[j]) << j
        mask = (1 << k) - 1
        for t in range(k, nbits):
            b = (w & taps).bit_count() & 1
            out[t] = b
            w = ((w << 1) | b) & mask
        return out

    def toeplitz(self) -> ToeplitzSpec:
        """The equivalent plain Toeplitz description (diag = reversed stream)."""
        s = self.stream(self.msg_len + self.tag_len - 1)
        return ToeplitzSpec(self.tag_len, self.msg_len,
                            BitString.from_array(s[::-1]))


def lfsr_toeplitz_tag(spec: LfsrToeplitzSpec, msg: BitString) -> BitString:
    """Authentication tag: the LFSR-Toeplitz matrix applied to msg."""
    if msg.length != spec.msg_len:
        raise DimensionError(
            f"message has {msg.length} bits, spec expects {spec.msg_len}")
    return toeplitz_apply(spec.toeplitz(), msg)


class _Drbg:
    """SHA-256 in counter mode; fixed, platform-independent bit source."""

    def __init__(self, seed: bytes):
        self._seed = seed
        self._counter = 0
        self._buf = np.zeros(0, dtype=np.uint8)

    def bits(self, n: int) -> np.ndarray:
        while len(self._buf) < n:
            block = hashlib.sha256(
                self._seed + self._counter.to_bytes(8, "little")).digest()
            self._counter += 1
            self._buf = np.concatenate(
                [self._buf, np.unpackbits(np.frombuffer(block, dtype=np.uint8))])
        out, self._buf = self._buf[:n], self._buf[n:]
        return out


def derive_lfsr_spec(secret: BitString, k: int, n: int) -> LfsrToeplitzSpec:
    """Map 2k shared secret bits to a concrete (polynomial, state) pair.

    The first k bits seed a SHA-256 counter-mode generator that rejection
    samples a monic irreducible degree-k polynomial (constant term forced
    to 1); the last k bits are the initial register, redrawn from the same
    generator if zero. Both sides derive identical specs from equal bits.
    """
    if k < 1:
        raise InvalidSpecError("tag length k must be >= 1")
    if secret.length != 2 * k:
        raise DimensionError(f"need 2k={2 * k} secret bits, got {secret.length}")

    prg = _Drbg(secret[:k].serialize() + b"|poly")
    poly = None
    for _ in range(4 * k * k + 8):
        mid = prg.bits(max(k - 1, 0))
        cand = (1 << k) | 1
        for i, b in enumerate(mid, start=1):
            cand |= int(b) << i
        if gf2_poly_is_irreducible(cand):
            poly = cand
            break
    if poly is None:  # pragma: no cover - density ~2/k makes this unreachable
        raise InvalidSpecError("no irreducible polynomial found within cap")

    state = secret[k:]
    attempts = 0
    while state.weight() == 0:
        state = BitString.from_array(prg.bits(k))
        attempts += 1
        if attempts > 4 * k * k + 8:  # pragma: no cover
            raise InvalidSpecError("could not draw a nonzero state")
    return LfsrToeplitzSpec(tag_len=k, msg_len=n, poly=poly, state=state)


def authentication_failure_log2(msg_len: int, tag_len: int) -> float:
    """log2 of the tag-forgery bound n * 2^(1-k) for this family."""
    import math

    if msg_len <= 0:
        return float("-inf")
    return math.log2(msg_len) + 1.0 - tag_len
