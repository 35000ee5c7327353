"""Arithmetic and dense linear algebra over GF(2^m).

Elements are plain integers in ``[0, 2^m)``; matrices are 2-D numpy arrays of
the field's storage dtype.  Multiplication goes through log/antilog tables
built once per field instance.  The elimination kernels are compiled with
numba since every analyzer and the streaming decoder sit on top of them.
"""
from __future__ import annotations

import functools
import os

import numpy as np
from numba import njit

__all__ = [
    "GF",
    "DEFAULT_POLYS",
    "get_field",
    "default_m",
    "fe_add",
    "fe_mul",
    "mat_rank",
    "mat_solve",
    "seeded_random_matrix",
]

# Reduction polynomials, bit i = coefficient of x^i.
DEFAULT_POLYS = {
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11B,  # x^8 + x^4 + x^3 + x + 1
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}


def _clmul_mod(a: int, b: int, m: int, poly: int) -> int:
    # shift-and-add with reduction; only used while building tables
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
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
    """The finite field GF(2^m) with a fixed reduction polynomial.

    The polynomial only has to be irreducible; a primitive element is
    searched for when building the tables (for the AES polynomial used at
    m = 8, ``x`` itself is not primitive).
    """

    def __init__(self, m: int = 16, poly: int | None = None):
        if not 2 <= m <= 16:
            raise ValueError(f"field size 2^{m} not supported (2 <= m <= 16)")
        self.m = m
        self.q = 1 << m
        self.poly = DEFAULT_POLYS[m] if poly is None else poly
        self.dtype = np.uint8 if m <= 8 else np.uint16
        self.generator = self._find_generator()
        qm1 = self.q - 1
        exp = np.zeros(2 * qm1 + 1, dtype=np.int32)
        log = np.zeros(self.q, dtype=np.int32)
        x = 1
        for i in range(qm1):
            exp[i] = x
            log[x] = i
            x = _clmul_mod(x, self.generator, m, self.poly)
        if x != 1:
            raise ValueError(f"polynomial {self.poly:#x} is not irreducible")
        exp[qm1 : 2 * qm1] = exp[:qm1]
        exp.setflags(write=False)
        log.setflags(write=False)
        self.exp = exp
        self.log = log

    def _find_generator(self) -> int:
        qm1 = self.q - 1
        factors = _prime_factors(qm1)
        for g in range(2, self.q):
            if all(self._slow_pow(g, qm1 // p) != 1 for p in factors):
                if self._slow_pow(g, qm1) != 1:
                    raise ValueError(f"polynomial {self.poly:#x} is not irreducible")
                return g
        raise ValueError(f"polynomial {self.poly:#x} is not irreducible")

    def _slow_pow(self, a: int, e: int) -> int:
        r = 1
        while e:
            if e & 1:
                r = _clmul_mod(r, a, self.m, self.poly)
            a = _clmul_mod(a, a, self.m, self.poly)
            e >>= 1
        return r

    def __repr__(self) -> str:
        return f"GF(2^{self.m}, poly={self.poly:#x})"

    # -- scalars ---------------------------------------------------------

    @staticmethod
    def add(a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return int(self.exp[(self.q - 1) - self.log[a]])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 1 if e == 0 else 0
        return int(self.exp[(int(self.log[a]) * e) % (self.q - 1)])

    # -- arrays ----------------------------------------------------------

    def asarray(self, a) -> np.ndarray:
        arr = np.asarray(a)
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise ValueError(f"entries outside GF(2^{self.m})")
        return arr.astype(self.dtype, copy=False)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def identity(self, n: int) -> np.ndarray:
        return np.eye(n, dtype=self.dtype)

    def multiply(self, a, b) -> np.ndarray:
        """Elementwise product with numpy broadcasting."""
        a = np.asarray(a)
        b = np.asarray(b)
        out = self.exp[self.log[a] + self.log[b]]
        out = np.where((a == 0) | (b == 0), 0, out)
        return out.astype(self.dtype)

    def matmul(self, A, B) -> np.ndarray:
        A = np.ascontiguousarray(A, dtype=self.dtype)
        B = np.ascontiguousarray(B, dtype=self.dtype)
        row, col = A.ndim == 1, B.ndim == 1
        if row:
            A = A[None, :]
        if col:
            B = B[:, None]
        if A.shape[1] != B.shape[0]:
            raise ValueError(f"shape mismatch {A.shape} @ {B.shape}")
        C = _matmul(A, B, self.exp, self.log)
        if col:
            C = C[:, 0]
        return C[0] if row else C

    def rank(self, M) -> int:
        return mat_rank(M, self)

    def solve(self, A, b):
        return mat_solve(A, b, self)

    def random_matrix(self, rows: int, cols: int, seed) -> np.ndarray:
        return seeded_random_matrix(rows, cols, seed, self)

    def echelon(self, M: np.ndarray, ncols: int | None = None, reduced: bool = False):
        """Row-reduce ``M`` in place; returns ``(rank, pivot_columns)``.

        Pivots are searched only in the first ``ncols`` columns, but row
        operations span the whole row, so an augmented right-hand side is
        carried along.
        """
        if M.dtype != self.dtype or not M.flags.c_contiguous:
            raise TypeError("echelon needs a C-contiguous array of the field dtype")
        if ncols is None:
            ncols = M.shape[1]
        r, piv = _echelon(M, self.exp, self.log, self.q - 1, ncols, reduced)
        return int(r), piv


@functools.lru_cache(maxsize=None)
def get_field(m: int | None = None) -> GF:
    """Shared field instance per size (fields are immutable)."""
    return GF(default_m() if m is None else m)


def default_m() -> int:
    return int(os.environ.get("STREAMCODE_FIELD_M", "16"))


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _matmul(A, B, exp, log):
    n, kk = A.shape
    p = B.shape[1]
    C = np.zeros((n, p), dtype=A.dtype)
    lb = np.empty(p, dtype=np.int32)
    nzb = np.empty(p, dtype=np.int64)
    for t in range(kk):
        cnt = 0
        for j in range(p):
            if B[t, j] != 0:
                lb[cnt] = log[B[t, j]]
                nzb[cnt] = j
                cnt += 1
        if cnt == 0:
            continue
        for i in range(n):
            a = A[i, t]
            if a != 0:
                la = log[a]
                for s in range(cnt):
                    C[i, nzb[s]] ^= exp[la + lb[s]]
    return C


@njit(cache=True)
def _echelon(M, exp, log, qm1, ncols, reduced):
    rows, cols = M.shape
    r = 0
    piv = np.empty(min(rows, ncols), dtype=np.int64)
    nz = np.empty(cols, dtype=np.int64)
    lp = np.empty(cols, dtype=np.int32)
    for c in range(ncols):
        if r == rows:
            break
        p = -1
        for i in range(r, rows):
            if M[i, c] != 0:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for j in range(c, cols):
                tmp = M[r, j]
                M[r, j] = M[p, j]
                M[p, j] = tmp
        linv = qm1 - log[M[r, c]]
        cnt = 0
        for j in range(c, cols):
            val = M[r, j]
            if val != 0:
                l = log[val] + linv
                if l >= qm1:
                    l -= qm1
                M[r, j] = exp[l]
                lp[cnt] = l
                nz[cnt] = j
                cnt += 1
        start = 0 if reduced else r + 1
        for i in range(start, rows):
            if i == r:
                continue
            f = M[i, c]
            if f != 0:
                lf = log[f]
                for s in range(cnt):
                    M[i, nz[s]] ^= exp[lf + lp[s]]
        piv[r] = c
        r += 1
    return r, piv[:r]


# ---------------------------------------------------------------------------
# module-level operations


def fe_add(a: int, b: int) -> int:
    return a ^ b


def fe_mul(a: int, b: int, field: GF | None = None) -> int:
    return (field or get_field()).mul(a, b)


def mat_rank(M, field: GF | None = None) -> int:
    """Row rank by Gaussian elimination (first nonzero pivot, column order)."""
    field = field or get_field()
    M = np.array(M, dtype=field.dtype, order="C", copy=True)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if M.size == 0:
        return 0
    r, _ = field.echelon(M)
    return r


def mat_solve(A, b, field: GF | None = None):
    """Solve ``A x = b``.

    Returns ``(x, unique)`` for a consistent system (free variables set to
    zero when underdetermined), or ``None`` when the system is inconsistent.
    """
    field = field or get_field()
    A = np.asarray(A, dtype=field.dtype)
    b = np.asarray(b, dtype=field.dtype).reshape(-1)
    if A.ndim != 2 or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    rows, cols = A.shape
    aug = np.empty((rows, cols + 1), dtype=field.dtype)
    aug[:, :cols] = A
    aug[:, cols] = b
    r, piv = field.echelon(aug, ncols=cols, reduced=True)
    if np.any(aug[r:, cols] != 0):
        return None
    x = field.zeros(cols)
    x[piv] = aug[:r, cols]
    return x, r == cols


def seeded_random_matrix(rows: int, cols: int, seed, field: GF | None = None) -> np.ndarray:
    """Uniform random matrix from a Philox stream keyed by ``seed``.

    ``seed`` may be an int or a sequence of ints; the low ``m`` bits of each
    raw 64-bit counter output become one entry, so the result depends only on
    ``(rows, cols, seed, m)``.
    """
    field = field or get_field()
    if rows < 0 or cols < 0:
        raise ValueError("matrix dimensions must be non-negative")
    if rows * cols == 0:
        return field.zeros((rows, cols))
    key = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    bitgen = np.random.Philox(np.random.SeedSequence([int(s) for s in key]))
    raw = bitgen.random_raw(rows * cols)
    return (raw & np.uint64(field.q - 1)).astype(field.dtype).reshape(rows, cols)
