"""Streaming erasure decoder with a per-packet deadline.

The decoder keeps every unresolved source sub-symbol as a column of one
dense system in reduced row echelon form.  Columns are ordered by packet
time, so the oldest unknowns sit on the left.  Once no future parity can
reference a packet, its columns are eliminated by dropping them together
with the rows that pivot in them: in reduced echelon form no other row
touches those columns, so what remains is exactly the constraint set on the
surviving unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .code import ChannelPacket, CodeSpec, _parity_stack, encode_stream
from .errors import ContractError

__all__ = [
    "StreamingDecoder",
    "DeadlineVerdict",
    "LossReport",
    "run",
    "run_stream",
    "split_episodes",
    "EpisodeCache",
]


@dataclass(frozen=True)
class DeadlineVerdict:
    time: int
    recovered: bool
    values: np.ndarray | None = None


@dataclass(frozen=True)
class LossReport:
    total_packets: int
    lost_packets: int
    late_recoveries: int = 0
    erased_packets: int = 0

    def __post_init__(self):
        if not 0 <= self.lost_packets <= self.total_packets:
            raise ContractError(f"lost {self.lost_packets} of {self.total_packets} packets")

    @property
    def loss_rate(self) -> Fraction:
        if self.total_packets == 0:
            return Fraction(0)
        return Fraction(self.lost_packets, self.total_packets)

    def __add__(self, other: "LossReport") -> "LossReport":
        return LossReport(
            self.total_packets + other.total_packets,
            self.lost_packets + other.lost_packets,
            self.late_recoveries + other.late_recoveries,
            self.erased_packets + other.erased_packets,
        )


class StreamingDecoder:
    """Feed channel packets in time order; collect deadline verdicts.

    ``step(t, packet)`` takes a :class:`ChannelPacket` or ``None`` for an
    erasure and returns the verdict for packet ``t - T`` (empty list before
    the first deadline).
    """

    def __init__(self, spec: CodeSpec):
        self.spec = spec
        self.gf = spec.field
        self.k, self.p, self.M, self.T = spec.k, spec.p, spec.memory, spec.T
        self.span = max(self.M, self.T) + 1
        self.now = -1
        self._vals = self.gf.zeros((self.span, self.k))
        self._known = np.ones((self.span, self.k), dtype=bool)
        # lag-major parity rows: row l*k + i is P_l[i]
        self._P = np.ascontiguousarray(spec.parity.reshape((self.M + 1) * self.k, self.p))
        stack = _parity_stack(spec)
        # most window rows never reach the parity; skip them up front
        self._live = np.flatnonzero(stack.any(axis=1))
        self._stack = np.ascontiguousarray(stack[self._live])
        self._col_time = np.zeros(0, dtype=np.int64)
        self._col_idx = np.zeros(0, dtype=np.int64)
        self._A = self.gf.zeros((0, 1))
        self._late: set[int] = set()
        self.late_times: list[int] = []

    @property
    def late_recoveries(self) -> int:
        return len(self.late_times)

    @property
    def n_unknowns(self) -> int:
        return int(self._col_time.size)

    @property
    def n_equations(self) -> int:
        return int(self._A.shape[0])

    def known(self, j: int) -> bool:
        """Whether packet ``j`` is fully known (received or recovered)."""
        if j < 0:
            return True
        if j <= self.now - self.span:
            raise ContractError(f"packet {j} is outside the retention window")
        return bool(self._known[j % self.span].all())

    def known_mask(self, j: int) -> np.ndarray:
        """Per-sub-symbol resolution flags of packet ``j``."""
        self.known(j)
        return self._known[j % self.span].copy()

    def value(self, j: int) -> np.ndarray:
        return self._vals[j % self.span].copy()

    def step(self, t: int, packet: ChannelPacket | None) -> list[DeadlineVerdict]:
        if packet is None:
            return self._step(t, None, None)
        return self._step(t, np.asarray(packet.source, self.gf.dtype),
                          np.asarray(packet.parity, self.gf.dtype))

    def _step(self, t, source, parity):
        if t != self.now + 1:
            raise ContractError(f"decoder expected time {self.now + 1}, got {t}")
        self.now = t
        slot = t % self.span
        if source is None:
            self._vals[slot] = 0
            self._known[slot] = False
            self._add_columns(t)
        else:
            self._vals[slot] = source
            self._known[slot] = True
            if self.p and self._col_time.size:
                self._add_equations(t, parity)
        out = []
        j = t - self.T
        if j >= 0:
            ok = bool(self._known[j % self.span].all())
            out.append(DeadlineVerdict(j, ok, self._vals[j % self.span].copy() if ok else None))
            if not ok:
                self._late.add(j)
        self._retire(t - self.M)
        return out

    def _add_columns(self, t):
        k = self.k
        A = self.gf.zeros((self._A.shape[0], self._A.shape[1] + k))
        nc = self._col_time.size
        A[:, :nc] = self._A[:, :nc]
        A[:, -1] = self._A[:, -1]
        self._A = A
        self._col_time = np.concatenate([self._col_time, np.full(k, t, dtype=np.int64)])
        self._col_idx = np.concatenate([self._col_idx, np.arange(k, dtype=np.int64)])

    def _add_equations(self, t, parity):
        gf, k, M = self.gf, self.k, self.M
        # known contribution over the window s[t-M..t], oldest first
        lo = t - M
        times = np.arange(lo, t + 1)
        slots = times % self.span
        window = self._vals[slots].copy()
        window[times < 0] = 0
        window[~self._known[slots]] = 0
        const = parity ^ gf.matmul(window.reshape(-1)[self._live], self._stack)
        lags = t - self._col_time
        E = self._P[lags * k + self._col_idx].T  # (p, ncols)
        if not E.any():
            if const.any():
                raise ContractError("parity equations are inconsistent with received data")
            return
        rows = np.empty((self.p, E.shape[1] + 1), dtype=gf.dtype)
        rows[:, :-1] = E
        rows[:, -1] = const
        self._A = np.ascontiguousarray(np.vstack([self._A, rows]))
        self._reduce()

    def _reduce(self):
        A = self._A
        nc = self._col_time.size
        r, piv = self.gf.echelon(A, ncols=nc, reduced=True)
        if np.any(A[r:, -1]):
            raise ContractError("parity equations are inconsistent with received data")
        A = A[:r]
        nnz = np.count_nonzero(A[:, :nc], axis=1)
        single = np.flatnonzero(nnz == 1)
        if single.size:
            cols = piv[single]
            for c, row in zip(cols, single):
                j, i = int(self._col_time[c]), int(self._col_idx[c])
                self._vals[j % self.span, i] = A[row, -1]
                self._known[j % self.span, i] = True
            keep_r = np.ones(r, dtype=bool)
            keep_r[single] = False
            keep_c = np.ones(nc + 1, dtype=bool)
            keep_c[cols] = False
            A = A[keep_r][:, keep_c]
            self._col_time = self._col_time[keep_c[:-1]]
            self._col_idx = self._col_idx[keep_c[:-1]]
            self._check_late()
        self._A = np.ascontiguousarray(A)

    def _check_late(self):
        for j in list(self._late):
            if self._known[j % self.span].all():
                self._late.discard(j)
                self.late_times.append(j)

    def _retire(self, horizon):
        # packets <= horizon are referenced by no future parity
        self._late = {j for j in self._late if j > horizon}
        nold = int(np.searchsorted(self._col_time, horizon, side="right"))
        if nold == 0:
            return
        A = self._A
        nc = self._col_time.size
        if A.shape[0]:
            # rows are in echelon order; a row pivoting left of nold is retired
            lead = np.argmax(A[:, :nc] != 0, axis=1)
            A = A[lead >= nold]
        self._A = np.ascontiguousarray(A[:, nold:])
        self._col_time = self._col_time[nold:]
        self._col_idx = self._col_idx[nold:]


# ---------------------------------------------------------------------------
# full-stream drivers


def _source_block(spec, rng, rows):
    raw = rng.bit_generator.random_raw(rows * spec.k)
    return (raw & np.uint64(spec.field.q - 1)).astype(spec.field.dtype).reshape(rows, spec.k)


def _source_rng(seed, start=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5EC, int(start)])))


def _drive(spec, erased, S, check=True):
    """Decode one stream (source ``S``, erasure mask over its first rows).

    The stream is extended with clear packets until every counted packet has
    met its deadline.  Returns the times of packets lost at their deadline
    and of those recovered late, both restricted to ``erased``'s range.
    """
    L = erased.shape[0]
    tail = max(spec.memory, spec.T)
    full = np.vstack([S, _zero_tail(spec, S, tail)]) if tail else S
    X = encode_stream(spec, full)
    dec = StreamingDecoder(spec)
    lost = []
    for t in range(L + tail):
        if t < L and erased[t]:
            verdicts = dec._step(t, None, None)
        else:
            verdicts = dec._step(t, X[t, : spec.k], X[t, spec.k :])
        for v in verdicts:
            if v.time >= L:
                continue
            if not v.recovered:
                lost.append(v.time)
            elif check and not np.array_equal(v.values, full[v.time]):
                raise ContractError(f"decoder recovered a wrong value for packet {v.time}")
    return tuple(lost), tuple(j for j in dec.late_times if j < L)


def _zero_tail(spec, S, tail):
    # flush packets carry fresh data in the literal run; zeros keep it cheap
    return spec.field.zeros((tail, spec.k))


def run_stream(spec: CodeSpec, trace, source_seed: int = 0, check: bool = True) -> LossReport:
    """Decode the whole trace in one pass (reference path)."""
    erased = np.asarray(getattr(trace, "erased", trace), dtype=bool)
    S = _source_block(spec, _source_rng(source_seed), erased.shape[0])
    lost, late = _drive(spec, erased, S, check)
    return LossReport(int(erased.shape[0]), len(lost), len(late), int(erased.sum()))


def split_episodes(erased, gap: int):
    """Group erasure positions into runs whose neighbours lie closer than ``gap``.

    Returns a list of ``(start, offsets)`` with ``offsets`` relative to ``start``.
    """
    pos = np.flatnonzero(np.asarray(erased, dtype=bool))
    if pos.size == 0:
        return []
    cut = np.flatnonzero(np.diff(pos) >= gap) + 1
    return [(int(g[0]), tuple((g - g[0]).tolist())) for g in np.split(pos, cut)]


class EpisodeCache(dict):
    """Lost and late offsets keyed by code identity and erasure pattern."""


def run(spec: CodeSpec, trace, source_seed: int = 0, cache: EpisodeCache | None = None,
        check: bool = True, counted: tuple[int, int] | None = None) -> LossReport:
    """Decode a trace episode by episode.

    Once ``memory + 1`` clear packets have passed, no unknown survives, so
    erasure clusters separated by such gaps decode independently.  For a
    linear code which packets are lost depends only on the relative erasure
    pattern, which lets repeated patterns reuse a cached result.  Matches
    :func:`run_stream` exactly.

    ``counted = (lo, hi)`` restricts the tally to packets in ``[lo, hi)``;
    episodes straddling the edges are still decoded in full, so reports for
    adjacent ranges add up to the report for their union.
    """
    erased = np.asarray(getattr(trace, "erased", trace), dtype=bool)
    L = int(erased.shape[0])
    lo, hi = (0, L) if counted is None else (max(0, counted[0]), min(L, counted[1]))
    n_erased = int(erased[lo:hi].sum())
    if spec.p == 0:
        return LossReport(max(0, hi - lo), n_erased, 0, n_erased)
    cache = EpisodeCache() if cache is None else cache
    key0 = (spec.code_id, spec.seed, spec.m, spec.attempt)
    lost = late = 0
    for start, offs in split_episodes(erased, spec.memory + 1):
        if start + offs[-1] < lo or start >= hi:
            continue
        key = key0 + (offs,)
        hit = cache.get(key)
        if hit is None:
            length = offs[-1] + 1
            pattern = np.zeros(length, dtype=bool)
            pattern[list(offs)] = True
            S = _source_block(spec, _source_rng(source_seed, start), length)
            hit = _drive(spec, pattern, S, check)
            cache[key] = hit
        lost += sum(1 for o in hit[0] if lo <= start + o < hi)
        late += sum(1 for o in hit[1] if lo <= start + o < hi)
    return LossReport(max(0, hi - lo), lost, late, n_erased)
