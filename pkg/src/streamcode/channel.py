"""Erasure channel models and burst statistics.

Stochastic models start in the good state.  Each step first moves the
Markov chain, then draws the loss from the state just entered.  Transition
and loss draws come from two separate Philox streams keyed by the seed, so
for a fixed seed the bad-state trajectory does not depend on ``epsilon``
and raising ``epsilon`` only adds erasures.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from numba import njit

from .errors import EnumerationSizeError, ParameterError

__all__ = [
    "GilbertElliottParams",
    "FritchmanParams",
    "ErasureTrace",
    "ge_trace",
    "fritchman_trace",
    "periodic_trace",
    "adversary_patterns",
    "is_admissible",
    "count_admissible",
    "burst_histogram",
    "burst_lengths",
    "geometric_pmf",
    "negbin_pmf",
    "histogram_csv",
]

_CHUNK = 1 << 20


def _prob(name, x):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {x}")
    return x


@dataclass(frozen=True)
class GilbertElliottParams:
    alpha: float  # good -> bad
    beta: float  # bad -> good
    epsilon: float = 0.0  # loss probability in the good state

    def __post_init__(self):
        for name in ("alpha", "beta", "epsilon"):
            _prob(name, getattr(self, name))

    @property
    def tag(self) -> str:
        return f"ge(alpha={self.alpha:g},beta={self.beta:g},eps={self.epsilon:g})"

    def loss_rate(self) -> float:
        """Stationary erasure probability."""
        a, b, e = self.alpha, self.beta, self.epsilon
        if a + b == 0:
            return e
        return b / (a + b) * e + a / (a + b)

    def loss_count_std(self, length: int) -> float:
        """Asymptotic standard deviation of the erasure count over ``length`` steps.

        Combines the binomial spread of good-state losses with the
        autocorrelation of the bad-state indicator (lag-``t`` correlation
        ``(1 - alpha - beta)^t``).
        """
        a, b, e = self.alpha, self.beta, self.epsilon
        if a + b == 0:
            return math.sqrt(length * e * (1 - e))
        pi_b = a / (a + b)
        pi_g = 1 - pi_b
        lam = 1 - a - b
        iat = (1 + lam) / (1 - lam) if lam < 1 else float("inf")
        var = length * (pi_g * e * (1 - e) + (1 - e) ** 2 * pi_b * pi_g * iat)
        return math.sqrt(var)

    def burst_pmf(self, length: int) -> float:
        return geometric_pmf(length, self.beta)


@dataclass(frozen=True)
class FritchmanParams:
    n_error_states: int  # N; the chain has N + 1 states
    alpha: float  # good -> E1
    beta: float  # E_i -> E_{i+1} (E_N -> good)
    epsilon: float = 0.0

    def __post_init__(self):
        if int(self.n_error_states) != self.n_error_states or self.n_error_states < 1:
            raise ParameterError(f"need at least one error state, got {self.n_error_states}")
        for name in ("alpha", "beta", "epsilon"):
            _prob(name, getattr(self, name))

    @property
    def n_states(self) -> int:
        return self.n_error_states + 1

    @property
    def tag(self) -> str:
        return (f"fritchman(N={self.n_error_states},alpha={self.alpha:g},"
                f"beta={self.beta:g},eps={self.epsilon:g})")

    def mean_burst(self) -> float:
        return self.n_error_states / self.beta

    def loss_rate(self) -> float:
        a, b, e, N = self.alpha, self.beta, self.epsilon, self.n_error_states
        if a == 0:
            return e
        # expected dwell: 1/alpha in good, N/beta across the error states
        pi_g = (1 / a) / (1 / a + N / b)
        return pi_g * e + (1 - pi_g)

    def burst_pmf(self, length: int) -> float:
        return negbin_pmf(length, self.n_error_states, self.beta)


@dataclass(frozen=True, eq=False)
class ErasureTrace:
    erased: np.ndarray = field(repr=False)
    seed: int | None = None
    model_tag: str = ""

    @property
    def length(self) -> int:
        return int(self.erased.shape[0])

    def __len__(self) -> int:
        return self.length

    @property
    def erasure_rate(self) -> float:
        return float(self.erased.mean()) if self.length else 0.0

    def to_rle(self) -> str:
        """Run-length text: alternating runs, starting with received (``.``)."""
        runs = []
        e = self.erased
        if e.size:
            edges = np.flatnonzero(np.diff(e.astype(np.int8))) + 1
            starts = np.concatenate([[0], edges])
            ends = np.concatenate([edges, [e.size]])
            for s, t in zip(starts, ends):
                runs.append(f"{'x' if e[s] else '.'}{t - s}")
        return " ".join(runs)

    @classmethod
    def from_rle(cls, text: str, seed=None, model_tag="") -> "ErasureTrace":
        parts = []
        for tok in text.split():
            sym, count = tok[0], int(tok[1:])
            if sym not in ".x":
                raise ParameterError(f"bad run {tok!r}")
            parts.append(np.full(count, sym == "x"))
        erased = np.concatenate(parts) if parts else np.zeros(0, dtype=bool)
        return cls(erased, seed, model_tag)


def _streams(seed: int):
    ss = np.random.SeedSequence([int(seed), 0x6E6C])
    trans, loss = ss.spawn(2)
    return np.random.Generator(np.random.Philox(trans)), np.random.Generator(np.random.Philox(loss))


@njit(cache=True)
def _ge_states(ut, alpha, beta, bad0):
    out = np.empty(ut.shape[0], dtype=np.bool_)
    bad = bad0
    for i in range(ut.shape[0]):
        if bad:
            if ut[i] < beta:
                bad = False
        else:
            if ut[i] < alpha:
                bad = True
        out[i] = bad
    return out


@njit(cache=True)
def _fritchman_states(ut, alpha, beta, n_err, s0):
    out = np.empty(ut.shape[0], dtype=np.int32)
    s = s0
    for i in range(ut.shape[0]):
        if s == 0:
            if ut[i] < alpha:
                s = 1
        elif ut[i] < beta:
            s = s + 1 if s < n_err else 0
        out[i] = s
    return out


def ge_trace(params: GilbertElliottParams, length: int, seed: int = 0) -> ErasureTrace:
    if length < 0:
        raise ParameterError("trace length must be non-negative")
    rt, rl = _streams(seed)
    erased = np.empty(length, dtype=bool)
    bad = False
    for lo in range(0, length, _CHUNK):
        hi = min(length, lo + _CHUNK)
        states = _ge_states(rt.random(hi - lo), params.alpha, params.beta, bad)
        if hi > lo:
            bad = bool(states[-1])
        erased[lo:hi] = states | (rl.random(hi - lo) < params.epsilon)
    return ErasureTrace(erased, seed, params.tag)


def fritchman_trace(params: FritchmanParams, length: int, seed: int = 0) -> ErasureTrace:
    if length < 0:
        raise ParameterError("trace length must be non-negative")
    rt, rl = _streams(seed)
    erased = np.empty(length, dtype=bool)
    s = 0
    for lo in range(0, length, _CHUNK):
        hi = min(length, lo + _CHUNK)
        states = _fritchman_states(rt.random(hi - lo), params.alpha, params.beta,
                                   params.n_error_states, s)
        if hi > lo:
            s = int(states[-1])
        erased[lo:hi] = (states != 0) | (rl.random(hi - lo) < params.epsilon)
    return ErasureTrace(erased, seed, params.tag)


def periodic_trace(cT: int, dT: int, T: int, n_periods: int) -> ErasureTrace:
    """Period ``T + cT - dT + 1`` whose first ``cT - 1`` slots are erased."""
    if not dT <= cT <= T + 1 or dT < 1:
        raise ParameterError(f"need 1 <= dT <= cT <= T+1, got cT={cT}, dT={dT}, T={T}")
    period = T + cT - dT + 1
    one = np.zeros(period, dtype=bool)
    one[: cT - 1] = True
    return ErasureTrace(np.tile(one, n_periods), None, f"periodic(cT={cT},dT={dT},T={T})")


# ---------------------------------------------------------------------------
# sliding-window adversary


def _window_ok(win, B: int, N: int) -> bool:
    idx = np.flatnonzero(win)
    if idx.size <= N:
        return True
    return idx.size <= B and idx[-1] - idx[0] + 1 == idx.size


def is_admissible(erased, B: int, N: int, W: int) -> bool:
    """Every length-``W`` window holds at most ``N`` erasures or one burst of
    length at most ``B``.  Traces shorter than ``W`` form a single window."""
    e = np.asarray(erased, dtype=bool)
    if e.size <= W:
        return _window_ok(e, B, N)
    return all(_window_ok(e[i : i + W], B, N) for i in range(e.size - W + 1))


def count_admissible(B: int, N: int, W: int, horizon: int) -> int:
    """Exact number of admissible traces, by a transfer count over the last
    ``W - 1`` positions."""
    if horizon <= W:
        return sum(1 for bits in product((0, 1), repeat=horizon) if _window_ok(np.array(bits, bool), B, N))
    counts: Counter = Counter()
    for bits in product((0, 1), repeat=W):
        if _window_ok(np.array(bits, bool), B, N):
            counts[bits[1:]] += 1
    for _ in range(horizon - W):
        nxt: Counter = Counter()
        for tail, c in counts.items():
            for b in (0, 1):
                win = tail + (b,)
                if _window_ok(np.array(win, bool), B, N):
                    nxt[win[1:]] += c
        counts = nxt
    return sum(counts.values())


def adversary_patterns(B: int, N: int, W: int, horizon: int, limit: int = 200_000):
    """Yield every admissible erasure trace over ``[0, horizon)`` as a boolean array.

    Raises :class:`EnumerationSizeError` when the exact count exceeds ``limit``.
    """
    if not (0 <= N <= B <= W) or horizon < 0:
        raise ParameterError(f"need 0 <= N <= B <= W, got B={B}, N={N}, W={W}")
    if W > 20:
        raise EnumerationSizeError(f"window {W} too wide to enumerate", 2 ** horizon)
    total = count_admissible(B, N, W, horizon)
    if total > limit:
        raise EnumerationSizeError(
            f"{total} admissible traces for B={B}, N={N}, W={W}, horizon={horizon} (limit {limit})",
            total,
        )
    return _enumerate(B, N, W, horizon)


def _enumerate(B, N, W, horizon):
    buf = np.zeros(horizon, dtype=bool)

    def rec(i):
        if i == horizon:
            yield buf.copy()
            return
        for bit in (False, True):
            buf[i] = bit
            lo = max(0, i - W + 1)
            if _window_ok(buf[lo : i + 1], B, N):
                yield from rec(i + 1)
        buf[i] = False

    return rec(0)


# ---------------------------------------------------------------------------
# burst statistics


def burst_lengths(erased) -> np.ndarray:
    """Lengths of the maximal runs of erasures, in order of occurrence."""
    e = np.asarray(erased, dtype=np.int8)
    if e.size == 0:
        return np.zeros(0, dtype=np.int64)
    d = np.diff(np.concatenate([[0], e, [0]]))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return ends - starts


def burst_histogram(trace) -> dict[int, int]:
    erased = trace.erased if isinstance(trace, ErasureTrace) else trace
    lens, counts = np.unique(burst_lengths(erased), return_counts=True)
    return {int(l): int(c) for l, c in zip(lens, counts)}


def geometric_pmf(length: int, beta: float) -> float:
    if length < 1:
        return 0.0
    return (1 - beta) ** (length - 1) * beta


def negbin_pmf(length: int, n_failures: int, p: float) -> float:
    """Burst length through ``n_failures`` serial states left with probability
    ``p`` per step: ``length - n_failures`` extra stays before the last exit."""
    x = length - n_failures
    if x < 0:
        return 0.0
    return math.comb(n_failures + x - 1, x) * p ** n_failures * (1 - p) ** x


def histogram_csv(hist: dict[int, int], pmf=None) -> str:
    lines = ["burst_length,count,expected_pmf"]
    for length in sorted(hist):
        exp = "" if pmf is None else f"{pmf(length):.6g}"
        lines.append(f"{length},{hist[length]},{exp}")
    return "\n".join(lines) + "\n"
