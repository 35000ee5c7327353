"""Column distance and column span: exact oracles, closed forms, the tradeoff bound.

Weights and spans are counted in whole packets.  The oracles decide
recoverability of ``s[0]`` inside the window ``[0, T]`` by a rank test on
the parity equations seen at unerased positions; unerased source packets are
known outright (systematic codes), so only erased source sub-symbols appear
as unknowns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .code import CodeSpec
from .errors import EnumerationSizeError, ParameterError, RegimeError

__all__ = [
    "MetricReport",
    "TradeoffRow",
    "recoverable",
    "column_span_oracle",
    "column_distance_oracle",
    "distance_witness",
    "pattern_count",
    "closed_form_cT",
    "closed_form_dT",
    "closed_forms",
    "tradeoff_bound",
    "bound_slack",
    "bound_rhs",
    "bound_lhs",
    "tradeoff_table",
    "bound_curve",
    "rate_split",
    "metric_report",
    "METRICS_CSV_HEADER",
]

METRICS_CSV_HEADER = (
    "code_id,u,v,delta,T,field_m,seed,R_num,R_den,cT_closed,dT_closed,"
    "cT_oracle,dT_oracle,bound_rhs,bound_lhs,optimal_flag"
)


def _first_lags(spec: CodeSpec) -> np.ndarray:
    # earliest lag at which each source sub-symbol enters a parity check
    nz = spec.parity.any(axis=2)  # (M+1, k)
    big = spec.memory + spec.T + 10
    lags = np.where(nz.any(axis=0), nz.argmax(axis=0), big)
    return lags


def _parity_system(spec: CodeSpec, erased: np.ndarray):
    """Coefficient matrix of the parity checks at unerased times.

    Columns are ordered by the time each unknown first enters a parity
    check, with the ``k`` unknowns of ``s[0]`` last.
    """
    E = np.flatnonzero(erased)
    R = np.flatnonzero(~erased)
    k, p, M = spec.k, spec.p, spec.memory
    gf = spec.field
    A = gf.zeros((len(R) * p, len(E) * k))
    if A.size:
        for ri, t in enumerate(R):
            for ei, j in enumerate(E):
                lag = t - j
                if 0 <= lag <= M:
                    A[ri * p : (ri + 1) * p, ei * k : (ei + 1) * k] = spec.parity[lag].T
    first = _first_lags(spec)
    keys = [(j == 0, j + first[a], j, a) for j in E for a in range(k)]
    order = sorted(range(len(keys)), key=keys.__getitem__)
    return np.ascontiguousarray(A[:, order])


def _as_pattern(erased, length=None) -> np.ndarray:
    pat = np.asarray(erased, dtype=bool).reshape(-1)
    if length is not None:
        if pat.shape[0] > length:
            raise ParameterError(f"pattern longer than the window ({pat.shape[0]} > {length})")
        if pat.shape[0] < length:
            pat = np.concatenate([pat, np.zeros(length - pat.shape[0], dtype=bool)])
    return pat


def recoverable(spec: CodeSpec, erased, deadline_pos: int | None = None) -> bool:
    """True iff ``s[0]`` is uniquely determined by the unerased packets in
    ``[0, deadline_pos]`` (default ``T``)."""
    D = spec.T if deadline_pos is None else deadline_pos
    pat = _as_pattern(erased, D + 1)
    if not pat[0]:
        return True
    if spec.p == 0 or pat.all():
        return False
    A = _parity_system(spec, pat)
    if A.shape[0] == 0:
        return False
    rank, piv = spec.field.echelon(A)
    ncols = A.shape[1]
    return int(np.count_nonzero(piv >= ncols - spec.k)) == spec.k


def _burst(T: int, B: int) -> np.ndarray:
    pat = np.zeros(T + 1, dtype=bool)
    pat[:B] = True
    return pat


def column_span_oracle(spec: CodeSpec, T: int | None = None, linear: bool = False) -> int:
    """``1 +`` the longest burst starting at time 0 after which ``s[0]`` is
    still recovered by its deadline.

    Recoverability is monotone in the burst length, so a bisection is used
    unless ``linear`` asks for the plain scan.
    """
    T = spec.T if T is None else T
    if linear:
        best = 0
        for B in range(1, T + 2):
            if recoverable(spec, _burst(T, B), T):
                best = B
            else:
                break
        return best + 1
    lo, hi = 0, T + 1  # burst lo recoverable, burst hi not
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if recoverable(spec, _burst(T, mid), T):
            lo = mid
        else:
            hi = mid
    return lo + 1


def pattern_count(T: int, max_weight: int) -> int:
    """Number of patterns the distance search visits up to ``max_weight``."""
    return sum(math.comb(T, w - 1) for w in range(1, min(max_weight, T + 1) + 1))


def distance_witness(spec: CodeSpec, max_weight_cap: int | None = None, T: int | None = None,
                     limit: int | None = None):
    """Smallest failing erasure pattern as ``(weight, pattern)``, or ``None``
    when no pattern of weight ``<= max_weight_cap`` defeats the code."""
    T = spec.T if T is None else T
    cap = T + 1 if max_weight_cap is None else min(max_weight_cap, T + 1)
    if limit is not None:
        est = pattern_count(T, cap)
        if est > limit:
            raise EnumerationSizeError(
                f"column-distance search would test up to {est} patterns (limit {limit})", est
            )
    for w in range(1, cap + 1):
        for rest in combinations(range(1, T + 1), w - 1):
            pat = np.zeros(T + 1, dtype=bool)
            pat[0] = True
            pat[list(rest)] = True
            if not recoverable(spec, pat, T):
                return w, pat
    return None


def column_distance_oracle(spec: CodeSpec, max_weight_cap: int | None = None,
                           T: int | None = None) -> int | None:
    """Smallest number of erasures (``s[0]`` included) in ``[0, T]`` that
    defeats recovery of ``s[0]``; ``None`` when the cap is exceeded."""
    hit = distance_witness(spec, max_weight_cap, T)
    return None if hit is None else hit[0]


# ---------------------------------------------------------------------------
# closed forms and the bound


def closed_form_cT(u: int, v: int, delta: int, T: int) -> int:
    simultaneous = (u * (T + 1)) // (2 * u + v)
    sequential = (u * delta) // (u + v)
    return max(simultaneous, sequential) + 1


def closed_form_dT(u: int, v: int, delta: int, T: int) -> int:
    # regime: delta >= R (T+1) with R = (u+v)/(2u+v); R >= 1/2 holds for v >= 0
    if v < 0 or delta * (2 * u + v) < (u + v) * (T + 1):
        raise RegimeError(
            f"closed-form column distance needs delta >= R(T+1); got u={u}, v={v}, "
            f"delta={delta}, T={T}"
        )
    return (u * (T - delta)) // (u + v) + 2


def closed_forms(spec: CodeSpec):
    """``(c_T, d_T)`` from the closed forms, ``d_T`` ``None`` out of regime."""
    if spec.family in ("erlc", "maxspan"):
        cT = closed_form_cT(spec.u, spec.v, spec.delta, spec.T)
        try:
            dT = closed_form_dT(spec.u, spec.v, spec.delta, spec.T)
        except RegimeError:
            dT = None
        return cT, dT
    if spec.family == "rlc":
        d = 1 + ((spec.n - spec.k) * (spec.T + 1)) // spec.n
        return d, d
    return 1, 1


def _frac(R) -> Fraction:
    R = Fraction(R).limit_denominator(10_000) if isinstance(R, float) else Fraction(R)
    if not 0 < R < 1:
        raise ParameterError(f"rate must lie in (0, 1), got {R}")
    return R


def bound_rhs(R, T: int) -> Fraction:
    R = _frac(R)
    return T + 1 + 1 / (1 - R)


def bound_lhs(R, cT: int, dT: int) -> Fraction:
    R = _frac(R)
    return R / (1 - R) * cT + dT


def tradeoff_bound(R, T: int, cT: int) -> Fraction:
    """Largest column distance any rate-``R`` code with span ``cT`` may have."""
    R = _frac(R)
    return min(bound_rhs(R, T) - R / (1 - R) * cT, Fraction(cT))


def bound_slack(R, T: int, cT: int, dT: int) -> Fraction:
    return bound_rhs(R, T) - bound_lhs(R, cT, dT)


def rate_split(R):
    """Smallest ``(u, v)`` with ``(u+v)/(2u+v) == R``."""
    R = _frac(R)
    u, v = R.denominator - R.numerator, 2 * R.numerator - R.denominator
    if v < 0:
        raise ParameterError(f"embedded codes have rate >= 1/2, got {R}")
    return u, v


@dataclass(frozen=True)
class TradeoffRow:
    R: Fraction
    T: int
    delta: int
    cT: int
    dT: int
    bound_dT: Fraction

    @property
    def slack(self) -> Fraction:
        return bound_slack(self.R, self.T, self.cT, self.dT)


def tradeoff_table(R, T: int, m: int | None = None, seed: int = 0, oracle: bool = False):
    """Closed-form ``(c_T, d_T)`` of the embedded code for every shift in
    ``[ceil(R(T+1)), T]`` next to the bound.  With ``oracle`` each row is
    re-derived by the exact search (small ``T`` only) and must agree."""
    R = _frac(R)
    u, v = rate_split(R)
    lo = math.ceil(R * (T + 1))
    rows = []
    for delta in range(lo, T + 1):
        cT = closed_form_cT(u, v, delta, T)
        dT = closed_form_dT(u, v, delta, T)
        if oracle:
            from .code import build_erlc

            spec = build_erlc(u, v, delta, T, m=m, seed=seed)
            oc, od = column_span_oracle(spec), column_distance_oracle(spec)
            if (oc, od) != (cT, dT):
                raise AssertionError(
                    f"oracle ({oc}, {od}) disagrees with closed form ({cT}, {dT}) at delta={delta}"
                )
        rows.append(TradeoffRow(R, T, delta, cT, dT, tradeoff_bound(R, T, cT)))
    return rows


def bound_curve(R, T: int):
    """``(c_T, max d_T)`` pairs along the outer bound."""
    R = _frac(R)
    out = []
    for cT in range(1, T + 2):
        b = tradeoff_bound(R, T, cT)
        if b >= 1:
            out.append((cT, b))
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class MetricReport:
    code_id: str
    R: Fraction
    T: int
    cT_closed: int
    dT_closed: int | None
    cT_oracle: int | None = None
    dT_oracle: int | None = None

    @property
    def cT(self) -> int:
        return self.cT_oracle if self.cT_oracle is not None else self.cT_closed

    @property
    def dT(self) -> int | None:
        return self.dT_oracle if self.dT_oracle is not None else self.dT_closed

    @property
    def bound_slack(self) -> Fraction | None:
        if self.dT is None or self.R >= 1:
            return None
        return bound_slack(self.R, self.T, self.cT, self.dT)


def metric_report(spec: CodeSpec, oracle: bool = False, dT_oracle: bool | None = None,
                  dT_cap: int | None = None) -> MetricReport:
    """Closed forms plus, on request, the exact oracles.

    ``oracle`` turns on the span search; the distance search follows it
    unless ``dT_oracle`` says otherwise.
    """
    cT, dT = closed_forms(spec)
    want_d = oracle if dT_oracle is None else dT_oracle
    return MetricReport(
        code_id=spec.code_id,
        R=spec.rate,
        T=spec.T,
        cT_closed=cT,
        dT_closed=dT,
        cT_oracle=column_span_oracle(spec) if oracle else None,
        dT_oracle=column_distance_oracle(spec, dT_cap) if want_d else None,
    )


def _g6(x) -> str:
    return "" if x is None else f"{float(x):.6g}"


def metrics_csv_row(spec: CodeSpec, rep: MetricReport) -> str:
    R = rep.R
    rhs = bound_rhs(R, rep.T) if R < 1 else None
    lhs = bound_lhs(R, rep.cT, rep.dT) if (R < 1 and rep.dT is not None) else None
    optimal = "" if lhs is None else int(lhs == rhs)
    cells = [
        rep.code_id.replace(",", ";"), spec.u, spec.v, spec.delta, spec.T, spec.m, spec.seed,
        R.numerator, R.denominator, rep.cT_closed,
        "" if rep.dT_closed is None else rep.dT_closed,
        "" if rep.cT_oracle is None else rep.cT_oracle,
        "" if rep.dT_oracle is None else rep.dT_oracle,
        _g6(rhs), _g6(lhs), optimal,
    ]
    return ",".join(str(c) for c in cells)
