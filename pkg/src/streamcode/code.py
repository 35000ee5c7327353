"""Streaming code constructions and their encoders.

Every family is a systematic convolutional code: a channel packet is the
source packet followed by ``n - k`` parity sub-symbols,

    x[i] = ( s[i],  sum_{l=0}^{M} s[i-l] @ P_l ),

so a :class:`CodeSpec` carries the stacked parity blocks ``P`` of shape
``(M + 1, k, n - k)``.  For the embedded construction the source splits as
``s = (u, v)``; the ``v`` rows of ``P_l`` hold ``G_l`` for ``1 <= l <= T-1``
and the ``u`` rows hold ``H_{l-delta}`` for ``delta <= l <= T``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .errors import ConstructionError, ContractError, ParameterError
from .gf import GF, default_m, get_field, seeded_random_matrix

__all__ = [
    "CodeSpec",
    "SourcePacket",
    "ChannelPacket",
    "Encoder",
    "build_erlc",
    "build_maxspan",
    "build_rlc",
    "build_uncoded",
    "encode",
    "encode_stream",
    "truncated_generator",
    "parse_code",
    "format_code",
    "to_config",
    "from_config",
]

# seed-derivation tags for the generator blocks
_TAG_G, _TAG_H, _TAG_Q = 1, 2, 3
RLC_MAX_RESAMPLES = 8
RLC_VERIFY_MAX_T = 12


@dataclass(frozen=True, eq=False)
class CodeSpec:
    family: str
    T: int
    k: int
    n: int
    seed: int
    m: int
    parity: np.ndarray = dc_field(repr=False)
    u: int = 0
    v: int = 0
    delta: int = 0
    h0_identity: bool = False
    attempt: int = 0
    G: tuple = dc_field(default=(), repr=False)
    H: tuple = dc_field(default=(), repr=False)

    @property
    def field(self) -> GF:
        return get_field(self.m)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @property
    def memory(self) -> int:
        return self.parity.shape[0] - 1

    @property
    def p(self) -> int:
        return self.n - self.k

    @property
    def B(self) -> int:
        return self.u if self.family == "maxspan" else 0

    @property
    def code_id(self) -> str:
        return format_code(self)

    def split(self, s):
        s = np.asarray(s)
        return s[: self.u], s[self.u :]


@dataclass
class SourcePacket:
    time: int
    u_part: np.ndarray
    v_part: np.ndarray

    @property
    def data(self) -> np.ndarray:
        return np.concatenate([self.u_part, self.v_part])


@dataclass
class ChannelPacket:
    time: int
    u_part: np.ndarray
    v_part: np.ndarray
    parity: np.ndarray

    @property
    def source(self) -> np.ndarray:
        return np.concatenate([self.u_part, self.v_part])

    @property
    def symbols(self) -> np.ndarray:
        return np.concatenate([self.u_part, self.v_part, self.parity])


def _check_int(name, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ParameterError(f"{name} must be >= {lo}, got {value}")
    return int(value)


def build_erlc(u, v, delta, T, m=None, seed=0, h0_identity=False) -> CodeSpec:
    """Embedded random linear code with parity shift ``delta``.

    ``p_v[i] = sum_{j=1}^{T-1} v[i-j] G_j`` and
    ``p_u[i] = sum_{j=0}^{T-delta} u[i-j] H_j``; packet parity is
    ``p_v[i] + p_u[i-delta]``.
    """
    u = _check_int("u", u, 1)
    v = _check_int("v", v, 0)
    T = _check_int("T", T, 0)
    delta = _check_int("delta", delta, 0)
    seed = _check_int("seed", seed)
    if delta > T:
        raise ParameterError(f"delta must satisfy 0 <= delta <= T, got delta={delta}, T={T}")
    m = default_m() if m is None else _check_int("m", m, 2)
    gf = get_field(m)
    k = u + v
    G = tuple(seeded_random_matrix(v, u, (seed, _TAG_G, j), gf) for j in range(1, T))
    H = []
    for j in range(T - delta + 1):
        if j == 0 and h0_identity:
            H.append(gf.identity(u))
        else:
            H.append(seeded_random_matrix(u, u, (seed, _TAG_H, j), gf))
    H = tuple(H)
    P = gf.zeros((T + 1, k, u))
    for j, Gj in enumerate(G, start=1):
        P[j, u:, :] = Gj
    for j, Hj in enumerate(H):
        P[delta + j, :u, :] = Hj
    P.setflags(write=False)
    return CodeSpec(
        family="erlc", T=T, k=k, n=2 * u + v, seed=seed, m=m, parity=P,
        u=u, v=v, delta=delta, h0_identity=bool(h0_identity), G=G, H=H,
    )


def build_maxspan(B, T, m=None, seed=0) -> CodeSpec:
    """Burst-optimal endpoint: ``u = B``, ``v = T - B``, shift ``T``, ``H_0 = I``."""
    B = _check_int("B", B, 1)
    T = _check_int("T", T, 1)
    if B > T:
        raise ParameterError(f"need 1 <= B <= T, got B={B}, T={T}")
    spec = build_erlc(B, T - B, T, T, m=m, seed=seed, h0_identity=True)
    return _replace(spec, family="maxspan")


def build_uncoded(k=1, T=0, m=None) -> CodeSpec:
    k = _check_int("k", k, 1)
    T = _check_int("T", T, 0)
    m = default_m() if m is None else m
    P = get_field(m).zeros((1, k, 0))
    P.setflags(write=False)
    return CodeSpec(family="uncoded", T=T, k=k, n=k, seed=0, m=m, parity=P, v=k)


@functools.lru_cache(maxsize=64)
def build_rlc(k, n, T, m=None, seed=0, verify=None) -> CodeSpec:
    """Systematic random linear convolutional code with memory ``T``.

    For ``T <= 12`` the column distance is checked against the
    Singleton-type value ``1 + floor((n-k)(T+1)/n)`` and the blocks are
    resampled when a draw falls short.  Results are memoised (specs are
    immutable), so repeated parses skip the check.
    """
    k = _check_int("k", k, 1)
    n = _check_int("n", n, 1)
    T = _check_int("T", T, 0)
    seed = _check_int("seed", seed)
    if not k < n:
        raise ParameterError(f"RLC needs k < n, got k={k}, n={n}")
    m = default_m() if m is None else _check_int("m", m, 2)
    if verify is None:
        verify = T <= RLC_VERIFY_MAX_T
    target = 1 + ((n - k) * (T + 1)) // n
    for attempt in range(RLC_MAX_RESAMPLES + 1):
        spec = _rlc_draw(k, n, T, m, seed, attempt)
        if not verify:
            return spec
        from .metrics import column_distance_oracle

        if column_distance_oracle(spec, max_weight_cap=target - 1) is None:
            return spec
    raise ConstructionError(
        f"rlc:k={k},n={n},T={T} seed={seed}: column distance below {target} "
        f"after {RLC_MAX_RESAMPLES} resamples"
    )


def _rlc_draw(k, n, T, m, seed, attempt):
    gf = get_field(m)
    P = np.stack([seeded_random_matrix(k, n - k, (seed, _TAG_Q, attempt, j), gf) for j in range(T + 1)])
    P.setflags(write=False)
    return CodeSpec(family="rlc", T=T, k=k, n=n, seed=seed, m=m, parity=P, v=k, attempt=attempt)


def _replace(spec: CodeSpec, **changes) -> CodeSpec:
    from dataclasses import replace

    return replace(spec, **changes)


# ---------------------------------------------------------------------------
# encoding


def _parity_stack(spec: CodeSpec) -> np.ndarray:
    # rows ordered oldest lag first, matching a history window s[i-M..i]
    M1, k, p = spec.parity.shape
    return np.ascontiguousarray(spec.parity[::-1].reshape(M1 * k, p))


def _as_source(spec, s):
    if isinstance(s, SourcePacket):
        s = s.data
    s = np.asarray(s, dtype=spec.field.dtype).reshape(-1)
    if s.shape[0] != spec.k:
        raise ParameterError(f"source packet has {s.shape[0]} sub-symbols, code expects {spec.k}")
    return s


def encode(spec: CodeSpec, history, s, time: int | None = None) -> ChannelPacket:
    """Encode one source packet given the preceding packets.

    ``history`` holds earlier source packets oldest first (shape ``(h, k)``)
    and must cover the code memory.  A shorter history is accepted only when
    ``time`` says it is the whole stream so far; earlier slots are zero.
    """
    s = _as_source(spec, s)
    M = spec.memory
    hist = np.asarray(history, dtype=spec.field.dtype).reshape(-1, spec.k)
    if hist.shape[0] < M:
        if time is None or hist.shape[0] != time:
            raise ContractError(
                f"history has {hist.shape[0]} packets, encoder memory is {M}"
            )
        pad = spec.field.zeros((M - hist.shape[0], spec.k))
        hist = np.vstack([pad, hist])
    window = np.vstack([hist[hist.shape[0] - M :], s[None, :]]) if M else s[None, :]
    parity = spec.field.matmul(window.reshape(-1), _parity_stack(spec))
    t = -1 if time is None else time
    return ChannelPacket(t, s[: spec.u].copy(), s[spec.u :].copy(), parity)


class Encoder:
    """Stateful encoder; the stream starts at time 0 with zero history."""

    def __init__(self, spec: CodeSpec):
        self.spec = spec
        self.time = 0
        self._window = spec.field.zeros((spec.memory + 1, spec.k))
        self._stack = _parity_stack(spec)

    def push(self, s) -> ChannelPacket:
        s = _as_source(self.spec, s)
        self._window = np.roll(self._window, -1, axis=0)
        self._window[-1] = s
        parity = self.spec.field.matmul(self._window.reshape(-1), self._stack)
        pkt = ChannelPacket(self.time, s[: self.spec.u].copy(), s[self.spec.u :].copy(), parity)
        self.time += 1
        return pkt


def encode_stream(spec: CodeSpec, S) -> np.ndarray:
    """Encode a whole source stream ``S`` (shape ``(L, k)``) into ``(L, n)``."""
    gf = spec.field
    S = np.ascontiguousarray(S, dtype=gf.dtype)
    if S.ndim != 2 or S.shape[1] != spec.k:
        raise ParameterError(f"expected a (L, {spec.k}) source array, got {S.shape}")
    L = S.shape[0]
    X = gf.zeros((L, spec.n))
    X[:, : spec.k] = S
    if spec.p == 0 or L == 0:
        return X
    par = gf.zeros((L, spec.p))
    for lag in range(min(spec.memory, L - 1) + 1):
        Pl = spec.parity[lag]
        if not Pl.any():
            continue
        par[lag:] ^= gf.matmul(S[: L - lag], Pl)
    X[:, spec.k :] = par
    return X


def truncated_generator(spec: CodeSpec, T: int | None = None) -> np.ndarray:
    """Block upper-triangular generator mapping ``[s_0..s_T]`` to ``[x_0..x_T]``."""
    T = spec.T if T is None else T
    gf = spec.field
    k, n = spec.k, spec.n
    G = gf.zeros((k * (T + 1), n * (T + 1)))
    for r in range(T + 1):
        G[r * k : (r + 1) * k, r * n : r * n + k] = gf.identity(k)
        for c in range(r, min(T, r + spec.memory) + 1):
            G[r * k : (r + 1) * k, c * n + k : (c + 1) * n] = spec.parity[c - r]
    return G


# ---------------------------------------------------------------------------
# text forms

_GRAMMAR = "erlc:u=U,v=V,delta=D,T=T[,seed=S][,m=M] | maxspan:B=B,T=T[,seed=S] | rlc:k=K,n=N,T=T[,seed=S] | uncoded[:k=K,T=T]"


def format_code(spec: CodeSpec, with_seed: bool = False) -> str:
    if spec.family == "erlc":
        body = f"u={spec.u},v={spec.v},delta={spec.delta},T={spec.T}"
    elif spec.family == "maxspan":
        body = f"B={spec.u},T={spec.T}"
    elif spec.family == "rlc":
        body = f"k={spec.k},n={spec.n},T={spec.T}"
    else:
        return "uncoded" if not with_seed else f"uncoded:k={spec.k},T={spec.T}"
    if with_seed:
        body += f",seed={spec.seed}"
    return f"{spec.family}:{body}"


def parse_code(text: str, m: int | None = None, seed: int | None = None) -> CodeSpec:
    """Build a code from its compact string form, e.g. ``erlc:u=11,v=1,delta=10,T=12``.

    ``seed`` is used when the string carries none.
    """
    text = text.strip()
    family, _, rest = text.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ParameterError(f"bad code spec {text!r}; grammar: {_GRAMMAR}")
            try:
                kv[key.strip()] = int(val)
            except ValueError:
                raise ParameterError(f"bad value in {text!r}; grammar: {_GRAMMAR}") from None
    m = kv.pop("m", m)
    sd = kv.pop("seed", seed if seed is not None else 0)
    need = {"erlc": {"u", "v", "delta", "T"}, "maxspan": {"B", "T"}, "rlc": {"k", "n", "T"}, "uncoded": set()}
    if family not in need:
        raise ParameterError(f"unknown code family {family!r}; grammar: {_GRAMMAR}")
    allowed = need[family] | ({"k", "T"} if family == "uncoded" else set())
    if not need[family] <= kv.keys() or not kv.keys() <= allowed:
        raise ParameterError(f"bad parameters in {text!r}; grammar: {_GRAMMAR}")
    if family == "erlc":
        return build_erlc(kv["u"], kv["v"], kv["delta"], kv["T"], m=m, seed=sd)
    if family == "maxspan":
        return build_maxspan(kv["B"], kv["T"], m=m, seed=sd)
    if family == "rlc":
        return build_rlc(kv["k"], kv["n"], kv["T"], m=m, seed=sd)
    return build_uncoded(kv.get("k", 1), kv.get("T", 0), m=m)


def to_config(spec: CodeSpec) -> str:
    """Key-value text form; generator blocks are re-derived from the seed."""
    items = [("family", spec.family), ("m", spec.m)]
    if spec.family == "erlc":
        items += [("u", spec.u), ("v", spec.v), ("delta", spec.delta), ("T", spec.T)]
        if spec.h0_identity:
            items.append(("h0_identity", 1))
    elif spec.family == "maxspan":
        items += [("B", spec.u), ("T", spec.T)]
    elif spec.family == "rlc":
        items += [("k", spec.k), ("n", spec.n), ("T", spec.T)]
    else:
        items += [("k", spec.k), ("T", spec.T)]
    items.append(("seed", spec.seed))
    return "".join(f"{key}={val}\n" for key, val in items)


def from_config(text: str) -> CodeSpec:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        kv[key.strip()] = val.strip()
    fam = kv.get("family")
    try:
        ints = {key: int(val) for key, val in kv.items() if key != "family"}
    except ValueError as exc:
        raise ParameterError(f"bad code config: {exc}") from None
    m, seed = ints.get("m"), ints.get("seed", 0)
    if fam == "erlc":
        return build_erlc(ints["u"], ints["v"], ints["delta"], ints["T"], m=m, seed=seed,
                          h0_identity=bool(ints.get("h0_identity", 0)))
    if fam == "maxspan":
        return build_maxspan(ints["B"], ints["T"], m=m, seed=seed)
    if fam == "rlc":
        return build_rlc(ints["k"], ints["n"], ints["T"], m=m, seed=seed)
    if fam == "uncoded":
        return build_uncoded(ints.get("k", 1), ints.get("T", 0), m=m)
    raise ParameterError(f"unknown code family {fam!r}")
