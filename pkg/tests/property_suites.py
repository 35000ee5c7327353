"""Generative suites run by the acceptance file at 1000 examples each."""
import numpy as np
from hypothesis import given, settings, strategies as st

from streamcode.channel import FritchmanParams, GilbertElliottParams, fritchman_trace, ge_trace
from streamcode.code import Encoder, build_erlc, encode_stream, truncated_generator
from streamcode.decode import StreamingDecoder
from streamcode.gf import seeded_random_matrix
from streamcode.metrics import recoverable

N_EXAMPLES = 1000
CALLS: dict[str, int] = {}


def _count(name):
    CALLS[name] = CALLS.get(name, 0) + 1
_cfg = settings(max_examples=N_EXAMPLES, deadline=None, derandomize=True, database=None)


@st.composite
def small_codes(draw):
    u = draw(st.integers(1, 3))
    v = draw(st.integers(0, 2))
    T = draw(st.integers(1, 4))
    delta = draw(st.integers(0, T))
    seed = draw(st.integers(0, 10 ** 6))
    m = draw(st.sampled_from([4, 8, 16]))
    return build_erlc(u, v, delta, T, m=m, seed=seed)


@_cfg
@given(small_codes(), st.integers(1, 8), st.integers(0, 10 ** 6), st.integers(0, 255))
def encoder_linearity(spec, L, seed, scalar):
    _count("encoder_linearity")
    gf = spec.field
    a = scalar % gf.q
    S1 = seeded_random_matrix(L, spec.k, (seed, 1), gf)
    S2 = seeded_random_matrix(L, spec.k, (seed, 2), gf)
    mixed = gf.multiply(S1, a) ^ S2
    lhs = encode_stream(spec, mixed)
    rhs = gf.multiply(encode_stream(spec, S1), a) ^ encode_stream(spec, S2)
    assert np.array_equal(lhs, rhs)


@_cfg
@given(small_codes(), st.integers(0, 10 ** 6))
def matrix_vs_streaming(spec, seed):
    _count("matrix_vs_streaming")
    gf = spec.field
    L = spec.T + 1
    S = seeded_random_matrix(L, spec.k, seed, gf)
    X = encode_stream(spec, S)
    assert np.array_equal(gf.matmul(S.reshape(-1), truncated_generator(spec)), X.reshape(-1))
    enc = Encoder(spec)
    for t in range(L):
        assert np.array_equal(enc.push(S[t]).symbols, X[t])


@_cfg
@given(small_codes(), st.integers(0, 2 ** 5 - 1), st.integers(0, 2 ** 5 - 1))
def recoverable_monotone(spec, bits, extra):
    _count("recoverable_monotone")
    T = spec.T
    e = np.array([(bits >> i) & 1 for i in range(T + 1)], dtype=bool)
    more = e | np.array([(extra >> i) & 1 for i in range(T + 1)], dtype=bool)
    if recoverable(spec, more):
        assert recoverable(spec, e)


@_cfg
@given(small_codes(), st.integers(0, 2 ** 16 - 1), st.integers(0, 10 ** 6))
def decoder_soundness(spec, bits, seed):
    _count("decoder_soundness")
    L = 16
    erased = [(bits >> i) & 1 for i in range(L)]
    tail = max(spec.memory, spec.T)
    S = seeded_random_matrix(L + tail, spec.k, seed, spec.field)
    enc, dec = Encoder(spec), StreamingDecoder(spec)
    for t in range(L + tail):
        pkt = enc.push(S[t])
        verdicts = dec.step(t, None if t < L and erased[t] else pkt)
        for v in verdicts:
            if v.recovered:
                assert np.array_equal(v.values, S[v.time])
        for j in range(max(0, t - dec.span + 1), t + 1):
            mask = dec.known_mask(j)
            assert np.array_equal(dec.value(j)[mask], S[j][mask])


@_cfg
@given(st.booleans(), st.floats(0, 1), st.floats(0.01, 1), st.floats(0, 0.5),
       st.integers(1, 6), st.integers(0, 3000), st.integers(0, 2 ** 32 - 1))
def trace_reproducibility(ge, alpha, beta, eps, n_err, length, seed):
    _count("trace_reproducibility")
    if ge:
        params = GilbertElliottParams(alpha, beta, eps)
        a, b = ge_trace(params, length, seed), ge_trace(params, length, seed)
    else:
        params = FritchmanParams(n_err, alpha, beta, eps)
        a, b = fritchman_trace(params, length, seed), fritchman_trace(params, length, seed)
    assert a.length == length
    assert np.array_equal(a.erased, b.erased)
    assert a.to_rle() == b.to_rle()


SUITES = {
    "encoder linearity": (encoder_linearity, "encoder_linearity"),
    "matrix-vs-streaming encode": (matrix_vs_streaming, "matrix_vs_streaming"),
    "recoverable monotonicity": (recoverable_monotone, "recoverable_monotone"),
    "decoder soundness": (decoder_soundness, "decoder_soundness"),
    "trace reproducibility": (trace_reproducibility, "trace_reproducibility"),
}
