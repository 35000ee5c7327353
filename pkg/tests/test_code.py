import numpy as np
import pytest

from streamcode.code import (
    Encoder, SourcePacket, build_erlc, build_maxspan, build_rlc, build_uncoded, encode,
    encode_stream, format_code, from_config, parse_code, to_config, truncated_generator,
)
from streamcode.errors import ContractError, ParameterError
from streamcode.gf import seeded_random_matrix


def source(spec, L, seed=0):
    return seeded_random_matrix(L, spec.k, (seed, 99), spec.field)


def test_erlc_shapes_and_rate():
    spec = build_erlc(11, 1, 10, 12, m=16, seed=3)
    assert (spec.k, spec.n, spec.p) == (12, 23, 11)
    assert spec.rate.numerator == 12 and spec.rate.denominator == 23
    assert spec.parity.shape == (13, 12, 11)
    assert len(spec.G) == 11 and len(spec.H) == 3
    assert all(g.shape == (1, 11) for g in spec.G)
    # urgent rows are silent before the shift
    assert not spec.parity[:10, :11].any()
    assert not spec.parity[0].any()
    assert spec.code_id == "erlc:u=11,v=1,delta=10,T=12"


def test_parity_is_read_only():
    spec = build_erlc(2, 1, 2, 3)
    with pytest.raises(ValueError):
        spec.parity[0, 0, 0] = 1


def test_maxspan_equals_identity_h0_erlc():
    a = build_maxspan(5, 8, m=8, seed=11)
    b = build_erlc(5, 3, 8, 8, m=8, seed=11, h0_identity=True)
    assert a.family == "maxspan" and a.B == 5
    assert np.array_equal(a.parity, b.parity)
    S = source(a, 30)
    assert np.array_equal(encode_stream(a, S), encode_stream(b, S))
    assert np.array_equal(a.parity[8, :5], np.eye(5, dtype=a.parity.dtype))


def test_maxspan_burst_repeats_urgent_part():
    # with H_0 = I the urgent parity at time i carries u[i-T] plus the v-terms
    spec = build_maxspan(3, 5, m=8, seed=1)
    S = source(spec, 20)
    X = encode_stream(spec, S)
    i = 10
    pv = spec.field.zeros(3)
    for j in range(1, 5):
        pv ^= spec.field.matmul(S[i - j, 3:], spec.G[j - 1])
    assert np.array_equal(X[i, 5:] ^ pv, S[i - 5, :3])


def test_parameter_validation():
    with pytest.raises(ParameterError):
        build_erlc(1, 1, 7, 6)
    with pytest.raises(ParameterError):
        build_erlc(0, 1, 2, 3)
    with pytest.raises(ParameterError):
        build_erlc(1.5, 1, 2, 3)
    with pytest.raises(ParameterError):
        build_maxspan(7, 6)
    with pytest.raises(ParameterError):
        build_rlc(2, 2, 3)


def test_uncoded_is_passthrough():
    spec = build_uncoded(2)
    S = source(spec, 5)
    X = encode_stream(spec, S)
    assert np.array_equal(X, S) and spec.p == 0 and spec.memory == 0


def test_rlc_meets_distance_target():
    from streamcode.metrics import column_distance_oracle

    spec = build_rlc(2, 4, 5, m=16, seed=2)
    assert spec.parity.shape == (6, 2, 2)
    assert column_distance_oracle(spec) == 1 + (2 * 6) // 4


def test_three_encode_paths_agree():
    spec = build_erlc(3, 2, 3, 5, m=16, seed=4)
    S = source(spec, 25)
    X = encode_stream(spec, S)
    enc = Encoder(spec)
    for t in range(25):
        pkt = enc.push(S[t])
        assert np.array_equal(pkt.symbols, X[t])
        direct = encode(spec, S[:t], SourcePacket(t, S[t, :3], S[t, 3:]), time=t)
        assert np.array_equal(direct.symbols, X[t])
        assert np.array_equal(direct.source, S[t])


def test_encode_history_contract():
    spec = build_erlc(2, 1, 2, 4, m=8)
    s = np.zeros(3, dtype=np.uint8)
    with pytest.raises(ContractError):
        encode(spec, np.zeros((2, 3)), s)
    with pytest.raises(ContractError):
        encode(spec, np.zeros((2, 3)), s, time=5)
    with pytest.raises(ParameterError):
        encode(spec, np.zeros((4, 3)), np.zeros(2))
    with pytest.raises(ParameterError):
        encode_stream(spec, np.zeros((4, 2)))


def test_truncated_generator_matches_stream():
    spec = build_erlc(2, 1, 3, 4, m=16, seed=5)
    S = source(spec, 5)
    G = truncated_generator(spec)
    assert G.shape == (15, 25)
    x = spec.field.matmul(S.reshape(-1), G)
    assert np.array_equal(x, encode_stream(spec, S).reshape(-1))


def test_code_string_roundtrip():
    for text in ["erlc:u=11,v=1,delta=10,T=12", "maxspan:B=11,T=12", "rlc:k=2,n=3,T=4", "uncoded"]:
        spec = parse_code(text, m=8)
        assert format_code(spec) == text
        again = parse_code(format_code(spec, with_seed=True), m=8)
        assert np.array_equal(again.parity, spec.parity)
    assert parse_code("erlc:u=2,v=1,delta=2,T=3,seed=9,m=8").seed == 9
    assert parse_code("erlc:u=2,v=1,delta=2,T=3", seed=4).seed == 4
    assert parse_code("uncoded:k=3,T=2").k == 3


@pytest.mark.parametrize("bad", ["erlc:u=1", "foo:k=1", "rlc:k=1,n=x,T=2", "erlc:u=1,v=1,delta=1,T=2,z=3", "maxspan:B"])
def test_code_string_errors_name_the_grammar(bad):
    with pytest.raises(ParameterError, match="grammar"):
        parse_code(bad)


def test_config_roundtrip():
    for spec in [build_erlc(2, 1, 3, 4, m=8, seed=7), build_erlc(2, 1, 4, 4, m=8, seed=7, h0_identity=True),
                 build_maxspan(2, 4, m=8, seed=1), build_rlc(1, 2, 3, m=8, seed=2), build_uncoded(2, 3, m=8)]:
        back = from_config("# saved\n" + to_config(spec))
        assert back.family == spec.family and back.code_id == spec.code_id
        assert np.array_equal(back.parity, spec.parity)
    with pytest.raises(ParameterError):
        from_config("family=erlc\nu=x\n")
    with pytest.raises(ParameterError):
        from_config("family=nope\n")
