from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from streamcode.channel import GilbertElliottParams, ErasureTrace, ge_trace, periodic_trace
from streamcode.code import Encoder, build_erlc, build_maxspan, build_rlc, build_uncoded, encode_stream
from streamcode.decode import LossReport, StreamingDecoder, run, run_stream, split_episodes
from streamcode.errors import ContractError
from streamcode.gf import seeded_random_matrix
from streamcode.metrics import distance_witness


def drive(spec, erased, seed=0):
    """Step the decoder by hand; returns (decoder, verdicts, source)."""
    L = len(erased)
    tail = max(spec.memory, spec.T)
    S = seeded_random_matrix(L + tail, spec.k, (seed, 7), spec.field)
    enc = Encoder(spec)
    dec = StreamingDecoder(spec)
    out = []
    for t in range(L + tail):
        pkt = enc.push(S[t])
        out += dec.step(t, None if t < L and erased[t] else pkt)
    return dec, out, S


def test_no_erasures():
    spec = build_erlc(2, 1, 3, 4, m=8)
    dec, out, S = drive(spec, np.zeros(20, bool))
    assert all(v.recovered for v in out) and len(out) == 20
    assert dec.n_unknowns == 0 and dec.n_equations == 0
    assert all(np.array_equal(v.values, S[v.time]) for v in out)


def test_uncoded_loss_equals_erasures():
    tr = ge_trace(GilbertElliottParams(0.01, 0.5, 0.01), 20_000, seed=1)
    rep = run(build_uncoded(), tr)
    assert rep.lost_packets == tr.erased.sum() == rep.erased_packets
    assert rep.loss_rate == Fraction(rep.lost_packets, rep.total_packets)
    assert run_stream(build_uncoded(), tr).lost_packets == rep.lost_packets


def test_out_of_order_is_rejected():
    dec = StreamingDecoder(build_erlc(2, 1, 3, 4, m=8))
    dec.step(0, None)
    with pytest.raises(ContractError):
        dec.step(2, None)
    with pytest.raises(ContractError):
        dec.step(1, None) or dec.step(1, None)


def test_maxspan_burst_recovery_schedule():
    B, T = 3, 6
    spec = build_maxspan(B, T, m=16, seed=4)
    L = 12
    S = seeded_random_matrix(L + T, spec.k, 5, spec.field)
    enc, dec = Encoder(spec), StreamingDecoder(spec)
    resolved_at = {}
    for t in range(L + T):
        pkt = enc.push(S[t])
        dec.step(t, None if t < B else pkt)
        for j in range(min(B, t + 1)):
            if t - j < dec.span:
                mask = dec.known_mask(j)
                for i in range(spec.k):
                    if mask[i] and (j, i) not in resolved_at:
                        resolved_at[(j, i)] = t
                assert np.array_equal(dec.value(j)[mask], S[j][mask])
    for j in range(B):
        for i in range(B, spec.k):  # non-urgent part
            assert resolved_at[(j, i)] <= T - 1
        for i in range(B):  # urgent part arrives exactly at its deadline
            assert resolved_at[(j, i)] == j + T


def test_witness_pattern_defeats_decoder():
    spec = build_erlc(11, 1, 10, 12, m=16)
    _, pat = distance_witness(spec)
    assert run_stream(spec, pat).lost_packets >= 1
    burst = np.zeros(30, bool)
    burst[5:15] = True  # length c_T = 10
    assert run_stream(spec, burst).lost_packets >= 1
    burst[14] = False
    assert run_stream(spec, burst).lost_packets == 0


def test_periodic_channel_is_lossless():
    spec = build_erlc(2, 1, 5, 6, m=16)
    rep = run(spec, periodic_trace(4, 2, 6, 200))
    assert rep.lost_packets == 0 and rep.erased_packets == 600


def test_late_recovery_needs_memory_beyond_deadline():
    spec = replace(build_rlc(1, 2, 6, m=16, seed=1, verify=False), T=2)
    e = np.zeros(10, bool)
    e[:3] = True
    dec, out, S = drive(spec, e)
    lost = [v.time for v in out if not v.recovered]
    assert lost == [0, 1, 2]
    assert dec.late_recoveries == 3
    assert dec.late_times == [0, 1, 2] or sorted(dec.late_times) == [0, 1, 2]
    rep = run_stream(spec, e)
    assert (rep.lost_packets, rep.late_recoveries) == (3, 3)
    assert run(spec, e) == rep


def test_retirement_keeps_window_bounded():
    spec = build_erlc(2, 1, 3, 4, m=16, seed=2)
    tr = ge_trace(GilbertElliottParams(0.2, 0.3, 0.1), 300, seed=3)
    S = seeded_random_matrix(300, spec.k, 1, spec.field)
    X = encode_stream(spec, S)
    dec = StreamingDecoder(spec)
    for t in range(300):
        if tr.erased[t]:
            dec._step(t, None, None)
        else:
            dec._step(t, X[t, :3], X[t, 3:])
        assert dec._col_time.size == 0 or dec._col_time.min() > t - spec.memory
        assert dec.n_equations <= dec.n_unknowns


def test_inconsistent_parity_is_detected():
    spec = build_rlc(1, 3, 2, m=8, seed=1, verify=False)
    enc, dec = Encoder(spec), StreamingDecoder(spec)
    S = seeded_random_matrix(3, 1, 3, spec.field)
    pkts = [enc.push(s) for s in S]
    dec.step(0, None)
    pkts[1].parity[0] ^= 1  # two equations, one unknown, one corrupted
    with pytest.raises(ContractError):
        dec.step(1, pkts[1])


def test_split_episodes():
    e = np.zeros(40, bool)
    e[[2, 3, 9, 30]] = True
    assert split_episodes(e, 6) == [(2, (0, 1)), (9, (0,)), (30, (0,))]
    assert split_episodes(e, 7) == [(2, (0, 1, 7)), (30, (0,))]
    assert split_episodes(np.zeros(4, bool), 3) == []


def test_episode_run_matches_full_stream():
    for spec in [build_erlc(3, 1, 4, 5, m=16, seed=1), build_maxspan(3, 5, m=16, seed=2),
                 build_rlc(2, 4, 5, m=16, seed=3)]:
        tr = ge_trace(GilbertElliottParams(0.02, 0.5, 0.03), 20_000, seed=4)
        assert run(spec, tr) == run_stream(spec, tr)


def test_sharded_counts_add_up():
    spec = build_erlc(3, 1, 4, 5, m=16, seed=1)
    tr = ge_trace(GilbertElliottParams(0.02, 0.4, 0.05), 30_000, seed=8)
    whole = run(spec, tr)
    edges = list(range(0, 30_000, 4321)) + [30_000]
    parts = [run(spec, tr, counted=(a, b)) for a, b in zip(edges, edges[1:])]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    assert total == whole


def test_loss_report_invariants():
    with pytest.raises(ContractError):
        LossReport(3, 4)
    assert LossReport(0, 0).loss_rate == 0
    assert (LossReport(4, 1) + LossReport(6, 2)).loss_rate == Fraction(3, 10)


@settings(max_examples=60)
@given(st.integers(0, 2 ** 24 - 1), st.integers(0, 23))
def test_removing_an_erasure_never_adds_losses(bits, drop):
    spec = build_erlc(2, 1, 3, 4, m=8, seed=6)
    e = np.array([(bits >> i) & 1 for i in range(24)], dtype=bool)
    fewer = e.copy()
    fewer[drop] = False
    assert run_stream(spec, fewer).lost_packets <= run_stream(spec, e).lost_packets
