import itertools
import math

import numpy as np
import pytest

from parbounds.oracle import (
    enc_accumulate,
    enc_partial_accumulate,
    enc_punctured,
    enc_repeat,
    enc_rsc,
    exhaustive_interleaver_average,
    exhaustive_iowe,
)
from parbounds.spectra import (
    DistanceSpectrum,
    FsmEncoder,
    Iowe,
    ResourceError,
    SpectraError,
    acc_iowe,
    exponent_of,
    fsm_iowe,
    log_binomial,
    log_sum_exp,
    partial_precode,
    puncture_random,
    read_iowe_csv,
    read_spectrum_csv,
    rep_iowe,
    systematic_join,
    to_distance,
    turbo_two_branch,
    uniform_concat,
    write_iowe_csv,
    write_spectrum_csv,
)

from conftest import assert_iowe_close

RSC_FB = 0b11111  # 1 + D + D^2 + D^3 + D^4
RSC_FW = 0b10001  # 1 + D^4


def test_log_binomial_small():
    assert log_binomial(4, 2) == pytest.approx(math.log(6), abs=1e-12)
    assert log_binomial(10, 0) == pytest.approx(0.0, abs=1e-12)


def test_log_binomial_against_stirling_series():
    # ln C(2m, m) = 2m ln2 - ln(sqrt(pi m)) - 1/(8m) + O(m^-3)
    m = 500
    stirling = 2 * m * math.log(2) - 0.5 * math.log(math.pi * m) - 1 / (8 * m)
    assert abs(log_binomial(1000, 500) - stirling) < 1e-6


def test_log_binomial_domain_error():
    with pytest.raises(SpectraError):
        log_binomial(4, 5)
    with pytest.raises(SpectraError):
        log_binomial(4, -1)


def test_log_sum_exp_edge_cases():
    assert log_sum_exp([-np.inf, 0.0]) == 0.0
    assert log_sum_exp([]) == -np.inf
    assert log_sum_exp([-np.inf, -np.inf]) == -np.inf
    assert log_sum_exp([np.inf, 0.0]) == np.inf
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2))


# --- closed forms vs exhaustive enumeration ---

@pytest.mark.parametrize("n", [1, 2, 3, 6, 9, 12])
def test_acc_iowe_exhaustive(n):
    assert_iowe_close(acc_iowe(n), exhaustive_iowe(enc_accumulate, n))


def test_acc_iowe_examples():
    a = np.exp(acc_iowe(3).logA)
    assert a[2, 1] == pytest.approx(2)
    assert a[2, 2] == pytest.approx(1)
    assert a[3, 2] == pytest.approx(1)
    assert np.allclose(a[1, 1:4], 1)


@pytest.mark.parametrize("N,q", [(1, 2), (2, 3), (5, 3)])
def test_rep_iowe(N, q):
    assert_iowe_close(rep_iowe(N, q), exhaustive_iowe(lambda u: enc_repeat(u, q), N))
    assert np.exp(rep_iowe(N, q).total_log()) == pytest.approx(2.0 ** N)


def test_fsm_accumulator_matches_closed_form():
    assert_iowe_close(fsm_iowe(FsmEncoder.accumulator(), 12), acc_iowe(12))


@pytest.mark.parametrize("mask", [(0, 0, 1), (1, 0), (1,)])
def test_fsm_punctured_accumulator_exhaustive(mask):
    got = fsm_iowe(FsmEncoder.accumulator(), 6, puncture=mask)
    ref = exhaustive_iowe(enc_punctured(enc_accumulate, mask), 6)
    assert_iowe_close(got, ref)


def test_rsc_terminated_exhaustive_and_complete():
    enc = FsmEncoder.rsc(RSC_FB, RSC_FW)
    got = fsm_iowe(enc, 8, terminated=True)
    assert np.exp(got.total_log()) == pytest.approx(2.0 ** 8, rel=1e-9)
    ref = exhaustive_iowe(
        lambda u: enc_rsc(u, RSC_FB, RSC_FW, terminated=True), 8)
    assert_iowe_close(got, ref)


def test_rsc_parity_only_branch():
    enc = FsmEncoder.rsc(RSC_FB, RSC_FW)
    got = fsm_iowe(enc, 6, puncture=(0, 1), terminated=True)
    ref = exhaustive_iowe(
        lambda u: enc_rsc(u, RSC_FB, RSC_FW, terminated=True, parity_only=True), 6)
    assert_iowe_close(got, ref)
    assert got.n == 10  # parity bits incl 4 tail steps


def test_g_string_parser():
    enc = FsmEncoder.from_g_string("[1,(1+D^4)/(1+D+D^2+D^3+D^4)]")
    assert enc.n_states == 16
    assert enc.memory == 4
    with pytest.raises(SpectraError):
        FsmEncoder.from_g_string("[2, something]")


def test_fsm_resource_guard():
    with pytest.raises(ResourceError, match="cells"):
        fsm_iowe(FsmEncoder.accumulator(), 100, cell_budget=10)


# --- composition operators vs exhaustive oracles ---

def test_uniform_concat_toy():
    got = uniform_concat(rep_iowe(1, 2), acc_iowe(2))
    assert np.exp(got.logA[1, 1]) == pytest.approx(1.0)


def test_uniform_concat_identity_outer():
    inner = acc_iowe(5)
    got = uniform_concat(Iowe.identity(5), inner)
    assert_iowe_close(got, inner)


def test_uniform_concat_exhaustive_average():
    got = uniform_concat(rep_iowe(2, 3), acc_iowe(6))
    ref = exhaustive_interleaver_average(lambda u: enc_repeat(u, 3), 2,
                                         enc_accumulate, 6)
    assert_iowe_close(got, ref, rtol=1e-9)


def test_uniform_concat_length_mismatch():
    with pytest.raises(SpectraError):
        uniform_concat(rep_iowe(2, 3), acc_iowe(5))


def test_puncture_random_endpoints():
    base = acc_iowe(4)
    assert_iowe_close(puncture_random(base, 4), base)
    all_zero = puncture_random(base, 0)
    assert np.exp(log_sum_exp(all_zero.logA[:, 0])) == pytest.approx(16.0)


def test_puncture_random_exhaustive():
    base = acc_iowe(4)
    got = puncture_random(base, 2)
    counts = np.zeros((5, 3))
    for bits in itertools.product((0, 1), repeat=4):
        u = np.array(bits)
        x = enc_accumulate(u)
        for keep in itertools.combinations(range(4), 2):
            counts[u.sum(), x[list(keep)].sum()] += 1
    counts /= 6
    got_lin = np.exp(got.logA)
    assert np.allclose(got_lin, counts, rtol=1e-9, atol=1e-12)


def test_puncture_random_preserves_row_sums():
    base = acc_iowe(5)
    got = puncture_random(base, 3)
    for w in range(6):
        assert log_sum_exp(got.logA[w]) == pytest.approx(
            log_sum_exp(base.logA[w]), abs=1e-9)


def test_systematic_join_shifts_weight():
    base = Iowe(1, 2, np.log(np.array([[1.0, 0, 0], [0, 0, 1.0]])))
    got = systematic_join(base)
    assert got.n == 3
    assert np.exp(got.logA[1, 3]) == pytest.approx(1.0)


@pytest.mark.parametrize("N,M", [(4, 0), (4, 2), (5, 3), (5, 5)])
def test_partial_precode_exhaustive(N, M):
    got = partial_precode(N, M)
    ref = exhaustive_iowe(lambda u: enc_partial_accumulate(u, M), N)
    assert_iowe_close(got, ref)


def test_partial_precode_contract():
    with pytest.raises(SpectraError):
        partial_precode(3, 4)


def test_turbo_two_branch_exhaustive():
    branch = acc_iowe(4)
    got = turbo_two_branch(branch, 4)
    counts = np.zeros((5, 13))
    for bits in itertools.product((0, 1), repeat=4):
        u = np.array(bits)
        for perm in itertools.permutations(range(4)):
            h = u.sum() + enc_accumulate(u).sum() + enc_accumulate(u[list(perm)]).sum()
            counts[u.sum(), h] += 1
    counts /= 24
    mask = counts > 0
    got_lin = np.exp(got.logA)
    assert np.allclose(got_lin[mask], counts[mask], rtol=1e-9)
    assert np.allclose(got_lin[~mask], 0, atol=1e-12)
    assert np.exp(got.total_log()) == pytest.approx(16.0, rel=1e-9)


def test_turbo_degenerate_branch():
    branch = Iowe(2, 0, np.log(np.array([[1.0], [0.0], [0.0]])))
    got = turbo_two_branch(branch, 2)
    assert np.exp(got.logA[0, 0]) == pytest.approx(1.0)


# --- spectra and exponents ---

def test_to_distance_block_and_bit():
    iowe = acc_iowe(4)
    block = to_distance(iowe, "block")
    bit = to_distance(iowe, "bit")
    assert block.logA[0] == 0.0
    # bit weighting is pointwise below block weighting
    mask = np.isfinite(bit.logA)
    assert np.all(bit.logA[mask] <= block.logA[mask] + 1e-12)


def test_bit_weighting_equals_block_when_only_full_weight():
    logA = np.full((3, 3), -np.inf)
    logA[0, 0] = 0.0
    logA[2, 1] = math.log(3.0)
    iowe = Iowe(2, 2, logA)
    bit = to_distance(iowe, "bit")
    assert bit.logA[1] == pytest.approx(math.log(3.0))


def test_exponent_universe_code():
    n = 1000
    logA = np.array([log_binomial(n, h) for h in range(n + 1)])
    spec = DistanceSpectrum(n, logA, "block")
    exp = exponent_of(spec, deltas=[0.5])
    assert exp.r[0] == pytest.approx(math.log(2), abs=2e-2)


def test_exponent_single_codeword():
    logA = np.full(5, -np.inf)
    logA[0] = 0.0
    logA[2] = 0.0
    spec = DistanceSpectrum(4, logA, "block")
    exp = exponent_of(spec)
    assert exp.r[1] == 0.0  # h=2
    assert exp.r[0] == -np.inf


def test_csv_round_trips(tmp_path):
    iowe = acc_iowe(5)
    spec = to_distance(iowe, "block")
    p1 = tmp_path / "spec.csv"
    write_spectrum_csv(p1, spec, comments=["test artifact"])
    back = read_spectrum_csv(p1)
    assert back.n == spec.n and back.weighting == "block"
    assert np.allclose(np.where(np.isfinite(back.logA), back.logA, -1),
                       np.where(np.isfinite(spec.logA), spec.logA, -1), atol=1e-10)
    p2 = tmp_path / "iowe.csv"
    write_iowe_csv(p2, iowe)
    back2 = read_iowe_csv(p2)
    assert_iowe_close(back2, iowe, rtol=1e-10)


def test_completeness_of_composed_ensembles():
    # a full serial chain still counts 2^K codewords
    chain = uniform_concat(rep_iowe(4, 3), acc_iowe(12))
    assert chain.total_log() == pytest.approx(4 * math.log(2), abs=1e-6)
