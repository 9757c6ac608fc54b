import math

import numpy as np
import pytest

from parbounds.channels import MbiosChannel, ParallelChannelSet
from parbounds.ds2 import (
    BoundError,
    ConvergenceError,
    Ds2Params,
    OptimizerConfig,
    TiltingSolution,
    ds2_exponent,
    eval_ab,
    optimize_params,
    subcode_bound,
    tilting_fixed_point,
    total_bound_per_subcode,
    total_bound_single_measure,
    union_bhattacharyya,
)
from parbounds.spectra import DistanceSpectrum

BSC11 = ParallelChannelSet((MbiosChannel.bsc(0.11),), (1.0,))
TWO_BSC = ParallelChannelSet((MbiosChannel.bsc(0.05), MbiosChannel.bsc(0.2)), (0.5, 0.5))
GAMMA11 = 2 * math.sqrt(0.11 * 0.89)


def toy_spectrum(n, weights):
    logA = np.full(n + 1, -np.inf)
    logA[0] = 0.0
    for h, a in weights.items():
        logA[h] = math.log(a)
    return DistanceSpectrum(n, logA, "block")


def test_params_validation():
    with pytest.raises(BoundError):
        Ds2Params(-0.1, 0.5)
    with pytest.raises(BoundError):
        Ds2Params(0.5, 0.0)
    with pytest.raises(BoundError):
        Ds2Params(0.5, 1.1)


def test_eval_ab_rho1_lambda0_normalizes():
    ev = eval_ab(TWO_BSC, Ds2Params(0.0, 1.0))
    assert np.allclose(np.exp(ev.log_a), 1.0, atol=1e-12)
    assert np.allclose(np.exp(ev.log_b), 1.0, atol=1e-12)


def test_eval_ab_rho1_lambda_half_gives_bhattacharyya():
    ev = eval_ab(BSC11, Ds2Params(0.5, 1.0))
    assert np.exp(ev.log_a_bar) == pytest.approx(GAMMA11, rel=1e-12)
    assert np.exp(ev.log_b_bar) == pytest.approx(1.0, rel=1e-12)


def test_eval_ab_explicit_uniform_psi_hand_computation():
    # psi uniform on the two BSC outputs; exponents evaluated directly
    lam, rho = 0.5, 0.5
    psi = np.array([0.5, 0.5])
    ev = eval_ab(BSC11, Ds2Params(lam, rho), [psi])
    p0 = np.array([0.89, 0.11])
    p1 = np.array([0.11, 0.89])
    a_ref = float(np.sum(psi ** (1 - 1 / rho) * p0 ** ((1 - lam * rho) / rho) * p1 ** lam))
    b_ref = float(np.sum(psi ** (1 - 1 / rho) * p0 ** (1 / rho)))
    assert np.exp(ev.log_a_bar) == pytest.approx(a_ref, rel=1e-12)
    assert np.exp(ev.log_b_bar) == pytest.approx(b_ref, rel=1e-12)


def test_eval_ab_lambda0_with_psi_p0_makes_a_equal_b():
    table = BSC11.tables()[0]
    ev = eval_ab(BSC11, Ds2Params(0.0, 0.5), [table.p0.copy()])
    assert ev.log_a_bar == pytest.approx(ev.log_b_bar, abs=1e-12)


def test_eval_ab_rejects_unnormalized_psi():
    with pytest.raises(BoundError):
        eval_ab(BSC11, Ds2Params(0.5, 0.5), [np.array([0.7, 0.7])])
    with pytest.raises(BoundError):
        eval_ab(BSC11, Ds2Params(0.5, 0.5), None)


def test_fixed_point_residuals_small():
    sol = tilting_fixed_point(BSC11, Ds2Params(0.5, 0.5), 0.3)
    assert sol.converged
    assert sol.res_k < 1e-10
    assert sol.res_beta < 1e-9


def test_fixed_point_k0_means_psi_is_p0():
    table = BSC11.tables()[0]
    sol = TiltingSolution(0.0, np.array([1.0]), 0.0, 0.0, 0, True, 0.5, 0.5, 0.3)
    assert np.allclose(sol.psi(table, 0), table.p0, atol=1e-12)


def test_fixed_point_matches_dense_grid_oracle():
    # dense scan over all valid tilting measures of the two-output channel
    lam, rho, delta = 0.5, 0.5, 0.3
    h, n = 3, 10
    sol = tilting_fixed_point(BSC11, Ds2Params(lam, rho), delta)
    val = subcode_bound(BSC11, Ds2Params(lam, rho), sol, 0.0, h, n)
    p0 = np.array([0.89, 0.11])
    p1 = np.array([0.11, 0.89])
    a = np.linspace(1e-9, 1 - 1e-9, 1_000_001)
    A = (a ** (1 - 1 / rho) * p0[0] ** ((1 - lam * rho) / rho) * p1[0] ** lam
         + (1 - a) ** (1 - 1 / rho) * p0[1] ** ((1 - lam * rho) / rho) * p1[1] ** lam)
    B = a ** (1 - 1 / rho) * p0[0] ** (1 / rho) + (1 - a) ** (1 - 1 / rho) * p0[1] ** (1 / rho)
    oracle = float(np.min(rho * (h * np.log(A) + (n - h) * np.log(B))))
    assert val == pytest.approx(oracle, rel=1e-6)
    assert val <= oracle + 1e-12  # fixed point is the minimizer


def test_fixed_point_two_channels():
    sol = tilting_fixed_point(TWO_BSC, Ds2Params(0.5, 0.5), 0.3)
    assert sol.res_k < 1e-10
    assert sol.betas.shape == (2,)
    tables = TWO_BSC.tables()
    for j, t in enumerate(tables):
        assert float(np.sum(t.w * sol.psi(t, j))) == pytest.approx(1.0, abs=1e-9)


def test_fixed_point_invalid_delta():
    with pytest.raises(BoundError):
        tilting_fixed_point(BSC11, Ds2Params(0.5, 0.5), 1.0)


def test_fixed_point_iteration_cap_raises():
    with pytest.raises(ConvergenceError) as err:
        tilting_fixed_point(BSC11, Ds2Params(0.5, 0.5), 0.3, max_iter=2, tol=1e-16)
    assert err.value.k is not None
    assert err.value.iterations == 2


def test_tilting_optimality_beats_baselines():
    # the fixed-point measure is at least as good as psi = p0 and uniform psi
    h, n = 3, 10
    for cs in (BSC11, TWO_BSC):
        for lam, rho in ((0.3, 0.4), (0.5, 0.5), (0.8, 0.7)):
            params = Ds2Params(lam, rho)
            sol = tilting_fixed_point(cs, params, h / n)
            v_opt = subcode_bound(cs, params, sol, 0.0, h, n)
            tables = cs.tables()
            v_p0 = subcode_bound(cs, params, [t.p0.copy() for t in tables], 0.0, h, n)
            uni = [np.ones(t.size) / float(np.sum(t.w)) for t in tables]
            v_uni = subcode_bound(cs, params, uni, 0.0, h, n)
            assert v_opt <= v_p0 + 1e-10
            assert v_opt <= v_uni + 1e-10


def test_subcode_bound_empty_class():
    assert subcode_bound(BSC11, Ds2Params(0.5, 1.0), None, -np.inf, 3, 10) == -np.inf


def test_subcode_bound_bhattacharyya_reduction():
    val = subcode_bound(BSC11, Ds2Params(0.5, 1.0), None, 0.0, 3, 3)
    assert val == pytest.approx(3 * math.log(GAMMA11), rel=1e-12)


def test_union_bhattacharyya_examples():
    spec = toy_spectrum(3, {3: 1.0})
    assert union_bhattacharyya(BSC11, spec) == pytest.approx(3 * math.log(GAMMA11), rel=1e-12)
    # two-channel arithmetic: A_2 = 3 at mixture gamma (small enough not to clamp)
    spec2 = toy_spectrum(2, {2: 3.0})
    quiet = ParallelChannelSet((MbiosChannel.bsc(0.01), MbiosChannel.bsc(0.04)),
                               (0.5, 0.5))
    gbar = quiet.avg_gamma()
    assert 3 * gbar ** 2 < 1
    assert union_bhattacharyya(quiet, spec2) == pytest.approx(
        math.log(3 * gbar ** 2), rel=1e-12)
    # noiseless channel: no mass anywhere
    perfect = ParallelChannelSet((MbiosChannel.bsc(0.0),), (1.0,))
    assert union_bhattacharyya(perfect, spec) == -np.inf


def test_reduction_identity_per_subcode_vs_union():
    spec = toy_spectrum(3, {3: 1.0})
    for cs in (BSC11, TWO_BSC):
        tot = total_bound_per_subcode(cs, spec, params=Ds2Params(0.5, 1.0))
        ub = union_bhattacharyya(cs, spec)
        assert tot.log_prob == pytest.approx(ub, rel=1e-10)


def test_total_bound_only_zero_word():
    spec = toy_spectrum(4, {})
    assert total_bound_per_subcode(BSC11, spec).log_prob == -np.inf


def test_total_bound_optimized_dominates_union_and_ml():
    spec = toy_spectrum(3, {3: 1.0})
    tot = total_bound_per_subcode(BSC11, spec)
    assert tot.log_prob <= union_bhattacharyya(BSC11, spec) + 1e-12
    exact_ml = 3 * 0.11 ** 2 * 0.89 + 0.11 ** 3
    assert tot.log_prob >= math.log(exact_ml)


def test_single_measure_rho1_equals_sum_of_subcode_terms():
    spec = toy_spectrum(4, {2: 2.0, 4: 1.0})
    params = Ds2Params(0.5, 1.0)
    got = total_bound_single_measure(BSC11, spec, params, None)
    want = union_bhattacharyya(BSC11, spec)
    assert got == pytest.approx(want, rel=1e-12)


def test_per_subcode_not_worse_than_single_measure():
    spec = toy_spectrum(6, {2: 3.0, 4: 10.0, 6: 1.0})
    params = Ds2Params(0.4, 0.6)
    sols = tilting_fixed_point(TWO_BSC, params, 0.5)
    single = total_bound_single_measure(TWO_BSC, spec, params, sols)
    per = total_bound_per_subcode(TWO_BSC, spec)
    assert per.log_prob <= single + 1e-10


def test_single_measure_toy_value():
    spec = toy_spectrum(3, {3: 1.0})
    got = total_bound_single_measure(BSC11, spec, Ds2Params(0.5, 1.0), None)
    assert got == pytest.approx(3 * math.log(GAMMA11), rel=1e-12)


def test_exponent_empty_class_is_infinite():
    assert ds2_exponent(BSC11, -np.inf, 0.5).value == math.inf


def test_exponent_dominates_bhattacharyya_point():
    cs = ParallelChannelSet((MbiosChannel.bsc(0.05),), (1.0,))
    res = ds2_exponent(cs, 0.0, 0.5)
    gamma = cs.avg_gamma()
    feasible = -0.5 * math.log(gamma)
    assert res.value >= feasible - 1e-9
    assert res.value > 0


def test_exponent_delta_one():
    res = ds2_exponent(BSC11, -0.1, 1.0)
    assert math.isfinite(res.value)
    # at delta=1 and lam=0 the measure collapses to p0; E = -r is feasible
    assert res.value >= 0.1 - 1e-9


def test_optimizer_on_paraboloid():
    def obj(lam, rho):
        return (lam - 0.4) ** 2 + (rho - 0.6) ** 2

    res = optimize_params(obj, OptimizerConfig(refine_rounds=4, golden_iters=30))
    assert res.value == pytest.approx(0.0, abs=1e-6)
    assert res.x[0] == pytest.approx(0.4, abs=2e-3)
    assert res.x[1] == pytest.approx(0.6, abs=2e-3)


def test_optimizer_beats_feasible_point():
    spec = toy_spectrum(10, {3: 1.0})
    params = Ds2Params(0.5, 1.0)
    fixed = total_bound_per_subcode(BSC11, spec, params=params)
    opt = total_bound_per_subcode(BSC11, spec)
    assert opt.log_prob <= fixed.log_prob + 1e-12


def test_monotone_in_snr_biawgn():
    spec = toy_spectrum(6, {2: 3.0, 4: 10.0, 6: 1.0})
    vals = []
    for esno in (0.3, 0.6, 1.0, 1.6):
        cs = ParallelChannelSet((MbiosChannel.biawgn(esno),), (1.0,))
        vals.append(total_bound_per_subcode(cs, spec).log_prob)
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
