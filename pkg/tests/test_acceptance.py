"""Acceptance suite: the binding end-to-end numerical gates.

Each test prints one PASS line with its measured margins so a run log reads
as a scoreboard.  The heavy fixtures (turbo spectrum, large-block spectra)
are shared across gates.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from parbounds.channels import (MbiosChannel, ParallelChannelSet, bhattacharyya,
                                capacity_bits)
from parbounds.ds2 import (Ds2Params, OptimizerConfig, tilting_fixed_point,
                           total_bound_per_subcode, union_bhattacharyya)
from parbounds.ensembles import (EnsembleSpec, extrapolated_exponent, nsra_iowe,
                                 turbo_iowe)
from parbounds.gallager61 import G61OptimizerConfig, g61_total_per_subcode
from parbounds.oracle import (ExplicitCode, enc_accumulate, enc_partial_accumulate,
                              enc_punctured, enc_repeat, enc_rsc,
                              exhaustive_interleaver_average, exhaustive_iowe,
                              ml_montecarlo)
from parbounds.regions import (RegionConfig, boundary_search, default_delta_grid,
                               reference_boundary, two_biawgn_set)
from parbounds.spectra import (DistanceSpectrum, FsmEncoder, acc_iowe, fsm_iowe,
                               partial_precode, rep_iowe, to_distance,
                               turbo_two_branch, uniform_concat)
from parbounds.cli import main as cli_main

from conftest import assert_iowe_close

RSC_FB, RSC_FW = 0b11111, 0b10001


def report(criterion, detail):
    print(f"\nACCEPTANCE {criterion}: PASS - {detail}")


# ---------------------------------------------------------------------------
# shared fixtures
# ---------------------------------------------------------------------------

def _code_matrix():
    return {
        "rep3": ExplicitCode.repetition(3),
        "rep8": ExplicitCode.repetition(8),
        "rep5": ExplicitCode.repetition(5),
        "hamming74": ExplicitCode.hamming_7_4(),
        "rand_10_3": ExplicitCode.random_linear(10, 3, seed=7),
        "rand_8_4": ExplicitCode.random_linear(8, 4, seed=11),
    }


def _channel_matrix():
    return {
        "bsc11": ParallelChannelSet((MbiosChannel.bsc(0.11),), (1.0,)),
        "bsc+bsc": ParallelChannelSet(
            (MbiosChannel.bsc(0.05), MbiosChannel.bsc(0.2)), (0.5, 0.5)),
        "bsc+awgn": ParallelChannelSet(
            (MbiosChannel.bsc(0.11), MbiosChannel.biawgn(0.5)), (0.5, 0.5)),
        "awgn+awgn": ParallelChannelSet(
            (MbiosChannel.biawgn(0.4), MbiosChannel.biawgn(1.0)), (0.5, 0.5)),
    }


def _block_spectrum(code):
    return DistanceSpectrum(code.n, code.distance_spectrum_log(), "block")


@pytest.fixture(scope="module")
def turbo_bit_spectrum():
    return to_distance(turbo_iowe(200), "bit")


# ---------------------------------------------------------------------------
# 1. oracle validity of both optimized bounds
# ---------------------------------------------------------------------------

def test_criterion_1_oracle_validity():
    t0 = time.time()
    codes = _code_matrix()
    channels = _channel_matrix()
    trials = 1_000_000
    worst = math.inf
    for (cname, code), (sname, cs) in itertools.product(codes.items(), channels.items()):
        spec = _block_spectrum(code)
        est = ml_montecarlo(code, cs, trials, seed=hash((cname, sname)) % 2**31)
        floor = est.estimate - 3 * est.std_error
        d = total_bound_per_subcode(cs, spec)
        g = g61_total_per_subcode(cs, spec)
        for tag, bound in (("ds2", d.log_prob), ("g61", g.log_prob)):
            margin = math.exp(bound) - floor
            worst = min(worst, margin)
            assert math.exp(bound) >= floor, (
                f"{tag} bound {math.exp(bound):.3e} below MC floor {floor:.3e} "
                f"for {cname} over {sname}"
            )
    report(1, f"24 code/channel instances, both bounds >= MC - 3 sigma "
              f"(worst margin {worst:+.2e}), {time.time()-t0:.0f}s at T={trials}")


# ---------------------------------------------------------------------------
# 2. reduction identity
# ---------------------------------------------------------------------------

def test_criterion_2_reduction_identity():
    t0 = time.time()
    params = Ds2Params(0.5, 1.0)
    worst = 0.0
    for code in _code_matrix().values():
        spec = _block_spectrum(code)
        for cs in _channel_matrix().values():
            tot = total_bound_per_subcode(cs, spec, params=params).log_prob
            ub = union_bhattacharyya(cs, spec)
            if ub == -np.inf or ub == 0.0:
                assert tot == ub
                continue
            rel = abs(tot - ub) / abs(ub)
            worst = max(worst, rel)
            assert rel <= 1e-10
    report(2, f"per-class bound at (rho=1, lam=1/2) equals the union-Bhattacharyya "
              f"value, worst relative difference {worst:.2e}, {time.time()-t0:.1f}s")


# ---------------------------------------------------------------------------
# 3. spectra exactness
# ---------------------------------------------------------------------------

def test_criterion_3_spectra_exactness():
    t0 = time.time()
    # closed forms and the trellis DP vs exhaustive enumeration, exact
    for n in (3, 7, 12):
        assert_iowe_close(acc_iowe(n), exhaustive_iowe(enc_accumulate, n), rtol=1e-12)
    for N, q in ((4, 3), (6, 2)):
        assert_iowe_close(rep_iowe(N, q),
                          exhaustive_iowe(lambda u: enc_repeat(u, q), N), rtol=1e-12)
    for N, M in ((6, 3), (12, 5)):
        assert_iowe_close(partial_precode(N, M),
                          exhaustive_iowe(lambda u: enc_partial_accumulate(u, M), N),
                          rtol=1e-12)
    enc = FsmEncoder.rsc(RSC_FB, RSC_FW)
    assert_iowe_close(fsm_iowe(enc, 10, terminated=True),
                      exhaustive_iowe(lambda u: enc_rsc(u, RSC_FB, RSC_FW,
                                                        terminated=True), 10),
                      rtol=1e-12)
    mask = (0, 0, 1)
    assert_iowe_close(fsm_iowe(FsmEncoder.accumulator(), 12, puncture=mask),
                      exhaustive_iowe(enc_punctured(enc_accumulate, mask), 12),
                      rtol=1e-12)

    # ensemble averages vs exhaustive permutation averages, 1e-9 relative
    got = uniform_concat(rep_iowe(2, 3), acc_iowe(6))
    ref = exhaustive_interleaver_average(lambda u: enc_repeat(u, 3), 2,
                                         enc_accumulate, 6)
    assert_iowe_close(got, ref, rtol=1e-9)

    branch = acc_iowe(5)
    got_t = turbo_two_branch(branch, 5)
    counts = np.zeros((6, 16))
    for bits in itertools.product((0, 1), repeat=5):
        u = np.array(bits)
        for perm in itertools.permutations(range(5)):
            h = u.sum() + enc_accumulate(u).sum() + enc_accumulate(u[list(perm)]).sum()
            counts[u.sum(), h] += 1
    counts /= math.factorial(5)
    lin = np.exp(got_t.logA)
    mask2 = counts > 0
    assert np.allclose(lin[mask2], counts[mask2], rtol=1e-9)
    assert np.allclose(lin[~mask2], 0.0, atol=1e-12)
    report(3, f"closed forms and trellis DP exact vs 2^K enumeration (K <= 12); "
              f"interleaver averages within 1e-9, {time.time()-t0:.0f}s")


# ---------------------------------------------------------------------------
# 4. tilting fixed point
# ---------------------------------------------------------------------------

def test_criterion_4_fixed_point():
    t0 = time.time()
    sets = {
        1: ParallelChannelSet((MbiosChannel.bsc(0.11),), (1.0,)),
        2: ParallelChannelSet((MbiosChannel.bsc(0.05), MbiosChannel.bsc(0.2)),
                              (0.5, 0.5)),
    }
    worst = 0.0
    for J, cs in sets.items():
        for lam in (0.3, 0.5, 0.8):
            for rho in (0.3, 0.5, 0.8):
                for delta in (0.1, 0.3, 0.6):
                    sol = tilting_fixed_point(cs, Ds2Params(lam, rho), delta)
                    worst = max(worst, sol.res_k, sol.res_beta)
                    assert sol.res_k < 1e-10 and sol.res_beta < 1e-10

    # J=1 BSC: bound value at the fixed point vs a 1e6-point scan of all
    # valid tilting measures of the two-output channel
    lam, rho, h, n = 0.5, 0.5, 3, 10
    cs = sets[1]
    sol = tilting_fixed_point(cs, Ds2Params(lam, rho), h / n)
    from parbounds.ds2 import subcode_bound
    val = subcode_bound(cs, Ds2Params(lam, rho), sol, 0.0, h, n)
    p0 = np.array([0.89, 0.11])
    p1 = np.array([0.11, 0.89])
    a = np.linspace(1e-9, 1 - 1e-9, 1_000_001)
    A = (a ** (1 - 1 / rho) * p0[0] ** ((1 - lam * rho) / rho) * p1[0] ** lam
         + (1 - a) ** (1 - 1 / rho) * p0[1] ** ((1 - lam * rho) / rho) * p1[1] ** lam)
    B = a ** (1 - 1 / rho) * p0[0] ** (1 / rho) + (1 - a) ** (1 - 1 / rho) * p0[1] ** (1 / rho)
    oracle = float(np.min(rho * (h * np.log(A) + (n - h) * np.log(B))))
    rel = abs(val - oracle) / abs(oracle)
    assert rel <= 1e-6
    report(4, f"residuals < 1e-10 on the 3x3x3 (lam, rho, delta) grid for J in "
              f"{{1,2}} (worst {worst:.1e}); grid-oracle match {rel:.1e}, "
              f"{time.time()-t0:.0f}s")


# ---------------------------------------------------------------------------
# 5. two-channel turbo analogue of the bit-error figure
# ---------------------------------------------------------------------------

def test_criterion_5_turbo_two_channel_curves(turbo_bit_spectrum):
    t0 = time.time()
    spec = turbo_bit_spectrum
    R = 200 / spec.n
    LOG10 = math.log(10.0)

    def at(e2):
        cs = two_biawgn_set(0.0, e2, R)
        u = union_bhattacharyya(cs, spec) / LOG10
        d = total_bound_per_subcode(cs, spec).log10_prob
        g = g61_total_per_subcode(cs, spec).log10_prob
        return u, d, g

    sweep = [round(0.25 * i, 2) for i in range(13)]  # 0 .. 3 dB
    curves = {e: at(e) for e in sweep}
    for e, (u, d, g) in curves.items():
        assert d <= u + 1e-9 and g <= u + 1e-9
        if u < -1.0:
            assert d <= u + 1e-9 and g <= u + 1e-9  # strict containment region

    # extend past 3 dB until both optimized curves cross 1e-3
    e = 3.0
    while (curves[max(curves)][1] > -3.0 or curves[max(curves)][2] > -3.0) and e < 6.0:
        e = round(e + 0.25, 2)
        curves[e] = at(e)

    def crossing(idx):
        pts = sorted(curves)
        for a, b in zip(pts, pts[1:]):
            va, vb = curves[a][idx], curves[b][idx]
            if va >= -3.0 >= vb:
                return a + (b - a) * (-3.0 - va) / (vb - va)
        return math.nan

    x_ds2 = crossing(1)
    x_g61 = crossing(2)
    gap = abs(x_ds2 - x_g61)
    assert math.isfinite(gap)
    assert gap <= 0.15
    report(5, f"both optimized curves below the union curve; 1e-3 bit-bound "
              f"crossings ds2 {x_ds2:.3f} dB / g61 {x_g61:.3f} dB, gap "
              f"{gap*1000:.0f} mdB (<= 150), {time.time()-t0:.0f}s")


# ---------------------------------------------------------------------------
# 6. accumulate-based region anchor at large block length
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def region_exponents():
    rcfg = RegionConfig()
    deltas = default_delta_grid(rcfg)
    specs = {
        "nsra": EnsembleSpec("nsra", 2048, q=3),
        "spra": EnsembleSpec("spra", 2048, q=6, p=3),
        "spara": EnsembleSpec("spara", 2048, q=6, p=3, M=819),
    }
    return rcfg, {k: extrapolated_exponent(v, deltas) for k, v in specs.items()}


def test_criterion_6_region_anchor(region_exponents):
    t0 = time.time()
    rcfg, exps = region_exponents
    R = 1.0 / 3.0

    lo, hi = -1.5, 2.0
    while hi - lo > 0.0005:
        mid = 0.5 * (lo + hi)
        if two_biawgn_set(mid, mid, R).avg_capacity() >= R:
            hi = mid
        else:
            lo = mid
    cap_db = 0.5 * (lo + hi)

    diag = {}
    for name in ("spara", "spra", "nsra"):
        res = boundary_search(lambda e: two_biawgn_set(e, e, R),
                              exps[name].exponent, cap_db - 0.05, cap_db + 3.0, rcfg)
        assert res["flag"] == "ok"
        diag[name] = res["boundary_db"]

    gap = diag["spara"] - cap_db
    resid = exps["spara"].max_residual
    assert 0.0 < gap <= 0.08, f"SPARA-capacity diagonal gap {gap:.4f} dB"
    # region ordering on the diagonal: larger region = smaller boundary
    assert diag["spara"] <= diag["spra"] + rcfg.tol_db
    assert diag["spra"] <= diag["nsra"] + rcfg.tol_db

    # nesting and ensemble ordering at five grid rows
    rows = [-0.3, 0.0, 0.3, 0.6, 1.0]
    rng = (cap_db - 4.0, cap_db + 6.5)
    caps = reference_boundary("capacity", rows, rng, R)
    cuts = reference_boundary("cutoff", rows, rng, R)
    bounds = {}
    for name in ("spara", "spra", "nsra"):
        vals = []
        for e1 in rows:
            r = boundary_search(lambda e2: two_biawgn_set(e1, e2, R),
                                exps[name].exponent, rng[0], rng[1], rcfg)
            assert r["flag"] == "ok", (name, e1, r)
            vals.append(r["boundary_db"])
        bounds[name] = vals
    for i in range(len(rows)):
        cap_i = caps[i]["ebno2_db_boundary"]
        cut_i = cuts[i]["ebno2_db_boundary"]
        assert caps[i]["flag"] == "ok" and cuts[i]["flag"] == "ok"
        for name in ("spara", "spra", "nsra"):
            assert cap_i <= bounds[name][i] + rcfg.tol_db
            assert bounds[name][i] <= cut_i + rcfg.tol_db
        assert bounds["spara"][i] <= bounds["spra"][i] + rcfg.tol_db
        assert bounds["spra"][i] <= bounds["nsra"][i] + rcfg.tol_db

    report(6, f"SPARA diagonal boundary {diag['spara']:.4f} dB vs capacity "
              f"{cap_db:.4f} dB: gap {gap*1000:.1f} mdB (<= 80) at extrapolation "
              f"residual {resid:.4f} nats; nesting and ordering hold at 5 rows, "
              f"{time.time()-t0:.0f}s")


# ---------------------------------------------------------------------------
# 7. channel functionals
# ---------------------------------------------------------------------------

def test_criterion_7_channel_functionals():
    t0 = time.time()
    worst = 0.0
    for esno in (0.1, 1.0, 3.0):
        got = bhattacharyya(MbiosChannel.biawgn(esno))
        rel = abs(got / math.exp(-esno) - 1.0)
        worst = max(worst, rel)
        assert rel <= 1e-8
    cap = capacity_bits(MbiosChannel.bsc(0.11))
    assert abs(cap - 0.50008) <= 1e-4
    report(7, f"quadrature Bhattacharyya within {worst:.1e} of exp(-Es/N0); "
              f"BSC(0.11) capacity {cap:.6f} bits, {time.time()-t0:.1f}s")


# ---------------------------------------------------------------------------
# 8. determinism of the command-line pipelines
# ---------------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    t0 = time.time()

    def write(name, payload):
        p = tmp_path / name
        p.write_text(json.dumps(payload, indent=1))
        return str(p)

    channel_cfg = write("ch.json", {
        "channels": [{"kind": "biawgn", "ebno_db": 0.0}, {"kind": "bsc", "p": 0.11}],
        "alphas": [0.5, 0.5], "rate": 1 / 3,
    })
    spectrum_cfg = write("sp.json", {"ensemble": "nsra", "N": 24, "q": 3,
                                     "weighting": "block"})
    cli_main(["spectrum", "--config", spectrum_cfg, "--out", str(tmp_path / "s0")])
    bound_cfg = write("b.json", {
        "channels": {"channels": [{"kind": "biawgn", "ebno_db": 0.0},
                                  {"kind": "biawgn", "ebno_db": 0.0}],
                     "alphas": [0.5, 0.5], "rate": 1 / 3},
        "spectrum": str(tmp_path / "s0" / "spectrum.csv"),
        "type": "ds2", "error": "block",
        "sweep": {"channel": 1, "param": "ebno_db", "start": 2.0, "stop": 3.0,
                  "step": 0.5},
    })
    region_cfg = write("r.json", {
        "ensemble": {"ensemble": "nsra", "N": 128, "q": 3},
        "rate": 1 / 3,
        "grid": {"ebno1_db": [1.5], "ebno2_range": [-2.0, 6.0]},
        "delta": {"points": 60}, "tol_db": 0.02,
    })
    code_file = tmp_path / "code.txt"
    code_file.write_text("0000000\n1101000\n0110100\n1011100\n0011010\n1110010\n"
                         "0101110\n1000110\n1100101\n0001101\n1010001\n0111001\n"
                         "1111111\n0010111\n1001011\n0100011\n")
    cs_file = write("cs.json", {"channels": [{"kind": "bsc", "p": 0.11}],
                                "alphas": [1.0]})

    jobs = {
        "channels": ["channels", "--config", channel_cfg],
        "spectrum": ["spectrum", "--config", spectrum_cfg],
        "bound_t1": ["bound", "--config", bound_cfg, "--threads", "1"],
        "bound_t2": ["bound", "--config", bound_cfg, "--threads", "2"],
        "region": ["region", "--config", region_cfg],
        "oracle": ["oracle", "--code", str(code_file), "--channels", cs_file,
                   "--trials", "50000", "--seed", "9"],
    }
    for name, args in jobs.items():
        blobs = []
        for run in (0, 1):
            out = tmp_path / f"{name}_{run}"
            assert cli_main(args + ["--out", str(out)]) == 0
            blob = b"".join(sorted(
                p.read_bytes() for p in out.glob("*.csv")
            ))
            blobs.append(blob)
        assert blobs[0] == blobs[1], f"{name} not byte-identical across runs"
    report(8, f"five pipelines byte-identical across repeated runs, including "
              f"--threads 2, {time.time()-t0:.0f}s")
