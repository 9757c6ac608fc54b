"""The 1961 Gallager bound for parallel channels, with optimized tilting functions.

Functionals per channel, for a nonnegative even tilting function f:

    G(x; j) = sum_y w p(y|0)^(1-x) f(y)^x
    Z(x; j) = sum_y w [p(y|0) p(y|1)]^((1-x)/2) f(y)^x

with r <= 0, s >= 0 and rho = s/(s-r).  The optimized f mixes a squared
density-difference term and a geometric-mean term through c in [0, 1], all
raised to rho/s; outputs where a needed density vanishes are removed from
the corresponding sums.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._optim import BoxResult, minimize_box
from .channels import DEFAULT_QUAD, MbiosChannel, ParallelChannelSet, QuadratureSpec
from .ds2 import BoundError, SubcodeOpt, _acc_lse, _pack
from .spectra import DistanceSpectrum, log_sum_exp

__all__ = [
    "G61Params",
    "TiltingFunction",
    "G61OptimizerConfig",
    "eval_gz",
    "optimized_f",
    "g61_total_bound",
    "g61_subcode_bound",
    "g61_total_per_subcode",
    "g61_exponent",
    "binary_entropy_bits",
]

NEG_INF = -np.inf


def binary_entropy_bits(rho: float) -> float:
    """h(rho) in bits with h(0) = h(1) = 0 by continuity."""
    if rho <= 0.0 or rho >= 1.0:
        return 0.0
    return -rho * math.log2(rho) - (1.0 - rho) * math.log2(1.0 - rho)


@dataclass(frozen=True)
class G61Params:
    """Bound parameters s >= 0, r <= 0 (rho = s/(s-r) derived) and mixer c."""

    s: float
    r: float
    c: float = 0.5

    def __post_init__(self):
        if self.s < 0:
            raise BoundError(f"s must be nonnegative, got {self.s}")
        if self.r > 0:
            raise BoundError(f"r must be nonpositive, got {self.r}")
        if self.s == 0 and self.r == 0:
            raise BoundError("s = r = 0 is excluded")
        if not 0.0 <= self.c <= 1.0:
            raise BoundError(f"c must be in [0, 1], got {self.c}")

    @property
    def rho(self) -> float:
        return self.s / (self.s - self.r)

    @classmethod
    def from_rho_s(cls, rho: float, s: float, c: float = 0.5) -> "G61Params":
        if not 0.0 < rho <= 1.0:
            raise BoundError(f"rho must be in (0, 1], got {rho}")
        return cls(s, s * (1.0 - 1.0 / rho), c)


@dataclass
class TiltingFunction:
    """Per-channel tilting tables on the density-table abscissas."""

    values: list  # one nonnegative array per channel

    def validate(self, channel_set: ParallelChannelSet, quad: QuadratureSpec = DEFAULT_QUAD):
        tables = channel_set.tables(quad)
        if len(self.values) != len(tables):
            raise BoundError("need one tilting table per channel")
        for f, t in zip(self.values, tables):
            f = np.asarray(f, dtype=float)
            if f.shape != t.y.shape or np.any(f < 0):
                raise BoundError("tilting function must be nonnegative on the table")
            order = np.argsort(t.y)
            rev = np.argsort(-t.y)
            if not np.allclose(f[order], f[rev], rtol=1e-9, atol=1e-12):
                raise BoundError("tilting function must be even in y")


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _log_f_opt(l0, l1, a, s, rho, c):
    """ln f(y) of the optimized two-term mixture; -inf where f = 0."""
    if c < 1.0:
        if l0 == l1:
            t1 = -np.inf
        else:
            mx = l0 if l0 > l1 else l1
            ad = l0 - l1 if l0 > l1 else l1 - l0
            # (p_max^a - p_min^a)^2 = p_max^(2a) (1 - exp(-a*ad))^2
            if ad == np.inf:
                t1 = math.log(1.0 - c) + 2.0 * a * mx
            else:
                t1 = math.log(1.0 - c) + 2.0 * a * mx + 2.0 * math.log(-math.expm1(-a * ad))
    else:
        t1 = -np.inf
    if c > 0.0 and l0 > -np.inf and l1 > -np.inf:
        t2 = math.log(2.0 * c) + a * (l0 + l1)
    else:
        t2 = -np.inf
    if t1 == -np.inf and t2 == -np.inf:
        return -np.inf
    hi = t1 if t1 > t2 else t2
    lo = t2 if t1 > t2 else t1
    ln_num = hi + math.log1p(math.exp(lo - hi)) if lo > -np.inf else hi
    d0 = (1.0 - s) * l0 if l0 > -np.inf else -np.inf
    d1 = (1.0 - s) * l1 if l1 > -np.inf else -np.inf
    hi_d = d0 if d0 > d1 else d1
    lo_d = d1 if d0 > d1 else d0
    ln_den = hi_d + math.log1p(math.exp(lo_d - hi_d)) if lo_d > -np.inf else hi_d
    return (rho / s) * (ln_num - ln_den)


@njit(cache=True, nogil=True)
def _g61_terms(lp0, lp1, lw, la, rho, s, c, f_mode):
    """(ln Zbar(r), ln Gbar(r), ln Gbar(s), flag) at the mixture level.

    f_mode 0 evaluates f = 1, f_mode 1 the optimized mixture.  flag 1 marks
    a degenerate combination (f vanishing at a positive-density output while
    r < 0), where the bound is +inf.
    """
    J, Ny = lp0.shape
    r = s * (1.0 - 1.0 / rho)
    a = (1.0 - r) / 2.0
    mz = -np.inf
    sz = 0.0
    mgr = -np.inf
    sgr = 0.0
    mgs = -np.inf
    sgs = 0.0
    for j in range(J):
        mz_j = -np.inf
        sz_j = 0.0
        mgr_j = -np.inf
        sgr_j = 0.0
        mgs_j = -np.inf
        sgs_j = 0.0
        for y in range(Ny):
            lwy = lw[j, y]
            if lwy == -np.inf:
                continue
            l0 = lp0[j, y]
            l1 = lp1[j, y]
            if l0 == -np.inf and l1 == -np.inf:
                continue
            lnf = 0.0 if f_mode == 0 else _log_f_opt(l0, l1, a, s, rho, c)
            if l0 > -np.inf:
                if lnf == -np.inf and r < 0.0:
                    return 0.0, 0.0, 0.0, 1
                rf = 0.0 if r == 0.0 else r * lnf
                sf = s * lnf  # s > 0 in the search box; f=0 -> term 0
                mgr_j, sgr_j = _acc_lse(mgr_j, sgr_j, lwy + (1.0 - r) * l0 + rf)
                mgs_j, sgs_j = _acc_lse(mgs_j, sgs_j, lwy + (1.0 - s) * l0 + sf)
                if l1 > -np.inf:
                    mz_j, sz_j = _acc_lse(mz_j, sz_j, lwy + a * (l0 + l1) + rf)
        lz = mz_j + math.log(sz_j) if sz_j > 0.0 else -np.inf
        lgr = mgr_j + math.log(sgr_j) if sgr_j > 0.0 else -np.inf
        lgs = mgs_j + math.log(sgs_j) if sgs_j > 0.0 else -np.inf
        mz, sz = _acc_lse(mz, sz, la[j] + lz)
        mgr, sgr = _acc_lse(mgr, sgr, la[j] + lgr)
        mgs, sgs = _acc_lse(mgs, sgs, la[j] + lgs)
    lzb = mz + math.log(sz) if sz > 0.0 else -np.inf
    lgrb = mgr + math.log(sgr) if sgr > 0.0 else -np.inf
    lgsb = mgs + math.log(sgs) if sgs > 0.0 else -np.inf
    return lzb, lgrb, lgsb, 0


def _terms_for(channel_set, params: G61Params, f, quad):
    """Mixture-level (ln Zbar, ln Gbar_r, ln Gbar_s) for any f specification."""
    if isinstance(f, str) and f in ("ones", "optimized"):
        lp0, lp1, lw, la = _pack(channel_set, quad)
        if f == "optimized" and params.s <= 0:
            raise BoundError("the optimized tilting family requires s > 0")
        lz, lgr, lgs, flag = _g61_terms(
            lp0, lp1, lw, la, params.rho, params.s, params.c, 0 if f == "ones" else 1
        )
        if flag:
            raise BoundError("degenerate (rho, s, c): f vanishes on a positive-density output")
        return lz, lgr, lgs
    gz = eval_gz(channel_set, params, f, quad)
    la = np.log(np.asarray(channel_set.alphas))
    return (
        log_sum_exp(la + gz["log_z_r"]),
        log_sum_exp(la + gz["log_g_r"]),
        log_sum_exp(la + gz["log_g_s"]),
    )


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def optimized_f(channel: MbiosChannel, params: G61Params,
                quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """The optimized tilting function of one channel, tabulated on its abscissas."""
    if params.s <= 0:
        raise BoundError("the optimized tilting family requires s > 0")
    t = channel.density_table(quad)
    l0, l1 = t.log_densities()
    a = (1.0 - params.r) / 2.0
    out = np.empty(t.size)
    for i in range(t.size):
        lf = _log_f_opt(l0[i], l1[i], a, params.s, params.rho, params.c)
        out[i] = math.exp(lf) if lf > NEG_INF else 0.0
    return out


def eval_gz(channel_set: ParallelChannelSet, params: G61Params, f="optimized",
            quad: QuadratureSpec = DEFAULT_QUAD) -> dict:
    """Per-channel log G(r), log Z(r), log G(s) for a given tilting function.

    ``f`` is "ones", "optimized", or a TiltingFunction with explicit tables.
    """
    tables = channel_set.tables(quad)
    if isinstance(f, str):
        if f == "ones":
            fs = [np.ones(t.size) for t in tables]
        elif f == "optimized":
            fs = [optimized_f(ch, params, quad) for ch in channel_set.channels]
        else:
            raise BoundError(f"unknown tilting specification {f!r}")
    else:
        f.validate(channel_set, quad)
        fs = [np.asarray(v, dtype=float) for v in f.values]

    r, s = params.r, params.s
    out = {"log_g_r": np.empty(channel_set.J), "log_z_r": np.empty(channel_set.J),
           "log_g_s": np.empty(channel_set.J)}
    for j, t in enumerate(tables):
        l0, l1 = t.log_densities()
        with np.errstate(divide="ignore"):
            lf = np.log(fs[j])
            lwt = np.log(t.w)
        keep0 = l0 > NEG_INF
        if r < 0 and np.any(keep0 & (lf == NEG_INF)):
            raise BoundError("f vanishes at a positive-density output while r < 0")
        rf = np.zeros_like(lf) if r == 0.0 else r * lf
        sf = np.zeros_like(lf) if s == 0.0 else s * lf
        g_r = np.where(keep0, lwt + (1.0 - r) * l0 + rf, NEG_INF)
        g_s = np.where(keep0, lwt + (1.0 - s) * l0 + sf, NEG_INF)
        keep_z = keep0 & (l1 > NEG_INF)
        z_r = np.where(keep_z, lwt + 0.5 * (1.0 - r) * (l0 + l1) + rf, NEG_INF)
        out["log_g_r"][j] = log_sum_exp(g_r)
        out["log_z_r"][j] = log_sum_exp(z_r)
        out["log_g_s"][j] = log_sum_exp(g_s)
    return out


def g61_subcode_bound(channel_set: ParallelChannelSet, params: G61Params, f,
                      logA_h: float, h: int, n: int,
                      quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """ln of the weight-class bound  2^h(rho) [A_h Zbar^h Gbar(r)^(n-h)]^rho Gbar(s)^(n(1-rho))."""
    if not 1 <= h <= n:
        raise BoundError(f"h must be in [1, n], got {h}")
    if logA_h == NEG_INF:
        return NEG_INF
    lz, lgr, lgs = _terms_for(channel_set, params, f, quad)
    rho = params.rho
    val = (binary_entropy_bits(rho) * math.log(2.0)
           + rho * (logA_h + h * lz + (n - h) * lgr)
           + n * (1.0 - rho) * lgs)
    return min(val, 0.0)


def g61_total_bound(channel_set: ParallelChannelSet, spectrum: DistanceSpectrum,
                    params: G61Params, f="optimized",
                    quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Whole-sum form: ln 2^h(rho) {sum_h A_h Zbar^h Gbar(r)^(n-h)}^rho Gbar(s)^(n(1-rho))."""
    lz, lgr, lgs = _terms_for(channel_set, params, f, quad)
    rho = params.rho
    n = spectrum.n
    h = np.arange(1, n + 1)
    inner = log_sum_exp(spectrum.logA[1:] + h * lz + (n - h) * lgr)
    val = (binary_entropy_bits(rho) * math.log(2.0) + rho * inner
           + n * (1.0 - rho) * lgs)
    return min(val, 0.0)


@dataclass
class G61OptimizerConfig:
    """Search box and schedule for the (rho, s, c) optimization."""

    rho_min: float = 1e-3
    s_min: float = 1e-3
    s_max: float = 1.0
    rho_grid: tuple = (1e-3, 0.1, 0.22, 0.35, 0.5, 0.65, 0.8, 0.9, 1.0)
    s_grid: tuple = (1e-3, 0.04, 0.09, 0.15, 0.22, 0.32, 0.45, 0.65, 1.0)
    c_grid: tuple = (0.0, 0.2, 0.4, 0.55, 0.7, 0.85, 1.0)
    refine_rounds: int = 3
    golden_iters: int = 12
    use_seeding: bool = False
    threads: int = 1
    trim_nats: float = 40.0


def _g61_objective(channel_set, quad, logA_h, h, n, mode="optimized"):
    lp0, lp1, lw, la = _pack(channel_set, quad)
    f_mode = 0 if mode == "ones" else 1
    ln2 = math.log(2.0)

    def objective(rho, s, c):
        if not (0.0 < rho <= 1.0 and s > 0.0 and 0.0 <= c <= 1.0):
            return math.inf
        lz, lgr, lgs, flag = _g61_terms(lp0, lp1, lw, la, rho, s, c, f_mode)
        if flag:
            return math.inf
        return (binary_entropy_bits(rho) * ln2
                + rho * (logA_h + h * lz + (n - h) * lgr)
                + n * (1.0 - rho) * lgs)

    return objective


def _optimize_g61_h(channel_set, quad, spectrum, h, cfg, mode):
    # the (rho, s, c) landscape has narrow curved valleys; a full coarse grid
    # per class is required for reliable refinement (seeding is unsafe here)
    logA_h = float(spectrum.logA[h])
    if logA_h == NEG_INF:
        return SubcodeOpt(h, NEG_INF, 1.0, 1.0)
    obj = _g61_objective(channel_set, quad, logA_h, h, spectrum.n, mode)
    res = minimize_box(
        obj,
        grids=(cfg.rho_grid, cfg.s_grid, cfg.c_grid),
        bounds=((cfg.rho_min, 1.0), (cfg.s_min, cfg.s_max), (0.0, 1.0)),
        anchors=((1.0, 0.5, 0.5),),
        refine_rounds=cfg.refine_rounds,
        golden_iters=cfg.golden_iters,
    )
    if not math.isfinite(res.value) and res.value > 0:
        gbar = channel_set.avg_gamma(quad)
        val = logA_h + h * (math.log(gbar) if gbar > 0 else NEG_INF)
        return SubcodeOpt(h, min(val, 0.0), 1.0, 1.0, converged=False)
    return SubcodeOpt(h, min(res.value, 0.0), res.x[0], res.x[1],
                      k=res.x[2], boundary=res.boundary)


@dataclass
class G61TotalResult:
    log_prob: float
    per_h: list
    dominant: SubcodeOpt | None
    n_fallback: int = 0

    @property
    def log10_prob(self) -> float:
        return self.log_prob / math.log(10.0)


def g61_total_per_subcode(channel_set: ParallelChannelSet, spectrum: DistanceSpectrum,
                          cfg: G61OptimizerConfig = None, mode: str = "optimized",
                          quad: QuadratureSpec = DEFAULT_QUAD) -> G61TotalResult:
    """Union over weight classes with (rho, s, c) optimized separately per class.

    ``mode`` "ones" restricts to the f = 1 baseline (c then has no effect).
    Classes negligible next to the union peak keep their Bhattacharyya value
    (the rho = 1 member of the family), as in the DS2 per-class union.
    In SubcodeOpt rows, ``lam`` holds rho, ``rho`` holds s and ``k`` holds c.
    """
    cfg = cfg or G61OptimizerConfig()
    n = spectrum.n
    hs = [h for h in range(1, n + 1) if spectrum.logA[h] > NEG_INF]
    if not hs:
        return G61TotalResult(NEG_INF, [], None, 0)
    gbar = channel_set.avg_gamma(quad)
    lgbar = math.log(gbar) if gbar > 0 else NEG_INF
    bhatt = {h: float(spectrum.logA[h]) + h * lgbar for h in hs}

    def optimize_set(work_hs):
        if cfg.threads > 1:
            def work(h):
                return _optimize_g61_h(channel_set, quad, spectrum, h, cfg, mode)
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                return list(pool.map(work, work_hs))
        return [_optimize_g61_h(channel_set, quad, spectrum, h, cfg, mode)
                for h in work_hs]

    ref = max(bhatt.values())
    active = [h for h in hs if bhatt[h] > ref - cfg.trim_nats]
    results = {o.h: o for o in optimize_set(active)}
    while True:
        v = max((o.log_prob for o in results.values()), default=NEG_INF)
        pending = [h for h in hs if h not in results and bhatt[h] > v - cfg.trim_nats]
        if not pending:
            break
        results.update({o.h: o for o in optimize_set(pending)})
    per_h = [
        results.get(h) or SubcodeOpt(h, min(bhatt[h], 0.0), 1.0, 1.0)
        for h in hs
    ]
    n_fallback = sum(1 for o in per_h if not o.converged)
    total = min(log_sum_exp([o.log_prob for o in per_h]), 0.0) if per_h else NEG_INF
    dominant = max(per_h, key=lambda o: o.log_prob) if per_h else None
    return G61TotalResult(total, per_h, dominant, n_fallback)


@dataclass
class G61ExponentResult:
    value: float
    rho: float
    s: float
    c: float
    boundary: bool


def g61_exponent(channel_set: ParallelChannelSet, r_delta: float, delta: float,
                 cfg: G61OptimizerConfig = None, quad: QuadratureSpec = DEFAULT_QUAD,
                 seed=None) -> G61ExponentResult:
    """Exponent -rho r - rho delta ln Zbar - rho(1-delta) ln Gbar(r) - (1-rho) ln Gbar(s),
    maximized over (rho, s, c); +inf for an empty weight class."""
    if not 0.0 < delta <= 1.0:
        raise BoundError(f"delta must be in (0, 1], got {delta}")
    if r_delta == NEG_INF:
        return G61ExponentResult(math.inf, 1.0, 0.5, 0.5, False)
    cfg = cfg or G61OptimizerConfig()
    lp0, lp1, lw, la = _pack(channel_set, quad)

    def neg_exponent(rho, s, c):
        if not (0.0 < rho <= 1.0 and s > 0.0 and 0.0 <= c <= 1.0):
            return math.inf
        lz, lgr, lgs, flag = _g61_terms(lp0, lp1, lw, la, rho, s, c, 1)
        if flag:
            return math.inf
        if lz == NEG_INF:
            return -math.inf
        return (rho * (r_delta + delta * lz + (1.0 - delta) * lgr)
                + (1.0 - rho) * lgs)

    res = minimize_box(
        neg_exponent,
        grids=(cfg.rho_grid, cfg.s_grid, cfg.c_grid),
        bounds=((cfg.rho_min, 1.0), (cfg.s_min, cfg.s_max), (0.0, 1.0)),
        seed=seed,
        anchors=((1.0, 0.5, 0.5),),
        skeleton=_G61_SKELETON,
        seed_offsets=((-0.12, -0.03, 0.0, 0.03, 0.12),
                      (-0.1, -0.025, 0.0, 0.025, 0.1),
                      (-0.15, -0.04, 0.0, 0.04, 0.15)),
        refine_rounds=cfg.refine_rounds,
        golden_iters=cfg.golden_iters,
    )
    return G61ExponentResult(-res.value, res.x[0], res.x[1], res.x[2], res.boundary)
