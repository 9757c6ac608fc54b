"""The DS2 upper bound on ML decoding error probability over parallel channels.

For tilting measures of the optimized family, the two coupled optimality
equations collapse to a scalar fixed point: with

    A_j = beta_j^(1-1/rho) * sum_y w p(y|0)^(1-lam) p(y|1)^lam (1 + k t^lam)^(rho-1)
    B_j = beta_j^(1-1/rho) * sum_y w p(y|0) (1 + k t^lam)^(rho-1)
    beta_j = [sum_y w p(y|0) (1 + k t^lam)^rho]^(-1),   t = p(y|1)/p(y|0),

the stationarity condition reads  k = delta/(1-delta) * B_bar / A_bar,
which is iterated to convergence (damped after an undamped warm-up).
The per-weight-class bound is  A_h^rho * A_bar^(h rho) * B_bar^((n-h) rho).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from ._optim import BoxResult, minimize_box
from .channels import DEFAULT_QUAD, DensityTable, ParallelChannelSet, QuadratureSpec
from .spectra import DistanceSpectrum, SpectralExponent, log_sum_exp

__all__ = [
    "BoundError",
    "ConvergenceError",
    "Ds2Params",
    "TiltingSolution",
    "Ds2Eval",
    "OptimizerConfig",
    "eval_ab",
    "tilting_fixed_point",
    "subcode_bound",
    "total_bound_per_subcode",
    "total_bound_single_measure",
    "ds2_exponent",
    "union_bhattacharyya",
    "optimize_params",
]

NEG_INF = -np.inf


class BoundError(ValueError):
    """Contract violation in a bound evaluation."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration failed; carries the last iterate."""

    def __init__(self, message, k=None, residual=None, iterations=None):
        super().__init__(message)
        self.k = k
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class Ds2Params:
    """Bound parameters: lam >= 0 and rho in (0, 1]."""

    lam: float
    rho: float

    def __post_init__(self):
        if self.lam < 0:
            raise BoundError(f"lambda must be nonnegative, got {self.lam}")
        if not 0.0 < self.rho <= 1.0:
            raise BoundError(f"rho must be in (0, 1], got {self.rho}")


@dataclass
class TiltingSolution:
    """Optimized-tilting fixed point at one (lam, rho, delta)."""

    k: float
    betas: np.ndarray
    res_k: float
    res_beta: float
    iterations: int
    converged: bool
    lam: float
    rho: float
    delta: float

    def psi(self, table: DensityTable, j: int) -> np.ndarray:
        """Explicit tilting measure on the table's abscissas for channel j."""
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lp0 = np.log(table.p0)
            lp1 = np.log(table.p1)
            u = (math.log(self.k) if self.k > 0 else NEG_INF) + self.lam * (lp1 - lp0)
            sp = np.where(u > 0, u + np.log1p(np.exp(-u)), np.log1p(np.exp(np.minimum(u, 0))))
            out = np.exp(math.log(self.betas[j]) + lp0 + self.rho * sp)
        return np.where(table.p0 > 0, out, 0.0)


@dataclass
class Ds2Eval:
    """Per-channel A and B functionals (natural logs) and their alpha-mixtures."""

    log_a: np.ndarray
    log_b: np.ndarray
    log_a_bar: float
    log_b_bar: float

    @property
    def a_bar(self) -> float:
        return math.exp(self.log_a_bar)

    @property
    def b_bar(self) -> float:
        return math.exp(self.log_b_bar)


@dataclass
class OptimizerConfig:
    """Search box and schedule for the (lam, rho) optimization."""

    lam_max: float = 10.0
    rho_min: float = 1e-3
    lam_grid: tuple = (0.0, 0.02, 0.05, 0.1, 0.16, 0.24, 0.34, 0.45, 0.5, 0.58,
                       0.72, 0.9, 1.1, 1.4, 2.0, 3.2, 5.5, 10.0)
    rho_grid: tuple = (1e-3, 0.02, 0.06, 0.12, 0.2, 0.3, 0.42, 0.55, 0.7, 0.85, 1.0)
    refine_rounds: int = 3
    golden_iters: int = 20
    fp_tol: float = 1e-8
    fp_max_iter: int = 10000
    fp_damp_after: int = 100
    use_seeding: bool = True
    threads: int = 1
    trim_nats: float = 40.0


# ---------------------------------------------------------------------------
# Packed density tables and numba kernels
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _pack(channel_set: ParallelChannelSet, quad: QuadratureSpec):
    """(J, Ny) padded arrays of log densities and log weights."""
    tables = channel_set.tables(quad)
    ny = max(t.size for t in tables)
    J = len(tables)
    lp0 = np.full((J, ny), NEG_INF)
    lp1 = np.full((J, ny), NEG_INF)
    lw = np.full((J, ny), NEG_INF)
    for j, t in enumerate(tables):
        l0, l1 = t.log_densities()
        lp0[j, : t.size] = l0
        lp1[j, : t.size] = l1
        with np.errstate(divide="ignore"):
            lw[j, : t.size] = np.log(t.w)
    la = np.log(np.asarray(channel_set.alphas, dtype=float))
    return lp0, lp1, lw, la


@njit(cache=True, nogil=True, inline="always")
def _softplus(u):
    if u == -np.inf:
        return 0.0
    if u > 36.0:
        return u
    if u > 0.0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


@njit(cache=True, nogil=True, inline="always")
def _acc_lse(m, s, t):
    """Online log-sum-exp accumulator state (max m, scaled sum s)."""
    if t == -np.inf:
        return m, s
    if t <= m:
        return m, s + math.exp(t - m)
    if m == -np.inf:
        return t, 1.0
    return t, s * math.exp(m - t) + 1.0


@njit(cache=True, nogil=True)
def _ds2_core(lp0, lp1, lw, la, lam, rho, lnk, ln_a, ln_b, ln_beta):
    """Fill per-channel ln A_j, ln B_j, ln beta_j at tilting parameter k.

    Returns (ln_a_bar, ln_b_bar, flag); flag 1 marks a degenerate
    combination (the bound is +inf there).
    """
    J, Ny = lp0.shape
    lamrho = lam * rho
    for j in range(J):
        m8 = -np.inf
        s8 = 0.0
        mA = -np.inf
        sA = 0.0
        mB = -np.inf
        sB = 0.0
        for y in range(Ny):
            lwy = lw[j, y]
            if lwy == -np.inf:
                continue
            l0 = lp0[j, y]
            l1 = lp1[j, y]
            if l0 == -np.inf and l1 == -np.inf:
                continue
            if l0 == -np.inf:
                # p(y|0) = 0: survives only at lam*rho = 1, diverges above
                if lamrho < 1.0:
                    continue
                if lamrho > 1.0:
                    return 0.0, 0.0, 1
                if lnk == -np.inf:
                    continue
                m8, s8 = _acc_lse(m8, s8, lwy + rho * lnk + l1)
                mA, sA = _acc_lse(mA, sA, lwy + (rho - 1.0) * lnk + l1)
                continue
            if lam == 0.0:
                u = lnk
                ldlr = 0.0
            elif l1 == -np.inf:
                u = -np.inf
                ldlr = -np.inf
            else:
                dlr = l1 - l0
                u = lnk + lam * dlr
                ldlr = lam * dlr
            sp = _softplus(u)
            m8, s8 = _acc_lse(m8, s8, lwy + l0 + rho * sp)
            mB, sB = _acc_lse(mB, sB, lwy + l0 + (rho - 1.0) * sp)
            if ldlr > -np.inf:
                mA, sA = _acc_lse(mA, sA, lwy + l0 + ldlr + (rho - 1.0) * sp)
        ln_s8 = m8 + math.log(s8) if s8 > 0.0 else -np.inf
        if ln_s8 == -np.inf or ln_s8 == np.inf:
            return 0.0, 0.0, 1
        ln_beta[j] = -ln_s8
        coef = 1.0 - 1.0 / rho
        shift = coef * ln_beta[j] if coef != 0.0 else 0.0
        ln_a[j] = shift + (mA + math.log(sA) if sA > 0.0 else -np.inf)
        ln_b[j] = shift + (mB + math.log(sB) if sB > 0.0 else -np.inf)
    ma = -np.inf
    sa = 0.0
    mb = -np.inf
    sb = 0.0
    for j in range(J):
        ma, sa = _acc_lse(ma, sa, la[j] + ln_a[j])
        mb, sb = _acc_lse(mb, sb, la[j] + ln_b[j])
    lab = ma + math.log(sa) if sa > 0.0 else -np.inf
    lbb = mb + math.log(sb) if sb > 0.0 else -np.inf
    return lab, lbb, 0


@njit(cache=True, nogil=True)
def _ds2_delta1(lp0, lp1, lw, la, lam, rho):
    """ln A_bar in the k -> inf limit (weight class delta = 1).

    The minimizing measure tends to psi ~ p0^(1-lam rho) p1^(lam rho), and
    A_j = (sum_y w p0^(1-lam rho) p1^(lam rho))^(1/rho).
    """
    J, Ny = lp0.shape
    lamrho = lam * rho
    ma = -np.inf
    sa = 0.0
    for j in range(J):
        mz = -np.inf
        sz = 0.0
        for y in range(Ny):
            lwy = lw[j, y]
            if lwy == -np.inf:
                continue
            l0 = lp0[j, y]
            l1 = lp1[j, y]
            if l0 == -np.inf and l1 == -np.inf:
                continue
            if l0 == -np.inf:
                if lamrho < 1.0:
                    continue
                if lamrho > 1.0:
                    return 0.0, 1
                t = lwy + l1
            elif l1 == -np.inf:
                if lamrho > 0.0:
                    continue
                t = lwy + l0
            else:
                t = lwy + (1.0 - lamrho) * l0 + lamrho * l1
            mz, sz = _acc_lse(mz, sz, t)
        lnz = mz + math.log(sz) if sz > 0.0 else -np.inf
        ma, sa = _acc_lse(ma, sa, la[j] + lnz / rho)
    return (ma + math.log(sa) if sa > 0.0 else -np.inf), 0


@njit(cache=True, nogil=True)
def _ds2_fp(lp0, lp1, lw, la, lam, rho, delta, tol, max_iter, damp_after):
    """Damped scalar fixed point for k; returns (k, lnA, lnB, res, iters, status).

    status: 0 converged, 1 degenerate parameters, 2 iteration cap hit.
    """
    J = lp0.shape[0]
    ln_a = np.empty(J)
    ln_b = np.empty(J)
    ln_beta = np.empty(J)
    log_ratio = math.log(delta) - math.log1p(-delta)
    k = 0.0
    res = np.inf
    lab = -np.inf
    lbb = -np.inf
    for it in range(max_iter):
        lnk = math.log(k) if k > 0.0 else -np.inf
        lab, lbb, flag = _ds2_core(lp0, lp1, lw, la, lam, rho, lnk, ln_a, ln_b, ln_beta)
        if flag != 0:
            return k, lab, lbb, np.inf, it, 1
        if lab == -np.inf:
            # A_bar = 0: the bound is -inf for any k
            return k, lab, lbb, 0.0, it, 0
        knew = math.exp(log_ratio + lbb - lab)
        res = abs(knew - k) / (1.0 + abs(k))
        if res < tol:
            return k, lab, lbb, res, it + 1, 0
        if it >= damp_after:
            knew = 0.5 * (knew + k)
        k = knew
    return k, lab, lbb, res, max_iter, 2


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def _psi_log_terms(lpsi, lp0, lp1, coef_psi, coef_p0, coef_p1):
    """Per-output log term with zero-exponent skips and 0*inf -> 0."""
    parts = []
    for coef, larr in ((coef_psi, lpsi), (coef_p0, lp0), (coef_p1, lp1)):
        if coef == 0.0:
            continue
        with np.errstate(invalid="ignore"):
            parts.append(coef * larr)
    if not parts:
        return np.zeros_like(lp0)
    total = np.zeros_like(lp0)
    neg = np.zeros(lp0.shape, dtype=bool)
    for p in parts:
        neg |= p == NEG_INF
        total = total + np.where(np.isfinite(p), p, 0.0)
        total = np.where(np.isposinf(p), np.inf, total)
    return np.where(neg, NEG_INF, total)


def eval_ab(channel_set: ParallelChannelSet, params: Ds2Params, tilting=None,
            quad: QuadratureSpec = DEFAULT_QUAD) -> Ds2Eval:
    """Evaluate the A and B channel functionals.

    ``tilting`` is a TiltingSolution, an explicit list of per-channel psi
    arrays on the density-table abscissas, or None (allowed at rho = 1 where
    the measure drops out).
    """
    lam, rho = params.lam, params.rho
    tables = channel_set.tables(quad)
    if isinstance(tilting, TiltingSolution):
        lp0, lp1, lw, la = _pack(channel_set, quad)
        J = lp0.shape[0]
        ln_a = np.empty(J)
        ln_b = np.empty(J)
        ln_beta = np.empty(J)
        lnk = math.log(tilting.k) if tilting.k > 0 else NEG_INF
        lab, lbb, flag = _ds2_core(lp0, lp1, lw, la, lam, rho, lnk, ln_a, ln_b, ln_beta)
        if flag:
            raise BoundError("degenerate (lam, rho) for this channel set")
        return Ds2Eval(ln_a, ln_b, lab, lbb)

    if tilting is None:
        if rho != 1.0:
            raise BoundError("an explicit tilting measure is required for rho < 1")
        psis = [np.ones(t.size) / np.sum(t.w) for t in tables]  # placeholder, unused
    else:
        psis = [np.asarray(p, dtype=float) for p in tilting]
        if len(psis) != channel_set.J:
            raise BoundError("need one tilting measure per channel")
        for t, psi in zip(tables, psis):
            if psi.shape != t.y.shape or np.any(psi < 0):
                raise BoundError("tilting measures must be nonnegative on the table")
            total = float(np.sum(t.w * psi))
            if abs(total - 1.0) > 1e-9:
                raise BoundError(f"tilting measure sums to {total}, not 1")

    log_a = np.empty(channel_set.J)
    log_b = np.empty(channel_set.J)
    for j, t in enumerate(tables):
        l0, l1 = t.log_densities()
        with np.errstate(divide="ignore"):
            lpsi = np.log(psis[j])
            lwt = np.log(t.w)
        ta = _psi_log_terms(lpsi, l0, l1, 1.0 - 1.0 / rho, (1.0 - lam * rho) / rho, lam)
        tb = _psi_log_terms(lpsi, l0, l1, 1.0 - 1.0 / rho, 1.0 / rho, 0.0)
        log_a[j] = log_sum_exp(lwt + ta)
        log_b[j] = log_sum_exp(lwt + tb)
    la = np.log(np.asarray(channel_set.alphas))
    return Ds2Eval(log_a, log_b, log_sum_exp(la + log_a), log_sum_exp(la + log_b))


def tilting_fixed_point(channel_set: ParallelChannelSet, params: Ds2Params, delta: float,
                        init_k: float = 0.0, tol: float = 1e-10, max_iter: int = 10000,
                        damp_after: int = 100,
                        quad: QuadratureSpec = DEFAULT_QUAD) -> TiltingSolution:
    """Solve the optimized-tilting fixed point at (lam, rho, delta).

    Raises ConvergenceError (with the last iterate attached) if the damped
    iteration does not reach the residual tolerance.
    """
    if not 0.0 < delta < 1.0:
        raise BoundError(f"delta must be in (0, 1), got {delta}")
    lp0, lp1, lw, la = _pack(channel_set, quad)
    k, lab, lbb, res, iters, status = _ds2_fp(
        lp0, lp1, lw, la, params.lam, params.rho, delta, tol, max_iter, damp_after
    )
    if status == 1:
        raise BoundError(
            f"degenerate parameters (lam={params.lam}, rho={params.rho}) for this channel set"
        )
    if status == 2:
        raise ConvergenceError(
            f"no fixed point after {iters} iterations (residual {res:.3e})",
            k=k, residual=res, iterations=iters,
        )
    J = lp0.shape[0]
    ln_a = np.empty(J)
    ln_b = np.empty(J)
    ln_beta = np.empty(J)
    lnk = math.log(k) if k > 0 else NEG_INF
    _ds2_core(lp0, lp1, lw, la, params.lam, params.rho, lnk, ln_a, ln_b, ln_beta)
    betas = np.exp(ln_beta)
    # normalization residual of the implied measures (identity by construction)
    res_beta = 0.0
    tables = channel_set.tables(quad)
    sol = TiltingSolution(k, betas, res, res_beta, iters, True,
                          params.lam, params.rho, delta)
    for j, t in enumerate(tables):
        res_beta = max(res_beta, abs(float(np.sum(t.w * sol.psi(t, j))) - 1.0))
    sol.res_beta = res_beta
    return sol


def _bar_values(channel_set, lam, rho, delta, quad, fp_tol=1e-10, fp_max_iter=10000,
                fp_damp_after=100):
    """(ln A_bar, ln B_bar) at the optimized tilting for one (lam, rho, delta)."""
    lp0, lp1, lw, la = _pack(channel_set, quad)
    if delta >= 1.0:
        lab, flag = _ds2_delta1(lp0, lp1, lw, la, lam, rho)
        if flag:
            return np.inf, np.inf, False
        return lab, 0.0, True
    k, lab, lbb, res, iters, status = _ds2_fp(
        lp0, lp1, lw, la, lam, rho, delta, fp_tol, fp_max_iter, fp_damp_after
    )
    if status == 1:
        return np.inf, np.inf, False
    if status == 2:
        return np.inf, np.inf, False
    return lab, lbb, True


def subcode_bound(channel_set: ParallelChannelSet, params: Ds2Params, tilting,
                  logA_h: float, h: int, n: int,
                  quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """ln of the weight-class bound A_h^rho A_bar^(h rho) B_bar^((n-h) rho), clamped at 0."""
    if not 1 <= h <= n:
        raise BoundError(f"h must be in [1, n], got {h}")
    if logA_h == NEG_INF:
        return NEG_INF
    ev = eval_ab(channel_set, params, tilting, quad)
    val = params.rho * (logA_h + h * ev.log_a_bar + (n - h) * ev.log_b_bar)
    return min(val, 0.0)


def union_bhattacharyya(channel_set: ParallelChannelSet, spectrum: DistanceSpectrum,
                        quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """ln of the union-Bhattacharyya bound sum_h A_h (sum_j alpha_j gamma_j)^h, clamped."""
    gbar = channel_set.avg_gamma(quad)
    lg = math.log(gbar) if gbar > 0 else NEG_INF
    h = np.arange(1, spectrum.n + 1)
    terms = spectrum.logA[1:] + h * lg
    return min(log_sum_exp(terms), 0.0)


@dataclass
class SubcodeOpt:
    """Optimized parameters and value for one weight class."""

    h: int
    log_prob: float
    lam: float
    rho: float
    k: float = math.nan
    converged: bool = True
    boundary: bool = False


@dataclass
class Ds2TotalResult:
    """Union over per-weight-class optimized bounds."""

    log_prob: float
    per_h: list
    dominant: SubcodeOpt | None
    n_fallback: int = 0

    @property
    def log10_prob(self) -> float:
        return self.log_prob / math.log(10.0)


def _make_subcode_objective(channel_set, quad, logA_h, h, n, cfg):
    delta = h / n

    def objective(lam, rho):
        if rho <= 0.0 or rho > 1.0 or lam < 0.0:
            return math.inf
        lab, lbb, ok = _bar_values(channel_set, lam, rho, delta, quad,
                                   cfg.fp_tol, cfg.fp_max_iter, cfg.fp_damp_after)
        if not ok:
            return math.inf
        if lab == NEG_INF and h > 0:
            return NEG_INF
        return rho * (logA_h + h * lab + (n - h) * lbb)

    return objective


_SKELETON = tuple(
    (lam, rho)
    for lam in (0.1, 0.3, 0.5, 0.8, 1.4, 3.0)
    for rho in (0.12, 0.35, 0.65, 1.0)
)


def optimize_params(objective, cfg: OptimizerConfig = None, seed=None) -> BoxResult:
    """Minimize a (lam, rho) objective on the configured box; deterministic."""
    cfg = cfg or OptimizerConfig()
    bounds = ((0.0, cfg.lam_max), (cfg.rho_min, 1.0))
    anchors = ((0.5, 1.0), (0.5, 0.5))
    return minimize_box(
        objective,
        grids=(cfg.lam_grid, cfg.rho_grid),
        bounds=bounds,
        seed=seed,
        anchors=anchors,
        skeleton=_SKELETON,
        seed_offsets=((-0.12, -0.04, 0.0, 0.04, 0.12), (-0.08, -0.02, 0.0, 0.02, 0.08)),
        refine_rounds=cfg.refine_rounds,
        golden_iters=cfg.golden_iters,
    )


def _optimize_one_h(channel_set, quad, spectrum, h, cfg, seed):
    logA_h = float(spectrum.logA[h])
    if logA_h == NEG_INF:
        return SubcodeOpt(h, NEG_INF, 0.5, 1.0), None
    obj = _make_subcode_objective(channel_set, quad, logA_h, h, spectrum.n, cfg)
    res = optimize_params(obj, cfg, seed=seed)
    if not math.isfinite(res.value) and res.value > 0:
        # every candidate degenerate: fall back to the Bhattacharyya point
        gbar = channel_set.avg_gamma(quad)
        val = logA_h + h * (math.log(gbar) if gbar > 0 else NEG_INF)
        return SubcodeOpt(h, min(val, 0.0), 0.5, 1.0, converged=False), None
    val = min(res.value, 0.0)
    return SubcodeOpt(h, val, res.x[0], res.x[1], boundary=res.boundary), res.x


def total_bound_per_subcode(channel_set: ParallelChannelSet, spectrum: DistanceSpectrum,
                            cfg: OptimizerConfig = None, params: Ds2Params = None,
                            quad: QuadratureSpec = DEFAULT_QUAD) -> Ds2TotalResult:
    """Union bound over weight classes, each optimized separately.

    With ``params`` given, (lam, rho) are held fixed instead of optimized
    (the tilting fixed point is still solved per class).  In optimized mode,
    classes whose Bhattacharyya value lies ``cfg.trim_nats`` below the
    largest optimized class keep that value instead of being optimized; the
    result stays a valid upper bound and the union changes by less than
    n exp(-trim_nats) relative.  ``cfg.threads`` beyond 1 evaluates classes
    concurrently with seeding disabled; results are identical for a fixed
    thread count.
    """
    cfg = cfg or OptimizerConfig()
    n = spectrum.n
    hs = [h for h in range(1, n + 1) if spectrum.logA[h] > NEG_INF]

    if params is not None:
        per_h = []
        for h in hs:
            obj = _make_subcode_objective(channel_set, quad, float(spectrum.logA[h]), h, n, cfg)
            val = obj(params.lam, params.rho)
            if not math.isfinite(val) and val > 0:
                raise BoundError(
                    f"fixed parameters are degenerate at weight class h={h}"
                )
            per_h.append(SubcodeOpt(h, min(val, 0.0), params.lam, params.rho))
        return _assemble_total(per_h, Ds2TotalResult)

    if not hs:
        return Ds2TotalResult(NEG_INF, [], None, 0)
    gbar = channel_set.avg_gamma(quad)
    lgbar = math.log(gbar) if gbar > 0 else NEG_INF
    bhatt = {h: float(spectrum.logA[h]) + h * lgbar for h in hs}

    def optimize_set(work_hs, seeded):
        if cfg.threads > 1:
            def work(h):
                return _optimize_one_h(channel_set, quad, spectrum, h, cfg, None)[0]
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                return list(pool.map(work, work_hs))
        out = []
        seed = None
        for h in work_hs:
            opt, new_seed = _optimize_one_h(channel_set, quad, spectrum, h, cfg, seed)
            out.append(opt)
            if seeded and new_seed is not None:
                seed = new_seed
        return out

    ref = max(bhatt.values())
    active = [h for h in hs if bhatt[h] > ref - cfg.trim_nats]
    results = {o.h: o for o in optimize_set(active, cfg.use_seeding)}
    # re-admit trimmed classes that could still matter next to the optimized peak
    while True:
        v = max((o.log_prob for o in results.values()), default=NEG_INF)
        pending = [h for h in hs if h not in results and bhatt[h] > v - cfg.trim_nats]
        if not pending:
            break
        results.update({o.h: o for o in optimize_set(pending, cfg.use_seeding)})
    per_h = [
        results.get(h) or SubcodeOpt(h, min(bhatt[h], 0.0), 0.5, 1.0)
        for h in hs
    ]
    return _assemble_total(per_h, Ds2TotalResult)


def _assemble_total(per_h, result_cls):
    n_fallback = sum(1 for o in per_h if not o.converged)
    total = min(log_sum_exp([o.log_prob for o in per_h]), 0.0) if per_h else NEG_INF
    dominant = max(per_h, key=lambda o: o.log_prob) if per_h else None
    return result_cls(total, per_h, dominant, n_fallback)


def total_bound_single_measure(channel_set: ParallelChannelSet, spectrum: DistanceSpectrum,
                               params: Ds2Params, tilting,
                               quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Whole-sum bound with one shared (lam, rho, tilting): ln {sum_h A_h A_bar^h B_bar^(n-h)}^rho."""
    ev = eval_ab(channel_set, params, tilting, quad)
    n = spectrum.n
    h = np.arange(1, n + 1)
    terms = spectrum.logA[1:] + h * ev.log_a_bar + (n - h) * ev.log_b_bar
    return min(params.rho * log_sum_exp(terms), 0.0)


@dataclass
class ExponentResult:
    value: float
    lam: float
    rho: float
    boundary: bool


def ds2_exponent(channel_set: ParallelChannelSet, r_delta: float, delta: float,
                 cfg: OptimizerConfig = None, quad: QuadratureSpec = DEFAULT_QUAD,
                 seed=None) -> ExponentResult:
    """Error exponent -rho r - rho delta ln A_bar - rho (1-delta) ln B_bar, maximized.

    An empty weight class (r = -inf) gives +inf by convention.
    """
    if not 0.0 < delta <= 1.0:
        raise BoundError(f"delta must be in (0, 1], got {delta}")
    if r_delta == NEG_INF:
        return ExponentResult(math.inf, 0.5, 1.0, False)
    cfg = cfg or OptimizerConfig()

    def neg_exponent(lam, rho):
        if rho <= 0.0 or rho > 1.0 or lam < 0.0:
            return math.inf
        lab, lbb, ok = _bar_values(channel_set, lam, rho, delta, quad,
                                   cfg.fp_tol, cfg.fp_max_iter, cfg.fp_damp_after)
        if not ok:
            return math.inf
        if lab == NEG_INF:
            return -math.inf
        return rho * (r_delta + delta * lab + (1.0 - delta) * lbb)

    res = optimize_params(neg_exponent, cfg, seed=seed)
    return ExponentResult(-res.value, res.x[0], res.x[1], res.boundary)
