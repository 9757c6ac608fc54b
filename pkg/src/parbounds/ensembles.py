"""Named code ensembles: repeat-accumulate variants and two-branch turbo codes.

Exact small-N enumerators are wired from the generic composition operators.
For large N, the repeat-accumulate family has specialized log-domain kernels:
a uniformly interleaved weight-ell input to an accumulator that is sampled
every p-th position factors through the per-block parity pattern, so

    accP(ell, h') = sum_v g(ell, v) * acc_B(v, h')

where g(ell, v) counts weight-ell fillings of B blocks of p bits with a fixed
set of v odd-parity blocks, and acc_B is the plain accumulator enumerator
over the B block parities.  For p = 3 the per-block generating functions are
(3z + z^3) and (1 + 3z^2), which gives g as a single binomial sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit, prange
from scipy.special import gammaln

from .spectra import (
    DistanceSpectrum,
    FsmEncoder,
    Iowe,
    ResourceError,
    SpectraError,
    SpectralExponent,
    acc_iowe,
    fsm_iowe,
    partial_precode,
    rep_iowe,
    systematic_join,
    to_distance,
    turbo_two_branch,
    uniform_concat,
)

__all__ = [
    "EnsembleSpec",
    "DEFAULT_TURBO_G",
    "nsra_iowe",
    "spra_iowe",
    "spara_iowe",
    "turbo_iowe",
    "nsra_spectrum",
    "spra_spectrum",
    "spara_spectrum",
    "ensemble_spectrum",
    "ExtrapolatedExponent",
    "extrapolated_exponent",
]

NEG_INF = -np.inf

DEFAULT_TURBO_G = "[1,(1+D^4)/(1+D+D^2+D^3+D^4)]"


@dataclass(frozen=True)
class EnsembleSpec:
    """Description of one ensemble, mirroring the JSON configuration schema.

    For "spara", ``M`` is the number of input bits that bypass the precoding
    accumulator (the remaining N - M are accumulated), so the bypass fraction
    is M / (q N / p + N).
    """

    kind: str
    N: int
    q: int = 3
    p: int = 3
    M: int = 0
    G: str = DEFAULT_TURBO_G

    def __post_init__(self):
        if self.kind not in ("nsra", "spra", "spara", "turbo"):
            raise SpectraError(f"unknown ensemble kind {self.kind!r}")
        if self.N < 1:
            raise SpectraError("N must be positive")
        if self.kind == "spara" and not 0 <= self.M <= self.N:
            raise SpectraError("spara needs 0 <= M <= N")

    @classmethod
    def from_config(cls, cfg: dict) -> "EnsembleSpec":
        kind = cfg["ensemble"].lower()
        return cls(
            kind,
            int(cfg["N"]),
            q=int(cfg.get("q", 3)),
            p=int(cfg.get("p", 3)),
            M=int(cfg.get("M", 0)),
            G=cfg.get("G", DEFAULT_TURBO_G),
        )

    def with_N(self, N: int) -> "EnsembleSpec":
        return EnsembleSpec(self.kind, N, q=self.q, p=self.p,
                            M=round(self.M * N / self.N) if self.kind == "spara" else self.M,
                            G=self.G)


# ---------------------------------------------------------------------------
# Exact enumerators through the generic composition operators
# ---------------------------------------------------------------------------

def _punctured_acc_iowe(L: int, p: int) -> Iowe:
    """Accumulator over L bits keeping the last bit of each length-p period."""
    if L % p:
        raise SpectraError(f"period {p} must divide the accumulator length {L}")
    mask = tuple([0] * (p - 1) + [1])
    return fsm_iowe(FsmEncoder.accumulator(), L, puncture=mask)


def nsra_iowe(N: int, q: int) -> Iowe:
    """Non-systematic repeat-accumulate ensemble: repeat-q, interleave, accumulate."""
    return uniform_concat(rep_iowe(N, q), acc_iowe(q * N))


def spra_iowe(N: int, p: int, q: int) -> Iowe:
    """Systematic punctured RA: input alongside the p-punctured accumulator output."""
    chain = uniform_concat(rep_iowe(N, q), _punctured_acc_iowe(q * N, p))
    return systematic_join(chain)


def spara_iowe(N: int, M: int, p: int, q: int) -> Iowe:
    """Systematic punctured accumulate-repeat-accumulate ensemble.

    M of the N input bits bypass the precoding accumulator; the precoder
    output feeds the repeat-interleave-accumulate chain of the SPRA ensemble,
    and the original input is transmitted systematically.
    """
    pre = partial_precode(N, N - M)
    chain = uniform_concat(pre, uniform_concat(rep_iowe(N, q), _punctured_acc_iowe(q * N, p)))
    return systematic_join(chain)


def turbo_iowe(K: int, g: str = DEFAULT_TURBO_G, terminated: bool = True,
               cell_budget: int = 2**31) -> Iowe:
    """Uniformly interleaved two-branch turbo ensemble with systematic bits.

    Both recursive branches are terminated; tail parity bits count toward the
    output length while tail systematic bits are not transmitted, so
    n = 3K + 2 * memory.
    """
    enc = FsmEncoder.from_g_string(g)
    branch = fsm_iowe(enc, K, puncture=(0, 1), terminated=terminated,
                      cell_budget=cell_budget)
    return turbo_two_branch(branch, K)


# ---------------------------------------------------------------------------
# Large-N kernels (p = 3 family)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _lnc(lg, n, k):
    if k < 0 or k > n or n < 0:
        return -np.inf
    return lg[n] - lg[k] - lg[n - k]


@njit(cache=True, nogil=True, parallel=True)
def _g_table_p3(N, q, B, lg):
    """g2[m, u] = ln(# weight-6m fillings of B 3-bit blocks with 2u fixed odd blocks)."""
    ln3 = math.log(3.0)
    out = np.full((N + 1, B // 2 + 1), -np.inf)
    for m in prange(N + 1):
        ell = q * m
        vmax = min(ell, B)
        for u in range(vmax // 2 + 1):
            v = 2 * u
            a = (ell - v) // 2
            if 2 * a != ell - v or a < 0:
                continue
            ilo = a - (B - v)
            if ilo < 0:
                ilo = 0
            ihi = min(v, a)
            if ilo > ihi:
                continue
            mx = -np.inf
            ss = 0.0
            for i in range(ilo, ihi + 1):
                t = (_lnc(lg, v, i) + (v - i) * ln3
                     + _lnc(lg, B - v, a - i) + (a - i) * ln3)
                if t == -np.inf:
                    continue
                if t <= mx:
                    ss += math.exp(t - mx)
                elif mx == -np.inf:
                    mx = t
                    ss = 1.0
                else:
                    ss = ss * math.exp(mx - t) + 1.0
                    mx = t
            if ss > 0.0:
                out[m, u] = mx + math.log(ss)
    return out


@njit(cache=True, nogil=True, inline="always")
def _ln_acc(lg, L, v, h):
    """ln of the accumulator enumerator over L bits: weight-v in, weight-h out."""
    if v == 0:
        return 0.0 if h == 0 else -np.inf
    if h < 1 or h > L:
        return -np.inf
    return _lnc(lg, L - h, v // 2) + _lnc(lg, h - 1, (v + 1) // 2 - 1)


@njit(cache=True, nogil=True, parallel=True)
def _q_table(N, q, B, g2, lg):
    """Q[m, h'] = ln( accP(q m, h') / C(q N, q m) ) for the p = 3 chain."""
    L = q * N
    out = np.full((N + 1, B + 1), -np.inf)
    for m in prange(N + 1):
        norm = _lnc(lg, L, q * m)
        for hp in range(B + 1):
            mx = -np.inf
            ss = 0.0
            # v = 0 contributes only at h' = 0
            if hp == 0 and g2[m, 0] > -np.inf:
                mx = g2[m, 0]
                ss = 1.0
            for u in range(1, g2.shape[1]):
                gv = g2[m, u]
                if gv == -np.inf:
                    continue
                la = _ln_acc(lg, B, 2 * u, hp)
                if la == -np.inf:
                    break  # infeasible for all larger u: needs u <= h' and u <= B - h'
                t = gv + la
                if t <= mx:
                    ss += math.exp(t - mx)
                elif mx == -np.inf:
                    mx = t
                    ss = 1.0
                else:
                    ss = ss * math.exp(mx - t) + 1.0
                    mx = t
            if ss > 0.0:
                out[m, hp] = mx + math.log(ss) - norm
    return out


@njit(cache=True, nogil=True, parallel=True)
def _pre_table(N, Mbp, lg):
    """pre[w, m] = ln(# inputs of weight w mapping to weight m) for the partial precoder.

    The accumulator acts on Macc = N - Mbp bits; Mbp bits pass through.
    """
    Macc = N - Mbp
    out = np.full((N + 1, N + 1), -np.inf)
    for w in prange(N + 1):
        for m in range(N + 1):
            tlo = max(0, max(w - Macc, m - Macc))
            thi = min(Mbp, min(w, m))
            mx = -np.inf
            ss = 0.0
            for t in range(tlo, thi + 1):
                la = _ln_acc(lg, Macc, w - t, m - t)
                if la == -np.inf:
                    continue
                val = _lnc(lg, Mbp, t) + la
                if val <= mx:
                    ss += math.exp(val - mx)
                elif mx == -np.inf:
                    mx = val
                    ss = 1.0
                else:
                    ss = ss * math.exp(mx - val) + 1.0
                    mx = val
            if ss > 0.0:
                out[w, m] = mx + math.log(ss)
    return out


@njit(cache=True, nogil=True, parallel=True)
def _contract_spra(hs, N, B, Q, lg, bit_weighted):
    out = np.full(hs.size, -np.inf)
    for i in prange(hs.size):
        h = hs[i]
        mx = -np.inf
        ss = 0.0
        wlo = max(0, h - B)
        whi = min(N, h)
        for w in range(wlo, whi + 1):
            qv = Q[w, h - w]
            if qv == -np.inf:
                continue
            t = _lnc(lg, N, w) + qv
            if bit_weighted:
                if w == 0:
                    continue
                t += math.log(w / N)
            if t <= mx:
                ss += math.exp(t - mx)
            elif mx == -np.inf:
                mx = t
                ss = 1.0
            else:
                ss = ss * math.exp(mx - t) + 1.0
                mx = t
        if ss > 0.0:
            out[i] = mx + math.log(ss)
    return out


@njit(cache=True, nogil=True, parallel=True)
def _contract_spara(hs, N, B, pre, Q, bit_weighted):
    out = np.full(hs.size, -np.inf)
    for i in prange(hs.size):
        h = hs[i]
        mx = -np.inf
        ss = 0.0
        wlo = max(0, h - B)
        whi = min(N, h)
        for w in range(wlo, whi + 1):
            lw = math.log(w / N) if (bit_weighted and w > 0) else 0.0
            if bit_weighted and w == 0:
                continue
            hp = h - w
            for m in range(N + 1):
                pv = pre[w, m]
                if pv == -np.inf:
                    continue
                qv = Q[m, hp]
                if qv == -np.inf:
                    continue
                t = pv + qv + lw
                if t <= mx:
                    ss += math.exp(t - mx)
                elif mx == -np.inf:
                    mx = t
                    ss = 1.0
                else:
                    ss = ss * math.exp(mx - t) + 1.0
                    mx = t
        if ss > 0.0:
            out[i] = mx + math.log(ss)
    return out


@njit(cache=True, nogil=True, parallel=True)
def _contract_nsra(hs, N, q, lg, bit_weighted):
    L = q * N
    out = np.full(hs.size, -np.inf)
    for i in prange(hs.size):
        h = hs[i]
        mx = -np.inf
        ss = 0.0
        for w in range(N + 1):
            la = _ln_acc(lg, L, q * w, h)
            if la == -np.inf:
                continue
            t = _lnc(lg, N, w) + la - _lnc(lg, L, q * w)
            if bit_weighted:
                if w == 0:
                    continue
                t += math.log(w / N)
            if t <= mx:
                ss += math.exp(t - mx)
            elif mx == -np.inf:
                mx = t
                ss = 1.0
            else:
                ss = ss * math.exp(mx - t) + 1.0
                mx = t
        if ss > 0.0:
            out[i] = mx + math.log(ss)
    return out


@lru_cache(maxsize=8)
def _lgamma_table(limit: int) -> np.ndarray:
    return gammaln(np.arange(limit + 1, dtype=float) + 1.0)


@lru_cache(maxsize=6)
def _chain_tables(N: int, q: int):
    """(g2, Q) tables of the repeat-q, interleave, 3-punctured-accumulator chain."""
    L = q * N
    if L % 3:
        raise SpectraError("the fast chain needs 3 | qN")
    B = L // 3
    lg = _lgamma_table(L + 2)
    g2 = _g_table_p3(N, q, B, lg)
    Q = _q_table(N, q, B, g2, lg)
    return Q, B, lg


@lru_cache(maxsize=6)
def _pre_cached(N: int, Mbp: int):
    return _pre_table(N, Mbp, _lgamma_table(N + 2))


def nsra_spectrum(N: int, q: int, weighting: str = "block") -> DistanceSpectrum:
    """Full finite-N NSRA(N, q) spectrum (any N; closed-form inner sums)."""
    n = q * N
    lg = _lgamma_table(n + 2)
    hs = np.arange(1, n + 1, dtype=np.int64)
    vals = _contract_nsra(hs, N, q, lg, weighting == "bit")
    logA = np.full(n + 1, NEG_INF)
    logA[0] = 0.0 if weighting == "block" else NEG_INF
    logA[1:] = vals
    if weighting == "bit":
        logA[0] = NEG_INF
        return DistanceSpectrum(n, logA, "bit", K=N)
    return DistanceSpectrum(n, logA, "block", K=N)


def spra_spectrum(N: int, p: int, q: int, weighting: str = "block") -> DistanceSpectrum:
    """Full finite-N SPRA(N, p, q) spectrum through the fast p = 3 chain."""
    if p != 3:
        raise SpectraError("the fast SPRA path supports p = 3 only; use spra_iowe")
    Q, B, lg = _chain_tables(N, q)
    n = N + B
    hs = np.arange(1, n + 1, dtype=np.int64)
    vals = _contract_spra(hs, N, B, Q, lg, weighting == "bit")
    logA = np.full(n + 1, NEG_INF)
    logA[1:] = vals
    if weighting == "block":
        logA[0] = 0.0
    return DistanceSpectrum(n, logA, weighting, K=N)


def spara_spectrum(N: int, M: int, p: int, q: int, weighting: str = "block",
                   h_values=None, full_limit: int = 512) -> DistanceSpectrum:
    """SPARA(N, M, p, q) spectrum; M input bits bypass the precoder.

    The contraction is quadratic in N per weight class, so the full spectrum
    is refused above ``full_limit``; pass ``h_values`` for large N.
    """
    if p != 3:
        raise SpectraError("the fast SPARA path supports p = 3 only; use spara_iowe")
    Q, B, lg = _chain_tables(N, q)
    pre = _pre_cached(N, M)
    n = N + B
    if h_values is None:
        if N > full_limit:
            raise ResourceError(
                f"full SPARA spectrum at N={N} exceeds the limit {full_limit}; "
                "pass h_values"
            )
        hs = np.arange(1, n + 1, dtype=np.int64)
    else:
        hs = np.unique(np.asarray(h_values, dtype=np.int64))
        if hs.min() < 1 or hs.max() > n:
            raise SpectraError("h_values outside [1, n]")
    vals = _contract_spara(hs, N, B, pre, Q, weighting == "bit")
    logA = np.full(n + 1, np.nan)
    logA[hs] = vals
    logA[0] = 0.0 if weighting == "block" else NEG_INF
    if h_values is None:
        return DistanceSpectrum(n, np.where(np.isnan(logA), NEG_INF, logA), weighting, K=N)
    # sparse container: unset weights stay NaN so accidental use is loud
    spec = DistanceSpectrum.__new__(DistanceSpectrum)
    spec.n = n
    spec.logA = logA
    spec.weighting = weighting
    spec.K = N
    return spec


def ensemble_spectrum(spec: EnsembleSpec, weighting: str = "block",
                      h_values=None) -> DistanceSpectrum:
    """Finite-N spectrum of a named ensemble (fast paths where available)."""
    if spec.kind == "nsra":
        return nsra_spectrum(spec.N, spec.q, weighting)
    if spec.kind == "spra":
        if spec.p == 3:
            return spra_spectrum(spec.N, spec.p, spec.q, weighting)
        return to_distance(spra_iowe(spec.N, spec.p, spec.q), weighting)
    if spec.kind == "spara":
        if spec.p == 3:
            return spara_spectrum(spec.N, spec.M, spec.p, spec.q, weighting,
                                  h_values=h_values)
        return to_distance(spara_iowe(spec.N, spec.M, spec.p, spec.q), weighting)
    return to_distance(turbo_iowe(spec.N, spec.G), weighting)


def ensemble_rate(spec: EnsembleSpec) -> float:
    if spec.kind == "nsra":
        return 1.0 / spec.q
    if spec.kind in ("spra", "spara"):
        return 1.0 / (1.0 + spec.q / spec.p)
    enc = FsmEncoder.from_g_string(spec.G)
    return spec.N / (3.0 * spec.N + 2.0 * enc.memory)


# ---------------------------------------------------------------------------
# Asymptotic exponent by Richardson extrapolation
# ---------------------------------------------------------------------------

@dataclass
class ExtrapolatedExponent:
    """r(delta) extrapolated from block lengths N and 2N.

    Under a c/n finite-length model, 2 r_{2N} - r_N cancels the leading
    correction.  In the small-weight zone the correction scales like
    ln(n)/n instead, so the doubled difference badly overshoots values that
    are themselves near zero; wherever the two finite-N samples disagree by
    more than ``rel_tol`` relative to their size (or ``abs_tol`` outright,
    or either is empty) the 2N curve stands in as the estimate.
    """

    exponent: SpectralExponent
    residual: np.ndarray
    finite_n: SpectralExponent
    rel_tol: float = 0.25
    abs_tol: float = 0.1

    @property
    def max_residual(self) -> float:
        finite = self.residual[np.isfinite(self.residual)]
        return float(np.max(finite)) if finite.size else math.inf


def _samples_at(spec: EnsembleSpec, deltas: np.ndarray, weighting: str) -> np.ndarray:
    """r(delta) on an exact grid via interpolation between adjacent weights."""
    if spec.kind == "nsra":
        n = spec.q * spec.N
        spectrum = nsra_spectrum(spec.N, spec.q, weighting)
    elif spec.kind == "spra":
        spectrum = spra_spectrum(spec.N, spec.p, spec.q, weighting)
        n = spectrum.n
    elif spec.kind == "spara":
        n = spec.N + spec.q * spec.N // spec.p
        h_float = deltas * n
        hs = np.unique(np.concatenate([
            np.maximum(1, np.floor(h_float).astype(int)),
            np.minimum(n, np.ceil(h_float).astype(int)),
        ]))
        spectrum = spara_spectrum(spec.N, spec.M, spec.p, spec.q, weighting, h_values=hs)
    else:
        spectrum = ensemble_spectrum(spec, weighting)
        n = spectrum.n

    out = np.empty(deltas.size)
    for i, d in enumerate(deltas):
        hf = d * n
        h0 = max(1, min(n, int(math.floor(hf))))
        h1 = max(1, min(n, int(math.ceil(hf))))
        r0 = spectrum.logA[h0] / n
        r1 = spectrum.logA[h1] / n
        if not (np.isfinite(r0) and np.isfinite(r1)):
            out[i] = r1 if np.isfinite(r1) else (r0 if np.isfinite(r0) else NEG_INF)
        elif h0 == h1:
            out[i] = r0
        else:
            out[i] = r0 + (r1 - r0) * (hf - h0) / (h1 - h0)
    return out


def extrapolated_exponent(spec: EnsembleSpec, deltas, weighting: str = "block",
                          rel_tol: float = 0.25,
                          abs_tol: float = 0.1) -> ExtrapolatedExponent:
    """Richardson-extrapolated asymptotic spectrum exponent from N and 2N."""
    deltas = np.asarray(deltas, dtype=float)
    r1 = _samples_at(spec, deltas, weighting)
    r2 = _samples_at(spec.with_N(2 * spec.N), deltas, weighting)
    with np.errstate(invalid="ignore"):
        residual = np.abs(r2 - r1)
        ext = 2.0 * r2 - r1
        unstable = (~np.isfinite(ext)
                    | (residual > rel_tol * np.maximum(np.abs(r2), 1e-12))
                    | (residual > abs_tol))
    ext = np.where(unstable, r2, ext)
    return ExtrapolatedExponent(
        SpectralExponent(deltas, ext, n=None),
        residual,
        SpectralExponent(deltas, r2, n=None),
        rel_tol,
        abs_tol,
    )
