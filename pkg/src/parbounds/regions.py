"""Attainable-channel-region machinery for code ensembles over parallel channels.

A channel point is judged attainable when (1) the maximized error exponent is
positive over the whole normalized-weight grid, (2) the small-weight spectrum
slope lies below -ln(sum_j alpha_j gamma_j), and (3, 4) the declared ensemble
tail and uniform-convergence properties hold.  Boundaries in a two-channel
plane are traced by bisection along rays, next to capacity-limit and
cutoff-rate reference curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import DEFAULT_QUAD, MbiosChannel, ParallelChannelSet, QuadratureSpec
from .ds2 import BoundError, OptimizerConfig, ds2_exponent
from .gallager61 import G61OptimizerConfig, g61_exponent
from .spectra import SpectralExponent

__all__ = [
    "RegionConfig",
    "ConditionReport",
    "AttainabilityReport",
    "default_delta_grid",
    "check_point",
    "capacity_converse",
    "cutoff_reference",
    "boundary_search",
    "boundary_trace",
    "reference_boundary",
    "two_biawgn_set",
]

NEG_INF = -np.inf


@dataclass
class RegionConfig:
    delta_min: float = 1e-3
    delta_points: int = 200
    refine_factor: int = 10
    refine_points: int = 21
    tol_db: float = 0.01
    bound: str = "ds2"
    quad: QuadratureSpec = DEFAULT_QUAD
    ds2_optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    g61_optimizer: G61OptimizerConfig = field(default_factory=G61OptimizerConfig)
    declared_tail_vanishing: bool = True
    declared_uniform_convergence: bool = True


def default_delta_grid(cfg: RegionConfig = None) -> np.ndarray:
    """Geometric grid on [delta_min, 1] plus a finer pass below delta_min.

    The sub-delta_min samples feed only the small-weight slope estimate; the
    exponent positivity check runs on [delta_min, 1].
    """
    cfg = cfg or RegionConfig()
    main = np.geomspace(cfg.delta_min, 1.0, cfg.delta_points)
    fine = np.geomspace(cfg.delta_min / cfg.refine_factor, cfg.delta_min,
                        cfg.refine_points)
    return np.unique(np.concatenate([fine, main]))


@dataclass
class ConditionReport:
    satisfied: bool
    margin: float
    detail: str = ""


@dataclass
class AttainabilityReport:
    attainable: bool
    condition1: ConditionReport
    condition2: ConditionReport
    condition3: ConditionReport
    condition4: ConditionReport
    argmin_delta: float
    bound: str


def _max_exponent(channel_set, r, delta, bound, cfg, seed):
    if bound == "ds2":
        res = ds2_exponent(channel_set, r, delta, cfg.ds2_optimizer, cfg.quad, seed=seed)
        return res.value, (res.lam, res.rho)
    res = g61_exponent(channel_set, r, delta, cfg.g61_optimizer, cfg.quad, seed=seed)
    return res.value, (res.rho, res.s, res.c)


def check_point(channel_set: ParallelChannelSet, exponent: SpectralExponent,
                cfg: RegionConfig = None, early_stop: bool = False) -> AttainabilityReport:
    """Attainability verdict for one channel point given an ensemble exponent.

    ``exponent`` must cover [delta_min, 1]; samples below delta_min feed the
    small-weight slope test.  With ``early_stop``, the exponent scan aborts at
    the first non-positive value (verdict unchanged, margin approximate).
    """
    cfg = cfg or RegionConfig()
    deltas = exponent.delta
    rs = exponent.r
    if deltas.max() < 0.999 or deltas.min() > cfg.delta_min * 1.0001:
        raise BoundError(
            f"exponent samples must cover [{cfg.delta_min}, 1], got "
            f"[{deltas.min()}, {deltas.max()}]"
        )

    # condition 1: inf over the grid of the maximized exponent
    min_e = math.inf
    argmin_delta = math.nan
    seed = None
    for d, r in zip(deltas, rs):
        if d < cfg.delta_min:
            continue
        e, seed = _max_exponent(channel_set, float(r), float(d), cfg.bound, cfg, seed)
        if e < min_e:
            min_e = e
            argmin_delta = float(d)
        if early_stop and min_e <= 0.0:
            break
    cond1 = ConditionReport(min_e > 0.0, min_e,
                            f"min exponent over grid, argmin delta {argmin_delta:.4g}")

    # condition 2: small-weight slope vs -ln(avg Bhattacharyya)
    gbar = channel_set.avg_gamma(cfg.quad)
    rhs = -math.log(gbar) if gbar > 0 else math.inf
    small = deltas <= cfg.delta_min * cfg.refine_factor
    finite = small & np.isfinite(rs)
    lhs = float(np.max(rs[finite] / deltas[finite])) if np.any(finite) else -math.inf
    margin2 = rhs - lhs
    cond2 = ConditionReport(margin2 > 0.0, margin2,
                            f"limsup r/delta ~ {lhs:.4g} vs {rhs:.4g}")

    cond3 = ConditionReport(cfg.declared_tail_vanishing, math.inf if cfg.declared_tail_vanishing else -math.inf, "declared")
    cond4 = ConditionReport(cfg.declared_uniform_convergence, math.inf if cfg.declared_uniform_convergence else -math.inf, "declared")

    verdict = all(c.satisfied for c in (cond1, cond2, cond3, cond4))
    return AttainabilityReport(verdict, cond1, cond2, cond3, cond4, argmin_delta, cfg.bound)


def capacity_converse(channel_set: ParallelChannelSet, rate: float,
                      quad: QuadratureSpec = DEFAULT_QUAD):
    """("unattainable", margin) if the averaged capacity falls below the rate."""
    margin = channel_set.avg_capacity(quad) - rate
    return ("unattainable" if margin < 0 else "inconclusive", margin)


def cutoff_reference(channel_set: ParallelChannelSet, rate: float,
                     quad: QuadratureSpec = DEFAULT_QUAD):
    """("attainable", margin) if the averaged cutoff rate reaches the rate."""
    margin = channel_set.avg_cutoff_rate(quad) - rate
    return ("attainable" if margin >= 0 else "inconclusive", margin)


def two_biawgn_set(ebno1_db: float, ebno2_db: float, rate: float,
                   alphas=(0.5, 0.5)) -> ParallelChannelSet:
    """Two parallel BiAWGN channels at the given per-channel Eb/N0 values."""
    return ParallelChannelSet(
        (MbiosChannel.biawgn_db(ebno1_db, rate), MbiosChannel.biawgn_db(ebno2_db, rate)),
        tuple(alphas),
        rate,
    )


class NonMonotoneRayError(RuntimeError):
    """The verdict along a bisected ray is not monotone."""


def boundary_search(point_builder, exponent: SpectralExponent, lo: float, hi: float,
                    cfg: RegionConfig = None) -> dict:
    """Bisect a scalar channel parameter for the attainability flip.

    ``point_builder(x)`` maps the parameter (dB) to a ParallelChannelSet.
    Expects not-attainable at ``lo`` and attainable at ``hi``; an attainable
    ``lo`` (or unattainable ``hi``) is reported with the corresponding end
    point and a flag instead of a bisection.
    """
    cfg = cfg or RegionConfig()

    def verdict(x):
        return check_point(point_builder(x), exponent, cfg, early_stop=True).attainable

    v_lo = verdict(lo)
    v_hi = verdict(hi)
    v_mid = verdict(0.5 * (lo + hi))
    pattern = (v_lo, v_mid, v_hi)
    if v_lo and not v_hi:
        raise NonMonotoneRayError(f"verdict decreases along the ray [{lo}, {hi}] dB")
    if pattern == (False, True, False) or pattern == (True, False, True):
        raise NonMonotoneRayError(f"non-monotone verdict probe {pattern} on [{lo}, {hi}] dB")
    if v_lo and v_hi:
        return {"boundary_db": lo, "flag": "attainable-at-lo"}
    if not v_lo and not v_hi:
        return {"boundary_db": math.nan, "flag": "unattainable-at-hi"}
    a, b = (lo, 0.5 * (lo + hi)) if v_mid else (0.5 * (lo + hi), hi)
    while b - a > cfg.tol_db:
        mid = 0.5 * (a + b)
        if verdict(mid):
            b = mid
        else:
            a = mid
    return {"boundary_db": 0.5 * (a + b), "flag": "ok"}


def boundary_trace(ebno1_rows, ebno2_range, exponent: SpectralExponent, rate: float,
                   alphas=(0.5, 0.5), cfg: RegionConfig = None) -> list:
    """Per row of fixed first-channel Eb/N0, the bisected second-channel boundary."""
    cfg = cfg or RegionConfig()
    lo, hi = ebno2_range
    out = []
    for e1 in ebno1_rows:
        res = boundary_search(lambda e2: two_biawgn_set(e1, e2, rate, alphas),
                              exponent, lo, hi, cfg)
        row = {"ebno1_db": e1, "ebno2_db_boundary": res["boundary_db"],
               "flag": res["flag"], "margin_cond1": math.nan,
               "margin_cond2": math.nan, "argmin_delta": math.nan}
        if res["flag"] == "ok":
            rep = check_point(two_biawgn_set(e1, res["boundary_db"], rate, alphas),
                              exponent, cfg)
            row["margin_cond1"] = rep.condition1.margin
            row["margin_cond2"] = rep.condition2.margin
            row["argmin_delta"] = rep.argmin_delta
        out.append(row)
    return out


def reference_boundary(kind: str, ebno1_rows, ebno2_range, rate: float,
                       alphas=(0.5, 0.5), tol_db: float = 0.001,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> list:
    """Capacity-limit or cutoff-rate reference polyline over the same rows."""
    if kind not in ("capacity", "cutoff"):
        raise BoundError(f"unknown reference curve kind {kind!r}")
    lo0, hi0 = ebno2_range
    out = []
    for e1 in ebno1_rows:
        def margin(e2):
            cs = two_biawgn_set(e1, e2, rate, alphas)
            if kind == "capacity":
                return cs.avg_capacity(quad) - rate
            return cs.avg_cutoff_rate(quad) - rate

        a, b = lo0, hi0
        if margin(a) >= 0:
            out.append({"ebno1_db": e1, "ebno2_db_boundary": a, "flag": "attainable-at-lo"})
            continue
        if margin(b) < 0:
            out.append({"ebno1_db": e1, "ebno2_db_boundary": math.nan, "flag": "unattainable-at-hi"})
            continue
        while b - a > tol_db:
            mid = 0.5 * (a + b)
            if margin(mid) >= 0:
                b = mid
            else:
                a = mid
        out.append({"ebno1_db": e1, "ebno2_db_boundary": 0.5 * (a + b), "flag": "ok"})
    return out
