"""Batch command-line front door emitting CSV/JSON artifacts.

Subcommands: channels, spectrum, bound, region, oracle.  Every CSV starts
with a manifest comment line carrying the command, the SHA-256 of the
configuration and the library version; wall time lives only in the sidecar
manifest JSON so that repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from importlib.metadata import version as _pkg_version
from pathlib import Path

import numpy as np

from .channels import (ChannelError, ParallelChannelSet, bhattacharyya,
                       capacity_bits, cutoff_rate_bits)
from .ds2 import (BoundError, ConvergenceError, Ds2Params, OptimizerConfig,
                  Ds2TotalResult, tilting_fixed_point, total_bound_per_subcode,
                  union_bhattacharyya)
from .ensembles import EnsembleSpec, ensemble_rate, ensemble_spectrum, extrapolated_exponent
from .gallager61 import G61OptimizerConfig, g61_total_per_subcode
from .oracle import ExplicitCode, ml_montecarlo
from .regions import (RegionConfig, boundary_trace, default_delta_grid,
                      reference_boundary)
from .spectra import (ResourceError, SpectraError, to_distance, write_iowe_csv,
                      write_spectrum_csv)
from . import spectra as _spectra_io

try:
    VERSION = _pkg_version("parbounds")
except Exception:  # not installed
    VERSION = "0.0.0"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def _manifest_line(command: str, digest: str) -> str:
    return f"parbounds {command} config_sha256={digest} version={VERSION}"


def _write_csv(path: Path, command: str, digest: str, header: str, rows):
    lines = [f"# {_manifest_line(command, digest)}", header]
    lines.extend(rows)
    path.write_text("\n".join(lines) + "\n")


def _write_manifest(out: Path, command: str, digest: str, outputs, t0: float):
    payload = {
        "command": command,
        "config_sha256": digest,
        "version": VERSION,
        "wall_time_s": round(time.time() - t0, 3),
        "outputs": sorted(str(o.name) for o in outputs),
    }
    (out / f"{command}_manifest.json").write_text(json.dumps(payload, indent=2) + "\n")


def _db(x: float) -> str:
    return f"{x:.4f}"


def _log10(x: float) -> str:
    if x == -math.inf:
        return "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.6f}"


def _load_config(path: str) -> tuple[dict, str]:
    raw = Path(path).read_bytes()
    return json.loads(raw), _digest(raw)


def _channel_param(cfg_channel: dict) -> float:
    for key in ("p", "eps", "ebno_db", "esno"):
        if key in cfg_channel:
            return float(cfg_channel[key])
    return math.nan


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_channels(args) -> int:
    cfg, digest = _load_config(args.config)
    cs = ParallelChannelSet.from_config(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    rows = []
    for i, (ch, c_cfg) in enumerate(zip(cs.channels, cfg["channels"])):
        rows.append(
            f"{i},{ch.kind},{_channel_param(c_cfg)},"
            f"{bhattacharyya(ch):.12g},{capacity_bits(ch):.12g},{cutoff_rate_bits(ch):.12g}"
        )
    path = out / "channels.csv"
    _write_csv(path, "channels", digest,
               "index,kind,param,gamma,capacity_bits,cutoff_rate_bits", rows)
    _write_manifest(out, "channels", digest, [path], t0)
    print(path)
    return 0


def cmd_spectrum(args) -> int:
    cfg, digest = _load_config(args.config)
    spec = EnsembleSpec.from_config(cfg)
    weighting = cfg.get("weighting", "block")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    spectrum = ensemble_spectrum(spec, weighting)
    path = out / "spectrum.csv"
    write_spectrum_csv(path, spectrum, comments=[_manifest_line("spectrum", digest)])
    outputs = [path]
    if cfg.get("emit_iowe"):
        from .ensembles import nsra_iowe, spra_iowe, spara_iowe, turbo_iowe
        builders = {
            "nsra": lambda: nsra_iowe(spec.N, spec.q),
            "spra": lambda: spra_iowe(spec.N, spec.p, spec.q),
            "spara": lambda: spara_iowe(spec.N, spec.M, spec.p, spec.q),
            "turbo": lambda: turbo_iowe(spec.N, spec.G),
        }
        iowe_path = out / "iowe.csv"
        write_iowe_csv(iowe_path, builders[spec.kind](),
                       comments=[_manifest_line("spectrum", digest)])
        outputs.append(iowe_path)
    _write_manifest(out, "spectrum", digest, outputs, t0)
    print(path)
    return 0


def _resolve_spectrum(cfg: dict, weighting: str):
    src = cfg["spectrum"]
    if isinstance(src, str):
        spectrum = _spectra_io.read_spectrum_csv(src)
        if spectrum.weighting != weighting:
            raise SpectraError(
                f"spectrum file carries {spectrum.weighting} weighting, config wants {weighting}"
            )
        return spectrum
    return ensemble_spectrum(EnsembleSpec.from_config(src), weighting)


def _resolve_channels(cfg: dict) -> dict:
    src = cfg["channels"]
    if isinstance(src, str):
        return json.loads(Path(src).read_text())
    return src


def cmd_bound(args) -> int:
    cfg, digest = _load_config(args.config)
    bound_type = cfg.get("type", "ds2")
    weighting = {"bit": "bit", "block": "block"}[cfg.get("error", "block")]
    spectrum = _resolve_spectrum(cfg, weighting)
    ch_cfg = _resolve_channels(cfg)
    sweep = cfg["sweep"]
    sweep_channel = int(sweep.get("channel", 1))
    sweep_param = sweep.get("param", "ebno_db")
    values = np.arange(float(sweep["start"]),
                       float(sweep["stop"]) + 1e-12,
                       float(sweep.get("step", 0.25)))

    opt_cfg = cfg.get("optimizer", {})
    ds2_cfg = OptimizerConfig(threads=args.threads,
                              use_seeding=args.threads <= 1,
                              **{k: v for k, v in opt_cfg.items()
                                 if k in ("lam_max", "rho_min", "refine_rounds",
                                          "golden_iters", "fp_tol")})
    g61_cfg = G61OptimizerConfig(threads=args.threads,
                                 use_seeding=args.threads <= 1,
                                 **{k: v for k, v in opt_cfg.items()
                                    if k in ("rho_min", "s_min", "s_max",
                                             "refine_rounds", "golden_iters")})

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    rows = []
    J = len(ch_cfg["channels"])
    for value in values:
        point = json.loads(json.dumps(ch_cfg))
        point["channels"][sweep_channel][sweep_param] = float(value)
        cs = ParallelChannelSet.from_config(point)
        if bound_type == "union":
            lb = union_bhattacharyya(cs, spectrum)
            rows.append(f"{_db(value)},{_log10(lb / math.log(10))}")
        elif bound_type == "ds2":
            res = total_bound_per_subcode(cs, spectrum, ds2_cfg)
            dom = res.dominant
            k = math.nan
            betas = [math.nan] * J
            if dom is not None and math.isfinite(dom.log_prob):
                try:
                    sol = tilting_fixed_point(
                        cs, Ds2Params(dom.lam, dom.rho), dom.h / spectrum.n)
                    k = sol.k
                    betas = list(sol.betas)
                except (BoundError, ConvergenceError):
                    pass
            beta_cols = ",".join(f"{b:.6g}" for b in betas)
            rows.append(
                f"{_db(value)},{_log10(res.log10_prob)},{dom.lam:.6g},{dom.rho:.6g},"
                f"{k:.6g},{beta_cols},{int(res.n_fallback == 0)}"
            )
        elif bound_type == "g61":
            res = g61_total_per_subcode(cs, spectrum, g61_cfg)
            dom = res.dominant
            rows.append(
                f"{_db(value)},{_log10(res.log10_prob)},{dom.lam:.6g},{dom.rho:.6g},"
                f"{dom.k:.6g},{int(res.n_fallback == 0)}"
            )
        else:
            raise BoundError(f"unknown bound type {bound_type!r}")

    headers = {
        "union": "sweep_value,log10_bound",
        "ds2": "sweep_value,log10_bound,lambda,rho,k,"
               + ",".join(f"beta_{j + 1}" for j in range(J)) + ",converged",
        "g61": "sweep_value,log10_bound,rho,s,c,converged",
    }
    path = out / "bound.csv"
    _write_csv(path, "bound", digest, headers[bound_type], rows)
    _write_manifest(out, "bound", digest, [path], t0)
    print(path)
    return 0


def cmd_region(args) -> int:
    cfg, digest = _load_config(args.config)
    spec = EnsembleSpec.from_config(cfg["ensemble"])
    rate = float(cfg.get("rate", ensemble_rate(spec)))
    alphas = tuple(cfg.get("alphas", (0.5, 0.5)))
    delta_cfg = cfg.get("delta", {})
    rcfg = RegionConfig(
        delta_min=float(delta_cfg.get("min", 1e-3)),
        delta_points=int(delta_cfg.get("points", 200)),
        tol_db=float(cfg.get("tol_db", 0.01)),
        bound=cfg.get("bound", "ds2"),
    )
    deltas = default_delta_grid(rcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    ext = extrapolated_exponent(spec, deltas)

    grid = cfg["grid"]
    rows1 = [float(x) for x in grid["ebno1_db"]]
    rng2 = tuple(float(x) for x in grid["ebno2_range"])

    outputs = []
    trace = boundary_trace(rows1, rng2, ext.exponent, rate, alphas, rcfg) if rows1 else []
    rows = [
        f"{_db(r['ebno1_db'])},{_db(r['ebno2_db_boundary']) if math.isfinite(r['ebno2_db_boundary']) else 'nan'},"
        f"{_log10(r['margin_cond1'])},{_log10(r['margin_cond2'])},"
        f"{r['argmin_delta']:.6g}"
        for r in trace
    ]
    path = out / "region.csv"
    _write_csv(path, "region", digest,
               "ebno1_db,ebno2_db_boundary,margin_cond1,margin_cond2,argmin_delta", rows)
    outputs.append(path)

    for kind in ("capacity", "cutoff"):
        ref = reference_boundary(kind, rows1, rng2, rate, alphas) if rows1 else []
        ref_rows = [
            f"{_db(r['ebno1_db'])},"
            f"{_db(r['ebno2_db_boundary']) if math.isfinite(r['ebno2_db_boundary']) else 'nan'},"
            f"{r['flag']}"
            for r in ref
        ]
        ref_path = out / f"{kind}.csv"
        _write_csv(ref_path, "region", digest, "ebno1_db,ebno2_db_boundary,flag", ref_rows)
        outputs.append(ref_path)

    extra = {"extrapolation_max_residual": ext.max_residual}
    (out / "region_extras.json").write_text(json.dumps(extra, indent=2) + "\n")
    _write_manifest(out, "region", digest, outputs, t0)
    print(path)
    return 0


def cmd_oracle(args) -> int:
    code = ExplicitCode.from_file(args.code)
    ch_cfg = json.loads(Path(args.channels).read_text())
    cs = ParallelChannelSet.from_config(ch_cfg)
    assignment = args.assignment
    if assignment.startswith("fixed:"):
        assignment = np.array([int(x) for x in assignment[len("fixed:"):].split(",")])
    digest = _digest(
        f"{Path(args.code).read_text()}|{json.dumps(ch_cfg, sort_keys=True)}|"
        f"{args.trials}|{args.seed}|{args.assignment}".encode()
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    res = ml_montecarlo(code, cs, args.trials, seed=args.seed, assignment=assignment)
    path = out / "oracle.csv"
    _write_csv(path, "oracle", digest, "trials,errors,estimate,ci_lo,ci_hi",
               [f"{res.trials},{res.errors},{res.estimate:.8g},{res.ci_lo:.8g},{res.ci_hi:.8g}"])
    _write_manifest(out, "oracle", digest, [path], t0)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parbounds",
        description="ML-decoding error bounds and attainable regions for parallel channels",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)

    common(sub.add_parser("channels", help="per-channel gamma, capacity, cutoff rate"))
    common(sub.add_parser("spectrum", help="ensemble distance spectrum / IOWE"))
    common(sub.add_parser("bound", help="bound sweep over a channel parameter"))
    common(sub.add_parser("region", help="attainable-region boundary trace"))
    p_oracle = sub.add_parser("oracle", help="Monte-Carlo ML decoding estimate")
    p_oracle.add_argument("--code", required=True, help="codeword file, one 0/1 word per line")
    p_oracle.add_argument("--channels", required=True, help="channel-set JSON file")
    p_oracle.add_argument("--trials", type=int, default=100000)
    p_oracle.add_argument("--assignment", default="random",
                          help='"random" or "fixed:0,1,0,..." per-position channel indices')
    common(p_oracle, needs_config=False)
    return parser


_DISPATCH = {
    "channels": cmd_channels,
    "spectrum": cmd_spectrum,
    "bound": cmd_bound,
    "region": cmd_region,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (ChannelError, SpectraError, BoundError) as exc:
        print(f"error: contract: {exc}", file=sys.stderr)
        return 3
    except ResourceError as exc:
        print(f"error: resource: {exc}", file=sys.stderr)
        return 4
    except ConvergenceError as exc:
        print(f"error: convergence: {exc}", file=sys.stderr)
        return 5
    except FileNotFoundError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
