"""Scratch: full-scale criterion-6 run (SPARA 2048/4096 region anchor)."""
import time, math, json
import numpy as np
from parbounds.ensembles import EnsembleSpec, extrapolated_exponent
from parbounds.regions import (RegionConfig, default_delta_grid, two_biawgn_set,
                               boundary_search, reference_boundary, check_point)

t_start = time.time()
rcfg = RegionConfig()
deltas = default_delta_grid(rcfg)
R = 1.0 / 3.0

specs = {
    "nsra": EnsembleSpec("nsra", 2048, q=3),
    "spra": EnsembleSpec("spra", 2048, q=6, p=3),
    "spara": EnsembleSpec("spara", 2048, q=6, p=3, M=819),
}
exps = {}
for name, sp in specs.items():
    t0 = time.time()
    exps[name] = extrapolated_exponent(sp, deltas)
    print(f"{name}: exponent built in {time.time()-t0:.0f}s, max resid {exps[name].max_residual:.4f}", flush=True)

# capacity boundary on the symmetric diagonal (both channels equal)
def diag_capacity_gap():
    lo, hi = -1.5, 2.0
    while hi - lo > 0.0005:
        mid = 0.5 * (lo + hi)
        cs = two_biawgn_set(mid, mid, R)
        if cs.avg_capacity() >= R:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)

cap_db = diag_capacity_gap()
print(f"capacity diagonal boundary: {cap_db:.4f} dB", flush=True)

results = {"capacity_diag_db": cap_db}
for name in ("spara", "spra", "nsra"):
    t0 = time.time()
    res = boundary_search(lambda e: two_biawgn_set(e, e, R), exps[name].exponent,
                          cap_db - 0.05, cap_db + 3.0, rcfg)
    results[name + "_diag_db"] = res["boundary_db"]
    print(f"{name} diagonal boundary: {res} ({time.time()-t0:.0f}s)", flush=True)

results["spara_gap_db"] = results["spara_diag_db"] - cap_db
results["spara_resid"] = exps["spara"].max_residual
print(f"SPARA gap vs capacity: {results['spara_gap_db']:.4f} dB", flush=True)

# nesting and ordering at 5 rows
rows = [0.0, 0.5, 1.0, 1.5, 2.0]
rng = (cap_db - 1.0, cap_db + 4.0)
caps = reference_boundary("capacity", rows, rng, R)
cuts = reference_boundary("cutoff", rows, rng, R)
order = {}
for name in ("spara", "spra", "nsra"):
    t0 = time.time()
    out = []
    for e1 in rows:
        r = boundary_search(lambda e2: two_biawgn_set(e1, e2, R), exps[name].exponent,
                            rng[0], rng[1], rcfg)
        out.append(r["boundary_db"])
    order[name] = out
    print(f"{name} rows: {[round(x,3) for x in out]} ({time.time()-t0:.0f}s)", flush=True)
results["rows"] = rows
results["capacity_rows"] = [r["ebno2_db_boundary"] for r in caps]
results["cutoff_rows"] = [r["ebno2_db_boundary"] for r in cuts]
results.update({f"{k}_rows": v for k, v in order.items()})
print("capacity rows:", [round(r["ebno2_db_boundary"],3) for r in caps], flush=True)
print("cutoff rows:  ", [round(r["ebno2_db_boundary"],3) for r in cuts], flush=True)
print(json.dumps(results, indent=1), flush=True)
print(f"TOTAL {time.time()-t_start:.0f}s", flush=True)
