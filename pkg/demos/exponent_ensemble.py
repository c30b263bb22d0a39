"""Displacement and return exponents on a small ensemble of traces."""
import numpy as np

from isewalk.models import ModelSpec, sample_graph
from isewalk.parallel import replica_seeds
from isewalk.walks import exponent_stats, log_checkpoints, walk_curves

cps = log_checkpoints(10, 20_000, 12)
ret_cps = log_checkpoints(10, 2000, 10)
curves = []
for ss in replica_seeds(11, 20):
    rng = np.random.default_rng(ss)
    g = sample_graph(ModelSpec("brw_trace", 20_000, d=14), rng)
    curves.append(walk_curves(g, cps, 20, rng))
    curves.append(walk_curves(g, ret_cps, 100, rng, returns=True))

fits = exponent_stats(curves, window=(100, 20_000))
for name, fit in fits.items():
    print(f"{name:16s} {fit.slope:+.3f}  95% CI [{fit.ci_low:+.3f}, {fit.ci_high:+.3f}]")
print("targets: intrinsic 1/3, euclidean 1/6, return -2/3 (small n, expect bias)")
