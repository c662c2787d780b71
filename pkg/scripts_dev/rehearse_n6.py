"""Dev rehearsal: N=6 TFIM steady state vs ED at the hardest coupling."""
import sys
import time

import numpy as np

from ghdo import oracle, tdvp
from ghdo.lindblad import build_tfim
from ghdo.models import NetworkAghdo
from ghdo.network import NetworkSpec, param_count

g = float(sys.argv[1]) if len(sys.argv) > 1 else 2.0
feats = tuple(int(x) for x in (sys.argv[2].split(",") if len(sys.argv) > 2 else (4, 2)))
rank = int(sys.argv[3]) if len(sys.argv) > 3 else 4

lind = build_tfim(6, 2.0, g, 1.0, periodic=True)
t0 = time.time()
rho_ed = oracle.steady_state_dense(lind)
ed_mag = oracle.dense_magnetizations(rho_ed, 6)
ed_s2 = oracle.dense_renyi2(rho_ed)
print(f"ED: {time.time()-t0:.0f}s mags={ed_mag} S2={ed_s2:.4f}", flush=True)

spec = NetworkSpec(sites=6, local_rank=rank, feature_densities=feats, init_width=0.02, seed=5)
model = NetworkAghdo.random(spec)
print(f"net d={param_count(spec)}", flush=True)
rng = np.random.default_rng(123)

phases = [
    dict(dt=2e-2, regularization=2e-3, samples_per_step=256, max_steps=900, cg_max_iters=100),
    dict(dt=1e-2, regularization=1e-3, samples_per_step=1024, max_steps=300, cg_max_iters=150),
]
for ph in phases:
    cfg = tdvp.TdvpConfig(alpha=0.5, cg_tol=1e-4, convergence_window=10**6,
                          convergence_tol=1e-9, **ph)
    t0 = time.time()
    res = tdvp.run_to_steady_state(model, lind, cfg, rng)
    model = res.model
    rho_var = oracle.dense_from_model(model)
    mag = oracle.dense_magnetizations(rho_var, 6)
    s2 = oracle.dense_renyi2(rho_var)
    dev = {k: abs(mag[k] - ed_mag[k]) for k in mag}
    print(f"phase n={ph['samples_per_step']}: {time.time()-t0:.0f}s "
          f"mags={ {k: round(v,4) for k,v in mag.items()} } S2={s2:.4f} "
          f"dev={ {k: round(v,4) for k,v in dev.items()} } dS2={abs(s2-ed_s2):.4f}", flush=True)
