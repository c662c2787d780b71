"""Dev diagnostic: directly fit architectures to the N=6 ED steady state.

Measures the expressiveness ceiling of each architecture independent of the
TDVP dynamics, by minimizing the elementwise L2 distance to the exact state
with Adam on the real parameter vector.
"""
import sys
import time

import numpy as np

from ghdo import oracle
from ghdo.lindblad import build_tfim
from ghdo.models import NetworkAghdo
from ghdo.network import NetworkSpec, param_count
from ghdo.spins import all_configs

g = float(sys.argv[1]) if len(sys.argv) > 1 else 2.0
lind = build_tfim(6, 2.0, g, 1.0, periodic=True)
rho_ed = oracle.steady_state_dense(lind)
ed_mag = oracle.dense_magnetizations(rho_ed, 6)
ed_s2 = oracle.dense_renyi2(rho_ed)
print(f"ED mags={ed_mag} S2={ed_s2:.4f}", flush=True)

cfg = all_configs(6)
sigma = np.repeat(cfg, 64, axis=0)
eta = np.tile(cfg, (64, 1))
rho_ed_flat = rho_ed.reshape(-1)

CHUNK = 1024

def loss_grad(model):
    d = model.n_params
    grad = np.zeros(d)
    loss = 0.0
    for lo in range(0, 4096, CHUNK):
        hi = lo + CHUNK
        lr, O = model.log_rho_with_grad(sigma[lo:hi], eta[lo:hi])
        rho = np.exp(lr)
        delta = rho - rho_ed_flat[lo:hi]
        loss += float(np.sum(np.abs(delta) ** 2))
        grad += 2.0 * np.real((delta.conj() * rho) @ O)
    return loss, grad

for feats, R, iters in [((4, 2), 4, 300), ((6, 3), 6, 300), ((8, 4), 8, 250)]:
    spec = NetworkSpec(sites=6, local_rank=R, feature_densities=feats, init_width=0.02, seed=5)
    model = NetworkAghdo.random(spec)
    print(f"\narch feats={feats} R={R} d={param_count(spec)}", flush=True)
    m = np.zeros(model.n_params)
    v = np.zeros(model.n_params)
    lr0, b1, b2, eps = 5e-3, 0.9, 0.999, 1e-8
    t0 = time.time()
    for it in range(1, iters + 1):
        loss, gr = loss_grad(model)
        m = b1 * m + (1 - b1) * gr
        v = b2 * v + (1 - b2) * gr**2
        mh = m / (1 - b1**it)
        vh = v / (1 - b2**it)
        model = model.with_params(model.params - lr0 * mh / (np.sqrt(vh) + eps))
        if it % 50 == 0 or it == iters:
            rho = oracle.dense_from_model(model)
            mag = oracle.dense_magnetizations(rho, 6)
            dev = {k: abs(mag[k] - ed_mag[k]) for k in mag}
            s2 = oracle.dense_renyi2(rho)
            print(f"  it {it:4d} loss={loss:.3e} dev={ {k: round(x,4) for k,x in dev.items()} } "
                  f"dS2={abs(s2-ed_s2):.4f} ({(time.time()-t0)/it:.2f}s/it)", flush=True)
