"""Order verification: the quadratised cubic oscillator against its
elliptic-function solution, and the eigenfrequencies of the linear
theta scheme along the stability-limit path.
"""
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nlstring import validate_and_derive
from nlstring.reference import (duffing_analytic, duffing_ieq_run,
                                eigenfrequency_convergence, fit_loglog_slope)

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))

# scalar oscillator, error at t = 0.4 s over halvings of the step
markers = {0.6: "+", 0.8: "o", 1.0: "."}
for gamma, mk in markers.items():
    ks = 0.01 / 2.0 ** np.arange(7)
    qs = []
    for k in ks:
        n_e = int(round(0.4 / k))
        u, _ = duffing_ieq_run(3.7, gamma, k, 0.4)
        qs.append(abs(duffing_analytic(n_e * k, 3.7, gamma) - u[n_e]))
    slope = fit_loglog_slope(ks, qs)
    ax1.loglog(ks, qs, mk, color="k", label=f"gamma={gamma} (slope {slope:.2f})")
    print(f"oscillator gamma={gamma}: slope {slope:.3f}")
ref = np.array([1e-2, 1e-4])
ax1.loglog(ref, 0.5 * (ref / ref[0]) ** 2 * 0.3, "k--", lw=0.8)
ax1.set_xlabel("time step k (s)")
ax1.set_ylabel("|error| at t = 0.4 s")
ax1.legend(fontsize=8)

# string eigenfrequencies along the stability-limit path
prm = validate_and_derive(rho=8000, E=2e11, T0=50, L=1.0, r=0.2e-3)
n_list = [3200, 6400, 12800, 25600]
for theta, ls in ((0.6, "-"), (0.8, "--"), (1.0, ":")):
    s, errs = eigenfrequency_convergence(prm, theta, n_list)
    for m in range(4):
        ax2.loglog(s, errs[:, m], ls, color="k", lw=0.7)
    slopes = [fit_loglog_slope(s, errs[:, m]) for m in range(4)]
    print(f"theta_u={theta}: eigenfrequency slopes",
          " ".join(f"{x:.3f}" for x in slopes))
ax2.set_xlabel("path arclength s (m)")
ax2.set_ylabel("|1 - w/W| for modes 1..4")
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "convergence.png"), dpi=140)
print("figure written to", out_dir)
