#!/usr/bin/env python
# Lyapunov spectrum, dominated splitting and the graph transform on the cat map
# and on a small nonlinear perturbation of it.
import numpy as np

from pesinlab import cat_map, perturbed_cat
from pesinlab.cocycle import lyapunov_spectrum_qr
from pesinlab.domination import dichotomy_classify, domination_ratio, eigensplitting, oseledec_provider
from pesinlab.graphs import bowen_radius_along, linear_graph, propagate_along_bowen

x = np.array([0.2, 0.3])
log_lam = np.log((3 + np.sqrt(5)) / 2)

# QR spectrum against the closed form
spectrum = lyapunov_spectrum_qr(cat_map(), x, 2000)
print("cat exponents", spectrum.exponents, "closed form", (log_lam, -log_lam))

# the eigensplitting is 1-dominated with ratio lambda^-2
sp = eigensplitting(cat_map(), 1, x)
rep = domination_ratio(cat_map(), x, sp, 1, 50)
print("N =", rep.N, "worst ratio", rep.worst_ratio)

# a graph of slope 0.3 over the unstable direction flattens by that ratio each step
r = bowen_radius_along(cat_map(), x, sp, 0.3, 10, 0.05)
trace = propagate_along_bowen(cat_map(), x, 10, 0.05, linear_graph(x, sp, 0.3, r)).trace
for k, disp in enumerate(trace):
    print(f"step {k:2d}  dispersion {disp:.3e}")

# same story for the perturbation, with a finite-time Oseledec splitting
f = perturbed_cat(0.05)
print("perturbed exponents", lyapunov_spectrum_qr(f, x, 2000).exponents)
print("perturbed ratio", domination_ratio(f, x, oseledec_provider(f, 1), 1, 10).worst_ratio)
print("dichotomy:", dichotomy_classify(f, x))
