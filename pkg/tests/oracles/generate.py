"""Regenerate frozen.json from routes independent of the package code.

Run from the repository root:  python tests/oracles/generate.py
Closed forms use mpmath at 40 digits; the plug-in pilot uses plain numpy
and scipy's assignment solver.  Nothing here imports smoothwass.
"""

import json
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

mp.mp.dps = 40


def quantile_w1(scale_a, scale_b):
    # W1 between centered normals through the quantile coupling
    f = lambda u: abs((scale_a - scale_b) * mp.sqrt(2) * mp.erfinv(2 * u - 1))
    return mp.quad(f, [0, 0.5, 1])


def lattice_sum_1d():
    total = mp.mpf(0)
    for k in range(-60, 60):
        p = mp.ncdf(k + 1) - mp.ncdf(k)
        total += max(abs(k), abs(k + 1)) * mp.sqrt(p)
    return total


def lattice_sum_2d():
    probs = {k: mp.ncdf(k + 1) - mp.ncdf(k) for k in range(-16, 16)}
    total = mp.mpf(0)
    for i in range(-16, 16):
        for j in range(-16, 16):
            m = mp.sqrt(max(abs(i), abs(i + 1)) ** 2 + max(abs(j), abs(j + 1)) ** 2)
            total += m * mp.sqrt(probs[i] * probs[j])
    return total


def abs_convolution(x, sigma):
    # E|x + sigma Z| by direct quadrature against the Gaussian density
    dens = lambda y: abs(y) * mp.npdf(y, x, sigma)
    return mp.quad(dens, [-mp.inf, 0, mp.inf])


def uniform_smoothed_cdf(x, sigma):
    return mp.quad(lambda y: mp.ncdf((x - y) / sigma), [0, 1])


def plugin_self_distance(m=500, d=2, sigma=1.0, runs=40):
    # two smoothed samples of N(0, I) are N(0, (1 + sigma^2) I) samples
    gen = np.random.default_rng(20240101)
    scale = np.sqrt(1 + sigma ** 2)
    out = []
    for _ in range(runs):
        C = cdist(gen.normal(scale=scale, size=(m, d)), gen.normal(scale=scale, size=(m, d)))
        r, c = linear_sum_assignment(C)
        out.append(C[r, c].mean())
    return {"mean": float(np.mean(out)), "sd": float(np.std(out, ddof=1)), "max": float(np.max(out))}


values = {
    "plugin_self_distance_d2_m500": plugin_self_distance(),
    "w1_delta0_vs_gaussian": float(quantile_w1(mp.sqrt(2), 1)),
    "donsker_gaussian_d1": float(lattice_sum_1d()),
    "donsker_gaussian_d2_sigma1": float(lattice_sum_2d()),
    "abs_conv_x0_sigma1": float(abs_convolution(0, 1)),
    "abs_conv_x1p5_sigma0p5": float(abs_convolution(mp.mpf("1.5"), mp.mpf("0.5"))),
    "uniform_cdf_sigma0p3": {str(x): float(uniform_smoothed_cdf(mp.mpf(x), mp.mpf("0.3"))) for x in ("-0.5", "0.2", "0.5", "1.3")},
    "normal_cdf_at_1": float(mp.ncdf(1)),
    "mixture_mean": 0.5,
}

Path(__file__).with_name("frozen.json").write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
print(json.dumps(values, indent=2))
