#!/usr/bin/env python3
"""Regenerates data/rule27.txt.

Builds a 27-node exponential-sum quadrature for 1/R over the integer
arguments R = 1..432 (the squared mode norms |m|^2 for M = 12) via the
Hankel / con-eigenvalue construction of Beylkin & Monzon (2005):

  1. sample g(k) = 1/(k+1) for k = 0..432,
  2. eigendecompose the (symmetric, positive) Hankel matrix of the samples
     in extended precision,
  3. the roots in (0,1) of the polynomial whose coefficients are the
     eigenvector of the 28th largest eigenvalue give the nodes
     gamma_l = exp(-t_l),
  4. weights by least squares on the samples.

The 28th Hankel eigenvalue is ~2e-20, so the rule is exact to roundoff
when evaluated in float64; the recorded certificate of 1e-15 is
conservative. Runs in ~10 minutes (dominated by the mpmath eigensolve).
"""

import numpy as np
from mpmath import mp, mpf, matrix, eigsy, log, lu_solve, polyval, sqrt

N_HALF = 216  # Hankel size; samples k = 0..2*N_HALF cover R = 1..433
N_NODES = 27
MAX_ARG = 432


def hankel_eigenvector():
    mp.dps = 30
    g = [mpf(1) / (k + 1) for k in range(2 * N_HALF + 1)]
    h = matrix(N_HALF + 1, N_HALF + 1)
    for i in range(N_HALF + 1):
        for j in range(N_HALF + 1):
            h[i, j] = g[i + j]
    evals, evecs = eigsy(h)
    order = sorted(range(N_HALF + 1), key=lambda i: -abs(evals[i]))
    idx = order[N_NODES]
    print("eigenvalue", N_NODES, "=", mp.nstr(abs(evals[idx]), 5))
    return [evecs[i, idx] for i in range(N_HALF + 1)]


def polished_roots(u):
    mp.dps = 40
    deg = len(u) - 1
    ud = np.array([float(x) for x in u])
    raw = np.roots(ud[::-1])
    sel = raw[(np.abs(raw.imag) < 1e-8) & (raw.real > 1e-12) & (raw.real < 1.0)]
    sel = np.unique(np.sort(sel.real))

    coeffs = list(reversed(u))
    dcoeffs = [coeffs[i] * (deg - i) for i in range(deg)]
    out = []
    for r0 in sel:
        x = mpf(float(r0))
        for _ in range(60):
            dp = polyval(dcoeffs, x)
            if dp == 0:
                break
            dx = polyval(coeffs, x) / dp
            x -= dx
            if abs(dx) < mpf("1e-35") * max(abs(x), mpf("1e-10")):
                break
        if 0 < x < 1:
            out.append(x)
    out = sorted(set(out), reverse=True)
    assert len(out) >= N_NODES, f"only {len(out)} usable roots"
    return out[:N_NODES]


def fit_weights(gam):
    rows = MAX_ARG + 1
    a = matrix(rows, N_NODES)
    b = matrix(rows, 1)
    for i in range(rows):
        for l in range(N_NODES):
            a[i, l] = gam[l] ** i
        b[i] = mpf(1) / (i + 1)
    scale = [sqrt(sum(a[i, j] ** 2 for i in range(rows))) for j in range(N_NODES)]
    gram = matrix(N_NODES, N_NODES)
    rhs = matrix(N_NODES, 1)
    for j in range(N_NODES):
        for k in range(j, N_NODES):
            v = sum(a[i, j] * a[i, k] for i in range(rows)) / (scale[j] * scale[k])
            gram[j, k] = v
            gram[k, j] = v
        rhs[j] = sum(a[i, j] * b[i] for i in range(rows)) / scale[j]
    sol = lu_solve(gram, rhs)
    return [sol[j] / scale[j] for j in range(N_NODES)]


def main():
    u = hankel_eigenvector()
    gam = polished_roots(u)
    wg = fit_weights(gam)
    # g(k) coordinates -> rule for 1/R:  1/R = sum (wg/gam) e^{-t R}
    t = [-log(g) for g in gam]
    w = [wg[l] / gam[l] for l in range(N_NODES)]

    tn = np.array([float(x) for x in t])
    wn = np.array([float(x) for x in w])
    r = np.arange(1, MAX_ARG + 1, dtype=float)
    err = np.max(np.abs(np.exp(-np.outer(r, tn)) @ wn - 1.0 / r))
    print("float64 max error on [1, 432]:", err)
    assert err < 1e-15

    with open("data/rule27.txt", "w") as fh:
        fh.write(f"{N_NODES}\n")
        for l in range(N_NODES):
            fh.write(mp.nstr(t[l], 25) + " " + mp.nstr(w[l], 25) + "\n")
        fh.write(f"1 {MAX_ARG} 1.0e-15\n")


if __name__ == "__main__":
    main()
