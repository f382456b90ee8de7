"""Numpy reference kernels for the explicit monotone update.

Each kernel advances ``u`` (interior values followed by one slot holding
the lateral datum) by ``nsteps`` explicit steps in place.  The arithmetic is
written term by term in the same order as the compiled kernels so that both
backends round identically.
"""

import numpy as np

BACKEND = "python"


def _diffs(u, nP, nM, cp, cm):
    u0 = u[:-1, None]
    return cp * (u[nP] - u0) + cm * (u[nM] - u0)


def _grad_norm(u, nP, nM, gp, gm, n, plus):
    u0 = u[:-1]
    sq = None
    for i in range(n):
        if plus:
            m = np.maximum(np.maximum(gp[:, i] * (u[nP[:, i]] - u0), gm[:, i] * (u[nM[:, i]] - u0)), 0.0)
        else:
            m = np.maximum(np.maximum(gp[:, i] * (u0 - u[nP[:, i]]), gm[:, i] * (u0 - u[nM[:, i]])), 0.0)
        sq = m * m if sq is None else sq + m * m
    return np.sqrt(sq)


def run_extremal(u, nsteps, nP, nM, cp, cm, gp, gm, frames, lam, Lam, a, b, plus, dt):
    n = gp.shape[1]
    for _ in range(nsteps):
        u0 = u[:-1]
        D = _diffs(u, nP, nM, cp, cm)
        G = np.where(D > 0, Lam * D, lam * D)
        best = None
        for f in range(frames.shape[0]):
            S = G[:, frames[f, 0]]
            for j in range(1, frames.shape[1]):
                S = S + G[:, frames[f, j]]
            if best is None:
                best = S
            elif plus:
                best = np.where(S > best, S, best)
            else:
                best = np.where(S < best, S, best)
        val = best
        if a != 0.0:
            g = _grad_norm(u, nP, nM, gp, gm, n, plus)
            val = val + a * g if plus else val - a * g
        if b != 0.0:
            val = val + b * np.abs(u0) if plus else val - b * np.abs(u0)
        u[:-1] = u0 + dt * val
    return u


def run_linear(u, nsteps, nP, nM, cp, cm, w, dt):
    L = cp.shape[1]
    for _ in range(nsteps):
        u0 = u[:-1]
        D = _diffs(u, nP, nM, cp, cm)
        val = w[:, 0] * D[:, 0]
        for l in range(1, L):
            val = val + w[:, l] * D[:, l]
        u[:-1] = u0 + dt * val
    return u


def run_plap(u, nsteps, nP, nM, cp, cm, span, E, partners, p, eps_g, h, dt):
    """Normalized p-Laplacian: frame aligned with the central-difference
    gradient, midpoint of the direction range below the gradient threshold."""
    N, L = cp.shape
    n = span.shape[1]
    idx = np.arange(N)
    for _ in range(nsteps):
        u0 = u[:-1]
        D = _diffs(u, nP, nM, cp, cm)
        gx = [(u[nP[:, i]] - u[nM[:, i]]) / span[:, i] for i in range(n)]
        g2 = gx[0] * gx[0]
        for i in range(1, n):
            g2 = g2 + gx[i] * gx[i]
        gnorm = np.sqrt(g2)
        score = np.empty((N, L))
        for l in range(L):
            s = gx[0] * E[l, 0]
            for i in range(1, n):
                s = s + gx[i] * E[l, i]
            score[:, l] = np.abs(s)
        lstar = np.argmax(score, axis=1)
        dmax = np.max(np.abs(D), axis=1)
        degen = gnorm <= eps_g * h * dmax
        if p >= 2.0:
            lap = D[:, 0]
            for i in range(1, n):
                lap = lap + D[:, i]
            dl = D[idx, lstar]
            mid = 0.5 * (np.min(D, axis=1) + np.max(D, axis=1))
            val = np.where(degen, lap + (p - 2.0) * mid, lap + (p - 2.0) * dl)
        else:
            V = np.empty((N, L))
            for l in range(L):
                v = (p - 1.0) * D[:, l]
                for j in range(partners.shape[1]):
                    v = v + D[:, partners[l, j]]
                V[:, l] = v
            mid = 0.5 * (np.min(V, axis=1) + np.max(V, axis=1))
            val = np.where(degen, mid, V[idx, lstar])
        u[:-1] = u0 + dt * val
    return u
