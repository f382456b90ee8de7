# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of ``_kernels_py``: same signatures, same operation order."""

from libc.math cimport sqrt, fabs
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

BACKEND = "cython"

cdef enum:
    MAXL = 32


cdef inline double _dmax(double x, double y) nogil:
    return x if x > y else y


def run_extremal(double[::1] u, Py_ssize_t nsteps, const int[:, ::1] nP, const int[:, ::1] nM,
                 const double[:, ::1] cp, const double[:, ::1] cm,
                 const double[:, ::1] gp, const double[:, ::1] gm, const int[:, ::1] frames,
                 double lam, double Lam, double a, double b, bint plus, double dt):
    cdef Py_ssize_t N = cp.shape[0], L = cp.shape[1], n = gp.shape[1]
    cdef Py_ssize_t F = frames.shape[0], m = frames.shape[1]
    cdef Py_ssize_t i, l, f, j, k, step
    cdef double u0, S, best, val, x, y, mm, sq
    cdef double D[MAXL]
    cdef double G[MAXL]
    if L > MAXL:
        raise ValueError("too many stencil lines")
    cdef double* cur = &u[0]
    cdef double* nxt = <double*> malloc((N + 1) * sizeof(double))
    cdef double* tmp
    if nxt == NULL:
        raise MemoryError()
    nxt[N] = cur[N]
    with nogil:
        for step in range(nsteps):
            for i in range(N):
                u0 = cur[i]
                for l in range(L):
                    D[l] = cp[i, l] * (cur[nP[i, l]] - u0) + cm[i, l] * (cur[nM[i, l]] - u0)
                    G[l] = Lam * D[l] if D[l] > 0 else lam * D[l]
                for f in range(F):
                    S = G[frames[f, 0]]
                    for j in range(1, m):
                        S = S + G[frames[f, j]]
                    if f == 0:
                        best = S
                    elif plus:
                        if S > best:
                            best = S
                    else:
                        if S < best:
                            best = S
                val = best
                if a != 0.0:
                    sq = 0.0
                    for k in range(n):
                        if plus:
                            x = gp[i, k] * (cur[nP[i, k]] - u0)
                            y = gm[i, k] * (cur[nM[i, k]] - u0)
                        else:
                            x = gp[i, k] * (u0 - cur[nP[i, k]])
                            y = gm[i, k] * (u0 - cur[nM[i, k]])
                        mm = _dmax(_dmax(x, y), 0.0)
                        if k == 0:
                            sq = mm * mm
                        else:
                            sq = sq + mm * mm
                    if plus:
                        val = val + a * sqrt(sq)
                    else:
                        val = val - a * sqrt(sq)
                if b != 0.0:
                    if plus:
                        val = val + b * fabs(u0)
                    else:
                        val = val - b * fabs(u0)
                nxt[i] = u0 + dt * val
            tmp = cur
            cur = nxt
            nxt = tmp
    if cur != &u[0]:
        memcpy(&u[0], cur, N * sizeof(double))
        free(cur)
    else:
        free(nxt)
    return u.base


def run_linear(double[::1] u, Py_ssize_t nsteps, const int[:, ::1] nP, const int[:, ::1] nM,
               const double[:, ::1] cp, const double[:, ::1] cm, const double[:, ::1] w, double dt):
    cdef Py_ssize_t N = cp.shape[0], L = cp.shape[1]
    cdef Py_ssize_t i, l, step
    cdef double u0, val, Dl
    cdef double* cur = &u[0]
    cdef double* nxt = <double*> malloc((N + 1) * sizeof(double))
    cdef double* tmp
    if nxt == NULL:
        raise MemoryError()
    nxt[N] = cur[N]
    with nogil:
        for step in range(nsteps):
            for i in range(N):
                u0 = cur[i]
                Dl = cp[i, 0] * (cur[nP[i, 0]] - u0) + cm[i, 0] * (cur[nM[i, 0]] - u0)
                val = w[i, 0] * Dl
                for l in range(1, L):
                    Dl = cp[i, l] * (cur[nP[i, l]] - u0) + cm[i, l] * (cur[nM[i, l]] - u0)
                    val = val + w[i, l] * Dl
                nxt[i] = u0 + dt * val
            tmp = cur
            cur = nxt
            nxt = tmp
    if cur != &u[0]:
        memcpy(&u[0], cur, N * sizeof(double))
        free(cur)
    else:
        free(nxt)
    return u.base


def run_plap(double[::1] u, Py_ssize_t nsteps, const int[:, ::1] nP, const int[:, ::1] nM,
             const double[:, ::1] cp, const double[:, ::1] cm, const double[:, ::1] span,
             const double[:, ::1] E, const int[:, ::1] partners, double p, double eps_g,
             double h, double dt):
    cdef Py_ssize_t N = cp.shape[0], L = cp.shape[1], n = span.shape[1]
    cdef Py_ssize_t npart = partners.shape[1]
    cdef Py_ssize_t i, l, k, j, step, lstar
    cdef double u0, val, s, g2, gnorm, dmax, best, lap, dmin_, dmax_, v, vmin, vmax
    cdef double D[MAXL]
    cdef double gx[3]
    cdef bint degen
    if L > MAXL:
        raise ValueError("too many stencil lines")
    cdef double* cur = &u[0]
    cdef double* nxt = <double*> malloc((N + 1) * sizeof(double))
    cdef double* tmp
    if nxt == NULL:
        raise MemoryError()
    nxt[N] = cur[N]
    with nogil:
        for step in range(nsteps):
            for i in range(N):
                u0 = cur[i]
                for l in range(L):
                    D[l] = cp[i, l] * (cur[nP[i, l]] - u0) + cm[i, l] * (cur[nM[i, l]] - u0)
                for k in range(n):
                    gx[k] = (cur[nP[i, k]] - cur[nM[i, k]]) / span[i, k]
                g2 = gx[0] * gx[0]
                for k in range(1, n):
                    g2 = g2 + gx[k] * gx[k]
                gnorm = sqrt(g2)
                lstar = 0
                best = -1.0
                for l in range(L):
                    s = gx[0] * E[l, 0]
                    for k in range(1, n):
                        s = s + gx[k] * E[l, k]
                    s = fabs(s)
                    if s > best:
                        best = s
                        lstar = l
                dmax = fabs(D[0])
                for l in range(1, L):
                    if fabs(D[l]) > dmax:
                        dmax = fabs(D[l])
                degen = gnorm <= eps_g * h * dmax
                if p >= 2.0:
                    lap = D[0]
                    for k in range(1, n):
                        lap = lap + D[k]
                    if degen:
                        dmin_ = D[0]
                        dmax_ = D[0]
                        for l in range(1, L):
                            if D[l] < dmin_:
                                dmin_ = D[l]
                            if D[l] > dmax_:
                                dmax_ = D[l]
                        val = lap + (p - 2.0) * (0.5 * (dmin_ + dmax_))
                    else:
                        val = lap + (p - 2.0) * D[lstar]
                else:
                    if degen:
                        for l in range(L):
                            v = (p - 1.0) * D[l]
                            for j in range(npart):
                                v = v + D[partners[l, j]]
                            if l == 0:
                                vmin = v
                                vmax = v
                            else:
                                if v < vmin:
                                    vmin = v
                                if v > vmax:
                                    vmax = v
                        val = 0.5 * (vmin + vmax)
                    else:
                        val = (p - 1.0) * D[lstar]
                        for j in range(npart):
                            val = val + D[partners[lstar, j]]
                nxt[i] = u0 + dt * val
            tmp = cur
            cur = nxt
            nxt = tmp
    if cur != &u[0]:
        memcpy(&u[0], cur, N * sizeof(double))
        free(cur)
    else:
        free(nxt)
    return u.base
