"""Compiled right-hand side of the master equation.

States are stored as arrays shaped (batch, q, M, q*M): ``q`` qubit levels,
``M`` Fock levels. The Hamiltonian is Q0 (x) 1 + Qa (x) a + Qad (x) a^dagger
and heating is g (D[a] + D[a^dagger]).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def master_rhs(x, q0, qa, qad, s, gamma, dsum, out):
    """Write -i[H, rho] + g (D[a] + D[a^dagger]) rho into ``out``.

    ``s[m] = sqrt(m + 1)`` with ``s[M-1] = 0``; ``dsum`` holds
    (d_m + d_n) / 2 with d = diag(a^dagger a + a a^dagger).
    """
    nb, q, nm, nc = x.shape
    hr = np.zeros_like(x)
    for b in range(nb):
        for i in range(q):
            for k in range(q):
                c0 = q0[i, k]
                ca = qa[i, k]
                cd = qad[i, k]
                for m in range(nm):
                    row = hr[b, i, m]
                    src = x[b, k, m]
                    if c0 != 0:
                        for c in range(nc):
                            row[c] += c0 * src[c]
                    if m < nm - 1 and ca != 0:
                        f = ca * s[m]
                        src = x[b, k, m + 1]
                        for c in range(nc):
                            row[c] += f * src[c]
                    if m > 0 and cd != 0:
                        f = cd * s[m - 1]
                        src = x[b, k, m - 1]
                        for c in range(nc):
                            row[c] += f * src[c]
    for b in range(nb):
        # -i (H rho - rho H) with rho H = (H rho)^dagger for Hermitian rho
        for i in range(q):
            for m in range(nm):
                r = i * nm + m
                for j in range(q):
                    for n in range(nm):
                        c = j * nm + n
                        v = hr[b, i, m, c] - np.conj(hr[b, j, n, r])
                        out[b, i, m, c] = complex(v.imag, -v.real)
        if gamma != 0.0:
            for i in range(q):
                for m in range(nm):
                    for j in range(q):
                        for n in range(nm):
                            c = j * nm + n
                            d = -dsum[m, n] * x[b, i, m, c]
                            if m < nm - 1 and n < nm - 1:
                                d += s[m] * s[n] * x[b, i, m + 1, c + 1]
                            if m > 0 and n > 0:
                                d += s[m - 1] * s[n - 1] * x[b, i, m - 1, c - 1]
                            out[b, i, m, c] += gamma * d
