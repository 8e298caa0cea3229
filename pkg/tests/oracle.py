"""Independent reference eigenvalues by finite differences.

A uniform-grid three-point discretization of -u'' + [l(l+1)/r^2 + v f] u
on (0, R] with Dirichlet ends, diagonalized with a tridiagonal eigensolver
and Richardson-extrapolated over two step sizes.  Shares no code with the
shooting solver.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal


def fd_eigenvalue(f, v, n=1, ell=0, R=30.0, N=20000):
    def level(N):
        h = R / N
        r = h * np.arange(1, N)
        diag = 2.0 / h**2 + ell * (ell + 1) / r**2 + v * f(r)
        off = np.full(N - 2, -1.0 / h**2)
        w = eigh_tridiagonal(diag, off, select="i", select_range=(n - 1, n - 1), eigvals_only=True)
        return w[0]

    e1, e2, e4 = level(N), level(2 * N), level(4 * N)
    # error ~ c1 h^2 + c2 h^3 (Coulomb cusp); eliminate both terms
    a = (4 * e2 - e1) / 3
    b = (4 * e4 - e2) / 3
    return (8 * b - a) / 7
