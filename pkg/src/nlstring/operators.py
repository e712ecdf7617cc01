"""Spatial discretisation: difference matrices and the sine modal basis.

The transverse grid has ``n`` subintervals of width ``h`` on [0, L]; the
two end values are pinned to zero and never stored, so displacement
vectors have length ``n - 1``.  First differences live on the ``n``
midpoints of the interleaved grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionTooSmall, TooManyModes


def build_fd_operators(n: int, h: float):
    """Backward/forward/second/fourth difference matrices for fixed ends.

    Returns CSR matrices (d_minus, d_plus, d2, d4) with shapes
    (n, n-1), (n-1, n), (n-1, n-1), (n-1, n-1).  d_plus is the exact
    negated transpose of d_minus, and d2 = d_plus @ d_minus,
    d4 = d2 @ d2, so the summation-by-parts identities hold to the bit.
    """
    if n < 3:
        raise DimensionTooSmall(f"need at least 3 subintervals, got {n}")
    if not h > 0.0:
        raise DimensionTooSmall(f"grid spacing must be positive, got {h}")
    inv_h = 1.0 / h
    ones = np.full(n - 1, inv_h)
    d_minus = sp.diags_array([ones, -ones], offsets=[0, -1],
                             shape=(n, n - 1), format="csr")
    d_plus = (-d_minus.T).tocsr()
    d2 = (d_plus @ d_minus).tocsr()
    d4 = (d2 @ d2).tocsr()
    return d_minus, d_plus, d2, d4


def build_modal_basis(n: int, h: float, L: float, n_modes: int,
                      variant: str = "discrete"):
    """Orthonormal sine basis restricted to the interior grid.

    Columns are sqrt(2h/L) sin(m nu h pi / L) for nu = 1..n_modes; the
    diagonal eigenvalue vector is either the exact discrete spectrum of
    -d2, (4/h^2) sin^2(nu pi h / 2L), or the continuous limit
    (nu pi / L)^2.  The discrete choice makes basis.T @ d2 @ basis equal
    to -diag(eigenvalues) to machine precision, which the energy
    identities rely on.
    """
    if n_modes < 1 or n_modes > n - 1:
        raise TooManyModes(
            f"n_modes must lie in [1, {n - 1}] for an {n}-interval grid, got {n_modes}")
    m = np.arange(1, n)[:, None]
    nu = np.arange(1, n_modes + 1)[None, :]
    basis = np.sqrt(2.0 * h / L) * np.sin(m * nu * (np.pi * h / L))
    nu1 = np.arange(1, n_modes + 1, dtype=float)
    if variant == "discrete":
        eigvals = (2.0 / h * np.sin(nu1 * (np.pi * h / (2.0 * L)))) ** 2
    elif variant == "continuous":
        eigvals = (nu1 * np.pi / L) ** 2
    else:
        raise ValueError(f"unknown eigenvalue variant {variant!r}")
    return basis, eigvals


@dataclass
class SpatialOperators:
    """Bundle of the grid geometry, difference matrices and modal basis."""

    n: int                    # number of subintervals
    h: float                  # grid spacing, m
    L: float                  # domain length, m
    n_modes: int              # number of longitudinal modes
    d_minus: sp.csr_matrix    # (n, n-1)
    d_plus: sp.csr_matrix     # (n-1, n)
    d2: sp.csr_matrix         # (n-1, n-1)
    d4: sp.csr_matrix         # (n-1, n-1)
    basis: np.ndarray         # (n-1, n_modes), orthonormal sine columns
    eigvals: np.ndarray       # (n_modes,), 1/m^2
    dz: np.ndarray            # d_minus @ basis, (n, n_modes), dense

    @property
    def interior_x(self) -> np.ndarray:
        """Abscissae of the stored grid points, m."""
        return self.h * np.arange(1, self.n)

    # Slice-based appliers; algebraically identical to the matrices but
    # without the sparse dispatch overhead, for the per-step hot path.

    def apply_dminus(self, x: np.ndarray) -> np.ndarray:
        inv_h = 1.0 / self.h
        out = np.empty(self.n)
        out[0] = x[0] * inv_h
        np.subtract(x[1:], x[:-1], out=out[1:-1])
        out[1:-1] *= inv_h
        out[-1] = -x[-1] * inv_h
        return out

    def apply_dplus(self, y: np.ndarray) -> np.ndarray:
        return (y[1:] - y[:-1]) * (1.0 / self.h)

    def apply_d2(self, x: np.ndarray) -> np.ndarray:
        inv_h2 = 1.0 / (self.h * self.h)
        out = np.empty(self.n - 1)
        out[0] = x[1] - 2.0 * x[0]
        np.add(x[:-2], x[2:], out=out[1:-1])
        out[1:-1] -= 2.0 * x[1:-1]
        out[-1] = x[-2] - 2.0 * x[-1]
        out *= inv_h2
        return out

    def apply_d4(self, x: np.ndarray) -> np.ndarray:
        return self.apply_d2(self.apply_d2(x))

    @classmethod
    def build(cls, n: int, L: float, n_modes: int,
              variant: str = "discrete") -> "SpatialOperators":
        h = L / n
        d_minus, d_plus, d2, d4 = build_fd_operators(n, h)
        basis, eigvals = build_modal_basis(n, h, L, n_modes, variant)
        dz = np.asarray(d_minus @ basis)
        return cls(n=n, h=h, L=L, n_modes=n_modes, d_minus=d_minus,
                   d_plus=d_plus, d2=d2, d4=d4, basis=basis,
                   eigvals=eigvals, dz=dz)
