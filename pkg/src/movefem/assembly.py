"""Dissipation-matrix assembly and the banded symmetric solve.

The dissipation quadratic form in the rates of the interior values and node
positions has the 2x2 block structure

    M = [[A, B], [B, C + delta*I]]

where A is the standard piecewise-linear mass matrix, B couples value rates
to node rates, and C weights node rates; all three are symmetric tridiagonal.
For delta > 0 the full matrix is positive definite for every valid state, so
it can be factorized without pivoting.  The solver stores M under the
interleaved unknown ordering (u_1, x_1, u_2, x_2, ...), which has
half-bandwidth 3 instead of the block layout's bandwidth of order N, and
solves with a banded Cholesky factorization in O(N).

A is assembled from closed forms; B and C use the exact 3-point Gauss rule
per element (their integrands are quadratic), cross-checked in the tests by
the quadratic-form identity against direct quadrature of the dissipation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .energy import SimState, _check_gaps
from .exceptions import NotPositiveDefiniteError
from .mesh import Partition

_Q3 = np.array([0.5 - math.sqrt(15.0) / 10.0, 0.5, 0.5 + math.sqrt(15.0) / 10.0])
_W3 = np.array([5.0, 8.0, 5.0]) / 18.0

# Per-element integrals of hat products under the 3-point rule (computed from
# the rule itself; numerically identical to the closed forms 1/3, 1/6, 1/3).
_I_DD = float(np.sum(_W3 * (1.0 - _Q3) ** 2))
_I_DA = float(np.sum(_W3 * _Q3 * (1.0 - _Q3)))
_I_AA = float(np.sum(_W3 * _Q3**2))


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix stored as main and super diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        if self.off.size != max(self.diag.size - 1, 0):
            raise ValueError("off-diagonal length must be len(diag) - 1")

    @property
    def n(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        if self.off.size:
            m += np.diag(self.off, 1) + np.diag(self.off, -1)
        return m

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        if self.off.size:
            out[:-1] += self.off * v[1:]
            out[1:] += self.off * v[:-1]
        return out


@dataclass(frozen=True)
class BlockSystem:
    """The three tridiagonal blocks plus the ridge parameter."""

    A: Tridiagonal
    B: Tridiagonal
    C: Tridiagonal
    delta: float

    def to_dense(self) -> np.ndarray:
        n = self.A.n
        m = np.zeros((2 * n, 2 * n))
        m[:n, :n] = self.A.to_dense()
        m[:n, n:] = self.B.to_dense()
        m[n:, :n] = self.B.to_dense()
        m[n:, n:] = self.C.to_dense() + self.delta * np.eye(n)
        return m

    def quadratic_form(self, y_values: np.ndarray, y_positions: np.ndarray) -> float:
        """y^T M_delta y for the block-ordered vector (y_values; y_positions)."""
        return float(
            y_values @ self.A.matvec(y_values)
            + 2.0 * y_values @ self.B.matvec(y_positions)
            + y_positions @ self.C.matvec(y_positions)
            + self.delta * y_positions @ y_positions
        )


@dataclass(frozen=True)
class BandedMatrix:
    """Symmetric banded matrix in upper band storage.

    ``bands[bandwidth + i - j, j]`` holds entry (i, j) for
    j - bandwidth <= i <= j; here the unknowns are interleaved
    (u_1, x_1, u_2, x_2, ...) giving half-bandwidth 3.
    """

    order: int
    bandwidth: int
    bands: np.ndarray

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.order, self.order))
        for d in range(self.bandwidth + 1):
            vals = self.bands[self.bandwidth - d, d:]
            m += np.diag(vals, d)
            if d:
                m += np.diag(vals, -d)
        return m


def mass_matrix(partition: Partition) -> Tridiagonal:
    """Mass matrix of the interior hat functions (closed form).

    Diagonal entries are (h_left + h_right)/3 per node, off-diagonal
    entries h_shared/6.
    """
    h = _check_gaps(partition.nodes)
    return Tridiagonal(diag=(h[:-1] + h[1:]) / 3.0, off=h[1:-1] / 6.0)


def _bc_arrays(x: np.ndarray, u: np.ndarray):
    h = _check_gaps(x)
    s = np.diff(u) / h
    b_diag = -(s[:-1] * h[:-1] * _I_AA + s[1:] * h[1:] * _I_DD)
    b_off = -s[1:-1] * h[1:-1] * _I_DA
    c_diag = s[:-1] ** 2 * h[:-1] * _I_AA + s[1:] ** 2 * h[1:] * _I_DD
    c_off = s[1:-1] ** 2 * h[1:-1] * _I_DA
    return b_diag, b_off, c_diag, c_off


def coupling_matrix(state: SimState) -> Tridiagonal:
    """Block B: pairings of hat functions with node-position sensitivities."""
    b_diag, b_off, _, _ = _bc_arrays(state.fn.partition.nodes, state.fn.values)
    return Tridiagonal(diag=b_diag, off=b_off)


def position_matrix(state: SimState) -> Tridiagonal:
    """Block C: pairings of node-position sensitivities with themselves."""
    _, _, c_diag, c_off = _bc_arrays(state.fn.partition.nodes, state.fn.values)
    return Tridiagonal(diag=c_diag, off=c_off)


def block_system(state: SimState, delta: float) -> BlockSystem:
    """Assemble all three blocks for the given state."""
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    return BlockSystem(
        A=mass_matrix(state.fn.partition),
        B=coupling_matrix(state),
        C=position_matrix(state),
        delta=delta,
    )


def _assemble_bands(x: np.ndarray, u: np.ndarray, delta: float) -> np.ndarray:
    """Interleaved upper-band storage of M_delta from raw arrays."""
    h = _check_gaps(x)
    a_diag = (h[:-1] + h[1:]) / 3.0
    a_off = h[1:-1] / 6.0
    b_diag, b_off, c_diag, c_off = _bc_arrays(x, u)
    n = 2 * a_diag.size
    bands = np.zeros((4, n))
    bands[3, 0::2] = a_diag
    bands[3, 1::2] = c_diag + delta
    bands[2, 1::2] = b_diag
    if a_off.size:
        bands[1, 2::2] = a_off
        bands[2, 2::2] = b_off
        bands[0, 3::2] = b_off
        bands[1, 3::2] = c_off
    return bands


def assemble(state: SimState, delta: float) -> BandedMatrix:
    """Banded form of M_delta under the interleaved unknown ordering."""
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    bands = _assemble_bands(state.fn.partition.nodes, state.fn.values, delta)
    return BandedMatrix(order=bands.shape[1], bandwidth=3, bands=bands)


def _solve_bands(bands: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = cholesky_banded(bands, lower=False, check_finite=False)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefiniteError(
            f"banded Cholesky factorization failed: {err}"
        ) from err
    return cho_solve_banded((factor, False), rhs, check_finite=False)


def solve(matrix: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve M z = rhs by banded Cholesky without pivoting.

    Raises
    ------
    NotPositiveDefiniteError
        When the factorization hits a nonpositive pivot, which signals a
        degenerate state to the integrator.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (matrix.order,):
        raise ValueError(f"rhs length {rhs.shape} does not match order {matrix.order}")
    return _solve_bands(matrix.bands, rhs)
