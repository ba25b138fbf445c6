"""Sparse operators on subsets of a grid and the linear solves they need."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# direct factorisation below these sizes, AMG preconditioned CG above
DIRECT_LIMIT = {2: 250_000, 3: 20_000}


class SolveError(RuntimeError):
    pass


def neighbour_pairs(flat_idx: np.ndarray, shape: tuple):
    """Yield ``(local_i, flat_neighbour, valid)`` for each of the 2N directions."""
    coords = np.unravel_index(flat_idx, shape)
    strides = np.cumprod((1,) + tuple(shape[::-1]))[:-1][::-1]
    for ax in range(len(shape)):
        for step in (-1, 1):
            c = coords[ax] + step
            valid = (c >= 0) & (c < shape[ax])
            nb = flat_idx + step * strides[ax]
            yield nb, valid


def restricted_operator(
    flat_idx: np.ndarray, shape: tuple, h: float, k: float, ghost: str = "center"
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Matrix of ``h^2 (-Delta_h - k^2)`` on the cells ``flat_idx``.

    Values outside the set are zero. With ``ghost="face"`` the zero is
    imposed on the cell faces instead of the outside cell centres, which
    adds one to the diagonal for every missing neighbour.

    Returns the matrix and an array counting the missing neighbours of each
    cell.
    """
    n = flat_idx.size
    N = len(shape)
    pos = np.full(int(np.prod(shape)), -1, dtype=np.int64)
    pos[flat_idx] = np.arange(n)
    rows, cols = [], []
    missing = np.zeros(n, dtype=np.int64)
    local = np.arange(n)
    for nb, valid in neighbour_pairs(flat_idx, shape):
        j = np.full(n, -1, dtype=np.int64)
        j[valid] = pos[nb[valid]]
        inside = j >= 0
        rows.append(local[inside])
        cols.append(j[inside])
        missing += ~inside
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    diag = np.full(n, 2.0 * N - (k * h) ** 2)
    if ghost == "face":
        diag = diag + missing
    elif ghost != "center":
        raise ValueError("ghost must be 'center' or 'face'")
    A = sp.csr_matrix((-np.ones(rows.size), (rows, cols)), shape=(n, n))
    A = A + sp.diags(diag)
    return A.tocsr(), missing


class LinearSolver:
    """Factorise once, solve many times, with iterative refinement."""

    def __init__(self, A: sp.csr_matrix, ndim: int):
        self.A = A
        self.n = A.shape[0]
        self.direct = self.n <= DIRECT_LIMIT[ndim]
        if self.direct:
            try:
                self._lu = spla.splu(A.tocsc())
            except RuntimeError as exc:  # exactly singular
                raise SolveError(str(exc)) from exc
        else:
            import pyamg

            self._ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=500)
            self._M = self._ml.aspreconditioner(cycle="V")

    def _raw(self, b: np.ndarray, x0=None) -> np.ndarray:
        if self.direct:
            return self._lu.solve(b)
        nb = np.linalg.norm(b)
        if nb == 0:
            return np.zeros_like(b)
        x, info = spla.cg(self.A, b, x0=x0, rtol=1e-13, atol=0.0, maxiter=2000, M=self._M)
        if info < 0:
            raise SolveError("conjugate gradients broke down")
        return x

    def solve(self, b: np.ndarray, x0=None, atol: float = 0.0, refine: int = 4) -> np.ndarray:
        """Solve ``A x = b`` to a max-norm residual of about ``atol``."""
        x = self._raw(b, x0)
        for _ in range(refine):
            r = b - self.A @ x
            if np.max(np.abs(r), initial=0.0) <= atol:
                break
            x = x + self._raw(r)
        if not np.all(np.isfinite(x)):
            raise SolveError("linear solve produced non-finite values")
        return x


def smallest_eigenvalue(A: sp.csr_matrix, ndim: int, rtol: float = 1e-6, maxiter: int = 500):
    """Smallest eigenvalue of a symmetric positive definite matrix.

    Inverse power iteration with a Rayleigh quotient stopping rule.
    Returns ``(eigenvalue, eigenvector)``.
    """
    solver = LinearSolver(A, ndim)
    x = np.ones(A.shape[0])
    x /= np.linalg.norm(x)
    lam_old = np.inf
    lam = np.inf
    for _ in range(maxiter):
        y = solver._raw(x)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0:
            raise SolveError("inverse iteration failed")
        x = y / ny
        lam = float(x @ (A @ x))
        if abs(lam - lam_old) <= 0.1 * rtol * abs(lam):
            break
        lam_old = lam
    return lam, x
