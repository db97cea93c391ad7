"""Gaussian kernel, its Fourier transform, and the collocation Gram system.

With ``g_lam(x) = exp(-lam |x|^2)`` the Fourier transform (convention
``hat f(u) = int f(x) exp(-i<u,x>) dx``) is
``(pi/lam)^(d/2) exp(-|u|^2 / (4 lam))``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.linalg.lapack import dpocon
from scipy.sparse.linalg import LinearOperator, cg, eigsh

from .errors import FactorizationFailure, SizeCapExceeded
from .nodes import NodeSet

DENSE_CAP = 8192
CONDITION_CAP = 1e13
UNDERFLOW_FLUSH = 1e-300
GRAM_MAGIC = b"PWGRAM01"


@dataclass(frozen=True)
class GaussianKernel:
    lam: float
    dim: int = 1

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive and finite, got {self.lam}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1) if dim > 1 or x.shape[0] == 1 else x.reshape(-1, 1)
    if x.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def kernel_eval(kernel: GaussianKernel, x):
    """``exp(-lam |x|^2)``; a single d-vector gives a float, an (n, d) array a vector."""
    single = np.ndim(x) <= 1 and np.size(x) == kernel.dim
    pts = _as_points(x, kernel.dim)
    val = np.exp(-kernel.lam * np.sum(pts * pts, axis=1))
    return float(val[0]) if single else val


def kernel_spectrum(kernel: GaussianKernel, u):
    """Fourier transform of the kernel at frequency ``u``."""
    single = np.ndim(u) <= 1 and np.size(u) == kernel.dim
    pts = _as_points(u, kernel.dim)
    lam, d = kernel.lam, kernel.dim
    val = (math.pi / lam) ** (d / 2) * np.exp(-np.sum(pts * pts, axis=1) / (4.0 * lam))
    return float(val[0]) if single else val


class GramMatrix:
    """Symmetric collocation matrix ``G[j, k] = g_lam(x_j - x_k)``.

    The Cholesky factor and the LAPACK condition estimate are computed on
    first use and cached.
    """

    def __init__(self, entries: np.ndarray, kernel: Optional[GaussianKernel] = None,
                 nodes: Optional[NodeSet] = None):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("Gram matrix must be square")
        self.entries = entries
        self.kernel = kernel
        self.nodes = nodes
        self._factor = None
        self._cond = None

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    @property
    def factor(self):
        """Lower Cholesky factor, or None before :meth:`factorize`."""
        return None if self._factor is None else self._factor[0]

    @property
    def condition_estimate(self) -> Optional[float]:
        return self._cond

    def _context(self):
        lam = self.kernel.lam if self.kernel is not None else None
        n = self.order
        q = None
        if self.nodes is not None and len(self.nodes) >= 2 and n <= 4096:
            from .nodes import separation
            q = separation(self.nodes)
        return dict(lam=lam, n_nodes=n, separation=q)

    def factorize(self, cond_cap: float = CONDITION_CAP):
        """Cholesky-factor the matrix; raise FactorizationFailure on trouble."""
        if self._factor is not None:
            return self._factor
        a = self.entries
        try:
            c, lower = linalg.cho_factor(a, lower=True, check_finite=True)
        except linalg.LinAlgError as exc:
            raise FactorizationFailure(
                f"Cholesky pivot <= 0 ({exc}); matrix not numerically positive definite",
                **self._context()) from None
        anorm = float(np.max(np.sum(np.abs(a), axis=0)))
        # dpocon reads the upper triangle by default
        rcond, info = dpocon(np.tril(c).T.copy(order="F"), anorm)
        cond = math.inf if rcond <= 0 else 1.0 / rcond
        self._cond = cond
        if info != 0 or cond > cond_cap:
            raise FactorizationFailure(
                f"condition estimate {cond:.3e} exceeds cap {cond_cap:.1e}",
                condition_estimate=cond, **self._context())
        self._factor = (c, lower)
        return self._factor

    def matvec(self, v):
        return self.entries @ v

    def to_bytes(self) -> bytes:
        n = self.order
        header = GRAM_MAGIC + struct.pack("<Q", n)
        return header + np.ascontiguousarray(self.entries, dtype="<f8").tobytes(order="C")


def assemble_gram(kernel: GaussianKernel, nodes: NodeSet, cap: int = DENSE_CAP) -> GramMatrix:
    """Dense Gram matrix of the kernel on ``nodes``."""
    pts = nodes.points if isinstance(nodes, NodeSet) else _as_points(nodes, kernel.dim)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("cannot assemble a Gram matrix on an empty node set")
    if pts.shape[1] != kernel.dim:
        raise ValueError("node dimension does not match kernel dimension")
    if n > cap:
        raise SizeCapExceeded(f"{n} nodes exceed the dense Gram cap {cap}")
    sq = np.zeros((n, n))
    for axis in range(pts.shape[1]):
        diff = pts[:, axis][:, None] - pts[:, axis][None, :]
        sq += diff * diff
    g = np.exp(-kernel.lam * sq)
    g[g < UNDERFLOW_FLUSH] = 0.0
    # exact symmetry regardless of rounding in the difference
    g = np.triu(g) + np.triu(g, 1).T
    np.fill_diagonal(g, 1.0)
    return GramMatrix(g, kernel, nodes if isinstance(nodes, NodeSet) else None)


@dataclass(frozen=True)
class SolveResult:
    coefficients: np.ndarray
    residual_inf: float
    condition_estimate: float
    method: str
    iterations: int = 0


def _residual_extended(a: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``b - A x`` accumulated in extended (long double) precision."""
    ext = np.clongdouble if np.iscomplexobj(x) or np.iscomplexobj(b) else np.longdouble
    r = b.astype(ext) - a.astype(np.longdouble) @ x.astype(ext)
    return r


def solve_coefficients(gram: GramMatrix, samples, method: str = "cholesky",
                       cond_cap: float = CONDITION_CAP) -> SolveResult:
    """Solve ``G a = samples`` without any regularization.

    The default path is a Cholesky solve followed by one step of iterative
    refinement with the residual accumulated in extended precision.
    ``method="cg"`` runs conjugate gradients (rtol 1e-12, at most 10 N
    iterations) as an independent cross-check.
    """
    b = np.asarray(samples)
    if b.ndim != 1 or b.shape[0] != gram.order:
        raise ValueError(f"expected {gram.order} samples, got shape {b.shape}")
    b = b.astype(complex) if np.iscomplexobj(b) else b.astype(float)
    a = gram.entries
    factor = gram.factorize(cond_cap)
    if method == "cholesky":
        x = linalg.cho_solve(factor, b)
        r = _residual_extended(a, x, b)
        r64 = r.astype(complex if np.iscomplexobj(r) else float)
        x = x + linalg.cho_solve(factor, r64)
        iters = 1
    elif method == "cg":
        n = gram.order
        op = LinearOperator((n, n), matvec=gram.matvec, dtype=float)
        if np.iscomplexobj(b):
            xr, _ = cg(op, b.real, rtol=1e-12, atol=0.0, maxiter=10 * n)
            xi, _ = cg(op, b.imag, rtol=1e-12, atol=0.0, maxiter=10 * n)
            x = xr + 1j * xi
        else:
            x, _ = cg(op, b, rtol=1e-12, atol=0.0, maxiter=10 * n)
        iters = 0
    else:
        raise ValueError(f"unknown solve method {method!r}")
    r = _residual_extended(a, x, b)
    res = float(np.max(np.abs(r))) if r.size else 0.0
    return SolveResult(np.asarray(x), res, float(gram.condition_estimate), method, iters)


def min_eigenvalue_estimate(gram: GramMatrix, tol: float = 1e-10, maxiter: int = 300) -> float:
    """Smallest eigenvalue of the Gram matrix via inverse iteration.

    Applies the inverse through the cached Cholesky factor and extracts the
    dominant eigenvalue of ``G^{-1}`` with an implicitly restarted Lanczos
    iteration (Krylov-accelerated inverse power iteration).
    """
    factor = gram.factorize()
    n = gram.order
    if n == 1:
        return float(gram.entries[0, 0])
    if n == 2:
        g = gram.entries
        mid = 0.5 * (g[0, 0] + g[1, 1])
        rad = math.hypot(0.5 * (g[0, 0] - g[1, 1]), g[0, 1])
        return float(mid - rad)
    op = LinearOperator((n, n), matvec=lambda v: linalg.cho_solve(factor, v), dtype=float)
    v0 = np.random.default_rng(0).standard_normal(n)
    vals = eigsh(op, k=1, which="LA", v0=v0, tol=min(tol, 1e-12),
                 maxiter=maxiter * n, return_eigenvectors=False)
    theta = float(vals[0])
    if not theta > 0:
        raise FactorizationFailure("inverse iteration produced a nonpositive eigenvalue",
                                   **gram._context())
    return 1.0 / theta


def write_gram(gram: GramMatrix, path) -> Path:
    """Binary dump: magic ``PWGRAM01``, uint64 LE order, then row-major LE float64."""
    path = Path(path)
    path.write_bytes(gram.to_bytes())
    return path


def read_gram(path) -> GramMatrix:
    raw = Path(path).read_bytes()
    if raw[:8] != GRAM_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    (n,) = struct.unpack("<Q", raw[8:16])
    body = np.frombuffer(raw, dtype="<f8", offset=16)
    if body.size != n * n:
        raise ValueError(f"{path}: expected {n * n} entries, found {body.size}")
    return GramMatrix(body.reshape(n, n).astype(float))
