"""Gaussian interpolation operator on a finite node section.

``I_lam f(x) = sum_j a_j exp(-lam |x - x_j|^2)`` with coefficients fixed by
``I_lam f(x_k) = f(x_k)`` at every node.  Its Fourier transform is
``(pi/lam)^(d/2) exp(-|u|^2/(4 lam)) sum_j a_j exp(-i <x_j, u>)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FactorizationFailure
from .kernel import GaussianKernel, assemble_gram, solve_coefficients
from .nodes import NodeSet, separation
from .pwspace import BandlimitedFunction, pw_l2_norm, sample_on_nodes

UNDERFLOW_EXPONENT = 700.0
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SolveDiagnostics:
    residual_inf: float
    condition_estimate: float
    coefficient_l2: float
    samples_inf: float = 0.0
    kappa_ratio: Optional[float] = None
    bessel_ratio: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass(frozen=True, eq=False)
class Interpolant:
    nodes: NodeSet
    lam: float
    coefficients: np.ndarray
    diagnostics: SolveDiagnostics = field(default=None)

    def __post_init__(self):
        c = np.array(self.coefficients, copy=True)
        if c.shape != (len(self.nodes),):
            raise ValueError("one coefficient per node is required")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def dim(self) -> int:
        return self.nodes.dim

    def __call__(self, x):
        return interp_eval(self, x)

    def to_dict(self, nodes_ref: Optional[str] = None) -> dict:
        c = self.coefficients
        coeffs = ([[float(v.real), float(v.imag)] for v in c] if np.iscomplexobj(c)
                  else [float(v) for v in c])
        return {"lambda": self.lam, "nodes_ref": nodes_ref, "coefficients": coeffs,
                "diagnostics": self.diagnostics.to_dict() if self.diagnostics else {}}

    def save(self, path, nodes_ref: Optional[str] = None) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(nodes_ref), indent=2) + "\n")
        return path

    @classmethod
    def from_dict(cls, d: dict, nodes: NodeSet) -> "Interpolant":
        raw = d["coefficients"]
        if raw and isinstance(raw[0], list):
            coeffs = np.array([complex(a, b) for a, b in raw])
        else:
            coeffs = np.asarray(raw, dtype=float)
        diag = d.get("diagnostics") or None
        return cls(nodes, float(d["lambda"]), coeffs,
                   SolveDiagnostics(**diag) if diag else None)


def build_from_samples(nodes: NodeSet, lam: float, samples, *, method: str = "cholesky",
                       norm_f: Optional[float] = None,
                       bessel_ratio: Optional[float] = None) -> Interpolant:
    """Interpolant of raw sample data (data-driven mode)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    samples = np.asarray(samples)
    kernel = GaussianKernel(float(lam), nodes.dim)
    gram = assemble_gram(kernel, nodes)
    try:
        sol = solve_coefficients(gram, samples, method=method)
    except FactorizationFailure as exc:
        q = separation(nodes) if len(nodes) >= 2 else None
        raise exc.with_context(lam=lam, separation=q, n_nodes=len(nodes)) from None
    s_inf = float(np.max(np.abs(samples))) if samples.size else 0.0
    if s_inf > 0 and sol.residual_inf > RESIDUAL_TOL * s_inf:
        raise FactorizationFailure(
            f"interpolation residual {sol.residual_inf:.3e} exceeds "
            f"{RESIDUAL_TOL:g} * max|f(x_k)|",
            lam=lam, n_nodes=len(nodes), condition_estimate=sol.condition_estimate)
    a = sol.coefficients
    a_l2 = float(np.sqrt(np.sum(np.abs(a) ** 2)))
    kappa = None if not norm_f else a_l2 / norm_f
    diag = SolveDiagnostics(sol.residual_inf, sol.condition_estimate, a_l2, s_inf,
                            kappa, bessel_ratio)
    return Interpolant(nodes, float(lam), a, diag)


def build_interpolant(f: BandlimitedFunction, nodes: NodeSet, lam: float,
                      method: str = "cholesky") -> Interpolant:
    """Sample ``f`` on ``nodes`` and solve for the Gaussian coefficients."""
    if f.dim != nodes.dim:
        raise ValueError("function and node dimensions differ")
    if len(nodes) >= 2 and not separation(nodes) > 0:
        raise ValueError("nodes must be distinct")
    samples, bessel = sample_on_nodes(f, nodes)
    norm_f = pw_l2_norm(f)
    return build_from_samples(nodes, lam, samples, method=method, norm_f=norm_f,
                              bessel_ratio=bessel)


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1 and x.size == dim
    if single:
        x = x.reshape(1, dim)
    elif x.ndim == 1 and dim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return x, single


def _compensated_accumulate(terms_iter, n_out, dtype):
    """Neumaier-compensated sum over a stream of equally shaped term vectors."""
    s = np.zeros(n_out, dtype=dtype)
    comp = np.zeros(n_out, dtype=dtype)
    for term in terms_iter:
        t = s + term
        big = np.abs(s) >= np.abs(term)
        comp += np.where(big, (s - t) + term, (term - t) + s)
        s = t
    return s + comp


def interp_eval(interp: Interpolant, x):
    """Evaluate the interpolant at one point or each row of an ``(n, d)`` array.

    Terms with ``lam |x - x_j|^2 > 700`` underflow and are skipped; the rest
    are added in node order with compensated summation.
    """
    pts, single = _points(x, interp.dim)
    a = interp.coefficients
    xj = interp.nodes.points
    lam = interp.lam
    dtype = complex if np.iscomplexobj(a) else float

    def terms():
        for j in range(xj.shape[0]):
            if a[j] == 0:
                continue
            diff = pts - xj[j]
            expo = lam * np.sum(diff * diff, axis=1)
            yield np.where(expo > UNDERFLOW_EXPONENT, 0.0, a[j] * np.exp(-np.minimum(expo, UNDERFLOW_EXPONENT)))

    out = _compensated_accumulate(terms(), pts.shape[0], dtype)
    return out[0] if single else out


def interp_spectrum(interp: Interpolant, u):
    """Fourier transform of the interpolant (finite exponential sum)."""
    pts, single = _points(u, interp.dim)
    a = interp.coefficients
    xj = interp.nodes.points
    lam, d = interp.lam, interp.dim

    def terms():
        for j in range(xj.shape[0]):
            if a[j] == 0:
                continue
            yield a[j] * np.exp(-1j * (pts @ xj[j]))

    hsum = _compensated_accumulate(terms(), pts.shape[0], complex)
    gauss = (math.pi / lam) ** (d / 2) * np.exp(-np.sum(pts * pts, axis=1) / (4.0 * lam))
    out = gauss * hsum
    return complex(out[0]) if single else out
