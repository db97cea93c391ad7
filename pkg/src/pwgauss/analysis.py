"""Error functionals, lambda sweeps, truncation studies and rate fits.

Spectral quantities are integrated on composite tensor Gauss-Legendre cells
aligned with the band region and the atom boxes of the target function.
The interpolant spectrum on a tensor grid is contracted axis by axis, so
the cost is one matrix product per grid rather than one exponential per
(point, node) pair.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy import special

from .errors import FactorizationFailure, HypothesisViolation, PWGaussError
from .geometry import SpectrumDomain
from .interpolator import Interpolant, build_interpolant, interp_eval
from .nodes import NodeRecipe, NodeSet
from .pwspace import (BandlimitedFunction, pw_eval, pw_spectrum, spectral_breakpoints,
                      support_in)
from .quadrature import axis_rule, gauss_legendre, partition, tensor_grid, tensor_weights

QUAD_POINTS = 96
# e^{-700} underflows; the quadrature box edge M = max(4, sqrt(4 lam 700))
GAUSS_EXPONENT_CAP = 700.0
# cells with |u_i| beyond sqrt(2 lam * 200) contribute < e^{-200} of the
# Gaussian mass and are covered by the analytic tail bound instead
PRUNE_EXPONENT = 200.0
MAX_PHASE_PER_CELL = 48.0
RATE_TOLERANCE = 0.15
CSV_COLUMNS = ["lambda", "N", "R", "W", "sup_error", "l2_error", "in_band_error",
               "out_band_energy", "coeff_l2", "cond_est", "status"]


class TruncationWarning(UserWarning):
    """The measurement window reaches into the truncation boundary layer."""


class SweepFailure(PWGaussError):
    """Every lambda point of a sweep failed."""


# ---------------------------------------------------------------------------
# spectral quadrature
# ---------------------------------------------------------------------------

def quadrature_box_halfwidth(lam: float) -> float:
    return max(4.0, math.sqrt(4.0 * lam * GAUSS_EXPONENT_CAP))


def _tensor_exponential_sum(interp: Interpolant, axes_pts: Sequence[np.ndarray]) -> np.ndarray:
    """``sum_j a_j exp(-i <x_j, u>)`` on the tensor grid spanned by ``axes_pts``.

    Returns an array of shape ``tuple(len(p) for p in axes_pts)``.
    """
    a = interp.coefficients.astype(complex)
    xj = interp.nodes.points
    d = len(axes_pts)
    mats = [np.exp(-1j * np.outer(axes_pts[i], xj[:, i])) for i in range(d)]
    if d == 1:
        return mats[0] @ a
    t = mats[0] * a[None, :]
    for i in range(1, d - 1):
        t = t[..., None, :] * mats[i].reshape((1,) * i + mats[i].shape)
    return t @ mats[-1].T


def _gauss_factor(lam, d, axes_pts):
    g = (math.pi / lam) ** (d / 2)
    out = np.full([len(p) for p in axes_pts], g)
    for i, p in enumerate(axes_pts):
        shape = [1] * d
        shape[i] = len(p)
        out = out * np.exp(-(p * p) / (4.0 * lam)).reshape(shape)
    return out


def _max_abs_coord(interp: Interpolant, f: Optional[BandlimitedFunction], axis: int) -> float:
    x = float(np.max(np.abs(interp.nodes.points[:, axis]))) if len(interp.nodes) else 0.0
    if f is not None and f.atoms:
        x = max(x, max(abs(at.shift[axis]) for at in f.atoms))
    return x


def _cell_width(lam: float, xmax: float) -> float:
    w = 5.0 * math.sqrt(lam)
    if xmax > 0:
        w = min(w, MAX_PHASE_PER_CELL / xmax)
    return w


def _tail_bound(interp: Interpolant, halfwidths=None, radius=None) -> float:
    """Upper bound of ``int |F I|^2`` outside ``Box(halfwidths)`` or ``Ball(radius)``.

    Uses ``|F I(u)| <= (pi/lam)^(d/2) exp(-|u|^2/(4 lam)) sum_j |a_j|``.
    """
    lam, d = interp.lam, interp.dim
    s1 = float(np.sum(np.abs(interp.coefficients)))
    if s1 == 0.0:
        return 0.0
    mass = (math.pi / lam) ** d * (2.0 * math.pi * lam) ** (d / 2) * s1 * s1
    if radius is not None:
        frac = float(special.gammaincc(d / 2.0, radius * radius / (2.0 * lam)))
    else:
        outside = [special.erfc(h / math.sqrt(2.0 * lam)) for h in halfwidths]
        frac = float(-np.expm1(np.sum(np.log1p(-np.asarray(outside)))))
    return mass * frac


@dataclass(frozen=True)
class SpectralPieces:
    in_band_sq: float
    out_band_sq: float
    tail: float

    @property
    def in_band_error(self) -> float:
        return math.sqrt(self.in_band_sq)

    @property
    def out_band_energy(self) -> float:
        return math.sqrt(self.out_band_sq + self.tail)

    def l2_error(self, d: int) -> float:
        return math.sqrt(self.in_band_sq + self.out_band_sq + self.tail) / (2.0 * math.pi) ** (d / 2)


def _box_pieces(f, interp, halfwidths, n_points, include_f=True):
    """In/out-of-band integrals when the band region is an axis box (or absent)."""
    lam, d = interp.lam, interp.dim
    m_box = quadrature_box_halfwidth(lam)
    m_prune = math.sqrt(2.0 * lam * PRUNE_EXPONENT)
    breaks = spectral_breakpoints(f) if (f is not None and f.atoms) else [[] for _ in range(d)]
    axes, mq = [], []
    for i in range(d):
        s = 0.0 if halfwidths is None else float(halfwidths[i])
        m = min(m_box, max(m_prune, s))
        m = max(m, s)
        mq.append(m)
        pts = [0.0] + list(breaks[i]) + ([-s, s] if halfwidths is not None else [])
        cells = partition(-m, m, pts, _cell_width(lam, _max_abs_coord(interp, f, i)))
        axes.append(axis_rule(cells, n_points))
    in_sq = 0.0
    out_sq = 0.0
    # chunk over the first axis to bound memory
    p0, w0 = axes[0]
    rest = [a[0] for a in axes[1:]]
    rest_w = tensor_weights([a[1] for a in axes[1:]])
    rest_n = max(1, rest_w.size)
    step = max(1, 2_000_000 // rest_n)
    for s0 in range(0, p0.size, step):
        chunk = [p0[s0:s0 + step]] + rest
        spec_i = (_gauss_factor(lam, d, chunk) * _tensor_exponential_sum(interp, chunk)).ravel()
        w = np.outer(w0[s0:s0 + step], rest_w).ravel()
        if halfwidths is None:
            out_sq += float(np.sum(w * np.abs(spec_i) ** 2))
            continue
        grid = tensor_grid(chunk)
        inside = np.all(np.abs(grid) <= np.asarray(halfwidths, dtype=float), axis=1)
        diff = spec_i[inside]
        if include_f and f is not None and f.atoms:
            diff = pw_spectrum(f, grid[inside]) - diff
        in_sq += float(np.sum(w[inside] * np.abs(diff) ** 2))
        out_sq += float(np.sum(w[~inside] * np.abs(spec_i[~inside]) ** 2))
    tail = _tail_bound(interp, halfwidths=mq)
    return SpectralPieces(in_sq, out_sq, tail)


def _direct_spectrum(interp, pts):
    """Interpolant spectrum at scattered points via chunked matrix products."""
    a = interp.coefficients.astype(complex)
    lam, d = interp.lam, interp.dim
    out = np.empty(pts.shape[0], dtype=complex)
    step = max(1, 4_000_000 // max(1, len(a)))
    for s in range(0, pts.shape[0], step):
        p = pts[s:s + step]
        out[s:s + step] = np.exp(-1j * (p @ interp.nodes.points.T)) @ a
    gauss = (math.pi / lam) ** (d / 2) * np.exp(-np.sum(pts * pts, axis=1) / (4.0 * lam))
    return gauss * out


def _polar_rule(r_inner, r_outer, lam, xmax, n_points):
    """Quadrature on the planar region ``r_inner(theta) <= rho <= r_outer(theta)``.

    Either radius may be a constant or a vectorized callable of the angle.
    Angular cells break at multiples of pi/4 so that square-boundary radii
    are smooth inside each cell.  Returns points ``(n, 2)`` and weights
    (Jacobian included).
    """
    width = _cell_width(lam, xmax)
    th_probe = np.linspace(-math.pi, math.pi, 721)

    def radius(r, th):
        return r(th) if callable(r) else np.full(th.shape, float(r))

    r_max = float(np.max(radius(r_outer, th_probe)))
    th_cells = partition(-math.pi, math.pi, [k * math.pi / 4 for k in range(-4, 5)],
                         max(width / max(r_max, 1e-300), 1e-3))
    th, wth = axis_rule(th_cells, n_points)
    x, w = gauss_legendre(n_points)
    lo = radius(r_inner, th)
    hi = radius(r_outer, th)
    n_rad = max(1, int(math.ceil(float(np.max(hi - lo)) / width)))
    pts, wts = [], []
    for k in range(n_rad):
        a = lo + (hi - lo) * k / n_rad
        b = lo + (hi - lo) * (k + 1) / n_rad
        half = 0.5 * (b - a)
        rho = 0.5 * (a + b)[:, None] + half[:, None] * x[None, :]
        ww = (wth * half)[:, None] * w[None, :] * rho
        pts.append(np.stack([(rho * np.cos(th)[:, None]).ravel(),
                             (rho * np.sin(th)[:, None]).ravel()], axis=1))
        wts.append(ww.ravel())
    return np.concatenate(pts), np.concatenate(wts)


def _square_radius(s):
    return lambda th: s / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))


def _ball2_pieces(f, interp, radius, n_points, include_f=True):
    """In/out-of-band integrals for a disk band region in the plane.

    The disk is split into its inscribed square (tensor cells) and the ring
    up to the circle (polar cells); the complement into the square corners
    outside the circle (polar) and everything outside ``[-r, r]^2`` (tensor).
    """
    lam = interp.lam
    xmax = max(_max_abs_coord(interp, f, 0), _max_abs_coord(interp, f, 1))
    use_f = include_f and f is not None and bool(f.atoms)
    s = radius / math.sqrt(2.0)

    def band_sq(pts, wts, with_f):
        val = _direct_spectrum(interp, pts)
        if with_f:
            val = pw_spectrum(f, pts) - val
        return float(np.sum(wts * np.abs(val) ** 2))

    breaks = spectral_breakpoints(f) if use_f else [[], []]
    axes = [axis_rule(partition(-s, s, [0.0] + list(breaks[i]), _cell_width(lam, xmax)),
                      n_points) for i in range(2)]
    chunk = [axes[0][0], axes[1][0]]
    inner = (_gauss_factor(lam, 2, chunk) * _tensor_exponential_sum(interp, chunk)).ravel()
    if use_f:
        inner = pw_spectrum(f, tensor_grid(chunk)) - inner
    in_sq = float(np.sum(tensor_weights([axes[0][1], axes[1][1]]) * np.abs(inner) ** 2))
    ring_pts, ring_w = _polar_rule(_square_radius(s), radius, lam, xmax, n_points)
    in_sq += band_sq(ring_pts, ring_w, use_f)
    corner_pts, corner_w = _polar_rule(radius, _square_radius(radius), lam, xmax, n_points)
    out_sq = band_sq(corner_pts, corner_w, False)
    outer = _box_pieces(None, interp, (radius, radius), n_points, include_f=False)
    return SpectralPieces(in_sq, out_sq + outer.out_band_sq, outer.tail)


def spectral_pieces(f: Optional[BandlimitedFunction], interp: Interpolant,
                    domain: Optional[SpectrumDomain], n_points: int = QUAD_POINTS,
                    include_f: bool = True) -> SpectralPieces:
    """Squared spectral error inside the band region, interpolant energy outside, tail bound."""
    if domain is not None and domain.dim != interp.dim:
        raise ValueError("domain dimension mismatch")
    if f is not None and include_f and domain is not None and not support_in(f, domain):
        raise HypothesisViolation("target spectrum is not contained in the band region Z")
    if domain is None:
        return _box_pieces(f, interp, None, n_points, include_f)
    box = domain.as_box()
    if box is not None:
        return _box_pieces(f, interp, box.halfwidths, n_points, include_f)
    if domain.dim == 2:
        return _ball2_pieces(f, interp, domain.radius, n_points, include_f)
    raise NotImplementedError("ball band regions are supported for d <= 2 only")


def l2_error(f: BandlimitedFunction, interp: Interpolant, domain: SpectrumDomain,
             n_points: int = QUAD_POINTS) -> float:
    """``||f - I f||_2`` via Plancherel from the spectral pieces."""
    return spectral_pieces(f, interp, domain, n_points).l2_error(interp.dim)


def out_of_band_energy(interp: Interpolant, domain: SpectrumDomain,
                       n_points: int = QUAD_POINTS) -> float:
    """``||F[I f]||_{L2(R^d \\ Z)}`` including the analytic tail bound."""
    return spectral_pieces(None, interp, domain, n_points, include_f=False).out_band_energy


def interp_l2_norm_spectral(interp: Interpolant, n_points: int = QUAD_POINTS) -> float:
    """``||I||_2`` from ``(2 pi)^(-d/2) ||F I||_2`` (spectral quadrature)."""
    p = spectral_pieces(None, interp, None, n_points, include_f=False)
    return math.sqrt(p.out_band_sq) / (2.0 * math.pi) ** (interp.dim / 2)


# ---------------------------------------------------------------------------
# spatial quantities
# ---------------------------------------------------------------------------

def window_grid(dim: int, window: float, density: Optional[int] = None, center=None) -> np.ndarray:
    if density is None:
        density = 2049 if dim == 1 else 257
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    axes = [np.linspace(c[i] - window, c[i] + window, density) for i in range(dim)]
    return tensor_grid(axes)


def _safe_radius(nodes: NodeSet) -> Optional[float]:
    prov = nodes.provenance
    if prov.truncation_radius is not None and math.isfinite(prov.truncation_radius):
        return prov.truncation_radius
    if prov.kind in ("lattice", "kadec") and prov.extent is not None and prov.spacing is not None:
        return prov.extent * prov.spacing
    return None


def window_is_safe(nodes: NodeSet, window: float) -> bool:
    r = _safe_radius(nodes)
    return r is None or window <= r / 2 + 1e-12


def sup_error(f: BandlimitedFunction, interp: Interpolant, window: float,
              density: Optional[int] = None, center=None) -> float:
    """Max of ``|f - I f|`` on a uniform grid over the window ``[-W, W]^d``."""
    if not window_is_safe(interp.nodes, window):
        warnings.warn(f"window half-width {window:g} exceeds half the truncation radius",
                      TruncationWarning, stacklevel=2)
    grid = window_grid(interp.dim, window, density, center)
    worst = 0.0
    for s in range(0, grid.shape[0], 20000):
        g = grid[s:s + 20000]
        err = np.abs(pw_eval(f, g) - interp_eval(interp, g))
        worst = max(worst, float(np.max(err)))
    return worst


def spatial_l2_norm_1d(interp: Interpolant, n_points: int = 64) -> float:
    """``||I||_2`` by spatial Gauss-Legendre quadrature (d = 1 only)."""
    if interp.dim != 1:
        raise ValueError("spatial quadrature oracle is one-dimensional")
    x = interp.nodes.points[:, 0]
    pad = math.sqrt(GAUSS_EXPONENT_CAP / interp.lam)
    lo, hi = float(x.min()) - pad, float(x.max()) + pad
    cells = partition(lo, hi, [], 0.5 / math.sqrt(interp.lam))
    pts, w = axis_rule(cells, n_points)
    val = interp_eval(interp, pts[:, None])
    return math.sqrt(float(np.sum(w * np.abs(val) ** 2)))


def _far_field_power(f: BandlimitedFunction) -> float:
    """Mean of ``|P|^2`` where ``f(x) ~ P(x) / (2 pi i x)`` as ``|x| -> inf`` (d = 1)."""
    coef = {}
    for at in f.atoms:
        for freq, sign in ((at.hi[0], 1.0), (at.lo[0], -1.0)):
            key = round(freq, 15)
            coef[key] = coef.get(key, 0.0) + sign * at.coeff * np.exp(-1j * freq * at.shift[0])
    return float(sum(abs(c) ** 2 for c in coef.values()))


def spatial_l2_error_1d(f: BandlimitedFunction, interp: Interpolant, half_length: float = 2.0e4,
                        n_points: int = 32) -> float:
    """``||f - I f||_2`` by spatial quadrature on ``[-L, L]`` plus the far-field tail of ``f``."""
    if f.dim != 1:
        raise ValueError("spatial quadrature oracle is one-dimensional")
    x = interp.nodes.points[:, 0]
    pad = math.sqrt(GAUSS_EXPONENT_CAP / interp.lam)
    near_lo, near_hi = float(x.min()) - pad, float(x.max()) + pad
    tmax = max([abs(at.shift[0]) for at in f.atoms], default=0.0)
    width = min(0.5 / math.sqrt(interp.lam), 2.0)
    cells = partition(-half_length, half_length, [near_lo, near_hi], width)
    pts, w = axis_rule(cells, n_points)
    fv = pw_eval(f, pts[:, None])
    near = (pts >= near_lo) & (pts <= near_hi)
    iv = np.zeros_like(fv)
    iv[near] = interp_eval(interp, pts[near][:, None])
    total = float(np.sum(w * np.abs(fv - iv) ** 2))
    if half_length <= max(near_hi, -near_lo) or half_length <= 10 * tmax:
        raise ValueError("half_length must exceed the interpolant support and atom shifts")
    total += 2.0 * _far_field_power(f) / (4.0 * math.pi ** 2 * half_length)
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# reports and sweeps
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    lam: float
    N: int
    R: float
    W: float
    sup_error: float = math.nan
    l2_error: float = math.nan
    in_band_error: float = math.nan
    out_band_energy: float = math.nan
    coeff_l2: float = math.nan
    cond_est: float = math.nan
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status.startswith("ok")

    def csv_row(self) -> list:
        return [repr(float(self.lam)), self.N, repr(float(self.R)), repr(float(self.W)),
                repr(float(self.sup_error)), repr(float(self.l2_error)),
                repr(float(self.in_band_error)), repr(float(self.out_band_energy)),
                repr(float(self.coeff_l2)), repr(float(self.cond_est)), self.status]

    @classmethod
    def from_csv_row(cls, row: dict) -> "ErrorReport":
        return cls(float(row["lambda"]), int(row["N"]), float(row["R"]), float(row["W"]),
                   float(row["sup_error"]), float(row["l2_error"]), float(row["in_band_error"]),
                   float(row["out_band_energy"]), float(row["coeff_l2"]), float(row["cond_est"]),
                   row["status"])


def write_reports(reports: Sequence[ErrorReport], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow(r.csv_row())
    return path


def read_reports(path) -> List[ErrorReport]:
    with Path(path).open(newline="") as fh:
        return [ErrorReport.from_csv_row(row) for row in csv.DictReader(fh)]


@dataclass(frozen=True)
class TruncationPolicy:
    """Truncation radius ``R(lam) = max(R0, c / sqrt(lam))``.

    ``base_radius=None`` disables truncation: the recipe's own extent is used.
    The measurement window defaults to ``R0 / 2``.
    """

    base_radius: Optional[float] = None
    c: float = 12.0

    def radius(self, lam: float) -> Optional[float]:
        if self.base_radius is None:
            return None
        return max(self.base_radius, self.c / math.sqrt(lam))


def evaluate_report(f, interp: Interpolant, domain: SpectrumDomain, window: float, radius,
                    density=None, n_points: int = QUAD_POINTS) -> ErrorReport:
    status = "ok"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        sup = sup_error(f, interp, window, density)
    if any(issubclass(w.category, TruncationWarning) for w in caught):
        status = "ok:window-unsafe"
    pieces = spectral_pieces(f, interp, domain, n_points)
    diag = interp.diagnostics
    return ErrorReport(
        interp.lam, len(interp.nodes), math.inf if radius is None else float(radius), window,
        sup, pieces.l2_error(interp.dim), pieces.in_band_error, pieces.out_band_energy,
        diag.coefficient_l2 if diag else math.nan, diag.condition_estimate if diag else math.nan,
        status)


def lambda_sweep(f: BandlimitedFunction, recipe, lambdas: Sequence[float],
                 domain: SpectrumDomain, window: Optional[float] = None,
                 policy: TruncationPolicy = TruncationPolicy(), density: Optional[int] = None,
                 n_points: int = QUAD_POINTS, threads: int = 1) -> List[ErrorReport]:
    """One :class:`ErrorReport` per lambda, in input order.

    ``recipe`` is a :class:`NodeRecipe` (rebuilt at each truncation radius)
    or a fixed :class:`NodeSet`.
    A lambda whose Gram system cannot be factored is recorded with a
    ``failed:`` status and the sweep continues.
    """
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 4:
        raise ValueError("a sweep needs at least 4 lambda values")
    if any(not v > 0 for v in lambdas):
        raise ValueError("lambda values must be positive")
    fixed = recipe if isinstance(recipe, NodeSet) else None
    if fixed is not None:
        policy = TruncationPolicy()
    if window is None:
        if policy.base_radius is not None:
            window = policy.base_radius / 2
        elif fixed is not None:
            r = _safe_radius(fixed)
            window = (r if r is not None else float(np.max(np.abs(fixed.points)))) / 2
        else:
            window = recipe.extent * recipe.spacing / 2
    node_cache = {}

    def nodes_for(radius):
        if fixed is not None:
            return fixed
        key = None if radius is None else round(radius, 12)
        if key not in node_cache:
            node_cache[key] = recipe.build(radius)
        return node_cache[key]

    radii = [policy.radius(lam) for lam in lambdas]
    for r in dict.fromkeys(radii):
        nodes_for(r)

    def one(idx):
        lam, radius = lambdas[idx], radii[idx]
        nodes = nodes_for(radius)
        r_report = radius if radius is not None else _safe_radius(nodes)
        try:
            interp = build_interpolant(f, nodes, lam)
        except FactorizationFailure as exc:
            return ErrorReport(lam, len(nodes), r_report if r_report else math.inf, window,
                               cond_est=exc.condition_estimate or math.nan,
                               status=f"failed: {exc}")
        return evaluate_report(f, interp, domain, window, r_report, density, n_points)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, range(len(lambdas))))
    else:
        reports = [one(i) for i in range(len(lambdas))]
    if not any(r.ok for r in reports):
        raise SweepFailure("every lambda point of the sweep failed")
    return reports


# ---------------------------------------------------------------------------
# rate fit
# ---------------------------------------------------------------------------

def theoretical_exponent(delta: float, beta: float) -> float:
    return beta * beta - 3.0 * delta * delta + 2.0


@dataclass
class RateFit:
    slope: float
    intercept: float
    theoretical_exponent: float
    r_squared: float
    verdict: bool
    metric: str = "sup_error"
    n_points: int = 0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "theoretical_exponent": self.theoretical_exponent,
                "r_squared": self.r_squared, "verdict": bool(self.verdict),
                "metric": self.metric, "n_points": self.n_points, "notes": list(self.notes)}


def fit_rate(reports: Sequence[ErrorReport], delta: float, beta: float,
             metric: str = "sup_error", tolerance: float = RATE_TOLERANCE) -> RateFit:
    """Least-squares fit of ``ln(error)`` against ``1 / (4 lam)``.

    The verdict is one-sided: the fitted slope must not exceed the
    theoretical exponent ``beta^2 - 3 delta^2 + 2`` by more than ``tolerance``.
    """
    notes = []
    xs, ys = [], []
    for r in reports:
        if not r.ok:
            notes.append(f"lambda={r.lam:g}: skipped ({r.status})")
            continue
        e = getattr(r, metric)
        if e == 0.0:
            notes.append(f"lambda={r.lam:g}: exact recovery, removed from fit")
            continue
        if not (e > 0 and math.isfinite(e)):
            notes.append(f"lambda={r.lam:g}: unusable {metric}={e!r}")
            continue
        xs.append(1.0 / (4.0 * r.lam))
        ys.append(math.log(e))
    if len(xs) < 4:
        raise ValueError(f"rate fit needs >= 4 usable points, got {len(xs)}")
    x = np.asarray(xs)
    y = np.asarray(ys)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("rate fit needs at least two distinct lambda values")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    theo = theoretical_exponent(delta, beta)
    return RateFit(slope, intercept, theo, r2, bool(slope <= theo + tolerance), metric,
                   len(xs), notes)


# ---------------------------------------------------------------------------
# truncation study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationRow:
    R: float
    sup_error: float
    N: int
    valid: bool


def truncation_study(f: BandlimitedFunction, lam: float, radii: Sequence[float], window: float,
                     recipe: NodeRecipe, density: Optional[int] = None) -> List[TruncationRow]:
    """Sup error on a fixed central window as the truncation radius grows."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    rows = []
    for radius in radii:
        nodes = recipe.build(radius)
        valid = radius >= 2 * window
        interp = build_interpolant(f, nodes, lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            err = sup_error(f, interp, window, density)
        rows.append(TruncationRow(radius, err, len(nodes), valid))
    return rows


def certify_radius(f: BandlimitedFunction, lam: float, window: float, recipe: NodeRecipe,
                   start: float, tolerance: float = 0.05, max_doublings: int = 6,
                   density: Optional[int] = None):
    """Smallest ``R = start * 2^k`` whose doubling changes the window sup error by < tolerance.

    Returns ``(radius, rows)``; raises if no radius certifies.
    """
    radii = [start * 2 ** k for k in range(max_doublings + 1)]
    rows = []
    for k, radius in enumerate(radii):
        rows.extend(truncation_study(f, lam, [radius], window, recipe, density))
        if k == 0:
            continue
        prev, cur = rows[-2], rows[-1]
        ref = max(prev.sup_error, np.finfo(float).tiny)
        if prev.valid and abs(cur.sup_error - prev.sup_error) / ref < tolerance:
            return prev.R, rows
    raise PWGaussError(f"truncation not certified up to R={radii[-1]:g}")


def write_truncation(rows: Sequence[TruncationRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R", "sup_error", "N", "valid"])
        for r in rows:
            w.writerow([repr(r.R), repr(r.sup_error), r.N, int(r.valid)])
    return path


def certified_sweep(f: BandlimitedFunction, recipe: NodeRecipe, lambdas: Sequence[float],
                    domain: SpectrumDomain, start_spacings: float = 20.0, c: float = 12.0,
                    tolerance: float = 0.05, max_doublings: int = 6,
                    window: Optional[float] = None, density: Optional[int] = None,
                    n_points: int = QUAD_POINTS, threads: int = 1):
    """Certify ``R0`` at the smallest lambda, then sweep with ``R(lam) = max(R0, c/sqrt(lam))``.

    The window is ``start_spacings * spacing / 2`` unless given, and stays
    fixed for the certification and every lambda so the errors are comparable.
    Returns ``(reports, R0, truncation_rows)``.
    """
    start = start_spacings * recipe.spacing
    if window is None:
        window = start / 2
    radius, rows = certify_radius(f, min(lambdas), window, recipe, start, tolerance,
                                  max_doublings, density)
    reports = lambda_sweep(f, recipe, lambdas, domain, window, TruncationPolicy(radius, c),
                           density, n_points, threads)
    return reports, radius, rows
