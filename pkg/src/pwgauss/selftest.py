"""Small-scale invariant suite behind ``pwgauss selftest``.

Every check is deterministic (fixed seeds) and returns ``(passed, detail)``.
The fault hook ``gram-symmetry`` perturbs one off-diagonal Gram entry so the
suite can be shown to fail loudly.
"""
from __future__ import annotations

import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import analysis, geometry, kernel, nodes, pwspace
from .interpolator import build_interpolant, interp_eval, interp_spectrum
from .quadrature import axis_rule, partition, tensor_grid, tensor_weights

Check = Tuple[str, Callable[[], Tuple[bool, str]]]
FAULTS = ("gram-symmetry",)
_fault: Optional[str] = None


# -- geometry ------------------------------------------------------------------

def check_box_sandwich():
    rng = np.random.default_rng(1)
    worst = 0
    for _ in range(5):
        hw = rng.uniform(0.2, 1.0, size=2)
        box = geometry.SpectrumDomain.box(hw)
        delta = geometry.inscribed_delta(box)
        outer = float(np.linalg.norm(hw))
        pts = rng.uniform(-outer, outer, size=(10_000, 2))
        r = np.linalg.norm(pts, axis=1)
        inside = geometry.contains_many(box, pts)
        worst += int(np.sum((r <= delta) & ~inside)) + int(np.sum(inside & (r > outer)))
    return worst == 0, f"{worst} sandwich violations"


def check_contains_symmetric():
    rng = np.random.default_rng(2)
    doms = [geometry.SpectrumDomain.box([0.5, 0.9]), geometry.SpectrumDomain.ball(0.7, 2)]
    bad = 0
    for dom in doms:
        if not geometry.contains(dom, [0.0, 0.0]) or not geometry.measure(dom) > 0:
            bad += 1
        pts = rng.uniform(-1, 1, size=(2000, 2))
        bad += int(np.sum(geometry.contains_many(dom, pts) != geometry.contains_many(dom, -pts)))
    return bad == 0, f"{bad} asymmetric memberships"


# -- nodes -----------------------------------------------------------------------

def check_kadec_separation():
    worst = math.inf
    for d, h in ((1, math.pi), (2, 2.0)):
        base = nodes.lattice_nodes(d, h, 6 if d == 1 else 4)
        for mag in (0.1 * h, 0.24 * h):
            q = nodes.separation(nodes.kadec_perturb(base, mag, 11))
            worst = min(worst, q - (h - 2 * mag * math.sqrt(d)))
    return worst >= 0, f"min margin over bound h - 2L sqrt(d): {worst:.3e}"


def check_lattice_symmetry_and_determinism():
    lat = nodes.lattice_nodes(2, 0.7, 3)
    pts = {tuple(np.round(p, 12)) for p in lat.points}
    sym = all(tuple(np.round(-p, 12)) in pts for p in lat.points)
    a = nodes.kadec_perturb(lat, 0.1, 5)
    b = nodes.kadec_perturb(lat, 0.1, 5)
    same = a.points.tobytes() == b.points.tobytes()
    return sym and same, f"symmetric={sym} deterministic={same}"


# -- kernel ----------------------------------------------------------------------

def _gl_box(d, half, n_cells, n=48):
    cells = partition(-half, half, [], 2 * half / n_cells)
    pts, wts = axis_rule(cells, n)
    return tensor_grid([pts] * d), tensor_weights([wts] * d)


def check_kernel_spectrum_quadrature():
    worst = 0.0
    for d in (1, 2):
        for lam in (0.3, 1.0):
            k = kernel.GaussianKernel(lam, d)
            half = 8.0 / math.sqrt(lam)
            grid, w = _gl_box(d, half, 16)
            gx = kernel.kernel_eval(k, grid)
            for s in (0.0, 0.5, 1.0, 2.0):
                u = np.full(d, s * math.sqrt(lam))
                quad = np.sum(w * gx * np.exp(-1j * grid @ u))
                exact = kernel.kernel_spectrum(k, u)
                worst = max(worst, abs(quad - exact) / exact)
    return worst <= 1e-10, f"max relative error {worst:.2e} (tol 1e-10)"


def _random_separated(rng, d, q, n, box):
    pts = []
    while len(pts) < n:
        p = rng.uniform(-box, box, size=d)
        if all(np.linalg.norm(p - x) >= q for x in pts):
            pts.append(p)
    return nodes.NodeSet(np.array(pts))


def check_gram_symmetry():
    nd = nodes.lattice_nodes(2, 1.0, 3)
    g = kernel.assemble_gram(kernel.GaussianKernel(0.5, 2), nd)
    entries = g.entries.copy()
    if _fault == "gram-symmetry":
        entries[0, 1] += 1e-3
    sym = float(np.max(np.abs(entries - entries.T)))
    diag = float(np.max(np.abs(np.diag(entries) - 1.0)))
    rng_ok = bool(np.all(entries >= 0) and np.all(entries <= 1))
    ok = sym == 0.0 and diag == 0.0 and rng_ok
    return ok, f"asymmetry {sym:.1e}, diagonal defect {diag:.1e}, entries in [0,1]={rng_ok}"


def check_quadratic_form_and_eigen_oracle():
    rng = np.random.default_rng(3)
    worst_form, worst_eig = math.inf, 0.0
    for d, lam in ((1, 1.0), (2, 0.25)):
        nd = _random_separated(rng, d, 0.8, 40, 40.0 if d == 1 else 6.0)
        g = kernel.assemble_gram(kernel.GaussianKernel(lam, d), nd)
        mu = kernel.min_eigenvalue_estimate(g)
        oracle = float(np.linalg.eigvalsh(g.entries)[0])
        worst_eig = max(worst_eig, abs(mu - oracle) / oracle)
        for _ in range(100):
            xi = rng.standard_normal(len(nd))
            worst_form = min(worst_form, xi @ g.entries @ xi - mu * (xi @ xi) * (1 - 1e-6))
    ok = worst_form >= 0 and worst_eig <= 1e-8
    return ok, f"form margin {worst_form:.2e}, eigen rel. error {worst_eig:.1e}"


def check_solve_residual():
    rng = np.random.default_rng(4)
    worst = 0.0
    nd = nodes.lattice_nodes(1, 1.5, 60)
    for lam in (1.0, 0.25):
        g = kernel.assemble_gram(kernel.GaussianKernel(lam, 1), nd)
        b = rng.standard_normal(len(nd))
        sol = kernel.solve_coefficients(g, b)
        cg = kernel.solve_coefficients(g, b, method="cg")
        worst = max(worst, sol.residual_inf / np.max(np.abs(b)))
        if np.max(np.abs(sol.coefficients - cg.coefficients)) > 1e-8 * max(1, np.max(np.abs(sol.coefficients))):
            return False, "Cholesky and CG disagree beyond 1e-8"
    return worst <= 1e-10, f"max relative residual {worst:.1e}"


def check_min_eigen_monotone():
    nd = nodes.lattice_nodes(1, 1.0, 10)
    vals = [kernel.min_eigenvalue_estimate(kernel.assemble_gram(kernel.GaussianKernel(lam, 1), nd))
            for lam in (2.0, 1.0, 0.5, 0.25, 0.125)]
    ok = all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    return ok, "min eigenvalues " + ", ".join(f"{v:.3e}" for v in vals)


# -- pwspace ---------------------------------------------------------------------

def check_inversion_consistency():
    rng = np.random.default_rng(5)
    worst = 0.0
    for k in range(20):
        d = 1 + k % 2
        f = pwspace.random_bandlimited(d, 0.8, 2, 100 + k, real_valued=bool(k % 3))
        x = rng.uniform(-10, 10, size=d)
        acc = 0.0
        for at in f.atoms:
            axes = [axis_rule([(at.lo[i], at.hi[i])], 128) for i in range(d)]
            grid = tensor_grid([a[0] for a in axes])
            w = tensor_weights([a[1] for a in axes])
            acc += at.coeff * np.sum(w * np.exp(1j * (grid @ (x - np.asarray(at.shift)))))
        acc /= (2 * math.pi) ** d
        ref = acc.real if f.real_valued else acc
        # relative to the sup bound so near-zeros of f do not dominate
        scale = math.sqrt(geometry.measure(geometry.SpectrumDomain.ball(0.8, d))) \
            / (2 * math.pi) ** (d / 2) * pwspace.pw_l2_norm(f)
        worst = max(worst, abs(pwspace.pw_eval(f, x) - ref) / max(abs(ref), scale))
    return worst <= 1e-9, f"max relative error {worst:.1e} (tol 1e-9)"


def check_plancherel_1d():
    worst = 0.0
    half = 2.0e4
    for seed in (1, 2, 3):
        f = pwspace.random_bandlimited(1, 0.9, 2, seed, real_valued=True)
        pts, w = axis_rule(partition(-half, half, [-40.0, 40.0], 2.0), 32)
        body = float(np.sum(w * np.abs(pwspace.pw_eval(f, pts[:, None])) ** 2))
        # |f|^2 ~ |P|^2 / (4 pi^2 x^2) beyond the window
        tail = 2 * analysis._far_field_power(f) / (4 * math.pi ** 2 * half)
        spatial = math.sqrt(body + tail)
        spectral = pwspace.pw_l2_norm(f)
        worst = max(worst, abs(spatial - spectral) / spectral)
    return worst <= 1e-6, f"max relative discrepancy {worst:.1e} (tol 1e-6)"


def check_support():
    rng = np.random.default_rng(6)
    bad = 0
    for d, beta in ((1, 0.5), (2, 0.3)):
        f = pwspace.random_bandlimited(d, beta, 3, 9, True)
        pts = rng.standard_normal((10_000, d))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        pts *= beta * (1 + rng.uniform(1e-9, 2.0, size=(10_000, 1)))
        bad += int(np.count_nonzero(pwspace.pw_spectrum(f, pts)))
    return bad == 0, f"{bad} nonzero spectrum values outside beta*B_2"


def check_bcs_bound():
    rng = np.random.default_rng(7)
    worst = 0.0
    for d, dom in ((1, geometry.SpectrumDomain.box([0.5])),
                   (2, geometry.SpectrumDomain.ball(0.4, 2))):
        for seed in range(4):
            f = pwspace.random_bandlimited(d, 0.4 if d == 2 else 0.5, 3, seed, bool(seed % 2))
            probes = rng.uniform(-6, 6, size=(500, d))
            ok, ratio = pwspace.sup_bound_check(f, dom, probes)
            worst = max(worst, ratio)
    return worst <= 1 + 1e-9, f"worst |f| / bound = {worst:.4f} (tol 1 + 1e-9)"


# -- interpolator ----------------------------------------------------------------

def _std_setup(d=1):
    if d == 1:
        nd = nodes.lattice_nodes(1, math.pi, 16)
    else:
        nd = nodes.lattice_nodes(2, math.pi * math.sqrt(2), 4)
    return nd


def check_linearity():
    nd = _std_setup()
    f = pwspace.random_bandlimited(1, 0.5, 2, 21, True)
    g = pwspace.random_bandlimited(1, 0.5, 2, 22, True)
    alpha = 1.7
    lam = 0.25
    af = build_interpolant(f, nd, lam).coefficients
    ag = build_interpolant(g, nd, lam).coefficients
    both = build_interpolant(f.scaled(alpha) + g, nd, lam).coefficients
    ref = alpha * af + ag
    err = float(np.max(np.abs(both - ref)) / np.max(np.abs(ref)))
    return err <= 1e-12, f"relative coefficient error {err:.1e} (tol 1e-12)"


def check_translation_covariance():
    nd = _std_setup()
    f = pwspace.random_bandlimited(1, 0.5, 2, 23, True)
    t = np.array([0.37])
    lam = 0.25
    i0 = build_interpolant(f, nd, lam)
    i1 = build_interpolant(f.translated(t), nd.translated(t), lam)
    xs = np.linspace(-20, 20, 41)[:, None]
    v0 = interp_eval(i0, xs)
    v1 = interp_eval(i1, xs + t)
    err = float(np.max(np.abs(v0 - v1)) / np.max(np.abs(v0)))
    return err <= 1e-12, f"relative discrepancy {err:.1e} (tol 1e-12)"


def check_interp_spectrum_quadrature():
    nd = nodes.lattice_nodes(1, 0.75, 32)
    f = pwspace.random_bandlimited(1, 0.5, 3, 24, True)
    it = build_interpolant(f, nd, 0.5)
    pts, w = axis_rule(partition(-60.0, 60.0, [], 1.0), 48)
    vals = interp_eval(it, pts[:, None])
    worst = 0.0
    for u in (0.0, 0.5, -0.5, 1.0, -1.0):
        quad = np.sum(w * vals * np.exp(-1j * u * pts))
        worst = max(worst, abs(quad - interp_spectrum(it, u)))
    return worst <= 1e-7, f"max absolute error {worst:.1e} (tol 1e-7)"


def check_spectrum_factorization_and_nodes():
    nd = _std_setup(2)
    f = pwspace.random_bandlimited(2, 0.3, 2, 25, True)
    it = build_interpolant(f, nd, 0.25)
    rng = np.random.default_rng(8)
    u = rng.uniform(-3, 3, size=(200, 2))
    bound = kernel.kernel_spectrum(kernel.GaussianKernel(0.25, 2), u) * np.sum(np.abs(it.coefficients))
    ok_bound = bool(np.all(np.abs(interp_spectrum(it, u)) <= bound * (1 + 1e-12)))
    samples = pwspace.pw_eval(f, nd.points)
    repro = float(np.max(np.abs(interp_eval(it, nd.points) - samples)) / np.max(np.abs(samples)))
    return ok_bound and repro <= 1e-10, f"bound holds={ok_bound}, node reproduction {repro:.1e}"


# -- analysis --------------------------------------------------------------------

def check_parseval():
    f = pwspace.random_bandlimited(1, 0.5, 2, 26, True)
    worst = 0.0
    for lam in (0.5, 0.125):
        it = build_interpolant(f, nodes.lattice_nodes(1, math.pi, 12), lam)
        a = analysis.interp_l2_norm_spectral(it)
        b = analysis.spatial_l2_norm_1d(it)
        worst = max(worst, abs(a - b) / b)
    return worst <= 1e-4, f"relative discrepancy {worst:.1e} (tol 1e-4)"


def check_error_decomposition():
    f = pwspace.random_bandlimited(1, 0.5, 2, 27, True)
    dom = geometry.SpectrumDomain.box([1.0])
    it = build_interpolant(f, nodes.lattice_nodes(1, math.pi, 12), 0.25)
    p = analysis.spectral_pieces(f, it, dom)
    lhs = p.l2_error(1) ** 2
    rhs = (p.in_band_error ** 2 + p.out_band_energy ** 2) / (2 * math.pi)
    oracle = analysis.spatial_l2_error_1d(f, it)
    err = abs(lhs - rhs) / lhs
    rel = abs(p.l2_error(1) - oracle) / oracle
    return err <= 1e-12 and rel <= 1e-4, f"decomposition defect {err:.1e}, vs spatial oracle {rel:.1e}"


def check_planted_rate():
    lams = [0.5, 0.3, 0.2, 0.1, 0.07]
    reps = [analysis.ErrorReport(lam, 1, 1.0, 1.0, sup_error=math.exp(-0.75 / (4 * lam)))
            for lam in lams]
    fit = analysis.fit_rate(reps, 1.0, 0.5)
    err = abs(fit.slope + 0.75)
    return err <= 1e-10 and fit.r_squared > 1 - 1e-12, f"slope error {err:.1e}"


def check_sweep_monotone():
    f = pwspace.random_bandlimited(1, 0.5, 3, 42, True)
    recipe = nodes.NodeRecipe(1, math.pi)
    lams = [0.5, 0.35, 0.25, 0.18, 0.125, 0.09, 0.0625]
    reps, _, _ = analysis.certified_sweep(f, recipe, lams, geometry.SpectrumDomain.box([1.0]))
    errs = [r.sup_error for r in reps]
    ok = all(r.ok for r in reps) and all(b < a for a, b in zip(errs, errs[1:]))
    return ok, "sup errors " + ", ".join(f"{e:.2e}" for e in errs)


CHECKS: List[Check] = [
    ("geometry.box_sandwich", check_box_sandwich),
    ("geometry.contains_symmetric", check_contains_symmetric),
    ("nodes.kadec_separation", check_kadec_separation),
    ("nodes.lattice_symmetry_determinism", check_lattice_symmetry_and_determinism),
    ("kernel.spectrum_vs_quadrature", check_kernel_spectrum_quadrature),
    ("kernel.gram_symmetry", check_gram_symmetry),
    ("kernel.quadratic_form_and_eigen_oracle", check_quadratic_form_and_eigen_oracle),
    ("kernel.solve_residual", check_solve_residual),
    ("kernel.min_eigen_monotone", check_min_eigen_monotone),
    ("pwspace.inversion_consistency", check_inversion_consistency),
    ("pwspace.plancherel", check_plancherel_1d),
    ("pwspace.support", check_support),
    ("pwspace.bcs_bound", check_bcs_bound),
    ("interpolator.linearity", check_linearity),
    ("interpolator.translation_covariance", check_translation_covariance),
    ("interpolator.spectrum_vs_quadrature", check_interp_spectrum_quadrature),
    ("interpolator.spectrum_bound_and_nodes", check_spectrum_factorization_and_nodes),
    ("analysis.parseval", check_parseval),
    ("analysis.error_decomposition", check_error_decomposition),
    ("analysis.sweep_monotone", check_sweep_monotone),
    ("analysis.planted_rate", check_planted_rate),
]


def run(fault: Optional[str] = None, echo=print) -> List[Tuple[str, bool, str]]:
    """Run every check; returns ``(name, passed, detail)`` triples."""
    global _fault
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; known: {', '.join(FAULTS)}")
    _fault = fault
    results = []
    try:
        for name, fn in CHECKS:
            try:
                ok, detail = fn()
            except Exception as exc:  # a crashing check is a failing check
                ok, detail = False, f"raised {type(exc).__name__}: {exc}"
            results.append((name, bool(ok), detail))
            if echo is not None:
                echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    finally:
        _fault = None
    return results
