import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfc

from pwgauss.analysis import (CSV_COLUMNS, ErrorReport, TruncationPolicy, TruncationWarning,
                              SweepFailure, certified_sweep, fit_rate, interp_l2_norm_spectral,
                              l2_error, lambda_sweep, out_of_band_energy, read_reports,
                              spatial_l2_error_1d, spatial_l2_norm_1d, spectral_pieces,
                              sup_error, theoretical_exponent, truncation_study, write_reports)
from pwgauss.errors import HypothesisViolation
from pwgauss.geometry import SpectrumDomain
from pwgauss.interpolator import Interpolant, build_interpolant, interp_eval
from pwgauss.nodes import NodeRecipe, NodeSet, lattice_nodes
from pwgauss.pwspace import Atom, BandlimitedFunction, pw_eval, random_bandlimited, zero_function

Z1 = SpectrumDomain.box([1.0])


def std_f():
    return random_bandlimited(1, 0.5, 3, 42, True)


def sinc_f():
    return BandlimitedFunction(1, 1.0, (Atom((-1.0,), (1.0,), (0.0,), math.pi),), True)


# -- sup_error ------------------------------------------------------------------

def test_sup_error_at_nodes_and_zero():
    f = std_f()
    nd = lattice_nodes(1, math.pi, 16)
    it = build_interpolant(f, nd, 0.25)
    s = pw_eval(f, nd.points)
    err = np.max(np.abs(pw_eval(f, nd.points) - interp_eval(it, nd.points)))
    assert err <= 1e-10 * np.max(np.abs(s))
    z = build_interpolant(zero_function(1), nd, 0.25)
    assert sup_error(zero_function(1), z, 10.0) == 0.0


def test_sup_error_grid_resolution_against_finer_grid():
    f = sinc_f()
    it = build_interpolant(f, lattice_nodes(1, math.pi, 64), 0.25)
    coarse = sup_error(f, it, 10.0)
    fine = sup_error(f, it, 10.0, density=20481)
    assert abs(coarse - fine) <= 0.01 * fine


def test_sup_error_unsafe_window_warns():
    f = std_f()
    it = build_interpolant(f, lattice_nodes(1, math.pi, 4), 0.25)
    with pytest.warns(TruncationWarning):
        sup_error(f, it, 10.0)


def test_sup_error_2d_default_grid():
    f = random_bandlimited(2, 0.3, 2, 1, True)
    nd = lattice_nodes(2, math.pi * math.sqrt(2), 4)
    it = build_interpolant(f, nd, 0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        e = sup_error(f, it, 8.0)
    g = np.linspace(-8, 8, 257)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    assert e == pytest.approx(np.max(np.abs(pw_eval(f, pts) - interp_eval(it, pts))), rel=1e-15)


# -- spectral error functionals -----------------------------------------------

def test_l2_error_zero():
    it = build_interpolant(zero_function(1), lattice_nodes(1, 1.0, 4), 0.5)
    assert l2_error(zero_function(1), it, Z1) == 0.0
    assert out_of_band_energy(it, Z1) == 0.0


def test_l2_error_of_zero_target_is_interpolant_norm():
    # ||0 - I|| = ||I||, checked against spatial quadrature of I
    it = build_interpolant(std_f(), lattice_nodes(1, math.pi, 12), 0.25)
    assert l2_error(zero_function(1, 0.5), it, Z1) == pytest.approx(spatial_l2_norm_1d(it),
                                                                     rel=1e-10)


@pytest.mark.parametrize("lam", [0.5, 0.25, 0.125, 0.0625])
def test_l2_error_matches_spatial_quadrature(lam):
    f = std_f()
    it = build_interpolant(f, NodeRecipe(1, math.pi).build(40 * math.pi), lam)
    spectral = l2_error(f, it, Z1)
    spatial = spatial_l2_error_1d(f, it)
    assert spectral == pytest.approx(spatial, rel=1e-4)


def test_error_decomposition():
    f = std_f()
    it = build_interpolant(f, lattice_nodes(1, math.pi, 20), 0.18)
    p = spectral_pieces(f, it, Z1)
    lhs = l2_error(f, it, Z1) ** 2
    assert lhs == pytest.approx((p.in_band_error ** 2 + p.out_band_energy ** 2) / (2 * math.pi),
                                rel=1e-12)


def test_parseval_spectral_vs_spatial():
    for lam in (1.0, 0.25, 0.0625):
        it = build_interpolant(std_f(), lattice_nodes(1, math.pi, 16), lam)
        assert interp_l2_norm_spectral(it) == pytest.approx(spatial_l2_norm_1d(it), rel=1e-4)


@pytest.mark.parametrize("lam", [0.5, 0.2, 0.05])
def test_out_of_band_single_node_closed_form(lam):
    it = Interpolant(NodeSet(np.zeros((1, 1))), lam, np.array([1.0]))
    # (pi/lam) int_{|u|>1} exp(-u^2/(2 lam)) du
    exact = (math.pi / lam) * math.sqrt(2 * math.pi * lam) * erfc(1 / math.sqrt(2 * lam))
    for dom in (SpectrumDomain.ball(1.0, 1), Z1):
        assert out_of_band_energy(it, dom) ** 2 == pytest.approx(exact, rel=1e-10)


def test_out_of_band_single_node_disk():
    lam = 0.3
    it = Interpolant(NodeSet(np.zeros((1, 2))), lam, np.array([1.0]))
    # (pi/lam)^2 int_{|u|>r} exp(-|u|^2/(2 lam)) du = (pi/lam)^2 2 pi lam exp(-r^2/(2 lam))
    r = 0.9
    exact = (math.pi / lam) ** 2 * 2 * math.pi * lam * math.exp(-r * r / (2 * lam))
    assert out_of_band_energy(it, SpectrumDomain.ball(r, 2)) ** 2 == pytest.approx(exact, rel=1e-9)


def test_out_of_band_decreases_when_lambda_halves():
    f = std_f()
    nd = lattice_nodes(1, math.pi, 40)
    vals = [out_of_band_energy(build_interpolant(f, nd, lam), Z1)
            for lam in (0.5, 0.25, 0.125, 0.0625)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_ball_and_box_total_energy_agree_in_2d():
    f = random_bandlimited(2, 0.5, 2, 3, True)
    it = build_interpolant(f, lattice_nodes(2, math.pi * math.sqrt(2), 4), 0.25)
    # F f vanishes outside both regions, so the split must not change the total
    fb = l2_error(f, it, SpectrumDomain.box([0.7, 0.7]))
    fd = l2_error(f, it, SpectrumDomain.ball(0.9, 2))
    assert fb == pytest.approx(fd, rel=1e-8)


def test_support_violation_raises():
    it = build_interpolant(std_f(), lattice_nodes(1, math.pi, 8), 0.5)
    with pytest.raises(HypothesisViolation):
        l2_error(std_f(), it, SpectrumDomain.box([0.1]))


def test_ball_in_3d_not_implemented():
    f = random_bandlimited(3, 0.3, 1, 0, True)
    it = build_interpolant(f, lattice_nodes(3, 4.0, 1), 0.5)
    with pytest.raises(NotImplementedError):
        l2_error(f, it, SpectrumDomain.ball(0.9, 3))


# -- sweeps -------------------------------------------------------------------

def test_sweep_duplicated_lambda_gives_identical_reports():
    reps = lambda_sweep(std_f(), NodeRecipe(1, math.pi, 32), [0.25] * 4, Z1)
    assert all(r == reps[0] for r in reps)


def test_sweep_zero_function():
    reps = lambda_sweep(zero_function(1, 0.5), NodeRecipe(1, math.pi, 16),
                        [0.5, 0.25, 0.125, 0.0625], Z1)
    for r in reps:
        assert (r.sup_error, r.l2_error, r.in_band_error, r.out_band_energy) == (0, 0, 0, 0)


def test_sweep_standard_configuration_monotone():
    lams = [0.5, 0.35, 0.25, 0.18, 0.125, 0.09, 0.0625]
    reps, radius, rows = certified_sweep(std_f(), NodeRecipe(1, math.pi), lams, Z1)
    errs = [r.sup_error for r in reps]
    assert all(r.ok for r in reps)
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert radius >= 2 * reps[0].W


def test_sweep_validation_and_failures():
    with pytest.raises(ValueError):
        lambda_sweep(std_f(), NodeRecipe(1, math.pi, 8), [0.5, 0.25, 0.125], Z1)
    with pytest.raises(ValueError):
        lambda_sweep(std_f(), NodeRecipe(1, math.pi, 8), [0.5, 0.25, 0.125, 0.0], Z1)
    reps = lambda_sweep(std_f(), NodeRecipe(1, 0.5, 40), [1.0, 0.5, 0.01, 0.005], Z1)
    assert [r.ok for r in reps] == [True, True, False, False]
    assert reps[2].status.startswith("failed")
    with pytest.raises(SweepFailure):
        lambda_sweep(std_f(), NodeRecipe(1, 0.5, 40), [0.01, 0.009, 0.008, 0.007], Z1)


def test_sweep_threads_do_not_change_results():
    args = (std_f(), NodeRecipe(1, math.pi), [0.5, 0.25, 0.125, 0.0625], Z1)
    kw = dict(window=10 * math.pi, policy=TruncationPolicy(40 * math.pi))
    assert lambda_sweep(*args, **kw, threads=1) == lambda_sweep(*args, **kw, threads=3)


def test_truncation_policy():
    p = TruncationPolicy(20 * math.pi, 12.0)
    assert p.radius(0.5) == 20 * math.pi
    assert p.radius(1e-3) == pytest.approx(12 / math.sqrt(1e-3))
    assert TruncationPolicy().radius(0.5) is None


# -- reports -------------------------------------------------------------------

def test_report_csv_round_trip(tmp_path):
    reps = lambda_sweep(std_f(), NodeRecipe(1, math.pi, 16), [0.5, 0.25, 0.125, 0.0625], Z1)
    path = write_reports(reps, tmp_path / "errors.csv")
    assert path.read_text().splitlines()[0] == \
        "lambda,N,R,W,sup_error,l2_error,in_band_error,out_band_energy,coeff_l2,cond_est,status"
    assert list(CSV_COLUMNS) == path.read_text().splitlines()[0].split(",")
    assert read_reports(path) == reps


# -- rate fit -------------------------------------------------------------------

def synthetic(v, lams=(0.5, 0.35, 0.25, 0.18, 0.125)):
    return [ErrorReport(lam, 1, 1.0, 1.0, sup_error=v(lam), l2_error=v(lam)) for lam in lams]


def test_fit_planted_exponent():
    fit = fit_rate(synthetic(lambda lam: math.exp(-0.75 / (4 * lam))), 1.0, 0.5)
    assert fit.slope == pytest.approx(-0.75, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.theoretical_exponent == -0.75 and fit.verdict


def test_fit_constant_error():
    fit = fit_rate(synthetic(lambda lam: 0.3), 1.0, 0.5)
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert not fit.verdict


def test_fit_requires_four_points_and_drops_zero():
    reps = synthetic(lambda lam: math.exp(-1 / lam))
    reps[0].sup_error = 0.0
    fit = fit_rate(reps, 1.0, 0.5)
    assert fit.n_points == 4 and any("exact recovery" in n for n in fit.notes)
    reps[1].sup_error = 0.0
    with pytest.raises(ValueError):
        fit_rate(reps, 1.0, 0.5)


def test_fit_skips_failed_points():
    reps = synthetic(lambda lam: math.exp(-2 / lam), lams=(0.5, 0.4, 0.3, 0.2, 0.1))
    reps[-1].status = "failed: cond"
    fit = fit_rate(reps, 1.0, 0.5)
    assert fit.n_points == 4 and fit.slope == pytest.approx(-8.0)


def test_theoretical_exponent():
    assert theoretical_exponent(1.0, 0.5) == -0.75
    assert theoretical_exponent(1 / math.sqrt(2), 0.3) == pytest.approx(0.59)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 0), st.floats(-3, 3),
       st.lists(st.floats(0.05, 2.0), min_size=4, max_size=8, unique=True))
def test_fit_recovers_planted_slope(slope, intercept, lams):
    if max(lams) / min(lams) < 1.2:
        return
    reps = [ErrorReport(lam, 1, 1.0, 1.0, sup_error=math.exp(intercept + slope / (4 * lam)))
            for lam in lams]
    fit = fit_rate(reps, 1.0, 0.5)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert 0.0 <= fit.r_squared <= 1.0
    assert fit.verdict == (fit.slope <= -0.75 + 0.15)


# -- truncation ---------------------------------------------------------------

def test_truncation_study():
    f = std_f()
    rec = NodeRecipe(1, math.pi)
    rows = truncation_study(f, 0.125, [20.0, 40 * math.pi, 80 * math.pi, 160 * math.pi],
                            10 * math.pi, rec)
    assert not rows[0].valid and all(r.valid for r in rows[1:])
    # N grows linearly with R for a 1-d lattice: N = 2 floor(R/h) + 1
    assert [r.N for r in rows[1:]] == [81, 161, 321]
    assert abs(rows[3].sup_error - rows[2].sup_error) <= 0.05 * rows[2].sup_error
    with pytest.raises(ValueError):
        truncation_study(f, 0.125, [40.0, 20.0], 10.0, rec)
