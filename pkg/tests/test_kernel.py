import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwgauss.errors import FactorizationFailure, SizeCapExceeded
from pwgauss.kernel import (GaussianKernel, assemble_gram, kernel_eval, kernel_spectrum,
                            min_eigenvalue_estimate, read_gram, solve_coefficients, write_gram)
from pwgauss.nodes import NodeSet, lattice_nodes
from pwgauss.pwspace import pw_eval, random_bandlimited


def _nodes(*xs):
    return NodeSet(np.array(xs, dtype=float).reshape(len(xs), -1))


def test_kernel_eval_examples():
    assert kernel_eval(GaussianKernel(1.0), [0.0]) == 1.0
    assert kernel_eval(GaussianKernel(1.0), [1.0]) == pytest.approx(0.3678794412, abs=1e-10)
    assert kernel_eval(GaussianKernel(0.5, 2), [1.0, 1.0]) == pytest.approx(math.exp(-1), rel=1e-15)
    vals = kernel_eval(GaussianKernel(1.0, 2), np.zeros((3, 2)))
    np.testing.assert_array_equal(vals, 1.0)


def test_kernel_spectrum_closed_form_values():
    # (pi/lam)^(1/2) at u = 0
    assert kernel_spectrum(GaussianKernel(math.pi), [0.0]) == pytest.approx(1.0, rel=1e-15)
    assert kernel_spectrum(GaussianKernel(0.25), [0.0]) == pytest.approx(3.5449077, abs=1e-7)
    assert kernel_spectrum(GaussianKernel(0.25), [0.0]) == pytest.approx(math.sqrt(4 * math.pi))


@pytest.mark.parametrize("lam", [0.05, 0.3, 1.0, 4.0])
@pytest.mark.parametrize("d", [1, 2])
def test_kernel_spectrum_matches_quadrature(lam, d):
    half = 8.0 / math.sqrt(lam)
    x, w = np.polynomial.legendre.leggauss(64)
    edges = np.linspace(-half, half, 17)
    pts = np.concatenate([0.5 * (b - a) * x + 0.5 * (a + b) for a, b in zip(edges, edges[1:])])
    wts = np.concatenate([0.5 * (b - a) * w for a, b in zip(edges, edges[1:])])
    g1 = np.exp(-lam * pts ** 2)
    for u in ([0.0] * d, [0.7] * d, [1.5 * math.sqrt(lam)] + [0.2] * (d - 1)):
        # separable: product of 1-d transforms
        quad = np.prod([np.sum(wts * g1 * np.exp(-1j * ui * pts)) for ui in u])
        exact = kernel_spectrum(GaussianKernel(lam, d), u)
        assert abs(quad - exact) <= 1e-10 * exact


def test_gram_examples():
    k = GaussianKernel(1.0)
    assert assemble_gram(k, _nodes(3.0)).entries.tolist() == [[1.0]]
    g = assemble_gram(k, _nodes(0.0, 1.0)).entries
    e = math.exp(-1)
    np.testing.assert_allclose(g, [[1, e], [e, 1]], rtol=1e-15)
    g = assemble_gram(GaussianKernel(0.3, 2), lattice_nodes(2, 0.8, 2)).entries
    np.testing.assert_array_equal(np.diag(g), 1.0)
    np.testing.assert_array_equal(g, g.T)


def test_gram_cap_and_underflow_flush():
    with pytest.raises(SizeCapExceeded):
        assemble_gram(GaussianKernel(1.0), lattice_nodes(1, 1.0, 10), cap=10)
    g = assemble_gram(GaussianKernel(1.0), _nodes(0.0, 30.0)).entries
    assert g[0, 1] == 0.0  # exp(-900) is below the flush threshold


def test_solve_examples():
    k = GaussianKernel(1.0)
    r = solve_coefficients(assemble_gram(k, _nodes(2.0)), [0.7])
    assert r.coefficients.tolist() == [0.7]
    gram = assemble_gram(k, _nodes(0.0, 1.0))
    a = solve_coefficients(gram, [1.0, 0.0]).coefficients
    e = math.exp(-1)
    np.testing.assert_allclose(a, np.array([1.0, -e]) / (1 - e * e), rtol=1e-14)
    z = solve_coefficients(gram, [0.0, 0.0]).coefficients
    assert np.all(z == 0.0)


def test_solve_complex_samples():
    gram = assemble_gram(GaussianKernel(0.5), lattice_nodes(1, 1.0, 5))
    b = np.linspace(-1, 1, 11) + 1j * np.cos(np.arange(11))
    a = solve_coefficients(gram, b).coefficients
    np.testing.assert_allclose(gram.entries @ a, b, atol=1e-14)


def test_cholesky_and_cg_agree():
    rng = np.random.default_rng(1)
    gram = assemble_gram(GaussianKernel(0.4), lattice_nodes(1, 1.2, 40))
    b = rng.standard_normal(81)
    a1 = solve_coefficients(gram, b).coefficients
    a2 = solve_coefficients(gram, b, method="cg").coefficients
    assert np.max(np.abs(a1 - a2)) <= 1e-8 * np.max(np.abs(a1))
    with pytest.raises(ValueError):
        solve_coefficients(gram, b, method="lu")


def test_factorization_failure_carries_context():
    gram = assemble_gram(GaussianKernel(0.01), lattice_nodes(1, 0.5, 40))
    with pytest.raises(FactorizationFailure) as info:
        solve_coefficients(gram, np.ones(81))
    exc = info.value
    assert exc.lam == 0.01 and exc.n_nodes == 81 and exc.separation == pytest.approx(0.5)


def test_condition_cap_enforced():
    gram = assemble_gram(GaussianKernel(0.5), lattice_nodes(1, 1.0, 10))
    with pytest.raises(FactorizationFailure):
        gram.factorize(cond_cap=1.5)


def test_min_eigenvalue_examples():
    k = GaussianKernel(1.0)
    assert min_eigenvalue_estimate(assemble_gram(k, _nodes(0.0))) == 1.0
    assert min_eigenvalue_estimate(assemble_gram(k, _nodes(0.0, 1.0))) == \
        pytest.approx(1 - math.exp(-1), rel=1e-14)
    g3 = assemble_gram(k, _nodes(0.0, 1.0, 2.0))
    # characteristic polynomial roots of the 3x3 Toeplitz matrix
    a, b = math.exp(-1), math.exp(-4)
    roots = np.roots(np.poly(np.array([[1, a, b], [a, 1, a], [b, a, 1]])))
    assert min_eigenvalue_estimate(g3) == pytest.approx(min(roots.real), rel=1e-10)


def test_gram_dump_round_trip(tmp_path):
    gram = assemble_gram(GaussianKernel(0.7, 2), lattice_nodes(2, 1.0, 1))
    path = write_gram(gram, tmp_path / "gram.bin")
    raw = path.read_bytes()
    assert raw[:8] == b"PWGRAM01"
    assert int.from_bytes(raw[8:16], "little") == 9
    assert len(raw) == 16 + 81 * 8
    np.testing.assert_array_equal(read_gram(path).entries, gram.entries)


def _random_separated(rng, d, q, n, box):
    pts = []
    tries = 0
    while len(pts) < n and tries < 100_000:
        tries += 1
        p = rng.uniform(-box, box, size=d)
        if all(np.linalg.norm(p - x) >= q for x in pts):
            pts.append(p)
    return NodeSet(np.array(pts))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(3, 64), st.sampled_from([1.0, 0.25]),
       st.integers(0, 2**32 - 1))
def test_min_eigenvalue_positive_and_matches_dense_oracle(d, n, lam, seed):
    rng = np.random.default_rng(seed)
    nodes = _random_separated(rng, d, 0.8, n, 2.0 * n if d == 1 else 2.0 * math.sqrt(n))
    gram = assemble_gram(GaussianKernel(lam, d), nodes)
    try:
        mu = min_eigenvalue_estimate(gram)
    except FactorizationFailure:
        return  # beyond the condition cap: refused, not degraded
    oracle = float(np.linalg.eigvalsh(gram.entries)[0])
    assert mu > 0
    assert abs(mu - oracle) <= 1e-8 * oracle
    xi = rng.standard_normal((100, len(nodes)))
    forms = np.einsum("ij,jk,ik->i", xi, gram.entries, xi)
    assert np.all(forms >= mu * np.sum(xi * xi, axis=1) * (1 - 1e-6))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.floats(0.5, 3.2), st.floats(0.05, 2.0), st.integers(0, 2**32 - 1))
def test_solve_residual_bandlimited_samples(d, q, lam, seed):
    nodes = lattice_nodes(d, q, min(int(30 / q), 500) if d == 1 else 8)
    gram = assemble_gram(GaussianKernel(lam, d), nodes)
    f = random_bandlimited(d, 0.5, 3, seed, True)
    b = pw_eval(f, nodes.points)
    try:
        r = solve_coefficients(gram, b)
    except FactorizationFailure:
        return  # refused beyond the condition cap
    assert r.residual_inf <= 1e-10 * np.max(np.abs(b))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.floats(0.5, 3.2), st.floats(0.05, 2.0), st.integers(0, 2**32 - 1))
def test_solve_residual_generic_samples(d, q, lam, seed):
    # for arbitrary data the coefficients can be huge; storing them in double
    # already costs about eps * |G|_inf * |a|_inf of residual, so the test
    # asserts the fixed tolerance or backward stability, whichever is larger
    nodes = lattice_nodes(d, q, min(int(30 / q), 500) if d == 1 else 8)
    gram = assemble_gram(GaussianKernel(lam, d), nodes)
    b = np.random.default_rng(seed).standard_normal(len(nodes))
    try:
        r = solve_coefficients(gram, b)
    except FactorizationFailure:
        return
    floor = 8 * np.finfo(float).eps * np.max(np.sum(np.abs(gram.entries), axis=1)) \
        * np.max(np.abs(r.coefficients))
    assert r.residual_inf <= max(1e-10 * np.max(np.abs(b)), floor)
    if r.condition_estimate <= 1e6:
        assert r.residual_inf <= 1e-10 * np.max(np.abs(b))


def test_min_eigenvalue_nonincreasing_as_lambda_decreases():
    nodes = lattice_nodes(1, 1.0, 10)
    vals = [min_eigenvalue_estimate(assemble_gram(GaussianKernel(lam), nodes))
            for lam in (2.0, 1.0, 0.5, 0.25, 0.125)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
