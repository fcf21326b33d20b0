import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import DERIVED_B, rational_unions
from oracles import exp_inner_product_quad, parseval_tail
from unionspec.funcspace import (
    GridMismatchError,
    PiecewiseExp,
    PointFunction,
    QuadGrid,
    SampledFunction,
    bump,
    cumulative_integral,
    domain_energy,
    exp_inner_product,
    exponential,
    fourier_coeffs,
    indicator,
    inner_product,
    integrate,
    momentum,
    norm,
    parseval_defect,
    read_sampled_csv,
    sample,
    write_sampled_csv,
)
from unionspec.geometry import IntervalUnion
from unionspec.spectral import find_spectrum


def identity_fn(omega):
    return PointFunction(omega, lambda x: np.asarray(x, dtype=complex), omega.alpha, omega.beta)


class TestGrid:
    @pytest.mark.parametrize("q", [2, 7, 32])
    def test_weights_sum_to_lengths(self, two, q):
        g = QuadGrid(two, q)
        assert g.nodes.shape == (2, q)
        assert np.all(g.weights > 0)
        assert np.allclose(g.weights.sum(axis=1), two.ell)
        assert np.all((g.nodes > two.alpha[:, None]) & (g.nodes < two.beta[:, None]))

    def test_rejects_bad_order(self, two):
        with pytest.raises(ValueError):
            QuadGrid(two, 1)

    def test_polynomial_exactness(self, two):
        val, err = integrate(two, lambda x: x**5, q=4)
        exact = (0.5**6 + 1.5**6 - 1) / 6
        assert val == pytest.approx(exact, abs=1e-14)
        assert err < 1e-2


class TestClosedForms:
    def test_examples(self, two):
        assert exp_inner_product(two, 0, 0) == 1
        assert abs(exp_inner_product(two, 0, 0.5)) < 1e-15
        assert abs(exp_inner_product(two, 0, 1)) == pytest.approx(2 / np.pi, abs=1e-15)
        e0, e1 = exponential(two, 0), exponential(two, 1)
        assert abs(inner_product(e0, e1)) == pytest.approx(2 / np.pi, abs=1e-15)

    @given(rational_unions(max_n=3), st.floats(-20, 20), st.floats(-20, 20))
    def test_against_adaptive_quadrature(self, omega, lam, mu):
        ref = exp_inner_product_quad(omega.alpha, omega.beta, lam, mu)
        assert abs(exp_inner_product(omega, lam, mu) - ref) <= 1e-9

    @given(rational_unions(max_n=3), st.floats(-10, 10), st.floats(-10, 10))
    def test_quadrature_consistency(self, omega, lam, mu):
        q = 64
        if abs(lam - mu) * float(omega.ell.max()) > q / 4:
            return
        f, g = exponential(omega, lam), exponential(omega, mu)
        assert abs(inner_product(sample(f, q), sample(g, q)) - exp_inner_product(omega, lam, mu)) <= 1e-12

    def test_tiny_frequency_difference(self, unit):
        # expm1 path: no cancellation for |lam - mu| ~ 1e-12
        assert exp_inner_product(unit, 1e-12, 0) == pytest.approx(1 + 1j * np.pi * 1e-12, abs=1e-15)

    def test_complex_frequencies(self, unit):
        # <e_i, e_i> = int exp(-4 pi x)
        val = exp_inner_product(unit, 1j, 1j)
        assert val == pytest.approx((1 - np.exp(-4 * np.pi)) / (4 * np.pi), rel=1e-13)

    def test_traces(self, two):
        f = PiecewiseExp(two, 0.5, [2, 3])
        assert np.allclose(f.at_alpha, [2, 3 * np.exp(1j * np.pi)])
        assert np.allclose(f.at_beta, [2 * np.exp(0.5j * np.pi), 3 * np.exp(1.5j * np.pi)])
        assert f(np.array([0.75]))[0] == 0

    def test_coefficient_shape(self, two):
        with pytest.raises(ValueError):
            PiecewiseExp(two, 0, [1, 2, 3])


class TestInnerProducts:
    @given(rational_unions(max_n=3), st.integers(0, 2**32 - 1))
    def test_conjugate_symmetry_and_linearity(self, omega, seed):
        rng = np.random.default_rng(seed)
        g = QuadGrid(omega, 16)
        f1, f2, h = (SampledFunction(g, rng.standard_normal((omega.n, 16)) + 1j * rng.standard_normal((omega.n, 16))) for _ in range(3))
        z = complex(*rng.standard_normal(2))
        assert inner_product(f1, h) == pytest.approx(np.conj(inner_product(h, f1)), abs=1e-12)
        lhs = inner_product(f1.scale(z) + f2, h)
        assert lhs == pytest.approx(z * inner_product(f1, h) + inner_product(f2, h), abs=1e-11)
        assert inner_product(f1, f1).real >= 0

    @given(rational_unions(max_n=3), st.lists(st.floats(-20, 20), min_size=1, max_size=12))
    def test_gram_positive_semidefinite(self, omega, lams):
        G = np.array([[exp_inner_product(omega, a, b) for b in lams] for a in lams])
        assert np.allclose(G, G.conj().T, atol=1e-13)
        assert np.linalg.eigvalsh(G).min() >= -1e-10

    def test_grid_mismatch(self, two):
        with pytest.raises(GridMismatchError):
            inner_product(sample(indicator(two, 0), 8), sample(indicator(two, 0), 16))
        with pytest.raises(GridMismatchError):
            sample(indicator(two, 0), 8) + sample(indicator(two, 0), 16)

    def test_mixed_types(self, two):
        f = sample(bump(two, 0), 64)
        closed = inner_product(f, indicator(two, 0))
        assert closed == pytest.approx(np.sum(f.grid.weights[0] * f.values[0]), abs=1e-15)

    def test_needs_a_sampled_operand(self, two):
        with pytest.raises(TypeError):
            inner_product(bump(two, 0), bump(two, 1))


class TestFourier:
    def test_unit_examples(self, unit):
        c = fourier_coeffs(exponential(unit, 3), [2, 3, 4])
        assert np.allclose(c, [0, 1, 0], atol=1e-15)
        x = sample(identity_fn(unit), 32)
        ks = np.array([0, 1, -2, 5])
        coef = fourier_coeffs(x, ks)
        expect = np.where(ks == 0, 0.5, 1j / (2 * np.pi * np.where(ks == 0, 1, ks)))
        assert np.allclose(coef, expect, atol=1e-14)

    def test_parseval_indicator(self, unit):
        assert parseval_defect(indicator(unit, 0), [0]) == pytest.approx(0, abs=1e-15)

    def test_parseval_linear_tail(self, unit):
        x = sample(identity_fn(unit), 64)
        d = parseval_defect(x, np.arange(-10, 11))
        assert abs(d - parseval_tail(10)) <= 1e-6
        assert d == pytest.approx(0.004821, abs=1e-6)

    def test_parseval_two_interval_bump_monotone(self, two):
        f = sample(bump(two, 0), 128)
        offs = lambda W: np.array(sorted({2 * k + s for k in range(-W, W + 1) for s in (0, 0.5) if abs(2 * k + s) <= W}))
        ds = [parseval_defect(f, offs(W)) for W in (2, 5, 10, 20)]
        assert all(a >= b - 1e-13 for a, b in zip(ds, ds[1:]))
        assert ds[-1] <= 1e-3

    def test_parseval_wrong_set(self, two, unit):
        with pytest.raises(GridMismatchError):
            parseval_defect(indicator(two, 0), [0], unit)


class TestCalculus:
    def test_momentum_of_exponential(self, two):
        f = sample(exponential(two, 1.25), 32)
        assert np.allclose(momentum(f).values, 1.25 * f.values, atol=1e-10)
        assert momentum(f).at_alpha is None

    def test_cumulative_integral(self, unit):
        f = sample(identity_fn(unit), 16)
        assert np.allclose(cumulative_integral(f), f.grid.nodes**2 / 2, atol=1e-15)

    def test_resample_and_pointwise(self, two):
        f = sample(exponential(two, 0.7), 40)
        g = f.resample(60)
        assert np.allclose(g.values, sample(exponential(two, 0.7), 60).values, atol=1e-12)
        assert f.at(1, 1.2) == pytest.approx(np.exp(2j * np.pi * 0.7 * 1.2), abs=1e-12)
        assert f.at(1, 1) == f.at_alpha[1]

    def test_bump_properties(self, two):
        b = bump(two, 1)
        assert np.all(b.at_alpha == 0) and np.all(b.at_beta == 0)
        xs = np.linspace(1, 1.5, 11)
        vals = np.array([b.at(1, x) for x in xs])
        assert vals.max().real == pytest.approx(1.0)
        assert vals[0] == 0 and vals[1] == 0  # outside the default margin
        with pytest.raises(ValueError):
            bump(two, 0, margin=0.3)


class TestDomainEnergy:
    def test_eigenfunction_energy(self, two):
        sw = find_spectrum(two, DERIVED_B, (-10, 10))
        ep = [e for e in sw if abs(e.lam - 2.5) < 1e-9][0]
        f = PiecewiseExp(two, ep.lam, ep.cvectors[0])
        assert domain_energy(f, sw, 10) == pytest.approx(6.25, rel=1e-9)

    def test_smooth_d0_function_bounded(self, two):
        sw = find_spectrum(two, DERIVED_B, (-60, 60))
        f = sample(bump(two, 0), 256)
        bound = norm(momentum(f)) ** 2
        es = [domain_energy(f, sw, N) for N in (10, 30, 60)]
        assert all(e <= bound * (1 + 1e-9) for e in es)
        gaps = [bound - e for e in es]
        assert gaps[0] > gaps[1] > gaps[2] >= 0
        assert gaps[2] < 1e-3 * bound

    def test_indicator_grows_linearly(self, two):
        sw = find_spectrum(two, DERIVED_B, (-100, 100))
        f = indicator(two, 0)
        e = {N: domain_energy(f, sw, N) for N in (25, 50, 100)}
        assert e[50] / e[25] == pytest.approx(2, rel=0.1)
        assert e[100] / e[50] == pytest.approx(2, rel=0.1)


class TestCsv:
    def test_round_trip(self, two, tmp_path):
        f = sample(exponential(two, 0.3), 8)
        write_sampled_csv(f, tmp_path / "f.csv", tmp_path / "f.json")
        g = read_sampled_csv(tmp_path / "f.csv", tmp_path / "f.json")
        assert np.array_equal(g.values, f.values)
        assert np.array_equal(g.at_alpha, f.at_alpha)
        assert g.grid.same_as(f.grid)

    def test_absent_traces(self, two, tmp_path):
        f = SampledFunction(QuadGrid(two, 4), np.ones((2, 4)))
        write_sampled_csv(f, tmp_path / "f.csv", tmp_path / "f.json")
        g = read_sampled_csv(tmp_path / "f.csv", tmp_path / "f.json")
        assert not g.has_traces

    def test_detects_wrong_grid(self, two, tmp_path):
        f = sample(exponential(two, 0.3), 8)
        write_sampled_csv(f, tmp_path / "f.csv", tmp_path / "f.json")
        text = (tmp_path / "f.csv").read_text().splitlines()
        cols = text[1].split(",")
        cols[1] = "0.123"
        text[1] = ",".join(cols)
        (tmp_path / "f.csv").write_text("\n".join(text) + "\n")
        with pytest.raises(GridMismatchError):
            read_sampled_csv(tmp_path / "f.csv", tmp_path / "f.json")

    def test_detects_missing_rows(self, two, tmp_path):
        f = sample(exponential(two, 0.3), 8)
        write_sampled_csv(f, tmp_path / "f.csv", tmp_path / "f.json")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        (tmp_path / "f.csv").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(GridMismatchError):
            read_sampled_csv(tmp_path / "f.csv", tmp_path / "f.json")

    def test_values_shape_validated(self, two):
        with pytest.raises(ValueError):
            SampledFunction(QuadGrid(two, 4), np.ones((2, 5)))
        with pytest.raises(ValueError):
            SampledFunction(QuadGrid(two, 4), np.ones((2, 4)), at_alpha=[1])


def test_sample_order_mismatch(two):
    f = sample(indicator(two, 0), 8)
    with pytest.raises(GridMismatchError):
        sample(f, 16)
    assert sample(f, 8) is f
    assert isinstance(IntervalUnion([0, 1]).measure, type(two.measure))
