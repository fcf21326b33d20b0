import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import DERIVED_B, rational_unions
from oracles import haar_unitary, resolvent_of_exponential, secular_roots, unit_interval_roots
from unionspec.boundary import BoundaryMatrix, transfer_matrix
from unionspec.funcspace import (
    PointFunction,
    exp_pair,
    exponential,
    momentum,
    sample,
)
from unionspec.geometry import IntervalUnion
from unionspec.spectral import (
    NULLSPACE_TOL,
    OnSpectrumError,
    SingularResolventError,
    SpectrumWindow,
    WindowTooLargeError,
    char_det,
    count_spectrum,
    eigenfunction,
    eigenphases,
    find_spectrum,
    grid_step,
    resolvent_apply,
    track_eigenphases,
)


def theta_b(theta):
    return np.array([[np.exp(2j * np.pi * theta)]])


class TestCharDet:
    def test_unit_interval(self, unit):
        for lam in (0.3, 1.0, -2.0):
            assert char_det(unit, [[1]], lam) == pytest.approx(1 - np.exp(-2j * np.pi * lam), abs=1e-14)

    def test_shifted_zeros(self, unit):
        B = theta_b(1 / 3)
        for k in (-2, 0, 5):
            assert abs(char_det(unit, B, 1 / 3 + k)) < 1e-13
        assert abs(char_det(unit, B, 0.0)) > 0.5

    def test_identity_two_interval(self, two):
        assert char_det(two, np.eye(2), 0) == 0

    @given(rational_unions(max_n=3), st.integers(0, 2**32 - 1), st.floats(-5, 5))
    def test_no_zeros_off_axis(self, omega, seed, x):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        for y in (0.1, -0.1):
            assert abs(char_det(omega, U, complex(x, y))) > 1e-4


class TestEigenphases:
    def test_examples(self, unit, two):
        assert eigenphases(unit, [[1]], 0.25) == pytest.approx([1.5 * np.pi])
        U = haar_unitary(np.random.default_rng(4), 3)
        omega = IntervalUnion([0, 1, 2, 3, 4, 6])
        expect = np.sort(np.mod(np.angle(np.linalg.eigvals(U)), 2 * np.pi))
        assert np.allclose(eigenphases(omega, U, 0), expect)
        assert np.allclose(eigenphases(two, np.eye(2), 1), [np.pi, np.pi])

    def test_range(self, two):
        th = eigenphases(two, DERIVED_B, 0.37)
        assert np.all((0 <= th) & (th < 2 * np.pi))

    def test_tracked_branches_decrease(self):
        omega = IntervalUnion([0, 1, 2, 2.5, 3, 3.25])
        U = haar_unitary(np.random.default_rng(7), 3)
        lams = np.linspace(0, 10, 2001)
        th = track_eigenphases(omega, U, lams)
        d = np.diff(th, axis=0) / np.diff(lams)[:, None]
        l = omega.ell
        assert np.all(d <= -2 * np.pi * l.min() + 1e-3)
        assert np.all(d >= -2 * np.pi * l.max() - 1e-3)

    def test_phase_sum_is_linear(self):
        omega = IntervalUnion([0, 1, 2, 2.5])
        U = haar_unitary(np.random.default_rng(8), 2)
        lams = np.linspace(-3, 3, 301)
        th = track_eigenphases(omega, U, lams)
        s = th.sum(axis=1)
        assert np.allclose(s - s[0], -2 * np.pi * float(omega.measure) * (lams - lams[0]), atol=1e-9)


class TestFindSpectrum:
    def test_unit_interval(self, unit):
        sw = find_spectrum(unit, [[1]], (-2.5, 2.5))
        assert list(sw.lambdas) == [-2, -1, 0, 1, 2]
        assert all(ep.multiplicity == 1 and np.allclose(ep.cvectors[0], [1]) for ep in sw)
        assert sw.count == 5

    @pytest.mark.parametrize("theta", [0.0, 1 / 3, 0.7])
    def test_unit_interval_theta(self, unit, theta):
        sw = find_spectrum(unit, theta_b(theta), (-10.5, 10.5))
        assert np.max(np.abs(sw.lambdas - unit_interval_roots(theta, -10.5, 10.5))) <= 1e-10

    def test_two_interval_derived(self, two):
        sw = find_spectrum(two, DERIVED_B, (-1, 3))
        assert np.allclose(sw.lambdas, [0, 0.5, 2, 2.5], atol=1e-12)
        for ep in sw:
            assert ep.multiplicity == 1
            assert np.allclose(ep.cvectors[0], ep.cvectors[0][0])

    def test_identity_multiplicity_two(self, two):
        sw = find_spectrum(two, np.eye(2), (-0.1, 0.1))
        assert len(sw) == 1 and sw.count == 2
        (ep,) = sw
        assert abs(ep.lam) < 1e-12
        C = np.array(ep.cvectors)
        assert np.allclose(np.abs(C), np.sqrt(2) * np.eye(2))

    @given(rational_unions(max_n=3, den=4), st.integers(0, 2**32 - 1))
    def test_matches_secular_oracle(self, omega, seed):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        lo, hi = -3.1, 3.1
        ref = secular_roots(omega.alpha, omega.beta, U, lo, hi, 1e-3)
        sw = find_spectrum(omega, U, (lo, hi))
        assert sw.count == len(ref)
        assert np.max(np.abs(sw.lambdas - ref), initial=0) <= 1e-9

    @given(rational_unions(max_n=4), st.integers(0, 2**32 - 1))
    def test_eigenpair_invariants(self, omega, seed):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        sw = find_spectrum(omega, U, (-4, 4))
        assert np.all(np.diff(sw.lambdas) > 0)
        for ep in sw:
            assert 1 <= ep.multiplicity <= omega.n
            C = np.array(ep.cvectors)
            Ea, Eb = np.exp(2j * np.pi * ep.lam * omega.alpha), np.exp(2j * np.pi * ep.lam * omega.beta)
            for c in C:
                assert np.linalg.norm(U @ (Ea * c) - Eb * c) <= 1e-9
            G = (C * omega.ell) @ C.conj().T
            assert np.allclose(G, np.eye(len(C)), atol=1e-10)

    @given(rational_unions(max_n=3), st.integers(0, 2**32 - 1))
    def test_eigenfunctions_orthonormal(self, omega, seed):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        fs = [eigenfunction(omega, ep, j) for ep in find_spectrum(omega, U, (-3, 3)) for j in range(ep.multiplicity)]
        G = np.array([[exp_pair(f, g) for g in fs] for f in fs])
        assert np.max(np.abs(G - np.eye(len(fs))), initial=0) <= 1e-9

    def test_threads_identical(self):
        omega = IntervalUnion([0, 1, 2, 2.5, 3, 3.75])
        U = haar_unitary(np.random.default_rng(11), 3)
        a = find_spectrum(omega, U, (-20, 20), threads=1)
        b = find_spectrum(omega, U, (-20, 20), threads=4)
        assert np.array_equal(a.lambdas, b.lambdas)
        assert all(np.array_equal(x.cvectors, y.cvectors) for x, y in zip(a, b))

    def test_degenerate_tolerance_rejected(self, unit):
        with pytest.raises(ValueError):
            find_spectrum(unit, [[1]], (0, 1), tol=grid_step(unit))
        with pytest.raises(ValueError):
            find_spectrum(unit, [[1]], (0, 1), tol=0)
        with pytest.raises(ValueError):
            find_spectrum(unit, [[1]], (1, 0))

    def test_window_too_large(self, unit):
        with pytest.raises(WindowTooLargeError) as info:
            find_spectrum(unit, [[1]], (-1e7, 1e7))
        assert info.value.parts >= 2

    def test_non_unitary_rejected(self, two):
        P = BoundaryMatrix.partial([[0, 0], [1, 0]], [[1], [0]], [[0], [1]])
        with pytest.raises(ValueError):
            find_spectrum(two, P, (0, 1))

    def test_serialization(self, two, tmp_path):
        sw = find_spectrum(two, np.eye(2), (-1.2, 1.2))
        sw.write(tmp_path / "s.csv", tmp_path / "s.json")
        rows = (tmp_path / "s.csv").read_text().splitlines()
        assert rows[0] == "lambda,multiplicity,c_re_1,c_re_2,c_im_1,c_im_2"
        assert len(rows) - 1 == sw.count
        back = SpectrumWindow.from_json(json.loads((tmp_path / "s.json").read_text()))
        assert np.array_equal(back.lambdas, sw.lambdas)
        assert [e.multiplicity for e in back] == [e.multiplicity for e in sw]


class TestEigenfunction:
    def test_unit(self, unit):
        ep = [e for e in find_spectrum(unit, [[1]], (2.5, 3.5))][0]
        f = eigenfunction(unit, ep)
        assert f.norm() == pytest.approx(1)
        assert f.at(0, 0.1) == pytest.approx(np.exp(6j * np.pi * 0.1))

    def test_two_interval_half(self, two):
        ep = [e for e in find_spectrum(two, DERIVED_B, (0.25, 0.75))][0]
        f = eigenfunction(two, ep)
        assert np.allclose(f.coeffs, [1, 1])
        assert f.lam == pytest.approx(0.5)

    def test_bad_index(self, two):
        ep = list(find_spectrum(two, DERIVED_B, (0.25, 0.75)))[0]
        with pytest.raises(IndexError):
            eigenfunction(two, ep, 1)


class TestCount:
    def test_examples(self, unit, two):
        assert count_spectrum(unit, [[1]], -0.5, 4.5) == 5
        assert count_spectrum(two, DERIVED_B, -0.25, 2.25) == 3

    def test_endpoint_on_spectrum(self, unit):
        with pytest.raises(OnSpectrumError):
            count_spectrum(unit, [[1]], 0, 2.5)

    @given(rational_unions(max_n=4), st.integers(0, 2**32 - 1), st.floats(-20, 0), st.floats(0.01, 15), st.floats(0.01, 15))
    def test_additivity(self, omega, seed, a, d1, d2):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        b, c = a + d1, a + d1 + d2
        assert count_spectrum(omega, U, a, b) + count_spectrum(omega, U, b, c) == count_spectrum(omega, U, a, c)

    @given(rational_unions(max_n=4), st.integers(0, 2**32 - 1), st.floats(1, 100))
    def test_weyl_bound(self, omega, seed, T):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        cnt = count_spectrum(omega, U, 0.0, T)
        assert abs(cnt - float(omega.measure) * T) <= omega.n + 1

    @given(rational_unions(max_n=3), st.integers(0, 2**32 - 1))
    def test_count_matches_find(self, omega, seed):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        sw = find_spectrum(omega, U, (-5.01, 5.01))
        assert sw.count == count_spectrum(omega, U, -5.01, 5.01)


class TestResolvent:
    def test_constant_hand_solution(self, unit):
        g = PointFunction(unit, lambda x: np.ones_like(x, dtype=complex), [1], [1])
        f = resolvent_apply(unit, [[1]], 0.5, sample(g, 32))
        assert np.max(np.abs(f.values + 2)) <= 1e-10
        assert np.allclose([f.at_alpha[0], f.at_beta[0]], [-2, -2])

    @given(
        rational_unions(max_n=3),
        st.integers(0, 2**32 - 1),
        st.floats(-2, 2),
        st.floats(-2, 2),
        st.floats(0.1, 3) | st.floats(-3, -0.1),
    )
    def test_exponential_oracle(self, omega, seed, mu, re, im):
        U = haar_unitary(np.random.default_rng(seed), omega.n)
        lam = complex(re, im)
        f = resolvent_apply(omega, U, lam, sample(exponential(omega, mu), 48))
        ref = resolvent_of_exponential(omega.alpha, omega.beta, U, lam, mu)
        for k in range(omega.n):
            assert np.allclose(f.values[k], ref(k, f.grid.nodes[k]), rtol=1e-9, atol=1e-9)
        assert np.allclose(U @ f.at_alpha, f.at_beta, atol=1e-9)

    def test_nonreal_residual(self, two):
        g = sample(exponential(two, 0.3), 48)
        f = resolvent_apply(two, DERIVED_B, 1j, g)
        r = momentum(f).values - 1j * f.values - g.values
        assert np.sqrt(np.sum(g.grid.weights * np.abs(r) ** 2)) <= 1e-8

    def test_eigenfunction_diagonal(self, two):
        ep = [e for e in find_spectrum(two, DERIVED_B, (1.9, 2.1))][0]
        eps = eigenfunction(two, ep)
        f = resolvent_apply(two, DERIVED_B, 0.3 + 0.2j, sample(eps, 32))
        assert np.allclose(f.values, sample(eps, 32).values / (ep.lam - (0.3 + 0.2j)), atol=1e-10)

    def test_resolvent_identity(self, two):
        g = sample(PointFunction(two, lambda x: np.cos(3 * x) + 0j), 48)
        lam, mu = 0.25, 1j
        Rl, Rm = resolvent_apply(two, DERIVED_B, lam, g), resolvent_apply(two, DERIVED_B, mu, g)
        RlRm = resolvent_apply(two, DERIVED_B, lam, Rm)
        defect = (Rl - Rm - RlRm.scale(lam - mu)).norm()
        assert defect <= 1e-8

    def test_singular(self, two):
        g = sample(exponential(two, 0.3), 16)
        with pytest.raises(SingularResolventError) as info:
            resolvent_apply(two, DERIVED_B, 0.5, g)
        assert info.value.smallest_singular_value <= NULLSPACE_TOL

    def test_wrong_set(self, two, unit):
        with pytest.raises(ValueError):
            resolvent_apply(two, DERIVED_B, 1j, sample(exponential(unit, 0.3), 16))

    def test_transfer_consistency(self, two):
        # c = (M - I)^{-1} A reproduces  B f(alpha) = f(beta) for random data
        rng = np.random.default_rng(5)
        vals = rng.standard_normal((2, 24)) + 0j
        from unionspec.funcspace import QuadGrid, SampledFunction

        g = SampledFunction(QuadGrid(two, 24), vals)
        f = resolvent_apply(two, DERIVED_B, 0.1 + 0.3j, g)
        assert np.allclose(DERIVED_B @ f.at_alpha, f.at_beta, atol=1e-12)
        M = transfer_matrix(two, DERIVED_B, 0.1 + 0.3j)
        assert np.linalg.svd(M - np.eye(2), compute_uv=False)[-1] > 1e-6


@given(st.integers(-200, 200), st.floats(0.05, 2), st.booleans())
def test_resolvent_translation_invariant(shift, y, upper):
    # nonreal lambda is never near the spectrum, wherever Omega sits
    omega = IntervalUnion([0, 1, 2, 4]).translate(shift)
    U = haar_unitary(np.random.default_rng(abs(shift)), 2)
    lam = complex(0.3, y if upper else -y)
    g = sample(PointFunction(omega, lambda x: np.ones_like(x, dtype=complex)), 32)
    f = resolvent_apply(omega, U, lam, g)
    base = resolvent_apply(omega.translate(-shift), U, lam, sample(PointFunction(omega.translate(-shift), lambda x: np.ones_like(x, dtype=complex)), 32))
    # translating Omega conjugates nothing for constant g: same values up to rounding
    assert np.allclose(f.values, base.values, rtol=1e-8, atol=1e-10)
