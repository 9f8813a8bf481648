import numpy as np
import pytest

from oracles import spin_bath_coherence_factor, volterra_amplitude

from nmflow.dynamics import evolve_state
from nmflow.exceptions import NumericalError
from nmflow.models import (
    JCParams,
    SpinBathParams,
    jc_amplitude,
    jc_decay_exponent,
    jc_generator,
    jc_rate,
    semigroup_generator,
    spinbath_f,
    spinbath_generator,
    spinbath_rate,
    spinbath_trace_distance,
)
from nmflow.states import DensityMatrix, state_rng, trace_distance

PLUS_X = DensityMatrix(0.5 * np.array([[1, 1], [1, 1]], dtype=complex))
MINUS_X = DensityMatrix(0.5 * np.array([[1, -1], [-1, 1]], dtype=complex))
EXCITED = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
GROUND = DensityMatrix(np.diag([0.0, 1.0]).astype(complex))


class TestCavityAmplitude:
    def test_initial_conditions(self):
        for delta in (0.0, 2.0, 5.0):
            params = JCParams(delta=delta)
            assert jc_amplitude(params, 0.0) == pytest.approx(1.0, abs=1e-14)
            assert jc_rate(params, 0.0) == pytest.approx(0.0, abs=1e-12)
            assert jc_decay_exponent(params, 0.0) == pytest.approx(0.0, abs=1e-14)

    def test_weak_coupling_resonant_limit(self):
        # At vanishing coupling the amplitude barely decays.
        params = JCParams(gamma0=1e-8, delta=0.0)
        g = jc_amplitude(params, 5.0)
        assert abs(g - 1.0) < 1e-6

    def test_matches_memory_kernel_oracle(self):
        for delta in (0.0, 5.0):
            params = JCParams(gamma0=0.01, lam=1.0, delta=delta)
            times, g_oracle = volterra_amplitude(0.01, 1.0, delta, 20.0, 100_000)
            g_ours = jc_amplitude(params, times)
            assert np.max(np.abs(g_ours - g_oracle)) < 1e-8

    def test_double_root_branch_is_continuous(self):
        # gamma0 = lam/2 makes the characteristic roots collide at delta=0.
        on = JCParams(gamma0=0.5, lam=1.0, delta=0.0)
        near = JCParams(gamma0=0.5 * (1.0 + 1e-10), lam=1.0, delta=0.0)
        t = np.linspace(0.0, 10.0, 101)
        assert np.max(np.abs(jc_amplitude(on, t) - jc_amplitude(near, t))) < 1e-8

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            jc_amplitude(JCParams(), -1.0)


class TestCavityRate:
    def test_resonant_rate_stays_nonnegative(self):
        params = JCParams(delta=0.0)
        rates = jc_rate(params, np.linspace(0.0, 50.0, 2001))
        assert rates.min() >= -1e-12

    def test_detuned_rate_has_negative_windows(self):
        params = JCParams(delta=5.0)
        rates = jc_rate(params, np.linspace(0.0, 20.0, 4001))
        assert rates.min() < -1e-4
        assert rates.max() > 0.0

    def test_exponent_is_integral_of_rate(self):
        # Gamma(t) = int_0^t gamma via high-resolution trapezoid quadrature.
        params = JCParams(delta=5.0)
        t = np.linspace(0.0, 20.0, 200_001)
        quad = np.concatenate(
            [[0.0], np.cumsum(0.5 * (t[1] - t[0]) * (jc_rate(params, t)[1:]
                                                     + jc_rate(params, t)[:-1]))]
        )
        assert np.max(np.abs(jc_decay_exponent(params, t) - quad)) < 1e-7

    def test_exponent_nonnegative(self):
        for delta in (0.0, 3.0, 8.0):
            gam = jc_decay_exponent(JCParams(delta=delta), np.linspace(0.0, 30.0, 501))
            assert gam.min() >= -1e-12


class TestCavityGenerator:
    def test_evolution_matches_analytic_map(self):
        # The generator built from gamma(t) must reproduce its exact solution:
        # excited population scales by |G|^2, coherences by |G| (the generator
        # carries no Hamiltonian part, so the phase of G never appears).
        params = JCParams(delta=5.0)
        gen = jc_generator(params)
        grid = np.arange(0.0, 10.0 + 1e-12, 1e-3)
        rng = state_rng(99)
        a = rng.normal() + 1j * rng.normal()
        vec = np.array([a, 1.0])
        vec /= np.linalg.norm(vec)
        rho0 = DensityMatrix(np.outer(vec, vec.conj()))
        states = evolve_state(gen, rho0, grid)
        worst = 0.0
        for t, s in zip(grid[::200], states[::200]):
            g = jc_amplitude(params, t)
            exact = np.empty((2, 2), dtype=complex)
            exact[0, 0] = rho0.matrix[0, 0] * abs(g) ** 2
            exact[0, 1] = rho0.matrix[0, 1] * abs(g)
            exact[1, 0] = np.conj(exact[0, 1])
            exact[1, 1] = 1.0 - exact[0, 0]
            worst = max(worst, np.max(np.abs(s.matrix - exact)))
        assert worst < 1e-6

    def test_trace_distance_decay_law_for_antipodal_pair(self):
        # For the excited/ground pair D(t) = exp(-Gamma(t)) and its slope is
        # -gamma(t) exp(-Gamma(t)); checked against the integrated dynamics.
        params = JCParams(delta=5.0)
        gen = jc_generator(params)
        grid = np.arange(0.0, 15.0 + 1e-12, 1e-3)
        s1 = evolve_state(gen, EXCITED, grid)
        s2 = evolve_state(gen, GROUND, grid)
        d = np.array([trace_distance(a, b) for a, b in zip(s1, s2)])
        expected = np.exp(-jc_decay_exponent(params, grid))
        assert np.max(np.abs(d - expected)) < 1e-6
        sigma = np.gradient(d, grid, edge_order=2)
        slope = -jc_rate(params, grid) * expected
        assert np.max(np.abs(sigma - slope)) < 5e-6

    def test_distance_growth_exactly_where_rate_is_negative(self):
        params = JCParams(delta=5.0)
        t = np.linspace(0.05, 20.0, 3999)
        sigma = -jc_rate(params, t) * np.exp(-jc_decay_exponent(params, t))
        eps = 1e-9 * np.max(np.abs(sigma))
        grow = sigma > eps
        shrink_rate = jc_rate(params, t) > eps
        # sigma > 0 iff gamma < 0 (the exponential factor is positive).
        assert np.array_equal(grow, jc_rate(params, t) < -0.0)
        assert not np.any(grow & shrink_rate)

    def test_clamped_variant_never_negative(self):
        gen = jc_generator(JCParams(delta=5.0), nonnegative_rate=True)
        rate = gen.channels[0][1]
        assert np.min(rate(np.linspace(0.0, 20.0, 2001))) >= 0.0


class TestSpinBath:
    def test_f_examples(self):
        params = SpinBathParams(coupling_a=1.0, n_spins=2)
        assert spinbath_f(params, 0.0) == pytest.approx(1.0)
        # cos(pi/2) = 0 at t = pi/4.
        assert spinbath_f(params, np.pi / 4) == pytest.approx(0.0, abs=1e-15)
        # One full period later everything revives.
        assert spinbath_f(params, np.pi / 2) == pytest.approx(1.0, abs=1e-12)

    def test_odd_bath_preserves_sign_flips(self):
        params = SpinBathParams(coupling_a=1.0, n_spins=3)
        assert spinbath_f(params, np.pi / 2) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_brute_force_bath_average(self):
        for n_spins in (1, 2, 5, 10):
            params = SpinBathParams(coupling_a=0.7, n_spins=n_spins)
            for t in (0.1, 0.5, 1.3):
                oracle = spin_bath_coherence_factor(0.7, n_spins, t)
                assert abs(oracle.imag) < 1e-10
                assert spinbath_f(params, t) == pytest.approx(oracle.real, abs=1e-10)

    def test_distance_consistent_with_trace_distance(self):
        params = SpinBathParams(coupling_a=1.0, n_spins=4)
        rng = np.random.default_rng(31)
        checked = 0
        while checked < 1000:
            a = rng.uniform(-1.0, 1.0)
            b = (rng.uniform(-0.5, 0.5) + 1j * rng.uniform(-0.5, 0.5))
            t = rng.uniform(0.0, 3.0)
            # a and b are the entrywise differences of the initial pair.
            half_diff = 0.5 * np.array([[a, b], [np.conj(b), -a]])
            m1 = 0.5 * np.eye(2, dtype=complex) + half_diff
            m2 = 0.5 * np.eye(2, dtype=complex) - half_diff
            try:
                DensityMatrix(m1)
                DensityMatrix(m2)
            except ValueError:
                continue  # sampled outside the Bloch ball
            f = spinbath_f(params, t)
            e1, e2 = m1.copy(), m2.copy()
            for m in (e1, e2):
                m[0, 1] *= f
                m[1, 0] *= f
            direct = trace_distance(DensityMatrix(e1), DensityMatrix(e2))
            closed = spinbath_trace_distance(params, a, b, t)
            assert abs(direct - closed) < 1e-12
            checked += 1

    def test_rate_errors_at_pole(self):
        params = SpinBathParams(coupling_a=1.0, n_spins=20)
        with pytest.raises(NumericalError, match="pole"):
            spinbath_rate(params, np.pi / 4)

    def test_rate_sign_tracks_distance_slope(self):
        # D for a pure-coherence pair shrinks while tan > 0 and revives while
        # tan < 0; check gamma against a finite-difference slope of D.
        params = SpinBathParams(coupling_a=1.0, n_spins=6)
        for t in (0.2, 0.6, 1.0, 1.4):
            gamma = spinbath_rate(params, t)
            hstep = 1e-6
            dplus = spinbath_trace_distance(params, 0.0, 1.0, t + hstep)
            dminus = spinbath_trace_distance(params, 0.0, 1.0, t - hstep)
            slope = (dplus - dminus) / (2 * hstep)
            assert np.sign(slope) == -np.sign(gamma)

    def test_generator_freezes_populations(self):
        from nmflow.dynamics import apply_generator

        gen = spinbath_generator(SpinBathParams(coupling_a=1.0, n_spins=4))
        rhs = apply_generator(gen, 0.3, EXCITED.matrix)
        assert np.max(np.abs(rhs)) < 1e-12  # diagonal states are fixed points

    def test_invalid_population_gap(self):
        with pytest.raises(ValueError, match="a must lie"):
            spinbath_trace_distance(SpinBathParams(), 1.5, 0.0, 0.0)


class TestSemigroup:
    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError, match="nonnegative"):
            semigroup_generator(-1.0)

    def test_distance_decays_exponentially(self):
        gen = semigroup_generator(1.0)
        grid = np.arange(0.0, 3.0 + 1e-12, 1e-3)
        s1 = evolve_state(gen, PLUS_X, grid)
        s2 = evolve_state(gen, MINUS_X, grid)
        d = np.array([trace_distance(a, b) for a, b in zip(s1, s2)])
        assert np.max(np.abs(d - np.exp(-0.5 * grid))) < 1e-7


class TestParamValidation:
    def test_jc_params(self):
        with pytest.raises(ValueError):
            JCParams(gamma0=0.0)
        with pytest.raises(ValueError):
            JCParams(lam=-1.0)

    def test_spinbath_params(self):
        with pytest.raises(ValueError):
            SpinBathParams(coupling_a=0.0)
        with pytest.raises(ValueError):
            SpinBathParams(n_spins=0)
