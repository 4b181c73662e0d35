"""Poincare constant, Lyapunov machinery, decay fits, weak residuals."""

import math

import numpy as np
import pytest

from chemofluid.diagnostics import (
    LyapunovConfig,
    LyapunovInfeasible,
    WeakTestSpec,
    fit_decay_rate,
    grad_c_norms,
    lyapunov,
    lyapunov_budget,
    make_lyapunov_config,
    poincare_constant,
    steady_state_distance,
    weak_residual,
)
from chemofluid.fluid import FluidParams
from chemofluid.grid import ScalarField, VectorField, make_grid
from chemofluid.sensitivity import RegularizationParams, SensitivitySpec
from chemofluid.stepper import SimParams, State, run
from chemofluid.verify import default_phi, swirl_velocity


def discrete_neumann_lambda1(N, L):
    """Closed-form smallest nonzero eigenvalue of the 1-D zero-flux stencil."""
    h = L / N
    return (4.0 / h**2) * math.sin(math.pi * h / (2 * L)) ** 2


class TestPoincare:
    def test_unit_square_one_percent(self):
        g = make_grid(2, (1.0, 1.0), (64, 64))
        C_N = poincare_constant(g)
        assert C_N == pytest.approx(1.0 / np.pi**2, rel=0.01)
        # and it matches the separable closed form to the iteration tolerance
        assert C_N == pytest.approx(1.0 / discrete_neumann_lambda1(64, 1.0), rel=1e-6)

    def test_long_box_dominated_by_longest_axis(self):
        g = make_grid(2, (2.0, 1.0), (64, 32))
        C_N = poincare_constant(g)
        assert C_N == pytest.approx(4.0 / np.pi**2, rel=0.01)

    def test_refinement_monotone_toward_continuum(self):
        vals = []
        for N in (8, 16, 32):
            g = make_grid(2, (1.0, 1.0), (N, N))
            vals.append(poincare_constant(g))
        # discrete eigenvalues approach pi^2 from below, so C_N from above
        assert vals[0] > vals[1] > vals[2] > 1.0 / np.pi**2
        # and the h^2 convergence shows as ~4x error reduction
        errs = [v - 1.0 / np.pi**2 for v in vals]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.3)


class TestLyapunovConfig:
    def test_reference_arithmetic(self):
        C_N = 1.0 / np.pi**2
        cfg = make_lyapunov_config(0.5, C_N)
        assert isinstance(cfg, LyapunovConfig)
        assert cfg.B == pytest.approx(0.5 * (np.pi**2 / 2 + 8.0), rel=1e-12)
        assert cfg.B == pytest.approx(6.4674, abs=5e-4)
        assert cfg.a1 == pytest.approx(cfg.B / (2 * np.pi**2) - 0.25, rel=1e-12)
        assert cfg.a2 == pytest.approx(1 - cfg.B / 8.0, rel=1e-12)
        assert cfg.a1 > 0 and cfg.a2 > 0
        assert cfg.kappa_pred == pytest.approx(
            min(2 * cfg.a1 / cfg.B, 2 * C_N * cfg.a2), rel=1e-12
        )

    def test_boundary_case_infeasible(self):
        C_N = 0.1
        out = make_lyapunov_config(2.0 * np.sqrt(C_N), C_N)
        assert isinstance(out, LyapunovInfeasible)
        assert "C_S" in out.reason

    def test_small_cs_capped_interval(self):
        C_N = 0.1
        cfg = make_lyapunov_config(1e-8, C_N)
        assert cfg.B == pytest.approx(0.5 * (1 / (2 * C_N) + 10 / C_N), rel=1e-12)
        assert cfg.a2 == pytest.approx(1.0, abs=1e-12)


class TestLyapunovValue:
    def _cfg(self):
        return make_lyapunov_config(0.5, 1.0 / np.pi**2)

    def test_steady_state_zero(self, grid2d):
        st = State.homogeneous(grid2d, 1.0)
        assert lyapunov(st, self._cfg()) == 0.0

    def test_constant_offset_in_c(self, grid2d):
        delta = 0.3
        st = State(
            t=0.0,
            n=ScalarField.full(grid2d, 1.0),
            c=ScalarField.full(grid2d, 1.0 + delta),
            u=VectorField.zeros(grid2d),
            P=ScalarField.zeros(grid2d),
        )
        expected = 0.5 * delta**2 * grid2d.total_volume
        assert lyapunov(st, self._cfg()) == pytest.approx(expected, rel=1e-13)

    def test_matches_independent_summation(self, grid2d, rng):
        # oracle: math.fsum over explicit python loops
        cfg = self._cfg()
        n = rng.uniform(0, 2, grid2d.shape)
        c = rng.uniform(0, 2, grid2d.shape)
        st = State(
            t=0.0,
            n=ScalarField(grid2d, n),
            c=ScalarField(grid2d, c),
            u=VectorField.zeros(grid2d),
            P=ScalarField.zeros(grid2d),
        )
        nbar = math.fsum(n.reshape(-1)) / n.size
        vol = grid2d.volume_element
        l2n = math.fsum((v - nbar) ** 2 for v in n.reshape(-1)) * vol
        l2c = math.fsum((v - nbar) ** 2 for v in c.reshape(-1)) * vol
        expected = 0.5 * cfg.B * l2n + 0.5 * l2c
        assert lyapunov(st, cfg) == pytest.approx(expected, rel=1e-12)

    def test_zero_iff_homogeneous(self, grid2d):
        cfg = self._cfg()
        st = State.homogeneous(grid2d, 1.0)
        assert lyapunov(st, cfg) == 0.0
        d = steady_state_distance(st)
        assert (d.n_inf, d.c_inf, d.u_inf) == (0.0, 0.0, 0.0)
        st2 = State(
            t=0.0,
            n=ScalarField.from_function(grid2d, lambda x, y: 1 + 0.1 * np.cos(np.pi * x)),
            c=ScalarField.full(grid2d, 1.0),
            u=VectorField.zeros(grid2d),
            P=ScalarField.zeros(grid2d),
        )
        assert lyapunov(st2, cfg) > 0
        assert steady_state_distance(st2).n_inf > 0


class TestBudget:
    def test_steady_gives_zero_bound(self, grid2d):
        cfg = make_lyapunov_config(0.5, 1.0 / np.pi**2)
        rec = lyapunov_budget(State.homogeneous(grid2d, 1.0), cfg)
        assert rec.value == 0.0 and rec.bound_rhs == 0.0

    def test_gradient_only_bound(self, grid2d):
        cfg = make_lyapunov_config(0.5, 1.0 / np.pi**2)
        st = State(
            t=0.0,
            n=ScalarField.full(grid2d, 1.0),
            c=ScalarField.from_function(grid2d, lambda x, y: 1 + 0.2 * np.cos(np.pi * x)),
            u=VectorField.zeros(grid2d),
            P=ScalarField.zeros(grid2d),
        )
        rec = lyapunov_budget(st, cfg)
        # n == nbar: only the gradient term is active
        from chemofluid.transport import dissipation_integrals

        D = dissipation_integrals(st.n, st.c, st.u, 1.0)
        assert rec.bound_rhs == pytest.approx(-cfg.a2 * D.D_c, rel=1e-13)
        assert rec.bound_rhs < 0


class TestFitDecayRate:
    def test_exact_exponential(self):
        t = np.linspace(0, 4, 200)
        fit = fit_decay_rate(t, np.exp(-2.0 * t))
        assert fit.rate == pytest.approx(2.0, abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_constant_series(self):
        t = np.linspace(0, 1, 50)
        fit = fit_decay_rate(t, np.full(50, 3.3))
        assert fit.rate == pytest.approx(0.0, abs=1e-12)

    def test_scale_invariance(self, rng):
        t = np.linspace(0, 2, 64)
        vals = np.exp(-1.3 * t) * (1 + 0.01 * rng.standard_normal(64)) ** 2
        f1 = fit_decay_rate(t, vals)
        f2 = fit_decay_rate(t, 17.0 * vals)
        assert f1.rate == pytest.approx(f2.rate, rel=1e-13)
        assert f1.r_squared == pytest.approx(f2.r_squared, rel=1e-13)

    def test_window_and_guards(self):
        t = np.linspace(0, 1, 100)
        v = np.exp(-t)
        with pytest.raises(ValueError):
            fit_decay_rate(t[:5], v[:5])
        v2 = v.copy()
        v2[50] = -1.0
        with pytest.raises(ValueError):
            fit_decay_rate(t, v2)
        fit = fit_decay_rate(t, v2, window=(0.0, 0.4))
        assert fit.rate == pytest.approx(1.0, abs=1e-8)

    def test_simulated_c_relaxation_rate_two(self):
        # ODE slice: n = 0, u = 0, constant c decays at rate 1, so the
        # squared L2 norm decays at rate 2 (within the Euler bias)
        g = make_grid(2, (1.0, 1.0), (16, 16))
        params = SimParams(
            grid=g,
            sensitivity=SensitivitySpec(kind="scalar_saturating", C_S=0.5),
            regularization=RegularizationParams(eps=0.1),
            fluid=FluidParams(kappa=0.0, eps=0.1, phi=None),
            T=0.5,
        )
        init = State(
            t=0.0,
            n=ScalarField.zeros(g),
            c=ScalarField.full(g, 2.0),
            u=VectorField.zeros(g),
            P=ScalarField.zeros(g),
        )
        traj = run(params, init)
        s = traj.series
        fit = fit_decay_rate(s.t, s.l2_c_dev)
        assert fit.rate == pytest.approx(2.0, rel=0.05)
        assert fit.r_squared >= 0.999


class TestGradCNorms:
    def test_constant(self, grid2d):
        out = grad_c_norms(ScalarField.full(grid2d, 2.0))
        assert out.l2_sq == 0.0 and out.l4_4 == 0.0

    def test_unit_slope_exact(self):
        g = make_grid(2, (1.0, 1.0), (64, 64))
        c = ScalarField.from_function(g, lambda x, y: x + 0 * y)
        out = grad_c_norms(c)
        assert out.l2_sq == pytest.approx(1.0, rel=1e-12)
        assert out.l4_4 == pytest.approx(1.0, rel=1e-12)

    def test_holder_bound(self, grid2d, rng):
        c = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        out = grad_c_norms(c)
        # |grad c|^4 <= max|grad c|^2 * |grad c|^2 pointwise
        from chemofluid.grid import gradient_cc

        gmax2 = max(np.abs(comp).max() for comp in gradient_cc(c).components) ** 2
        assert out.l4_4 <= 2.0 * gmax2 * out.l2_sq  # factor 2 for the cell mix


class TestWeakResidual:
    def _bump_traj(self, N=24, T=0.08, snapshot_every=4, **kw):
        from chemofluid.verify import bump_field

        g = make_grid(2, (1.0, 1.0), (N, N))
        params = SimParams(
            grid=g,
            sensitivity=SensitivitySpec(kind="scalar_saturating", C_S=0.5),
            regularization=RegularizationParams(eps=0.1),
            fluid=FluidParams(kappa=kw.pop("kappa", 1.0), eps=0.1, phi=default_phi(g)),
            T=T,
            snapshot_every=snapshot_every,
        )
        init = State(
            t=0.0,
            n=bump_field(g, 1.0, 0.5),
            c=ScalarField.full(g, 0.5),
            u=swirl_velocity(g, 0.1),
            P=ScalarField.zeros(g),
        )
        return run(params, init)

    def test_steady_trajectory_residuals_tiny(self):
        g = make_grid(2, (1.0, 1.0), (16, 16))
        params = SimParams(
            grid=g,
            sensitivity=SensitivitySpec(kind="scalar_saturating", C_S=0.5),
            regularization=RegularizationParams(eps=0.1),
            fluid=FluidParams(kappa=1.0, eps=0.1, phi=default_phi(g)),
            T=0.05,
            snapshot_every=5,
        )
        traj = run(params, State.homogeneous(g, 1.0))
        r = weak_residual(traj)
        assert all(v <= 1e-10 for v in r.values())

    def test_constant_test_function_reduces_to_mass(self):
        traj = self._bump_traj()
        r = weak_residual(traj, WeakTestSpec(scalar_modes=(0, 0)))
        assert r["r_n"] <= 1e-10

    def test_insufficient_snapshots_rejected(self):
        traj = self._bump_traj(snapshot_every=0)
        with pytest.raises(ValueError):
            weak_residual(traj)

    def test_refinement_decreases_residuals(self):
        r_coarse = weak_residual(self._bump_traj(N=16, snapshot_every=4))
        r_fine = weak_residual(self._bump_traj(N=32, snapshot_every=8))
        for key in ("r_n", "r_c", "r_u"):
            assert r_fine[key] < r_coarse[key]


class TestIntegratedDissipation:
    def test_window_sum_finite_and_additive(self):
        from chemofluid.diagnostics import integrated_dissipation
        from chemofluid.verify import bump_field, default_phi

        g = make_grid(2, (1.0, 1.0), (16, 16))
        params = SimParams(
            grid=g,
            sensitivity=SensitivitySpec(kind="scalar_saturating", C_S=0.5),
            regularization=RegularizationParams(eps=0.1),
            fluid=FluidParams(kappa=1.0, eps=0.1, phi=default_phi(g)),
            T=0.02,
        )
        init = State(
            t=0.0,
            n=bump_field(g, 1.0, 0.5),
            c=ScalarField.full(g, 0.5),
            u=VectorField.zeros(g),
            P=ScalarField.zeros(g),
        )
        traj = run(params, init)
        total = integrated_dissipation(traj.series)
        assert np.isfinite(total) and total > 0
        mid = float(traj.series.t[len(traj.series) // 2])
        left = integrated_dissipation(traj.series, None, mid)
        right = integrated_dissipation(traj.series, mid, None)
        assert total == pytest.approx(left + right, rel=1e-12)

    def test_residuals_exposed_per_step(self):
        from chemofluid.verify import scenario_library

        lib = scenario_library((16, 16))
        params, init = lib["bump_n"].build(0, T=0.005)
        traj = run(params, init)
        assert traj.poisson_residuals.shape == traj.series.t.shape
        assert np.all(traj.poisson_residuals >= 0)
