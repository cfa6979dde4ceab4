import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twofluid.model import (
    Layout,
    PhysParams,
    PhysState,
    SymState,
    VacuumError,
    constraint_residuals,
    density_from_rho,
    flux_matrices,
    from_symmetric,
    load_state,
    make_initial_data,
    mean_densities,
    phi,
    phi_prime,
    rho_from_density,
    rhs,
    rhs_array,
    rhs_linear_array,
    rhs_matrix_form,
    save_state,
    to_symmetric,
)
from twofluid.littlewood_paley import BesovSpec, besov_norm, build_partition
from twofluid.spectral_field import GridSpec, SpectralField

GAMMAS = [1.4, 5 / 3, 2.0, 2.5, 3.0]


class TestParams:
    def test_defaults(self):
        p = PhysParams()
        assert p.gamma == 2.0 and p.b_bar == (1.0,)
        assert p.a == 0.5 and p.c == pytest.approx(1 / math.sqrt(2))
        assert (p.tau_plus, p.tau_minus, p.lam, p.epsilon) == (1.0, 1.0, 1.0, 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            PhysParams(gamma=1.0)
        with pytest.raises(ValueError):
            PhysParams(b_bar=(1.0, 0.0))
        with pytest.raises(ValueError):
            PhysParams.for_dim(2).check_dim(3)

    def test_layout(self):
        assert Layout(2).ncomp == 9 and Layout(3).ncomp == 14


class TestNonlinearity:
    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_matches_definition(self, gamma):
        rho = np.linspace(-0.5, 0.8, 27)
        a = (gamma - 1) / 2
        assert np.allclose(phi(rho, gamma), (a * rho + 1) ** (2 / (gamma - 1)) - rho - 1, atol=1e-15)

    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_vanishes_to_second_order(self, gamma):
        assert phi(np.array(0.0), gamma) == 0.0
        assert phi_prime(np.array(0.0), gamma) == 0.0
        h = 1e-4
        assert abs(phi(np.array(h), gamma)) <= h * h

    def test_gamma3_identically_zero(self):
        rho = np.random.default_rng(0).uniform(-0.9, 5.0, 1000)
        assert np.all(phi(rho, 3.0) == 0.0)

    def test_gamma2_quadratic(self):
        rho = np.random.default_rng(0).uniform(-1.5, 5.0, 1000)
        assert np.allclose(phi(rho, 2.0), rho**2 / 4, rtol=1e-15, atol=0)

    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_density_round_trip(self, gamma):
        n = np.linspace(0.2, 3.0, 15)
        assert np.allclose(density_from_rho(rho_from_density(n, gamma), gamma), n, rtol=1e-14)

    def test_vacuum_rejected(self):
        with pytest.raises(VacuumError):
            phi(np.array([-3.0]), 2.0)


def random_state(grid, params, amp, seed):
    rng = np.random.default_rng(seed)
    lay = Layout(grid.dim)
    k = grid.kmag
    c = (rng.standard_normal((lay.ncomp, *grid.shape)) + 1j * rng.standard_normal((lay.ncomp, *grid.shape)))
    c *= (k <= 4) & grid.nyquist_free
    w = np.fft.ifftn(c, axes=grid.axes).real
    w *= amp / np.max(np.abs(w))
    return SymState.from_array(grid, params, w)


class TestVariableChange:
    def test_round_trip(self, grid32, params2d):
        W = random_state(grid32, params2d, 0.1, 0)
        back = to_symmetric(from_symmetric(W), params2d)
        assert np.allclose(back.to_array(), W.to_array(), atol=1e-14)

    def test_equilibrium_view(self, grid32, params2d):
        P = from_symmetric(SymState.zeros(grid32, params2d))
        assert np.all(P.n_plus.values == 1.0)
        assert np.allclose(P.B.values, math.sqrt(2.0))

    def test_physical_state_positive(self, grid32):
        z = SpectralField.zeros(grid32)
        v = SpectralField.zeros(grid32, 2)
        with pytest.raises(VacuumError):
            PhysState(z, z, v, v, v, z)


class TestRhs:
    def test_equilibrium_is_fixed_point(self, grid32, params2d):
        w = SymState.zeros(grid32, params2d).to_array()
        assert np.max(np.abs(rhs_array(w, grid32, params2d))) == 0.0

    @pytest.mark.parametrize("amp", [1e-3, 0.3])
    def test_matches_matrix_form(self, grid32, params2d, amp):
        w = random_state(grid32, params2d, amp, 1).to_array()
        diff = rhs_array(w, grid32, params2d) - rhs_matrix_form(w, grid32, params2d)
        assert np.max(np.abs(diff)) <= 1e-13 * max(1.0, np.max(np.abs(w)))

    def test_matrix_form_3d(self):
        g = GridSpec(3, 16)
        p = PhysParams.for_dim(3, 5 / 3)
        w = random_state(g, p, 0.2, 2).to_array()
        assert np.max(np.abs(rhs_array(w, g, p) - rhs_matrix_form(w, g, p))) <= 1e-13

    def test_flux_matrices_symmetric(self, grid32, params2d):
        w = random_state(grid32, params2d, 0.3, 3).to_array()
        A = flux_matrices(w[Layout(2).fluid], params2d, 2)
        assert np.array_equal(A, np.swapaxes(A, 1, 2))

    def test_linearization_remainder_quadratic(self, grid32, params2d):
        W1 = random_state(grid32, params2d, 1.0, 4).to_array()
        rem = []
        for delta in (1e-3, 5e-4):
            full = rhs_array(delta * W1, grid32, params2d)
            lin = rhs_linear_array(delta * W1, grid32, params2d)
            rem.append(np.max(np.abs(full - lin)) / delta**2)
        assert rem[0] == pytest.approx(rem[1], rel=0.01)

    def test_state_shaped_rhs(self, grid32, params2d):
        W = random_state(grid32, params2d, 0.05, 5)
        T = rhs(W)
        assert np.array_equal(np.concatenate([f.values for f in T.fields]),
                              rhs_array(W.to_array(), grid32, params2d))

    def test_uncoupled_maxwell_leaves_fluid_at_rest(self, grid32, params2d):
        lay = Layout(2)
        w = np.zeros((lay.ncomp, *grid32.shape))
        x = grid32.coords[0]
        w[lay.e][1] = np.cos(2 * x)
        w[lay.b][0] = np.cos(2 * x)
        out = rhs_array(w, grid32, params2d, coupled=False)
        assert np.max(np.abs(out[lay.fluid])) == 0.0

    def test_tendency_stays_in_mask(self, grid32, params2d):
        w = random_state(grid32, params2d, 0.3, 6).to_array()
        coeffs = np.fft.fftn(rhs_array(w, grid32, params2d), axes=grid32.axes)
        assert np.max(np.abs(coeffs[:, ~grid32.dealias_mask])) < 1e-10


class TestInitialData:
    def test_small_data_constraints(self, grid32, params2d):
        W = make_initial_data(grid32, params2d, 1e-3, 0)
        gauss, divb = constraint_residuals(W)
        assert gauss < 1e-14 and divb == 0.0
        mp, mm = mean_densities(W)
        assert abs(mp - 1) < 1e-15 and abs(mm - 1) < 1e-15
        s_c = 2.0
        norm = besov_norm(W.fields, BesovSpec(s_c), build_partition(grid32))
        assert norm == pytest.approx(1e-3, rel=1e-10)

    def test_3d_constraints(self):
        g = GridSpec(3, 16)
        W = make_initial_data(g, PhysParams.for_dim(3), 1e-2, 1)
        gauss, divb = constraint_residuals(W)
        assert gauss < 1e-13 and divb < 1e-13

    def test_zero_amplitude(self, grid32, params2d):
        assert np.all(make_initial_data(grid32, params2d, 0.0, 0).to_array() == 0)

    def test_deterministic_in_seed(self, grid32, params2d):
        a = make_initial_data(grid32, params2d, 1e-2, 7).to_array()
        b = make_initial_data(grid32, params2d, 1e-2, 7).to_array()
        c = make_initial_data(grid32, params2d, 1e-2, 8).to_array()
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_errors(self, grid32, params2d):
        with pytest.raises(ValueError):
            make_initial_data(grid32, params2d, -1.0, 0)
        with pytest.raises(VacuumError):
            make_initial_data(grid32, params2d, 1e4, 0)

    @settings(max_examples=10, deadline=None)
    @given(amp=st.floats(1e-4, 5.0), seed=st.integers(0, 1000), gamma=st.sampled_from(GAMMAS))
    def test_admissible_and_compatible(self, amp, seed, gamma):
        g = GridSpec(2, 16)
        W = make_initial_data(g, PhysParams.for_dim(2, gamma), amp, seed)
        gauss, _ = constraint_residuals(W)
        assert gauss <= 1e-12 * max(1.0, amp)
        assert abs(mean_densities(W)[0] - 1.0) < 1e-13


class TestStateIO:
    def test_round_trip(self, tmp_path, grid32, params2d):
        W = make_initial_data(grid32, params2d, 1e-2, 3)
        path = tmp_path / "w.bpf"
        save_state(W, path, {"t_sym": 1.5})
        back, meta = load_state(path)
        assert np.array_equal(back.to_array(), W.to_array())
        assert meta["t_sym"] == 1.5 and back.params == params2d
        assert json.loads(path.with_suffix(".bpf.json").read_text())["gamma"] == 2.0
