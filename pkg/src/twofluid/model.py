"""Symmetrized two-fluid Euler-Maxwell system on the periodic torus.

The canonical unknowns are ``W = (rho+, v+, rho-, v-, E~, B~)`` with

    rho = 2/(gamma-1) * (n**((gamma-1)/2) - 1),   v = u / sqrt(gamma),
    E~ = E / sqrt(gamma),                        B~ = B / sqrt(gamma) - B_bar,

and all of ``tau+-``, ``lambda``, ``epsilon`` equal to one. The pressure
constants of the primitive system are not represented: the symmetric form is
taken as the definition of the dynamics and ``PhysState`` is a derived view.

In 2D the magnetic field is a scalar (out-of-plane) component, the electric
field and the velocities are in-plane, and ``v x b`` means ``(v2 b, -v1 b)``.

Spatial derivatives are spectral; products are formed pointwise and the
tendency is projected onto the 2/3-rule mask.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .littlewood_paley import BesovSpec, besov_norm, build_partition
from .spectral_field import (
    GridSpec,
    SpectralField,
    curl_coeffs,
    fft,
    ifft,
    lp_norm,
    read_fields,
    write_field,
)


class VacuumError(ValueError):
    """State left the admissible set ``(gamma-1)/2 * rho + 1 > 0``."""


def magnetic_components(dim: int) -> int:
    return 3 if dim == 3 else 1


@dataclass(frozen=True)
class PhysParams:
    gamma: float = 2.0
    b_bar: tuple[float, ...] = (1.0,)

    # fixed to one; kept for bookkeeping only
    tau_plus: float = field(default=1.0, init=False)
    tau_minus: float = field(default=1.0, init=False)
    lam: float = field(default=1.0, init=False)
    epsilon: float = field(default=1.0, init=False)

    def __post_init__(self) -> None:
        if not self.gamma > 1:
            raise ValueError(f"gamma must be > 1 (isothermal case unsupported), got {self.gamma}")
        object.__setattr__(self, "b_bar", tuple(float(b) for b in self.b_bar))
        if len(self.b_bar) not in (1, 3):
            raise ValueError("b_bar must have 1 (2D) or 3 (3D) components")

    @classmethod
    def for_dim(cls, dim: int, gamma: float = 2.0, b_bar=None) -> PhysParams:
        if b_bar is None:
            b_bar = (0.0, 0.0, 1.0) if dim == 3 else (1.0,)
        return cls(gamma, tuple(b_bar))

    @property
    def a(self) -> float:
        return 0.5 * (self.gamma - 1.0)

    @property
    def c(self) -> float:
        """``1/sqrt(gamma)``, the Maxwell speed in symmetric variables."""
        return 1.0 / math.sqrt(self.gamma)

    def check_dim(self, dim: int) -> None:
        if len(self.b_bar) != magnetic_components(dim):
            raise ValueError(f"b_bar has {len(self.b_bar)} components; {dim}D needs "
                             f"{magnetic_components(dim)}")


def _check_admissible(rho, gamma: float) -> None:
    h = 0.5 * (gamma - 1.0) * np.asarray(rho) + 1.0
    if not np.all(h > 0):
        raise VacuumError(f"vacuum: min((gamma-1)/2 rho + 1) = {np.min(h):.3e}")


def phi(rho, gamma: float):
    """``((gamma-1)/2 rho + 1)^(2/(gamma-1)) - rho - 1``."""
    _check_admissible(rho, gamma)
    a = 0.5 * (gamma - 1.0)
    rho = np.asarray(rho, dtype=float)
    m = 1.0 / a
    if m == round(m) and m <= 16:
        # integer exponent: binomial tail, free of the O(rho) cancellation
        m = int(round(m))
        out = np.zeros_like(rho)
        for j in range(m, 1, -1):
            out = (out + math.comb(m, j) * a**j) * rho
        return out * rho
    return np.expm1(m * np.log1p(a * rho)) - rho


def phi_prime(rho, gamma: float):
    _check_admissible(rho, gamma)
    a = 0.5 * (gamma - 1.0)
    return (a * np.asarray(rho) + 1.0) ** (1.0 / a - 1.0) - 1.0


def density_from_rho(rho, gamma: float):
    """``n = Phi(rho) + rho + 1``."""
    _check_admissible(rho, gamma)
    a = 0.5 * (gamma - 1.0)
    return (a * np.asarray(rho) + 1.0) ** (1.0 / a)


def rho_from_density(n, gamma: float):
    n = np.asarray(n)
    if not np.all(n > 0):
        raise VacuumError(f"vacuum: min(n) = {np.min(n):.3e}")
    a = 0.5 * (gamma - 1.0)
    return (n**a - 1.0) / a


@dataclass(frozen=True)
class Layout:
    """Component slices of the packed state array ``(ncomp, *shape)``."""

    dim: int

    @property
    def nb(self) -> int:
        return magnetic_components(self.dim)

    @property
    def ncomp(self) -> int:
        return 3 * self.dim + 2 + self.nb

    @property
    def rho_plus(self) -> int:
        return 0

    @property
    def v_plus(self) -> slice:
        return slice(1, 1 + self.dim)

    @property
    def rho_minus(self) -> int:
        return 1 + self.dim

    @property
    def v_minus(self) -> slice:
        return slice(2 + self.dim, 2 + 2 * self.dim)

    @property
    def fluid(self) -> slice:
        return slice(0, 2 + 2 * self.dim)

    @property
    def e(self) -> slice:
        return slice(2 + 2 * self.dim, 2 + 3 * self.dim)

    @property
    def b(self) -> slice:
        return slice(2 + 3 * self.dim, self.ncomp)


@dataclass(frozen=True, eq=False)
class PhysState:
    """Primitive variables ``(n+, n-, u+, u-, E, B)``."""

    n_plus: SpectralField
    n_minus: SpectralField
    u_plus: SpectralField
    u_minus: SpectralField
    E: SpectralField
    B: SpectralField

    def __post_init__(self) -> None:
        for name in ("n_plus", "n_minus"):
            if not np.all(getattr(self, name).values > 0):
                raise VacuumError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class SymState:
    rho_plus: SpectralField
    v_plus: SpectralField
    rho_minus: SpectralField
    v_minus: SpectralField
    e_tilde: SpectralField
    b_tilde: SpectralField
    params: PhysParams

    FIELDS = ("rho_plus", "v_plus", "rho_minus", "v_minus", "e_tilde", "b_tilde")

    def __post_init__(self) -> None:
        self.params.check_dim(self.grid.dim)
        _check_admissible(self.rho_plus.values, self.params.gamma)
        _check_admissible(self.rho_minus.values, self.params.gamma)

    @property
    def grid(self) -> GridSpec:
        return self.rho_plus.grid

    @property
    def fields(self) -> list[SpectralField]:
        return [getattr(self, name) for name in self.FIELDS]

    def to_array(self) -> np.ndarray:
        return np.concatenate([f.values for f in self.fields])

    @classmethod
    def from_array(cls, grid: GridSpec, params: PhysParams, w: np.ndarray) -> SymState:
        lay = Layout(grid.dim)
        parts = [lay.rho_plus, lay.v_plus, lay.rho_minus, lay.v_minus, lay.e, lay.b]
        return cls(*[SpectralField(grid, w[p]) for p in parts], params=params)

    @classmethod
    def zeros(cls, grid: GridSpec, params: PhysParams) -> SymState:
        return cls.from_array(grid, params, np.zeros((Layout(grid.dim).ncomp, *grid.shape)))


def to_symmetric(phys: PhysState, params: PhysParams) -> SymState:
    g = params.gamma
    c = params.c
    grid = phys.n_plus.grid
    bbar = np.asarray(params.b_bar).reshape(-1, *([1] * grid.dim))
    return SymState(
        SpectralField(grid, rho_from_density(phys.n_plus.values, g)),
        phys.u_plus * c,
        SpectralField(grid, rho_from_density(phys.n_minus.values, g)),
        phys.u_minus * c,
        phys.E * c,
        SpectralField(grid, phys.B.values * c - bbar),
        params,
    )


def from_symmetric(sym: SymState) -> PhysState:
    g = sym.params.gamma
    s = math.sqrt(g)
    grid = sym.grid
    bbar = np.asarray(sym.params.b_bar).reshape(-1, *([1] * grid.dim))
    return PhysState(
        SpectralField(grid, density_from_rho(sym.rho_plus.values, g)),
        SpectralField(grid, density_from_rho(sym.rho_minus.values, g)),
        sym.v_plus * s,
        sym.v_minus * s,
        sym.e_tilde * s,
        SpectralField(grid, (sym.b_tilde.values + bbar) * s),
    )


def _cross(v: np.ndarray, b: np.ndarray) -> np.ndarray:
    if v.shape[0] == 3:
        return np.stack([v[1] * b[2] - v[2] * b[1],
                         v[2] * b[0] - v[0] * b[2],
                         v[0] * b[1] - v[1] * b[0]])
    return np.stack([v[1] * b[0], -v[0] * b[0]])


class _Spectral:
    """Derivatives of a packed array, sharing one forward transform."""

    def __init__(self, w: np.ndarray, grid: GridSpec):
        self.grid = grid
        self.coeffs = fft(w, grid)

    def d(self, comp, j: int) -> np.ndarray:
        return ifft(1j * self.grid.deriv_wavenumbers[j] * self.coeffs[comp], self.grid)

    def grad(self, comp: int) -> np.ndarray:
        return np.stack([self.d(comp, j) for j in range(self.grid.dim)])

    def jac(self, sl: slice) -> np.ndarray:
        """``out[i, j] = d_j v_i``."""
        return np.stack([self.grad(i) for i in range(sl.start, sl.stop)])

    def div(self, sl: slice) -> np.ndarray:
        return sum(self.d(sl.start + j, j) for j in range(self.grid.dim))

    def curl(self, sl: slice) -> np.ndarray:
        return ifft(curl_coeffs(self.coeffs[sl], self.grid), self.grid)


def _project(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """2/3-rule projection of a packed array or a single scalar array."""
    if values.shape == grid.shape:
        return _project(values[None], grid)[0]
    return ifft(fft(values, grid) * grid.dealias_mask, grid)


def _bbar_array(params: PhysParams, dim: int) -> np.ndarray:
    return np.asarray(params.b_bar).reshape(-1, *([1] * dim))


def rhs_array(
    w: np.ndarray,
    grid: GridSpec,
    params: PhysParams,
    *,
    relaxation: bool = True,
    coupled: bool = True,
    dealias: bool = True,
) -> np.ndarray:
    """Time derivative of the packed state.

    ``relaxation=False`` drops the ``-v/sqrt(gamma)`` damping and
    ``coupled=False`` drops the Lorentz force and the current, leaving
    compressible Euler and vacuum Maxwell evolving independently.
    """
    lay = Layout(grid.dim)
    a, c = params.a, params.c
    sp = _Spectral(w, grid)
    out = np.empty_like(w)
    b_total = w[lay.b] + _bbar_array(params, grid.dim)
    e = w[lay.e]
    current = np.zeros_like(e)
    for sign, ir, sv in ((1.0, lay.rho_plus, lay.v_plus), (-1.0, lay.rho_minus, lay.v_minus)):
        rho, v = w[ir], w[sv]
        _check_admissible(rho, params.gamma)
        h = a * rho + 1.0
        grad_rho = sp.grad(ir)
        jac_v = sp.jac(sv)
        out[ir] = -np.sum(v * grad_rho, axis=0) - h * sp.div(sv)
        dv = -h * grad_rho - np.einsum("j...,ij...->i...", v, jac_v)
        if coupled:
            dv -= sign * (c * e + _cross(v, b_total))
            current += sign * (rho_to_n(rho, a)) * v
        if relaxation:
            dv -= c * v
        out[sv] = dv
    out[lay.e] = c * sp.curl(lay.b) + c * current
    out[lay.b] = -c * sp.curl(lay.e)
    return _project(out, grid) if dealias else out


def rho_to_n(rho: np.ndarray, a: float) -> np.ndarray:
    return (a * rho + 1.0) ** (1.0 / a)


def rhs_linear_array(w: np.ndarray, grid: GridSpec, params: PhysParams) -> np.ndarray:
    """Linearization of ``rhs_array`` about the equilibrium ``W = 0``."""
    lay = Layout(grid.dim)
    c = params.c
    sp = _Spectral(w, grid)
    out = np.empty_like(w)
    bbar = _bbar_array(params, grid.dim)
    e = w[lay.e]
    for sign, ir, sv in ((1.0, lay.rho_plus, lay.v_plus), (-1.0, lay.rho_minus, lay.v_minus)):
        v = w[sv]
        out[ir] = -sp.div(sv)
        out[sv] = -sp.grad(ir) - sign * (c * e + _cross(v, bbar)) - c * v
    out[lay.e] = c * sp.curl(lay.b) + c * (w[lay.v_plus] - w[lay.v_minus])
    out[lay.b] = -c * sp.curl(lay.e)
    return _project(out, grid)


def rhs(W: SymState, **flags) -> SymState:
    """Tendency ``dW/dt`` as a state-shaped object (not itself admissibility-checked)."""
    grid = W.grid
    tend = rhs_array(W.to_array(), grid, W.params, **flags)
    lay = Layout(grid.dim)
    parts = [lay.rho_plus, lay.v_plus, lay.rho_minus, lay.v_minus, lay.e, lay.b]
    fields = [SpectralField(grid, tend[p]) for p in parts]
    obj = object.__new__(SymState)
    for name, f in zip(SymState.FIELDS, fields):
        object.__setattr__(obj, name, f)
    object.__setattr__(obj, "params", W.params)
    return obj


def maxwell_blocks(gamma: float, dim: int) -> list[np.ndarray]:
    """``P_j`` coupling ``E~`` rows to ``B~`` columns; 2D keeps the ``B_3`` column."""
    c = 1.0 / math.sqrt(gamma)
    p1 = np.array([[0, 0, 0], [0, 0, c], [0, -c, 0]], dtype=float)
    p2 = np.array([[0, 0, -c], [0, 0, 0], [c, 0, 0]], dtype=float)
    p3 = np.array([[0, c, 0], [-c, 0, 0], [0, 0, 0]], dtype=float)
    if dim == 3:
        return [p1, p2, p3]
    return [p1[:2, 2:], p2[:2, 2:]]


def flux_matrices(w_fluid: np.ndarray, params: PhysParams, dim: int) -> np.ndarray:
    """Symmetric flux matrices ``A_j(W_I)`` with shape ``(dim, ncomp, ncomp, ...)``.

    ``w_fluid`` holds ``(rho+, v+, rho-, v-)`` for a single point or a field.
    """
    w_fluid = np.asarray(w_fluid, dtype=float)
    lay = Layout(dim)
    n = lay.ncomp
    tail = w_fluid.shape[1:]
    A = np.zeros((dim, n, n, *tail))
    a = params.a
    blocks = maxwell_blocks(params.gamma, dim)
    for ir, sv in ((lay.rho_plus, lay.v_plus), (lay.rho_minus, lay.v_minus)):
        h = a * w_fluid[ir] + 1.0
        for j in range(dim):
            vj = w_fluid[sv.start + j]
            A[j, ir, ir] = vj
            for i in range(sv.start, sv.stop):
                A[j, i, i] = vj
            A[j, ir, sv.start + j] = h
            A[j, sv.start + j, ir] = h
    es, bs = lay.e, lay.b
    for j in range(dim):
        pj = blocks[j].reshape(*blocks[j].shape, *([1] * len(tail)))
        A[j, es, bs] = pj
        A[j, bs, es] = np.swapaxes(pj, 0, 1)
    return A


def source(w: np.ndarray, params: PhysParams, dim: int) -> np.ndarray:
    """Zeroth-order term ``L(W)`` for a single point or a packed field."""
    w = np.asarray(w, dtype=float)
    lay = Layout(dim)
    c = params.c
    bbar = np.asarray(params.b_bar).reshape(-1, *([1] * (w.ndim - 1)))
    b_total = w[lay.b] + bbar
    e = w[lay.e]
    out = np.zeros_like(w)
    current = np.zeros_like(e)
    for sign, ir, sv in ((1.0, lay.rho_plus, lay.v_plus), (-1.0, lay.rho_minus, lay.v_minus)):
        v = w[sv]
        out[sv] = -sign * (c * e + _cross(v, b_total)) - c * v
        current += sign * (phi(w[ir], params.gamma) + w[ir] + 1.0) * v
    out[lay.e] = c * current
    return out


def rhs_matrix_form(w: np.ndarray, grid: GridSpec, params: PhysParams, dealias: bool = True):
    """``-sum_j A_j(W_I) d_j W + L(W)`` evaluated pointwise."""
    lay = Layout(grid.dim)
    sp = _Spectral(w, grid)
    A = flux_matrices(w[lay.fluid], params, grid.dim)
    out = source(w, params, grid.dim)
    for j in range(grid.dim):
        dw = np.stack([sp.d(i, j) for i in range(lay.ncomp)])
        out -= np.einsum("ab...,b...->a...", A[j], dw)
    return _project(out, grid) if dealias else out


def gauss_source(rho_plus: np.ndarray, rho_minus: np.ndarray, params: PhysParams) -> np.ndarray:
    """Right side of the symmetrized Gauss law, before dealiasing."""
    g, c = params.gamma, params.c
    return -c * (phi(rho_plus, g) + rho_plus) + c * (phi(rho_minus, g) + rho_minus)


def constraint_residuals(W: SymState) -> tuple[float, float]:
    """``L^2`` norms of the Gauss defect and of ``div B~``.

    The Gauss source is projected onto the 2/3-rule mask, matching the
    representable content of the evolved fields.
    """
    grid = W.grid
    lay = Layout(grid.dim)
    w = W.to_array()
    sp = _Spectral(w, grid)
    src = gauss_source(w[lay.rho_plus], w[lay.rho_minus], W.params)
    src = _project(src, grid)
    gauss = SpectralField(grid, sp.div(lay.e) - src)
    if grid.dim == 3:
        div_b = lp_norm(SpectralField(grid, sp.div(lay.b)), 2)
    else:
        div_b = 0.0
    return lp_norm(gauss, 2), div_b


def mean_densities(W: SymState) -> tuple[float, float]:
    g = W.params.gamma
    return (float(np.mean(density_from_rho(W.rho_plus.values, g))),
            float(np.mean(density_from_rho(W.rho_minus.values, g))))


def band_mask(grid: GridSpec, band: tuple[int, int]) -> np.ndarray:
    """Lattice points in the dyadic band, inside the 2/3 mask and off Nyquist."""
    q_lo, q_hi = band
    kmag = grid.kmag
    inside = (kmag >= 0.75 * 2.0**q_lo) & (kmag <= (8.0 / 3.0) * 2.0**q_hi)
    return inside & grid.dealias_mask & grid.nyquist_free


def random_field(
    grid: GridSpec, components: int, rng: np.random.Generator, mask: np.ndarray
) -> np.ndarray:
    """Real random field with spectrum restricted to ``mask`` and unit ``L^2`` norm."""
    noise = rng.standard_normal((components, *grid.shape))
    coeffs = fft(noise, grid) * mask
    values = ifft(coeffs, grid)
    norm = lp_norm(SpectralField(grid, values), 2)
    return values / norm if norm > 0 else values


def solenoidal(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Remove the gradient part of a vector field."""
    coeffs = fft(values, grid)
    k = grid.deriv_wavenumbers
    k2 = np.sum(k * k, axis=0)
    k2[k2 == 0] = 1.0
    kdotc = np.sum(k * coeffs, axis=0)
    return ifft(coeffs - k * kdotc / k2, grid)


def solve_gauss(src: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Gradient field ``grad psi`` with ``div grad psi = src`` (mean of src dropped)."""
    coeffs = fft(src[None], grid)[0]
    k = grid.deriv_wavenumbers
    k2 = np.sum(k * k, axis=0)
    psi = np.zeros_like(coeffs)
    nz = k2 > 0
    psi[nz] = -coeffs[nz] / k2[nz]
    return ifft(1j * k * psi, grid)


def _fix_mean(rho: np.ndarray, gamma: float) -> np.ndarray:
    """Shift ``rho`` by a constant so that the mean density is exactly one."""
    shift = 0.0
    for _ in range(20):
        n = density_from_rho(rho + shift, gamma)
        err = np.mean(n) - 1.0
        if abs(err) < 1e-16:
            break
        dn = np.mean(n / (0.5 * (gamma - 1.0) * (rho + shift) + 1.0))
        shift -= err / dn
    return rho + shift


def make_initial_data(
    grid: GridSpec,
    params: PhysParams,
    amplitude: float,
    seed: int,
    band: tuple[int, int] = (0, 1),
    rotational_e: bool = True,
) -> SymState:
    """Random compatible initial data with ``||W||_{B^{s_c}_{2,1}} = amplitude``.

    Densities have mean exactly one, ``B~`` is divergence-free, and the
    gradient part of ``E~`` solves the Gauss law; its divergence-free part
    is random when ``rotational_e`` is set.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    params.check_dim(grid.dim)
    if amplitude == 0:
        return SymState.zeros(grid, params)
    lay = Layout(grid.dim)
    rng = np.random.default_rng(seed)
    mask = band_mask(grid, band)
    if not mask.any():
        raise ValueError(f"band {band} contains no resolvable modes")
    xi_np = random_field(grid, 1, rng, mask)[0]
    xi_nm = random_field(grid, 1, rng, mask)[0]
    xi_vp = random_field(grid, grid.dim, rng, mask)
    xi_vm = random_field(grid, grid.dim, rng, mask)
    xi_b = random_field(grid, lay.nb, rng, mask)
    xi_e = random_field(grid, grid.dim, rng, mask)
    if grid.dim == 3:
        xi_b = solenoidal(xi_b, grid)
    xi_e = solenoidal(xi_e, grid) if rotational_e else np.zeros_like(xi_e)
    partition = build_partition(grid)
    s_c = 1.0 + grid.dim / 2.0
    spec = BesovSpec(s_c, 2, 1)

    def build(scale: float) -> SymState:
        rhos = []
        for xi in (xi_np, xi_nm):
            n = 1.0 + scale * xi
            rho = rho_from_density(n, params.gamma)
            rho = _project(rho, grid)
            rhos.append(_fix_mean(rho, params.gamma))
        src = gauss_source(rhos[0], rhos[1], params)
        src = _project(src, grid)
        e = solve_gauss(src, grid) + scale * xi_e
        w = np.concatenate([rhos[0][None], scale * xi_vp, rhos[1][None], scale * xi_vm,
                            e, scale * xi_b])
        return SymState.from_array(grid, params, w)

    def excess(scale: float) -> float:
        return besov_norm(build(scale).fields, spec, partition) - amplitude

    hi = amplitude
    for _ in range(60):
        try:
            build(hi)
            break
        except VacuumError:
            hi *= 0.5
    try:
        while excess(hi) < 0:
            hi *= 2.0
        scale = brentq(excess, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)
        return build(scale)
    except VacuumError as err:
        raise VacuumError(f"amplitude {amplitude} too large for admissible data: {err}") from None


def save_state(W: SymState, path, meta: dict | None = None) -> None:
    """Concatenated binary field records plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    with open(path, "wb") as fh:
        for f in W.fields:
            write_field(f, fh)
    sidecar = {"gamma": W.params.gamma, "b_bar": list(W.params.b_bar)}
    sidecar.update(meta or {})
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, sort_keys=True))


def load_state(path) -> tuple[SymState, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    fields = read_fields(path)
    params = PhysParams(meta["gamma"], tuple(meta["b_bar"]))
    return SymState(*fields, params=params), meta
