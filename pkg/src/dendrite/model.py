"""Continuous model: potentials, anisotropy, energies and PDE residuals.

The dendritic system couples an anisotropic Allen-Cahn equation for the
order parameter ``phi`` (1 = solid, -1 = liquid) with a heat equation for
the temperature ``u``::

    tau phi_t = div(kappa^2 grad phi + kappa |grad phi|^2 H) - f(phi)/eps^2
                - (lam/eps) p'(phi) u
    u_t       = D Lap u + K p'(phi) phi_t

with ``f = phi^3 - phi`` and ``H = d kappa / d grad phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .spectral import Grid

__all__ = [
    "Params",
    "State",
    "EnergyRecord",
    "UnsupportedConfigurationError",
    "double_well",
    "latent",
    "latent_derivative",
    "heat_coupling",
    "anisotropy_kappa",
    "anisotropy_H",
    "anisotropic_flux",
    "aniso_divergence",
    "energy_density",
    "energy_original",
    "quadratize_U",
    "z_of",
    "residual",
    "energy_modified",
]

P_CHOICES = ("quintic", "cubic")
LATENT_VARIANTS = ("consistent", "unit_derivative")


class UnsupportedConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    """Physical and numerical constants.

    ``lam``, ``K``, ``D`` and ``B`` are the coupling strength, latent-heat
    coefficient, thermal diffusivity and quadratization shift. ``eta`` is the
    squared-gradient threshold below which the anisotropy is switched off.
    """

    eps: float = 0.06
    eps4: float = 0.05
    m: int = 4
    lam: float = 1.0
    K: float = 1.0
    D: float = 1.0
    tau: float = 100.0
    s1: float = 4.0
    s2: float = 4.0
    B: float = 5e4
    dt: float = 1e-2
    eta: float = 1e-12
    p_choice: str = "quintic"
    latent_variant: str = "consistent"

    def __post_init__(self):
        for name in ("eps", "lam", "K", "D", "tau", "B", "dt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        for name in ("s1", "s2", "eta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be nonnegative, got {value!r}")
        if not 0 <= self.eps4 < 1:
            raise ValueError(f"eps4 must lie in [0, 1), got {self.eps4!r}")
        if int(self.m) != self.m or self.m < 3:
            raise ValueError(f"m must be an integer >= 3, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        if self.p_choice not in P_CHOICES:
            raise ValueError(f"p_choice must be one of {P_CHOICES}, got {self.p_choice!r}")
        if self.latent_variant not in LATENT_VARIANTS:
            raise ValueError(
                f"latent_variant must be one of {LATENT_VARIANTS}, got {self.latent_variant!r}"
            )

    def replace(self, **changes) -> "Params":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass
class State:
    """Two time levels of ``(phi, u)`` and, for IEQ-type schemes, of ``U``."""

    phi: np.ndarray
    phi_prev: np.ndarray
    u: np.ndarray
    u_prev: np.ndarray
    U: np.ndarray | None = None
    U_prev: np.ndarray | None = None
    t: float = 0.0
    step: int = 0

    def copy(self) -> "State":
        def c(a):
            return None if a is None else a.copy()

        return State(c(self.phi), c(self.phi_prev), c(self.u), c(self.u_prev),
                     c(self.U), c(self.U_prev), self.t, self.step)


@dataclass
class EnergyRecord:
    step: int
    time: float
    e_original: float
    e_modified: float | None
    radius: float
    phi_min: float
    phi_max: float
    solver_iters: int = 0
    solver_residual: float = 0.0
    extra: dict = field(default_factory=dict, repr=False)


# ----------------------------------------------------------------------
# pointwise nonlinearities
# ----------------------------------------------------------------------
def double_well(phi):
    """Return ``F = (phi^2 - 1)^2`` and ``f = F'/4 = phi^3 - phi``."""
    phi2 = phi * phi
    w = phi2 - 1.0
    return w * w, phi * w


def latent(phi, params: Params):
    """Latent-heat function ``p`` and its derivative ``p'``."""
    phi2 = phi * phi
    if params.p_choice == "quintic":
        p = phi * (phi2 * (phi2 / 5.0 - 2.0 / 3.0) + 1.0)
    else:
        p = phi * (1.0 - phi2 / 3.0)
    return p, latent_derivative(phi, params)


def latent_derivative(phi, params: Params):
    one_minus = 1.0 - phi * phi
    if params.p_choice == "quintic":
        return one_minus * one_minus
    return one_minus


def heat_coupling(phi, params: Params):
    """Factor multiplying ``K phi_t`` in the heat equation."""
    if params.latent_variant == "unit_derivative":
        return np.ones_like(phi)
    return latent_derivative(phi, params)


# ----------------------------------------------------------------------
# anisotropy
# ----------------------------------------------------------------------
def _check_dims(grad, params: Params) -> int:
    d = grad.shape[0]
    if d == 3 and params.m != 4:
        raise UnsupportedConfigurationError(f"3D anisotropy supports m = 4 only, got m = {params.m}")
    if d not in (2, 3):
        raise ValueError(f"gradient must have 2 or 3 components, got {d}")
    return d


def _anisotropy(grad, params: Params):
    """Return ``(kappa, H, |grad|^2)`` for a gradient array of shape ``(d, ...)``."""
    grad = np.asarray(grad, dtype=float)
    _check_dims(grad, params)
    e4 = params.eps4
    g2 = np.sum(grad * grad, axis=0)
    live = g2 >= params.eta if params.eta > 0 else g2 > 0
    safe = np.where(live, g2, 1.0)
    if params.m == 4:
        sq = grad * grad
        s4 = np.sum(sq * sq, axis=0)
        inv = 1.0 / safe
        kappa = (1.0 - 3.0 * e4) + 4.0 * e4 * s4 * inv * inv
        # d/dg_a of 4 e4 sum(g^4)/|g|^4 = 16 e4 g_a (g_a^2 |g|^2 - sum(g^4)) / |g|^6
        H = (16.0 * e4) * grad * (sq * g2 - s4) * (inv * inv * inv)
    else:
        gx, gy = grad[0], grad[1]
        theta = np.arctan2(gy, gx)
        kappa = 1.0 + e4 * np.cos(params.m * theta)
        coef = params.m * e4 * np.sin(params.m * theta) / safe
        H = np.stack([coef * gy, -coef * gx])
    kappa = np.where(live, kappa, 1.0)
    H = np.where(live, H, 0.0)
    return kappa, H, g2


def anisotropy_kappa(grad, params: Params):
    """Anisotropy coefficient ``kappa(grad phi)``.

    Fourfold symmetry uses the quartic-ratio form, which also covers 3D;
    other fold counts use ``1 + eps4 cos(m theta)`` with the full-angle
    ``theta = atan2(g_y, g_x)``. Where ``|grad|^2 < eta`` the coefficient
    is 1.
    """
    return _anisotropy(grad, params)[0]


def anisotropy_H(grad, params: Params):
    """Gradient of ``kappa`` with respect to the components of ``grad``."""
    return _anisotropy(grad, params)[1]


def anisotropic_flux(grad, params: Params):
    """``kappa^2 g + kappa |g|^2 H``, plus ``kappa`` for reuse."""
    kappa, H, g2 = _anisotropy(grad, params)
    return kappa**2 * grad + kappa * g2 * H, kappa, g2


def aniso_divergence(grid: Grid, phi, params: Params):
    flux, _, _ = anisotropic_flux(grid.gradient(phi), params)
    return grid.divergence(flux)


# ----------------------------------------------------------------------
# energies
# ----------------------------------------------------------------------
def energy_density(grid: Grid, phi, params: Params):
    """Pointwise ``|kappa grad phi|^2 / 2 + F / (4 eps^2)``."""
    grad = grid.gradient(phi)
    kappa, _, g2 = _anisotropy(grad, params)
    F, _ = double_well(phi)
    return 0.5 * kappa**2 * g2 + F / (4.0 * params.eps**2)


def energy_original(grid: Grid, phi, u, params: Params) -> float:
    """Total free energy of ``(phi, u)``."""
    dens = energy_density(grid, phi, params)
    dens = dens + params.lam / (2.0 * params.eps * params.K) * u * u
    return float(grid.integrate(dens))


def quadratize_U(grid: Grid, phi, params: Params):
    """Auxiliary variable ``U = sqrt(energy density + B)``."""
    return np.sqrt(energy_density(grid, phi, params) + params.B)


def _z_and_U(grid: Grid, phi, params: Params):
    grad = grid.gradient(phi)
    kappa, H, g2 = _anisotropy(grad, params)
    flux = kappa**2 * grad + kappa * g2 * H
    F, f = double_well(phi)
    inv_eps2 = 1.0 / params.eps**2
    U = np.sqrt(0.5 * kappa**2 * g2 + 0.25 * inv_eps2 * F + params.B)
    Z = (-grid.divergence(flux) + inv_eps2 * f) / U
    return Z, U


def z_of(grid: Grid, phi, params: Params):
    """``Z(phi) = (-div(flux) + f/eps^2) / U(phi)``."""
    return _z_and_U(grid, phi, params)[0]


def residual(grid: Grid, phi, u, phi_t, u_t, params: Params):
    """Residuals of both governing equations for given fields and rates.

    ``r_phi = tau phi_t - div(flux) + f/eps^2 + (lam/eps) p' u`` and
    ``r_u = u_t - D Lap u - K q phi_t`` where ``q = p'`` (or 1 under the
    ``unit_derivative`` latent variant).
    """
    _, f = double_well(phi)
    _, pp = latent(phi, params)
    r_phi = (
        params.tau * phi_t
        - aniso_divergence(grid, phi, params)
        + f / params.eps**2
        + params.lam / params.eps * pp * u
    )
    r_u = u_t - params.D * grid.laplacian(u) - params.K * heat_coupling(phi, params) * phi_t
    return r_phi, r_u


def energy_modified(grid: Grid, state: State, params: Params) -> float:
    """Discrete BDF2 energy built from the two stored time levels."""
    if state.U is None or state.U_prev is None:
        raise ValueError("modified energy needs both auxiliary levels U and U_prev")
    U, Up = state.U, state.U_prev
    u, up = state.u, state.u_prev
    dphi = state.phi - state.phi_prev
    e = 0.5 * (grid.inner(U, U) + grid.inner(2 * U - Up, 2 * U - Up))
    e += params.lam / (2 * params.eps * params.K) * 0.5 * (
        grid.inner(u, u) + grid.inner(2 * u - up, 2 * u - up)
    )
    if params.s1:
        e += params.s1 / params.eps**2 * 0.5 * grid.inner(dphi, dphi)
    if params.s2:
        e += params.s2 * 0.5 * grid.h1_seminorm2(dphi)
    return float(e)
