"""Nonlocal energies: the Besov double sum, the spectral fractional form,
its stiffness-matrix realization, and the semigroup-regularized energies.

The Besov denominator uses the exponent 2*theta on the distance (the scaling
under which the two energies are comparable) together with closed balls, so
the ball mass is always positive.  Diagonal pairs are excluded from the
double sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantFunctionInFamily,
    NonpositiveTime,
    ThetaOutOfRange,
)
from .space import Space
from .spectral import SpectralDecomposition, frac_heat_kernel, spectral_power_apply

__all__ = [
    "FracEnergyForm",
    "besov_energy",
    "frac_energy",
    "frac_bilinear",
    "stiffness_matrix",
    "regularized_energy",
    "regularized_energy_double_sum",
    "comparability_report",
]


def _check_theta(theta):
    if not 0 < theta < 1:
        raise ThetaOutOfRange(f"theta must lie in (0, 1), got {theta}")


@dataclass(frozen=True)
class FracEnergyForm:
    """Fractional stiffness operator K with f^T K h = E_theta(f, h).

    K = M Phi diag(lambda^theta) Phi^T M for M = diag(mu); symmetric positive
    semidefinite with the constants as nullspace.
    """

    theta: float
    stiffness: np.ndarray

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.stiffness @ f

    def energy(self, f: np.ndarray) -> float:
        return float(f @ (self.stiffness @ f))


def besov_energy(space: Space, theta: float, f) -> float:
    """Gagliardo-type double sum
    sum_{z != w} |f(z)-f(w)|^2 / (d(z,w)^{2 theta} mu(B(z, d(z,w)))) mu(z) mu(w).
    """
    _check_theta(theta)
    f = np.asarray(f, dtype=float)
    n = space.n
    off = ~np.eye(n, dtype=bool)
    # ball[z, w] = mass of the closed ball around z of radius d(z, w)
    ball = (space.dist[:, None, :] <= space.dist[:, :, None]).astype(float) @ space.mu
    diff2 = (f[:, None] - f[None, :]) ** 2
    weights = np.zeros((n, n))
    weights[off] = 1.0 / (space.dist[off] ** (2 * theta) * ball[off])
    return float(np.einsum("zw,zw,z,w->", diff2, weights, space.mu, space.mu))


def frac_energy(dec: SpectralDecomposition, theta: float, f) -> float:
    return frac_bilinear(dec, theta, f, f)


def frac_bilinear(dec: SpectralDecomposition, theta: float, f, h) -> float:
    """E_theta(f, h) = sum_k lambda_k^theta <f, phi_k>_mu <h, phi_k>_mu."""
    _check_theta(theta)
    lam = dec.lambdas
    weights = np.zeros_like(lam)
    pos = lam > 0
    weights[pos] = lam[pos] ** theta
    return float(np.sum(weights * dec.coefficients(f) * dec.coefficients(h)))


def stiffness_matrix(dec: SpectralDecomposition, theta: float) -> FracEnergyForm:
    _check_theta(theta)
    lam = dec.lambdas
    weights = np.zeros_like(lam)
    pos = lam > 0
    weights[pos] = lam[pos] ** theta
    m_phi = dec.space.mu[:, None] * dec.phis
    k = (m_phi * weights[None, :]) @ m_phi.T
    k = 0.5 * (k + k.T)
    k.setflags(write=False)
    return FracEnergyForm(theta=theta, stiffness=k)


def regularized_energy(dec: SpectralDecomposition, theta: float, t: float, f) -> float:
    """(1/t) sum_x (f - T_t f)(x) f(x) mu(x) for the subordinated semigroup T_t,
    equal to sum_k (1 - exp(-t lambda_k^theta))/t <f, phi_k>_mu^2.

    Monotone decreasing in t and increasing to E_theta(f, f) as t -> 0.
    """
    _check_theta(theta)
    if t <= 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    lam = dec.lambdas
    powers = np.zeros_like(lam)
    pos = lam > 0
    powers[pos] = lam[pos] ** theta
    coeffs = dec.coefficients(f)
    return float(np.sum(-np.expm1(-t * powers) / t * coeffs**2))


def regularized_energy_double_sum(
    dec: SpectralDecomposition, theta: float, t: float, f
) -> float:
    """Same quantity as `regularized_energy` via the kernel double sum
    (1/2t) sum_{x,y} |f(x)-f(y)|^2 q_t(x,y) mu(x) mu(y); the two routes must
    agree to roundoff."""
    f = np.asarray(f, dtype=float)
    q = frac_heat_kernel(dec, theta, t).entries
    mu = dec.space.mu
    diff2 = (f[:, None] - f[None, :]) ** 2
    return float(np.einsum("xy,xy,x,y->", diff2, q, mu, mu) / (2.0 * t))


def comparability_report(
    space: Space, dec: SpectralDecomposition, theta: float, family
) -> dict:
    """Min and max of besov/fractional energy ratios over a family of vectors.

    Both energies vanish exactly on constants, so constant members are
    rejected rather than producing 0/0.
    """
    _check_theta(theta)
    family = [np.asarray(f, dtype=float) for f in family]
    if not family:
        raise ConstantFunctionInFamily("family is empty")
    ratios = []
    for f in family:
        if np.ptp(f) == 0:
            raise ConstantFunctionInFamily("family contains a constant vector")
        ratios.append(besov_energy(space, theta, f) / frac_energy(dec, theta, f))
    return {
        "theta": theta,
        "n": space.n,
        "ratio_min": float(min(ratios)),
        "ratio_max": float(max(ratios)),
        "family_size": len(family),
    }
