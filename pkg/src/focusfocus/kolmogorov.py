"""Frequency map and its action Jacobian near the singular fiber.

omega1 = 2 pi / T and omega2 = Theta / T on each torus.  The Jacobian
determinant with respect to the actions is obtained from the (h, l) chart
and the exact chain factor:

    dI1 = (T dh - Theta dl) / 2 pi,  I2 = l
    => det d(h,l)/dI = 2 pi / T = omega1,
    det domega/dI = omega1 * det domega/d(h,l).

It is compared against the predicted asymptote -(2 pi alpha / (|j| tau1^2))^2,
which is negative: the frequency map is non-degenerate on every regular
torus close to the fiber.  The Jacobian is branch-invariant, so stencils
only need local Theta alignment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import TWO_PI, align_angle
from .lattice import reduced_period_rotation, to_momentum_chart
from .systems import EMValue, SystemDefinition

JAC_STEP_REL = 1e-2     # FD steps shrink with |j|: derivative scales ~1/|j|


@dataclass(frozen=True)
class FrequencySample:
    c: EMValue
    j_mod: float
    tau1: float
    omega1: float
    omega2: float
    det_c: float          # det d(omega1, omega2)/d(h, l)
    det_I: float          # = omega1 * det_c
    asymptote: float      # -(2 pi alpha / (|j| tau1^2))^2
    ratio: float          # det_I / asymptote


def frequency_map(system: SystemDefinition, c: EMValue,
                  engine: str = "quadrature") -> tuple[float, float]:
    """(omega1, omega2) = (2 pi / T, Theta / T) with the per-torus Theta."""
    T, theta = reduced_period_rotation(system, c, engine=engine)
    return TWO_PI / T, theta / T


def _aligned_frequencies(system: SystemDefinition, c: EMValue,
                         theta_ref: float) -> tuple[float, float]:
    T, theta = reduced_period_rotation(system, c)
    theta = align_angle(theta, theta_ref)
    return TWO_PI / T, theta / T


def frequency_jacobian_det(system: SystemDefinition, c: EMValue,
                           step_rel: float = JAC_STEP_REL) -> FrequencySample:
    """Central differences of (omega1, omega2) in (h, l), with Theta locally
    branch-aligned across the stencil."""
    ff = system.constants()
    j = to_momentum_chart(system, c)
    d = step_rel * j.modulus
    T0, theta0 = reduced_period_rotation(system, c)

    w1hp, w2hp = _aligned_frequencies(system, EMValue(c.h + d, c.l), theta0)
    w1hm, w2hm = _aligned_frequencies(system, EMValue(c.h - d, c.l), theta0)
    w1lp, w2lp = _aligned_frequencies(system, EMValue(c.h, c.l + d), theta0)
    w1lm, w2lm = _aligned_frequencies(system, EMValue(c.h, c.l - d), theta0)

    d11 = (w1hp - w1hm) / (2 * d)
    d21 = (w2hp - w2hm) / (2 * d)
    d12 = (w1lp - w1lm) / (2 * d)
    d22 = (w2lp - w2lm) / (2 * d)
    det_c = d11 * d22 - d12 * d21

    omega1 = TWO_PI / T0
    tau1 = ff.alpha * T0
    asym = -((TWO_PI * ff.alpha) / (j.modulus * tau1 ** 2)) ** 2
    det_i = omega1 * det_c
    return FrequencySample(c=c, j_mod=j.modulus, tau1=tau1,
                           omega1=omega1, omega2=theta0 / T0,
                           det_c=det_c, det_I=det_i, asymptote=asym,
                           ratio=det_i / asym)


def tau_jacobian(system: SystemDefinition, c: EMValue,
                 step_rel: float = JAC_STEP_REL,
                 richardson: bool = True) -> np.ndarray:
    """d(tau1, tau2)/d(j1, j2) on the linear chart by (optionally
    Richardson-extrapolated) central differences; rows = (tau1, tau2),
    columns = (d/dj1, d/dj2)."""
    ff = system.constants()
    j = to_momentum_chart(system, c)
    d = step_rel * j.modulus
    _, theta0 = reduced_period_rotation(system, c)

    def taus(j1: float, j2: float) -> tuple[float, float]:
        cc = EMValue(ff.alpha * j1 + ff.omega * j2, j2)
        T, theta = reduced_period_rotation(system, cc)
        theta = align_angle(theta, theta0)
        return ff.alpha * T, ff.omega * T - theta

    def jac(step: float) -> np.ndarray:
        t1p = taus(j.j1 + step, j.j2)
        t1m = taus(j.j1 - step, j.j2)
        t2p = taus(j.j1, j.j2 + step)
        t2m = taus(j.j1, j.j2 - step)
        return np.array([
            [(t1p[0] - t1m[0]) / (2 * step), (t2p[0] - t2m[0]) / (2 * step)],
            [(t1p[1] - t1m[1]) / (2 * step), (t2p[1] - t2m[1]) / (2 * step)],
        ])

    if not richardson:
        return jac(d)
    return (4.0 * jac(0.5 * d) - jac(d)) / 3.0


def asymptote_sweep(system: SystemDefinition, ray_angle: float,
                    r_min: float, r_max: float,
                    samples_per_decade: int = 3) -> list[FrequencySample]:
    """Logarithmically spaced frequency-Jacobian samples along one ray."""
    if not (0.0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    ff = system.constants()
    n = max(2, int(round(samples_per_decade * math.log10(r_max / r_min))) + 1)
    out = []
    for rho in np.geomspace(r_min, r_max, n):
        j1 = rho * math.cos(ray_angle)
        j2 = rho * math.sin(ray_angle)
        c = EMValue(ff.alpha * j1 + ff.omega * j2, j2)
        out.append(frequency_jacobian_det(system, c))
    return out
