"""Poincare-disk geometry: metrics, automorphisms, the Joukowsky chart,
ray points, the comparison wedge, and the branching-distance profile.

Points are plain complex numbers.  Functions that require a point strictly
inside the unit disk raise ValueError otherwise.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainParams",
    "hyp_dist",
    "pseudo_dist",
    "mobius_to_zero",
    "joukowsky",
    "ray_point",
    "branch_profile",
    "branch_profile_grid",
    "in_domain",
]


def _check_disk(*points):
    for z in points:
        if abs(z) >= 1.0:
            raise ValueError(f"point {z} not in the open unit disk")


def pseudo_dist(a, b):
    """Pseudohyperbolic distance |a-b| / |1 - a*conj(b)|, a metric bounded by 1.

    The denominator is evaluated as (1-a) + (1-conj(b)) - (1-a)(1-conj(b)),
    which keeps full relative precision when both points sit within a few
    ulps of the unit circle.
    """
    _check_disk(a, b)
    a = complex(a)
    bc = complex(b).conjugate()
    u = 1.0 - a
    v = 1.0 - bc
    return abs(a - bc.conjugate()) / abs(u + v - u * v)


def hyp_dist(a, b):
    """Hyperbolic distance on the disk, d(0, z) = log((1+|z|)/(1-|z|)).

    Evaluated as 2*atanh(pseudo_dist(a, b)), which is exact for a = 0 and
    stable for nearly coincident points.
    """
    return 2.0 * math.atanh(pseudo_dist(a, b))


def mobius_to_zero(y, z):
    """Disk automorphism sending y to 0, evaluated at z: (z-y)/(1-z*conj(y))."""
    _check_disk(y, z)
    return (z - y) / (1.0 - z * np.conj(y))


def joukowsky(z):
    """Joukowsky map (z + 1/z)/2; collapses the unit circle onto [-1, 1]."""
    if z == 0:
        raise ValueError("Joukowsky map is singular at z = 0")
    return (z + 1.0 / z) / 2.0


def ray_point(j):
    """The j-th point on the positive-axis ray: tanh(j/2), unit hyperbolic spacing."""
    if j < 0:
        raise ValueError("ray index must be nonnegative")
    return math.tanh(j / 2.0)


@dataclass(frozen=True)
class DomainParams:
    """Annular wedge anchored at a boundary point omega.

    The wedge is {r e^{i theta} omega : 1 - N^-delta <= r <= 1 - N^(-1+delta),
    |theta| <= N^-delta}.
    """

    N: int
    delta: float
    omega: complex = 1j

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not 0.0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        if abs(abs(self.omega) - 1.0) > 1e-12:
            raise ValueError("omega must lie on the unit circle")

    @property
    def r_inner(self):
        return 1.0 - self.N ** (-self.delta)

    @property
    def r_outer(self):
        return 1.0 - self.N ** (-1.0 + self.delta)

    @property
    def theta_max(self):
        return self.N ** (-self.delta)


def in_domain(params, z):
    """True iff z lies in the wedge described by params (boundary included
    except |z| = 1, which never qualifies since r_outer < 1)."""
    r = abs(z)
    if not (params.r_inner <= r <= params.r_outer):
        return False
    theta = cmath.phase(z / params.omega)
    return abs(theta) <= params.theta_max


def branch_profile(h, j, theta):
    """Exact vs branching approximation of d(zeta_h, e^{i theta} zeta_j).

    exact  -- hyperbolic law of cosines with side lengths h and j and angle
              theta between them
    approx -- h + j - 2*min(-log|sin(theta/2)|, h, j)
    error  -- exact - approx

    At theta = 0 the min term is min(h, j) (the log term is +inf), so the
    approximation is exact on a common ray.
    """
    if h < 0 or j < 0:
        raise ValueError("ray indices must be nonnegative")
    h = float(h)
    j = float(j)
    cos_t = math.cos(theta)
    cosh_a = 0.5 * math.cosh(h + j) * (1.0 - cos_t) + 0.5 * math.cosh(h - j) * (1.0 + cos_t)
    # rounding can push cosh_a a hair below 1 for tiny h, j
    exact = math.acosh(max(cosh_a, 1.0))
    s = abs(math.sin(theta / 2.0))
    log_term = math.inf if s == 0.0 else -math.log(s)
    approx = h + j - 2.0 * min(log_term, h, j)
    return {"exact": exact, "approx": approx, "error": exact - approx}


def branch_profile_grid(h, j, thetas):
    """branch_profile errors over a whole theta grid at once.

    Returns (errors, refined), where refined holds |error| e^k |theta| on
    the points with k = min(h, j) > -log|sin(theta/2)| and 0 elsewhere.
    """
    thetas = np.asarray(thetas, dtype=float)
    h = float(h)
    j = float(j)
    cos_t = np.cos(thetas)
    cosh_a = 0.5 * math.cosh(h + j) * (1.0 - cos_t) + 0.5 * math.cosh(h - j) * (1.0 + cos_t)
    exact = np.arccosh(np.maximum(cosh_a, 1.0))
    s = np.abs(np.sin(thetas / 2.0))
    with np.errstate(divide="ignore"):
        log_term = np.where(s > 0.0, -np.log(np.maximum(s, 1e-300)), np.inf)
    approx = h + j - 2.0 * np.minimum(log_term, min(h, j))
    errors = exact - approx
    k = min(h, j)
    in_regime = (s > 0.0) & (k > log_term)
    refined = np.where(in_regime, np.abs(errors) * math.exp(k) * np.abs(thetas), 0.0)
    return errors, refined
