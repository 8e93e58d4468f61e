"""Idealized Gaussian log-correlated fields on the disk.

Two kernels are provided: the rotation-invariant field with covariance
-(1/2) log|1 - z conj(w)| and its symmetrized companion with the extra
-(1/2) log|1 - z w| term (the pullback of the real-axis field through the
Joukowsky chart).  On top of the kernels: exact exponential moments of
signed point biases, the change of mean under biasing, reproducible
sampling at finite point sets, and branching-covariance diagnostics.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import substream
from .hyperbolic import hyp_dist

__all__ = [
    "BiasSpec",
    "GaussKernel",
    "FieldSample",
    "kernel_g",
    "kernel_t",
    "cov_g",
    "cov_t",
    "exp_moment_g",
    "bias_variance",
    "biased_mean",
    "sample_gauss",
    "brw_check",
    "field_sample_to_csv",
]

# covariance offset of the branching form for the G kernel: -log(2)/2
K_OFFSET_G = -0.5 * math.log(2.0)


def cov_g(z, w):
    """Covariance -(1/2) log|1 - z*conj(w)| of the conformally invariant field."""
    return -0.5 * math.log(abs(1.0 - z * np.conj(w)))


def cov_t(z, w):
    """Covariance -(1/2) log|1-z*w| - (1/2) log|1-z*conj(w)| (symmetrized field)."""
    return -0.5 * math.log(abs(1.0 - z * w)) - 0.5 * math.log(abs(1.0 - z * np.conj(w)))


@dataclass(frozen=True)
class GaussKernel:
    """A named covariance kernel on the open disk."""

    kind: str
    cov: object  # callable (z, w) -> float

    def matrix(self, points):
        pts = np.asarray(points, dtype=complex)
        n = len(pts)
        out = np.empty((n, n))
        for i in range(n):
            for k in range(i, n):
                out[i, k] = out[k, i] = self.cov(pts[i], pts[k])
        return out


def kernel_g():
    return GaussKernel(kind="G", cov=cov_g)


def kernel_t():
    return GaussKernel(kind="T", cov=cov_t)


@dataclass(frozen=True)
class BiasSpec:
    """Signed point set defining B(F) = sum 2 F(z) - sum 2 F(w).

    plus_points carry weight +2, minus_points weight -2.  Points must lie in
    the open disk; the two lists must be disjoint, and repeats within a list
    are rejected (the moment formulas degenerate there).
    """

    plus_points: tuple = field(default_factory=tuple)
    minus_points: tuple = field(default_factory=tuple)

    def __post_init__(self):
        plus = tuple(complex(z) for z in self.plus_points)
        minus = tuple(complex(w) for w in self.minus_points)
        object.__setattr__(self, "plus_points", plus)
        object.__setattr__(self, "minus_points", minus)
        for z in plus + minus:
            if abs(z) >= 1.0:
                raise ValueError(f"bias point {z} not in the open disk")
        if len(set(plus)) != len(plus) or len(set(minus)) != len(minus):
            raise ValueError("repeated point within a bias list")
        if set(plus) & set(minus):
            raise ValueError("plus and minus point sets must be disjoint")

    def points_and_weights(self):
        pts = self.plus_points + self.minus_points
        wts = (2.0,) * len(self.plus_points) + (-2.0,) * len(self.minus_points)
        return pts, wts


def bias_variance(bias, kernel):
    """Variance of B(W) under the kernel, from the covariance quadratic form."""
    pts, wts = bias.points_and_weights()
    var = 0.0
    for zi, wi in zip(pts, wts):
        for zk, wk in zip(pts, wts):
            var += wi * wk * kernel.cov(zi, zk)
    return var


def exp_moment_g(bias):
    """E exp(B(G)) by the closed product formula for the G kernel.

    Evaluates prod_{Z x W} |1-z conj(w)|^2 over the product of the diagonal
    factors of Z and W, in log domain.  Equals exp(Var(B(G))/2).
    """
    Z = bias.plus_points
    W = bias.minus_points
    log_val = 0.0
    for z in Z:
        for w in W:
            g = abs(1.0 - z * np.conj(w))
            if g < 1e-15:
                raise ValueError("degenerate bias: near-coincident conjugate pair")
            log_val += 2.0 * math.log(g)
    for z in Z:
        for z2 in Z:
            g = abs(1.0 - z * np.conj(z2))
            if g < 1e-15:
                raise ValueError("degenerate bias: near-coincident conjugate pair")
            log_val -= math.log(g)
    for w in W:
        for w2 in W:
            g = abs(1.0 - w * np.conj(w2))
            if g < 1e-15:
                raise ValueError("degenerate bias: near-coincident conjugate pair")
            log_val -= math.log(g)
    return math.exp(log_val)


def biased_mean(bias, kernel, zeta):
    """Mean shift E[W(zeta) B(W)] induced by tilting the law by e^{B(W)}."""
    pts, wts = bias.points_and_weights()
    return sum(w * kernel.cov(zeta, p) for p, w in zip(pts, wts))


@dataclass
class FieldSample:
    """Realizations of a Gaussian field at a fixed point set.

    values has shape (n_samples, n_points); reproducible from (points, seed).
    """

    points: np.ndarray
    values: np.ndarray
    seed: int
    kind: str
    factorization: str

    def __post_init__(self):
        self._index = {complex(z): i for i, z in enumerate(self.points)}

    def point_index(self, z):
        try:
            return self._index[complex(z)]
        except KeyError:
            raise KeyError(f"point {z} not in the sampled set") from None


def _factor_covariance(cov):
    """Cholesky factor of cov, falling back to clipped eigendecomposition."""
    n = cov.shape[0]
    try:
        return np.linalg.cholesky(cov), "cholesky"
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(cov)
    floor = -1e-8 * (np.trace(cov) / n)
    if vals.min() < floor:
        raise np.linalg.LinAlgError(
            f"covariance eigenvalue {vals.min():.3e} below tolerance {floor:.3e}; "
            "points are too close to degenerate"
        )
    return vecs * np.sqrt(np.clip(vals, 0.0, None)), "eigen"


def sample_gauss(points, kernel, n_samples, seed, row_block=4096):
    """Draw i.i.d. centered Gaussian vectors with the kernel covariance.

    Row i is generated from the Philox substream keyed by (seed, i), so any
    subset of rows can be produced concurrently with identical results.
    """
    pts = np.asarray(points, dtype=complex)
    if len(set(pts.tolist())) != len(pts):
        raise ValueError("sample points must be pairwise distinct")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cov = kernel.matrix(pts)
    L, fact = _factor_covariance(cov)
    npts = len(pts)
    values = np.empty((n_samples, npts))
    for i in range(n_samples):
        x = substream(seed, i).standard_normal(npts)
        values[i] = L @ x
    return FieldSample(points=pts, values=values, seed=int(seed), kind=kernel.kind,
                       factorization=fact)


def field_sample_to_csv(sample, path):
    """Write a FieldSample as sample_index, point_index, re_z, im_z, value rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_index", "point_index", "re_z", "im_z", "value"])
        for i in range(sample.values.shape[0]):
            for k, z in enumerate(sample.points):
                w.writerow([i, k, f"{z.real:.17g}", f"{z.imag:.17g}",
                            f"{sample.values[i, k]:.17g}"])


def brw_check(grid, kernel):
    """Empirical branching-covariance constants over a point grid.

    Returns c_b (sup of Var(W(z)-W(w))/d_H^2 over pairs with d_H <= 1), c_c
    (sup of |E[W(y)(W(z)-W(w))]|/d_H over the same pairs and all y), and
    k_offset_range, the range of E W(z1)W(z2) minus the branching main term
    (1/2) min{-log|sin((theta1-theta2)/2)|, h1, h2} with h = d_H(0, z).
    """
    pts = np.asarray(grid, dtype=complex)
    n = len(pts)
    cov = kernel.matrix(pts)
    h = np.array([hyp_dist(0.0, z) for z in pts])
    theta = np.angle(pts)

    c_b = 0.0
    c_c = 0.0
    offsets = []
    for i in range(n):
        for k in range(n):
            if i == k:
                continue  # 0/0 pair excluded
            d = hyp_dist(pts[i], pts[k])
            if 0.0 < d <= 1.0:
                var = cov[i, i] + cov[k, k] - 2.0 * cov[i, k]
                c_b = max(c_b, var / d**2)
                cross = np.abs(cov[:, i] - cov[:, k]).max()
                c_c = max(c_c, cross / d)
            s = abs(math.sin((theta[i] - theta[k]) / 2.0))
            log_term = math.inf if s == 0.0 else -math.log(s)
            main = 0.5 * min(log_term, h[i], h[k])
            offsets.append(cov[i, k] - main)
    offsets = np.array(offsets)
    return {
        "c_b": float(c_b),
        "c_c": float(c_c),
        "k_offset_range": (float(offsets.min()), float(offsets.max())),
    }
