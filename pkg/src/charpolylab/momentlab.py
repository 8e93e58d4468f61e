"""Mixed-exponential-moment verification and the second-moment lower-bound
simulator: bias-class validators, the matching-lemma functional, barrier
events on ray grids, and the Cauchy-Schwarz counting experiment.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .charpoly import exp_moment_field
from .gaussfield import BiasSpec, exp_moment_g, kernel_g, sample_gauss
from .hyperbolic import DomainParams, hyp_dist, in_domain, pseudo_dist, ray_point

__all__ = [
    "BiasClassParams",
    "LowerBoundParams",
    "PairConfiguration",
    "LowerBoundResult",
    "omega_grid",
    "validate_separated_bias",
    "validate_paired_bias",
    "mem_ratio",
    "matching_ratio",
    "matching_subset_sup",
    "pair_config_validate",
    "random_pair_configuration",
    "random_separated_bias",
    "barrier_indicator",
    "midpoint",
    "branch_depth",
    "lower_bound_mc",
]


@dataclass(frozen=True)
class BiasClassParams:
    """Parameters of the separated / paired bias classes."""

    k: int
    ell: int
    epsilon: float
    delta: float
    N: int
    omega: complex = 1j

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")

    def domain(self):
        return DomainParams(N=self.N, delta=self.delta, omega=self.omega)


def validate_separated_bias(bias, params):
    """Membership in the separated class: k plus- and k minus-points in the
    comparison wedge, pairwise hyperbolic separation >= epsilon."""
    dom = params.domain()
    pts = list(bias.plus_points) + list(bias.minus_points)
    if len(bias.plus_points) != params.k or len(bias.minus_points) != params.k:
        return False
    if any(not in_domain(dom, z) for z in pts):
        return False
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if hyp_dist(pts[i], pts[j]) < params.epsilon:
                return False
    return True


def validate_paired_bias(base, extra_pairs, params):
    """Membership of base + extra tight pairs in the paired perturbation class.

    extra_pairs lists (z, w) with the bijection as given; each pair must sit
    in the wedge and be tighter than every competing distance to the other
    points of the full plus / minus sets.
    """
    dom = params.domain()
    zs = [complex(z) for z, _ in extra_pairs]
    ws = [complex(w) for _, w in extra_pairs]
    if any(not in_domain(dom, v) for v in zs + ws):
        return False
    Z = list(base.plus_points) + zs
    W = list(base.minus_points) + ws
    for z, w in zip(zs, ws):
        gap = hyp_dist(z, w)
        for other in Z:
            if other != z and hyp_dist(z, other) < gap:
                return False
        for other in W:
            if other != w and hyp_dist(w, other) < gap:
                return False
    return True


def mem_ratio(table, model, bias):
    """E e^{B(Z)} / E e^{B(G)}: the mixed-exponential-moment comparison."""
    return exp_moment_field(table, model, bias) / exp_moment_g(bias)


def _pseudo_product(A, B):
    out = 1.0
    for a in A:
        for b in B:
            d = pseudo_dist(a, b)
            if d == 0.0:
                raise ValueError("coincident points in a matching product")
            out *= d
    return out


def matching_ratio(Z, W, T, S):
    """L(T, S) = d(T,S) d(T*,S*) / (d(T,T*) d(S,S*)) in pseudo distances.

    T* and S* are the complements within Z and W; empty products are 1.
    """
    Z = [complex(z) for z in Z]
    W = [complex(w) for w in W]
    T = [complex(t) for t in T]
    S = [complex(s) for s in S]
    Tc = [z for z in Z if z not in T]
    Sc = [w for w in W if w not in S]
    num = _pseudo_product(T, S) * _pseudo_product(Tc, Sc)
    den = _pseudo_product(T, Tc) * _pseudo_product(S, Sc)
    return num / den


def matching_subset_sup(config):
    """Brute-force sup of L(T, S) over all subsets T of Z, S of W.

    Enumerates every (T, S) pair via bitmask sums over precomputed
    log-distance matrices; exact and fast for k + l <= 5.
    """
    Z = [complex(z) for z in config.Z]
    W = [complex(w) for w in config.W]
    n = len(Z)
    lzw = np.array([[math.log(pseudo_dist(z, w)) for w in W] for z in Z])
    lzz = np.array([[math.log(pseudo_dist(a, b)) if a != b else 0.0
                     for b in Z] for a in Z])
    lww = np.array([[math.log(pseudo_dist(a, b)) if a != b else 0.0
                     for b in W] for a in W])
    masks = range(2 ** n)
    best = -math.inf
    for tmask in masks:
        tin = [i for i in range(n) if tmask >> i & 1]
        tout = [i for i in range(n) if not tmask >> i & 1]
        den_t = sum(lzz[i, j] for i in tin for j in tout)
        for smask in masks:
            sin = [i for i in range(n) if smask >> i & 1]
            sout = [i for i in range(n) if not smask >> i & 1]
            num = sum(lzw[i, j] for i in tin for j in sin)
            num += sum(lzw[i, j] for i in tout for j in sout)
            den = den_t + sum(lww[i, j] for i in sin for j in sout)
            best = max(best, num - den)
    return math.exp(best)


@dataclass
class PairConfiguration:
    """k+l pairs (z_j, w_j): the first l tight, the last k epsilon-separated."""

    pairs: list
    ell_paired: int
    epsilon: float

    @property
    def Z(self):
        return [z for z, _ in self.pairs]

    @property
    def W(self):
        return [w for _, w in self.pairs]


def pair_config_validate(config):
    """Literal check of the two pair-configuration conditions in the
    pseudohyperbolic metric."""
    Z, W = config.Z, config.W
    n = len(config.pairs)
    ell = config.ell_paired
    eps = config.epsilon
    for j in range(ell):
        zj, wj = config.pairs[j]
        gap = pseudo_dist(zj, wj)
        for w in W:
            if w != wj and pseudo_dist(w, wj) < gap:
                return False
        for z in Z:
            if z != zj and pseudo_dist(z, zj) < gap:
                return False
    for i in range(ell, n):
        for j in range(ell, n):
            if i < j:
                if min(pseudo_dist(Z[i], Z[j]), pseudo_dist(W[i], W[j])) < eps:
                    return False
            if pseudo_dist(Z[i], W[j]) < eps:
                return False
    return True


def _scatter_centers(rng, count, min_sep, radius=0.9, max_tries=5000):
    pts = []
    for _ in range(max_tries):
        z = radius * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
        if all(pseudo_dist(z, p) >= min_sep for p in pts):
            pts.append(z)
            if len(pts) == count:
                return pts
    raise RuntimeError("could not scatter separated centers; lower epsilon")


def random_pair_configuration(k, ell, epsilon, rng, tight_frac=0.05):
    """A random valid pair-configuration: l tight pairs plus k separated ones."""
    centers = _scatter_centers(rng, ell + 2 * k, 1.5 * epsilon)
    pairs = []
    for j in range(ell):
        c = centers[j]
        off = tight_frac * epsilon * cmath.exp(2j * math.pi * rng.random())
        pairs.append((c, c + off * (1 - abs(c) ** 2)))
    for i in range(k):
        pairs.append((centers[ell + 2 * i], centers[ell + 2 * i + 1]))
    config = PairConfiguration(pairs=pairs, ell_paired=ell, epsilon=epsilon)
    if not pair_config_validate(config):  # pragma: no cover - generator guard
        raise RuntimeError("generator produced an invalid configuration")
    return config


def random_separated_bias(params, rng, max_tries=5000):
    """A random member of the separated class for the given parameters."""
    dom = params.domain()
    pts = []
    for _ in range(max_tries):
        r = rng.uniform(dom.r_inner, dom.r_outer)
        th = rng.uniform(-dom.theta_max, dom.theta_max)
        z = r * cmath.exp(1j * th) * params.omega
        if all(hyp_dist(z, p) >= params.epsilon for p in pts):
            pts.append(z)
            if len(pts) == 2 * params.k:
                bias = BiasSpec(plus_points=tuple(pts[:params.k]),
                                minus_points=tuple(pts[params.k:]))
                if not validate_separated_bias(bias, params):  # pragma: no cover
                    raise RuntimeError("generator emitted an invalid bias")
                return bias
    raise RuntimeError("could not place separated bias points; lower epsilon")


@dataclass
class LowerBoundParams:
    """Geometry of the second-moment experiment at depth n.

    Derived quantities: n0 = floor((1-delta) n), barrier heights
    b_k = k floor(n0/eta), the reference index r (first b_k beyond which the
    whole sphere lies within N^{-2 delta} of the boundary), and the angular
    lattice of spacing e^{-n0} centered at i.  When r = eta the barrier
    window is empty and the indicators are vacuous (flagged, not an error).
    """

    n: int
    delta: float
    eta: int
    stride: int = 1
    n0: int = field(init=False)
    b: tuple = field(init=False)
    r: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        if self.eta < 1 or self.n < 2 or self.stride < 1:
            raise ValueError("need eta >= 1, n >= 2, stride >= 1")
        if self.n > 12:
            raise ValueError("depth capped at 12 (point count grows like e^n)")
        self.n0 = int((1.0 - self.delta) * self.n)
        step = self.n0 // self.eta
        if step < 1:
            raise ValueError("eta too large: barrier step underflows")
        self.b = tuple(k * step for k in range(self.eta + 1))
        thresh = 1.0 - self.n_eff ** (-2.0 * self.delta)
        for k in range(self.eta + 1):
            if math.tanh(self.b[k] / 2.0) >= thresh:
                self.r = k
                break
        else:
            raise ValueError("no barrier height reaches the boundary layer")

    @property
    def n_eff(self):
        return math.exp(self.n)

    @property
    def barrier_vacuous(self):
        return self.r >= self.eta

    def tube_halfwidth(self):
        return self.eta * math.sqrt(self.n)


def omega_grid(params):
    """Angular lattice e^{i(pi/2 + h e^{-n0})}, |h| < N^{-delta} e^{n0}."""
    hmax = math.ceil(params.n_eff ** (-params.delta) * math.exp(params.n0)) - 1
    m = hmax // params.stride
    hs = params.stride * np.arange(-m, m + 1)
    return np.exp(1j * (math.pi / 2.0 + hs * math.exp(-params.n0)))


def midpoint(omega1, omega2, n0):
    """The integer closest to -log|omega1 - omega2|, floored at n0."""
    d = abs(complex(omega1) - complex(omega2))
    if d == 0.0:
        raise ValueError("midpoint undefined for coincident points")
    return max(round(-math.log(d)), n0)


def branch_depth(omega1, omega2, n0):
    """Branching height of the two rays: -log|omega1 - omega2| capped at n0.

    This is the quantity the two-point estimates are binned by; the capped
    version (rather than the floored midpoint) is what makes the
    well-separated and nearly-parallel regimes distinguishable.
    """
    d = abs(complex(omega1) - complex(omega2))
    if d == 0.0:
        raise ValueError("branch depth undefined for coincident points")
    return min(max(round(-math.log(d)), 0), n0)


def barrier_points(params, omega):
    """The ray points omega zeta_{b_k} for the barrier window r < k <= eta."""
    return [omega * ray_point(params.b[k]) for k in range(params.r + 1, params.eta + 1)]


def barrier_indicator(sample, row_index, omega, params, reference="ray"):
    """True iff the sampled field row stays in the tube around the linear
    profile along the omega ray (vacuously true when the window is empty).

    reference selects the recentering point: "ray" uses omega zeta_{b_r}
    (the version whose two-point estimates factorize and that the simulator
    uses); "center" uses i zeta_{b_r} as displayed in the event definition.
    """
    row = sample.values[row_index]
    ref_omega = 1j if reference == "center" else omega
    ref = row[sample.point_index(ref_omega * ray_point(params.b[params.r]))]
    half = params.tube_halfwidth()
    for k in range(params.r + 1, params.eta + 1):
        v = row[sample.point_index(omega * ray_point(params.b[k]))]
        if abs(v - ref - (params.b[k] - params.b[params.r])) > half:
            return False
    return True


@dataclass
class LowerBoundResult:
    """Empirical output of the second-moment experiment."""

    n: int
    delta: float
    eta: int
    r: int
    n0: int
    b: tuple
    n_omega: int
    n_samples: int
    barrier_vacuous: bool
    p_z_positive: float
    p_z_se: float
    cs_ratio: float
    cs_ratio_se: float
    one_point: dict
    per_m_bins: list
    field_max_exceed_frac: float
    bias_max_exceed_frac: float

    def to_json_dict(self):
        return {
            "n": self.n, "delta": self.delta, "eta": self.eta, "r": self.r,
            "n0": self.n0, "b": list(self.b), "n_omega": self.n_omega,
            "n_samples": self.n_samples, "barrier_vacuous": self.barrier_vacuous,
            "p_z_positive": self.p_z_positive, "p_z_se": self.p_z_se,
            "cs_ratio": self.cs_ratio, "cs_ratio_se": self.cs_ratio_se,
            "one_point": self.one_point, "per_m_bins": self.per_m_bins,
            "field_max_exceed_frac": self.field_max_exceed_frac,
            "bias_max_exceed_frac": self.bias_max_exceed_frac,
        }


def lower_bound_mc(params, n_samples, seed):
    """Sample the comparison field on the ray grid and run the biased
    second-moment bookkeeping.

    Each ray statistic is recentered at its own base point:
    Y(omega) = exp(2 W(omega zeta_{n0}) - 2 W(omega zeta_{b_r})) times the
    tube indicator along the ray.  (That recentering is what makes
    well-separated two-point expectations factorize; the common-center
    variant keeps an extra shared fluctuation inside every Y.  The max
    statistics below are recentered at the common point i zeta_{b_r}.)

    Returns empirical P[Z > 0] with its Cauchy-Schwarz lower bound
    (mean Z)^2 / mean(Z^2), the one-point comparison of E Y(omega) against
    the exact Gaussian value, a two-point table binned by branch depth
    (with the exact dropped-indicator Gaussian value per bin), and the
    fraction of runs whose center-recentered maximum clears (1 - 2 delta) n,
    both for the field increment and for the doubled bias functional.
    """
    omegas = omega_grid(params)
    m = len(omegas)
    kern = kernel_g()
    zeta_leaf = ray_point(params.n0)
    zeta_ref = ray_point(params.b[params.r])
    center_pt = 1j * zeta_ref

    points = [w * zeta_leaf for w in omegas]
    index_of = {complex(p): i for i, p in enumerate(points)}

    def intern(p):
        p = complex(p)
        if p not in index_of:
            index_of[p] = len(points)
            points.append(p)
        return index_of[p]

    ray_ref_idx = np.array([intern(w * zeta_ref) for w in omegas])
    barrier_idx = {}
    for wi, w in enumerate(omegas):
        for k in range(params.r + 1, params.eta + 1):
            barrier_idx[(wi, k)] = intern(w * ray_point(params.b[k]))
    center_idx = intern(center_pt)

    sample = sample_gauss(points, kern, n_samples, seed)
    vals = sample.values
    leaf = vals[:, :m]
    rayref = vals[:, ray_ref_idx]
    expo = 2.0 * (leaf - rayref)
    ok = np.ones((n_samples, m), dtype=bool)
    half = params.tube_halfwidth()
    for (wi, k), idx in barrier_idx.items():
        dev = vals[:, idx] - rayref[:, wi] - (params.b[k] - params.b[params.r])
        ok[:, wi] &= np.abs(dev) <= half
    Y = np.exp(expo) * ok

    Z = Y.sum(axis=1)
    p_z = float((Z > 0).mean())
    p_z_se = math.sqrt(max(p_z * (1 - p_z), 1e-12) / n_samples)

    mean_z = Z.mean()
    cs_ratio = float(mean_z ** 2 / (Z ** 2).mean())
    nb = min(10, n_samples)
    batches = np.array_split(Z, nb)
    ratios = [b.mean() ** 2 / (b ** 2).mean() for b in batches]
    cs_se = float(np.std(ratios, ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0

    # one-point: empirical E Y(omega) vs exact E e^{B_omega(G)}; by rotation
    # invariance of the kernel the exact value is the same for every omega
    ey_emp = Y.mean(axis=0)
    c_ll = kern.cov(zeta_leaf, zeta_leaf)
    c_rr = kern.cov(zeta_ref, zeta_ref)
    c_lr = kern.cov(zeta_leaf, zeta_ref)
    ey_exact = math.exp(2.0 * (c_ll + c_rr - 2.0 * c_lr))
    op_ratio = ey_emp / ey_exact
    one_point = {
        "exact": ey_exact,
        "ratio_mean": float(op_ratio.mean()),
        "ratio_min": float(op_ratio.min()),
        "ratio_max": float(op_ratio.max()),
    }

    # two-point table binned by branch depth
    emp2 = (Y.T @ Y) / n_samples
    prod1 = np.outer(ey_emp, ey_emp)
    leaf_pts = np.asarray(points[:m])
    ref_pts = leaf_pts / zeta_leaf * zeta_ref

    def cmat(a, b):
        return -0.5 * np.log(np.abs(1.0 - a[:, None] * np.conj(b[None, :])))

    c_LL = cmat(leaf_pts, leaf_pts)
    c_LR = cmat(leaf_pts, ref_pts)
    c_RR = cmat(ref_pts, ref_pts)
    cov_bb = 4.0 * (c_LL - c_LR - c_LR.T + c_RR)  # Cov(B_1, B_2) across rays
    var_b = 4.0 * (c_ll + c_rr - 2.0 * c_lr)
    # E e^{B1+B2} = e^{(Var B1 + Var B2)/2 + Cov(B1,B2)}, Var B_i = var_b by rotation
    exact2 = np.exp(var_b + cov_bb)
    gaps = np.abs(omegas[:, None] - omegas[None, :])
    np.fill_diagonal(gaps, 1.0)
    with np.errstate(divide="ignore"):
        depth = np.clip(np.round(-np.log(gaps)), 0, params.n0).astype(int)
    np.fill_diagonal(depth, params.n0)
    slack = params.n / params.eta + params.eta * math.sqrt(params.n)
    bins = []
    iu = np.triu_indices(m, k=1)
    dvals = depth[iu]
    for mval in sorted(set(dvals.tolist())):
        sel = dvals == mval
        e_emp = emp2[iu][sel].mean()
        e_ind = prod1[iu][sel].mean()
        e_exact = exact2[iu][sel].mean()
        lemma_bound = exact2[iu][sel] / (prod1[iu][sel]
                                         * math.exp(mval - params.b[params.r] + slack))
        bins.append({
            "m": int(mval),
            "n_pairs": int(sel.sum()),
            "factorization_ratio": float(e_emp / e_ind),
            "exact_pair_over_product": float(e_exact / e_ind),
            "lemma_bound_constant": float(lemma_bound.max()),
        })

    target = (1.0 - 2.0 * params.delta) * params.n
    center_max = (leaf - vals[:, center_idx][:, None]).max(axis=1)
    field_frac = float((center_max > target).mean())
    bias_frac = float((2.0 * center_max > target).mean())

    return LowerBoundResult(
        n=params.n, delta=params.delta, eta=params.eta, r=params.r,
        n0=params.n0, b=params.b, n_omega=m, n_samples=n_samples,
        barrier_vacuous=params.barrier_vacuous,
        p_z_positive=p_z, p_z_se=p_z_se,
        cs_ratio=cs_ratio, cs_ratio_se=cs_se,
        one_point=one_point, per_m_bins=bins,
        field_max_exceed_frac=field_frac, bias_max_exceed_frac=bias_frac,
    )
