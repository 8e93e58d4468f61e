import math

import numpy as np
import pytest

from charpolylab._rng import substream
from charpolylab.gaussfield import BiasSpec, FieldSample, kernel_g, sample_gauss
from charpolylab.hyperbolic import hyp_dist, ray_point
from charpolylab.momentlab import (BiasClassParams, LowerBoundParams,
                                   PairConfiguration, barrier_indicator,
                                   barrier_points, branch_depth,
                                   lower_bound_mc, matching_ratio,
                                   matching_subset_sup, mem_ratio, midpoint,
                                   omega_grid, pair_config_validate,
                                   random_pair_configuration,
                                   random_separated_bias,
                                   validate_paired_bias,
                                   validate_separated_bias)


def test_lower_bound_params():
    p = LowerBoundParams(n=10, delta=0.2, eta=3)
    assert p.n0 == 8
    assert p.b == (0, 2, 4, 6)
    assert p.r == 3 and p.barrier_vacuous
    # b_r tracks 2 delta n to within one barrier step
    step = p.n0 // p.eta
    assert abs(p.b[p.r] - 2 * p.delta * p.n) <= step
    p4 = LowerBoundParams(n=10, delta=0.2, eta=4)
    assert p4.r == 3 and not p4.barrier_vacuous
    with pytest.raises(ValueError):
        LowerBoundParams(n=20, delta=0.2, eta=3)
    with pytest.raises(ValueError):
        LowerBoundParams(n=10, delta=0.6, eta=3)


def test_omega_grid():
    p = LowerBoundParams(n=10, delta=0.2, eta=3)
    om = omega_grid(p)
    assert om[len(om) // 2] == pytest.approx(1j, abs=1e-15)
    expected = 2 * math.ceil(p.n_eff ** -p.delta * math.exp(p.n0)) - 1
    assert abs(len(om) - expected) <= 1
    spacing = np.angle(om[1] / om[0])
    assert spacing == pytest.approx(math.exp(-p.n0), rel=1e-12)


def test_omega_grid_stride():
    p = LowerBoundParams(n=10, delta=0.2, eta=3, stride=5)
    om = omega_grid(p)
    assert om[len(om) // 2] == pytest.approx(1j, abs=1e-15)
    assert np.angle(om[1] / om[0]) == pytest.approx(5 * math.exp(-p.n0), rel=1e-12)


def test_validate_separated_bias():
    params = BiasClassParams(k=0, ell=0, epsilon=0.5, delta=0.2, N=10_000)
    assert validate_separated_bias(BiasSpec(), params)
    params2 = BiasClassParams(k=1, ell=0, epsilon=0.5, delta=0.2, N=10_000)
    dom = params2.domain()
    r = 0.5 * (dom.r_inner + dom.r_outer)
    z = r * 1j
    w = z * np.exp(1j * 1e-9)  # hyperbolic distance way below epsilon
    assert not validate_separated_bias(BiasSpec((z,), (w,)), params2)


def test_separated_bias_generator_roundtrip(rng):
    params = BiasClassParams(k=2, ell=0, epsilon=0.4, delta=0.2, N=10_000)
    gen = substream(77, 0)
    for _ in range(10):
        bias = random_separated_bias(params, gen)
        assert validate_separated_bias(bias, params)


def test_validate_paired_bias():
    params = BiasClassParams(k=1, ell=1, epsilon=0.3, delta=0.2, N=10_000)
    dom = params.domain()
    r = 0.5 * (dom.r_inner + dom.r_outer)
    base = BiasSpec((r * 1j,), (r * 1j * np.exp(1j * dom.theta_max * 0.9),))
    assert validate_paired_bias(base, [], params)
    # a tight extra pair, far from the base points
    z = r * 1j * np.exp(-1j * dom.theta_max * 0.9)
    w = z * np.exp(1j * 1e-7)
    assert validate_paired_bias(base, [(z, w)], params)
    # partner farther than a competing point fails
    assert not validate_paired_bias(base, [(z, base.minus_points[0])], params) \
        or hyp_dist(z, base.minus_points[0]) <= hyp_dist(z, base.plus_points[0])


def test_validate_paired_bias_adversarial():
    params = BiasClassParams(k=0, ell=1, epsilon=0.3, delta=0.2, N=10_000)
    dom = params.domain()
    r = 0.5 * (dom.r_inner + dom.r_outer)
    z = r * 1j
    w_far = r * 1j * np.exp(1j * dom.theta_max * 0.9)
    z2 = r * 1j * np.exp(1j * 1e-8)  # much closer to z than its partner
    base = BiasSpec((z2,), (r * 1j * np.exp(-1j * dom.theta_max * 0.9),))
    assert not validate_paired_bias(base, [(z, w_far)], params)


def test_mem_ratio_empty(model, table_cache):
    assert mem_ratio(table_cache(8), model, BiasSpec()) == 1.0


def test_mem_ratio_uniform_over_rotations(model):
    # the comparison quality should not depend on which omega-translate of
    # the bias pair is used
    from charpolylab.orthopoly import recurrence_table
    N = 256
    table = recurrence_table(model, N, N + 8)
    rr = 1.0 - N ** -0.5
    gap = 0.4 * N ** -0.5
    errs = []
    for phi in np.linspace(-0.8 * N ** -0.2, 0.8 * N ** -0.2, 16):
        w0 = 1j * np.exp(1j * phi)
        bias = BiasSpec(plus_points=(w0 * rr,),
                        minus_points=(w0 * rr * np.exp(1j * gap),))
        errs.append(abs(mem_ratio(table, model, bias) - 1.0))
    center = errs[len(errs) // 2]
    assert max(errs) <= 2.0 * max(center, 1e-4)


def test_matching_ratio_full_subsets(rng):
    config = random_pair_configuration(2, 1, 0.3, substream(5, 0))
    Z, W = config.Z, config.W
    val = matching_ratio(Z, W, Z, W)
    prod = 1.0
    from charpolylab.hyperbolic import pseudo_dist
    for z in Z:
        for w in W:
            prod *= pseudo_dist(z, w)
    assert val == pytest.approx(prod, rel=1e-12)
    assert val <= 1.0


def test_matching_ratio_singletons():
    # the four subset choices: full/empty give d(z,w), mixed give empty
    # products throughout, hence 1
    from charpolylab.hyperbolic import pseudo_dist
    z, w = 0.2, 0.5j
    d = pseudo_dist(z, w)
    assert matching_ratio([z], [w], [z], [w]) == pytest.approx(d, rel=1e-14)
    assert matching_ratio([z], [w], [], []) == pytest.approx(d, rel=1e-14)
    assert matching_ratio([z], [w], [z], []) == pytest.approx(1.0, rel=1e-14)
    assert matching_ratio([z], [w], [], [w]) == pytest.approx(1.0, rel=1e-14)


def test_matching_subset_sup_agrees_with_direct(rng):
    config = random_pair_configuration(1, 2, 0.3, substream(6, 0))
    Z, W = config.Z, config.W
    n = len(Z)
    best = 0.0
    for tmask in range(2 ** n):
        T = [Z[i] for i in range(n) if tmask >> i & 1]
        for smask in range(2 ** n):
            S = [W[i] for i in range(n) if smask >> i & 1]
            best = max(best, matching_ratio(Z, W, T, S))
    assert matching_subset_sup(config) == pytest.approx(best, rel=1e-10)


def test_pair_config_validate():
    # k = 0 with nested tight pairs: only the pairing condition matters
    cfg = PairConfiguration(pairs=[(0.1, 0.1 + 1e-4), (0.5j, 0.5j + 1e-4)],
                            ell_paired=2, epsilon=0.3)
    assert pair_config_validate(cfg)
    # epsilon-violating tail pair
    bad = PairConfiguration(pairs=[(0.1, 0.1 + 1e-3)], ell_paired=0, epsilon=0.3)
    assert not pair_config_validate(bad)


def test_pair_config_generator_roundtrip():
    gen = substream(9, 0)
    for _ in range(10):
        config = random_pair_configuration(2, 3, 0.3, gen)
        assert pair_config_validate(config)
        assert len(config.pairs) == 5


def test_midpoint_examples():
    n0 = 8
    # adjacent lattice points: -log distance ~ n0
    w1, w2 = np.exp(1j * 0.0), np.exp(1j * math.exp(-n0))
    assert midpoint(w1, w2, n0) == n0
    # far-apart points: floor active
    assert midpoint(1.0, np.exp(1j * 1.0), n0) == n0
    # mid-range pair below the lattice scale
    w3 = np.exp(1j * math.exp(-(n0 + 3)))
    assert midpoint(1.0, w3, n0) == n0 + 3
    with pytest.raises(ValueError):
        midpoint(1.0, 1.0, n0)


def test_branch_depth():
    n0 = 8
    assert branch_depth(1.0, np.exp(1j * 1.0), n0) == 0
    assert branch_depth(1.0, np.exp(1j * math.exp(-3.0)), n0) == 3
    assert branch_depth(1.0, np.exp(1j * math.exp(-20.0)), n0) == n0


def _barrier_sample(params, omega, values_map):
    pts = [omega * ray_point(params.b[k])
           for k in range(params.r + 1, params.eta + 1)]
    pts += [omega * ray_point(params.b[params.r]),
            1j * ray_point(params.b[params.r])]
    pts = list(dict.fromkeys(complex(p) for p in pts))
    row = np.array([[values_map(p) for p in pts]])
    return FieldSample(points=np.array(pts), values=row, seed=0, kind="G",
                       factorization="cholesky")


def test_barrier_indicator_linear_profile():
    params = LowerBoundParams(n=10, delta=0.2, eta=4)
    omega = np.exp(1j * (math.pi / 2 + 0.01))

    def linear_field(p):
        return hyp_dist(0.0, p)  # exact linear profile along every ray

    sample = _barrier_sample(params, omega, linear_field)
    assert barrier_indicator(sample, 0, omega, params)
    assert barrier_indicator(sample, 0, omega, params, reference="center")

    half = params.tube_halfwidth()

    def broken_field(p):
        base = hyp_dist(0.0, p)
        if abs(p - omega * ray_point(params.b[params.eta])) < 1e-12:
            return base + 2.0 * half
        return base

    bad = _barrier_sample(params, omega, broken_field)
    assert not barrier_indicator(bad, 0, omega, params)


def test_barrier_pass_rate_grows_with_eta():
    # under the biased law (mean shifted by mu = E[W(.) B_omega(W)]) the
    # tube constraint holds with probability -> 1 as eta grows
    kern = kernel_g()
    rates = []
    for eta in (4, 8):
        params = LowerBoundParams(n=12, delta=0.2, eta=eta)
        omega = np.exp(1j * (math.pi / 2 + 1e-3))
        pts = [omega * ray_point(params.n0), omega * ray_point(params.b[params.r])]
        barrier = [p for p in barrier_points(params, omega)
                   if all(abs(p - q) > 1e-15 for q in pts)]
        pts += barrier
        sample = sample_gauss(pts, kern, 4000, seed=13)
        mu = np.array([2.0 * (kern.cov(p, pts[0]) - kern.cov(p, pts[1]))
                       for p in pts])
        shifted = sample.values + mu
        ok = np.ones(len(shifted), dtype=bool)
        half = params.tube_halfwidth()
        for i in range(len(barrier)):
            k = params.r + 1 + i
            dev = shifted[:, 2 + i] - shifted[:, 1] - (params.b[k] - params.b[params.r])
            ok &= np.abs(dev) <= half
        rates.append(ok.mean())
    assert rates[-1] >= 0.9
    assert rates[-1] >= rates[0] - 0.05


def test_lower_bound_mc_small():
    params = LowerBoundParams(n=8, delta=0.2, eta=3)
    res = lower_bound_mc(params, 120, seed=3)
    err = 2.0 * math.hypot(res.p_z_se, res.cs_ratio_se)
    assert res.p_z_positive >= res.cs_ratio - err
    assert res.cs_ratio <= 1.0 + 1e-12
    assert res.n_omega == len(omega_grid(params))
    doc = res.to_json_dict()
    assert set(doc) >= {"n", "delta", "eta", "p_z_positive", "cs_ratio",
                        "per_m_bins"}


def test_lower_bound_mc_deterministic():
    params = LowerBoundParams(n=8, delta=0.2, eta=3)
    a = lower_bound_mc(params, 60, seed=5)
    b = lower_bound_mc(params, 60, seed=5)
    assert a.to_json_dict() == b.to_json_dict()
