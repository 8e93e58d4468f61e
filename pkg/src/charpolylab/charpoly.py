"""Expected products and ratios of characteristic polynomials.

The balanced-ratio determinant, the general determinantal formula with
oracle-locked signs, the scaled-determinant exponential moment of field
biases, the diagonal-block Laplace expansion, and the one-point Laplace
transform of the field.  Monte Carlo estimators over the exact tridiagonal
ensemble serve as independent oracles throughout.

Sign conventions: every determinant identity here is assembled from explicit
Laplace/permutation parities and then locked against the direct-determinant
or Monte Carlo oracle.  The load-bearing convention is the conjugation
antisymmetry h_n(conj q) = -conj(h_n(q)) of the Cauchy transforms: with it,
the ratio formulas hold as printed for arguments in either half-plane
(verified against quadrature at N = 1, 2 and Monte Carlo at N = 4).
"""

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .hyperbolic import joukowsky
from .orthopoly import LogComplex, lc_exp, _pi_chain, _h_chain, _tilde_factor

__all__ = [
    "vandermonde_det",
    "fs_balanced",
    "fs_general",
    "exp_moment_field",
    "laplace_split",
    "exp_pm2_moment",
    "mc_char_ratio",
    "mc_abs2_moment",
    "mc_field_bias_moment",
    "VerificationCase",
    "write_verification_report",
]


def vandermonde_det(points):
    """prod_{i<j} (p_j - p_i); empty and singleton products are 1."""
    pts = list(points)
    out = 1.0 + 0.0j
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            out *= pts[j] - pts[i]
    return out


def _vandermonde_lc(points):
    pts = list(points)
    out = LogComplex.one()
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            out = out * LogComplex.from_complex(pts[j] - pts[i])
    return out


def _logdet(cells):
    """Determinant of a matrix of LogComplex entries.

    Factors the max log-magnitude out of each row and then each column, runs
    LU with partial pivoting (slogdet) on the O(1) remainder, and reassembles
    the scale, so widely scaled rows never meet in a raw subtraction.
    """
    n = len(cells)
    lm = np.array([[c.log_mag for c in row] for row in cells])
    ph = np.array([[c.phase for c in row] for row in cells])
    row_scale = lm.max(axis=1)
    row_scale[np.isneginf(row_scale)] = 0.0
    lm = lm - row_scale[:, None]
    col_scale = lm.max(axis=0)
    col_scale[np.isneginf(col_scale)] = 0.0
    lm = lm - col_scale[None, :]
    mat = np.exp(lm) * ph
    sign, logabs = np.linalg.slogdet(mat)
    if sign == 0:
        return LogComplex.zero()
    return LogComplex(logabs + row_scale.sum() + col_scale.sum(), sign)


def _check_distinct(*groups):
    pts = [complex(p) for g in groups for p in g]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if pts[i] == pts[j]:
                raise ValueError(f"coincident points {pts[i]}; no confluent limits taken")


def fs_balanced(table, p, q, model=None):
    """E[prod det(p_i - A) / prod det(q_j - A)] for balanced tuples (len l each).

    Assembled as the 2l x 2l determinant with q-rows (h-tilde, h) and p-rows
    (pi-tilde, pi) against Vandermonde columns, divided by Delta(q) Delta(p).
    """
    p = [complex(v) for v in p]
    q = [complex(v) for v in q]
    ell = len(p)
    if ell != len(q) or ell < 1:
        raise ValueError("p and q must be nonempty tuples of equal length")
    if table.N < ell:
        raise ValueError("need N >= l")
    _check_distinct(p)
    _check_distinct(q)
    for v in q:
        if v.imag == 0.0:
            raise ValueError("q points must lie off the real axis")
    N = table.N
    table.ensure(N)
    t = _tilde_factor(table)
    cells = []
    for qi in q:
        hs = _h_chain(table, N, qi, model=model)
        row_a, row_b = t * hs[N - 1], hs[N]
        pw = [LogComplex.from_complex(qi ** j) for j in range(ell)]
        cells.append([row_a * w for w in pw] + [row_b * w for w in pw])
    for pi in p:
        pis = _pi_chain(table, N, pi)
        row_a, row_b = t * pis[N - 1], pis[N]
        pw = [LogComplex.from_complex(pi ** j) for j in range(ell)]
        cells.append([row_a * w for w in pw] + [row_b * w for w in pw])
    det = _logdet(cells)
    return (det / (_vandermonde_lc(q) * _vandermonde_lc(p))).value()


def _fs_sign(k):
    """Oracle-locked global sign multiplying the general-ratio prefactor.

    With the conjugate-antisymmetric Cauchy transforms the formula holds as
    printed; the hook stays so future recalibration is one line.
    """
    return 1.0


def fs_general(table, p, q, model=None):
    """General ratio E[prod_{i<=l} det(p_i-A) / prod_{j<=k} det(q_j-A)].

    The (k+l) x (k+l) determinant over columns N-k .. N+l-1 with the
    prod(-2 pi i gamma_{N-j}^2) / ((-1)^C(k,2) Delta(q) Delta(p)) prefactor,
    times the calibrated sign _fs_sign(k).
    """
    p = [complex(v) for v in p]
    q = [complex(v) for v in q]
    k, ell = len(q), len(p)
    if k > 4 or ell > 4:
        raise ValueError("unbalanced ratios supported only up to k, l <= 4")
    if k == 0 and ell == 0:
        return 1.0 + 0.0j
    if table.N < k:
        raise ValueError("need N >= k")
    _check_distinct(p, q)
    for v in q:
        if v.imag == 0.0:
            raise ValueError("q points must lie off the real axis")
    N = table.N
    n_hi = N + ell - 1
    table.ensure(n_hi)
    cols = range(N - k, n_hi + 1)
    cells = []
    for qi in q:
        hs = _h_chain(table, n_hi, qi, model=model)
        cells.append([hs[n] for n in cols])
    for pi in p:
        pis = _pi_chain(table, n_hi, pi)
        cells.append([pis[n] for n in cols])
    det = _logdet(cells)
    pref = LogComplex.one()
    for j in range(1, k + 1):
        pref = pref * LogComplex(math.log(2.0 * math.pi) + table.log_gamma_sq[N - j], -1j)
    sign = _fs_sign(k) * (-1.0) ** (k * (k - 1) // 2)
    num = det * pref
    den = _vandermonde_lc(q) * _vandermonde_lc(p)
    return sign * (num / den).value()


def laplace_split(A, B, C, D, p, q):
    """Subset expansion of det [[A V(q), B V(q)], [C V(p), D V(p)]].

    A..D are the diagonals of l x l diagonal matrices.  Signs come from the
    generalized Laplace expansion over the first l columns: the block row
    set X = S union (l + T) contributes parity (-1)^(sum(X) - l(l+1)/2).
    """
    A, B, C, D = (list(map(complex, v)) for v in (A, B, C, D))
    p = [complex(v) for v in p]
    q = [complex(v) for v in q]
    ell = len(p)
    if not all(len(v) == ell for v in (A, B, C, D, q)):
        raise ValueError("all inputs must share the length of p")
    if ell > 5:
        raise ValueError("subset expansion supported only up to l = 5")
    total = 0.0 + 0.0j
    base = ell * (ell + 1) // 2
    idx = list(range(ell))
    for s_size in range(ell + 1):
        t_size = ell - s_size
        if t_size > ell:
            continue
        for S in itertools.combinations(idx, s_size):
            Sc = [i for i in idx if i not in S]
            for T in itertools.combinations(idx, t_size):
                Tc = [i for i in idx if i not in T]
                X_sum = sum(i + 1 for i in S) + sum(ell + i + 1 for i in T)
                parity = -1.0 if (X_sum - base) % 2 else 1.0
                term = vandermonde_det([q[i] for i in S] + [p[i] for i in T])
                term *= vandermonde_det([q[i] for i in Sc] + [p[i] for i in Tc])
                for i in S:
                    term *= A[i]
                for i in Sc:
                    term *= B[i]
                for i in T:
                    term *= C[i]
                for i in Tc:
                    term *= D[i]
                total += parity * term
    return total


def _m_entries(table, model, q):
    """LogComplex entries (M11, M12, M21, M22) of the normalized matrix at q.

    The unit-determinant identity is asserted here, so any recurrence or
    quadrature breakdown surfaces before it can corrupt a moment.
    """
    N = table.N
    g = model.g(q)
    ell = model.ell_v
    pis = _pi_chain(table, N, q)
    hs = _h_chain(table, N, q, model=model)
    t = _tilde_factor(table)
    m11 = pis[N] * lc_exp(-N * g)
    m12 = hs[N] * lc_exp(N * (g - ell))
    m21 = t * pis[N - 1] * lc_exp(-N * (g - ell))
    m22 = t * hs[N - 1] * lc_exp(N * g)
    det = (m11 * m22 - m12 * m21).value()
    if abs(det - 1.0) > 1e-6:
        raise ArithmeticError(f"normalized-matrix determinant {det} at q={q}")
    return m11, m12, m21, m22


def exp_moment_field(table, model, bias, imag_tol=1e-8):
    """E exp(B(Z)) for the matrix field Z = Q_N o J, by the scaled determinant.

    The bias points are pulled to the plane via p = J(conj(Z) u Z),
    q = J(conj(W) u W); the determinant uses the normalized-matrix entries so
    no raw e^{+-N g} appears.  The result must be real positive; a relative
    imaginary residue above imag_tol raises.
    """
    Z = bias.plus_points
    W = bias.minus_points
    if len(Z) != len(W):
        raise ValueError("field moments need balanced biases (|Z| = |W|)")
    if not Z:
        return 1.0
    table.ensure(table.N)
    p_pts = [joukowsky(np.conj(z)) for z in Z] + [joukowsky(z) for z in Z]
    q_pts = [joukowsky(np.conj(w)) for w in W] + [joukowsky(w) for w in W]
    _check_distinct(p_pts, q_pts)
    ell = len(p_pts)
    m_cache = {}

    def entries(v):
        # conjugation carries M11, M22 to their conjugates and flips the
        # sign of M12, M21 (the Cauchy transforms are conjugate-antisymmetric)
        if v not in m_cache:
            if v.imag >= 0:
                m_cache[v] = _m_entries(table, model, v)
            else:
                m11, m12, m21, m22 = _m_entries(table, model, np.conj(v))
                m_cache[v] = (m11.conj(), -m12.conj(), -m21.conj(), m22.conj())
        return m_cache[v]

    cells = []
    for qi in q_pts:
        m11, m12, m21, m22 = entries(complex(qi))
        pw = [LogComplex.from_complex(qi ** j) for j in range(ell)]
        cells.append([m22 * w for w in pw] + [m12 * w for w in pw])
    for pi in p_pts:
        m11, m12, m21, m22 = entries(complex(pi))
        pw = [LogComplex.from_complex(pi ** j) for j in range(ell)]
        cells.append([m21 * w for w in pw] + [m11 * w for w in pw])
    det = _logdet(cells)
    val = (det / (_vandermonde_lc(q_pts) * _vandermonde_lc(p_pts))).value()
    if abs(val.imag) > imag_tol * max(abs(val), 1e-300):
        raise ArithmeticError(f"imaginary residue {val.imag:.2e} on a real moment")
    if val.real <= 0.0:
        raise ArithmeticError(f"nonpositive exponential moment {val}")
    return float(val.real)


def exp_pm2_moment(table, model, q, sign):
    """One-point Laplace transform E exp(+-2 Q_N(q)), from 2x2 determinants.

    Plus sign: the pi_N/pi_{N+1} determinant with e^{-N(g(q)+g(conj q))}.
    Minus sign: the h_{N-2}/h_{N-1} determinant with the gamma prefactor and
    e^{+N(...)}; both oracle-locked against quadrature at N = 1, 2 and Monte
    Carlo at N = 8.
    """
    q = complex(q)
    if q.imag == 0.0:
        raise ValueError("Laplace transform evaluated off the real axis only")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    N = table.N
    g2 = model.g(q) + model.g(np.conj(q))
    if sign == +1:
        table.ensure(N + 1)
        pis = _pi_chain(table, N + 1, q)
        a, b = pis[N], pis[N + 1]
        # pi_n(conj q) = conj(pi_n(q))
        det = a * b.conj() - b * a.conj()
        scale = lc_exp(-N * g2)
        pref_log, pref_phase = 0.0, 1.0
    else:
        if N < 2:
            raise ValueError("negative moment needs N >= 2")
        hs = _h_chain(table, N - 1, q, model=model)
        a, b = hs[N - 2], hs[N - 1]
        # h_n(conj q) = -conj(h_n(q)), so the second row carries a sign flip
        det = -(a * b.conj() - b * a.conj())
        scale = lc_exp(N * g2)
        # prod_{j=1,2}(-2 pi i gamma_{N-j}^2) / (-1)^C(2,2)
        pref_log = math.log(4.0 * math.pi ** 2) + table.log_gamma_sq[N - 1] \
            + table.log_gamma_sq[N - 2]
        pref_phase = 1.0
    val = (det * scale) / LogComplex.from_complex(np.conj(q) - q)
    val = val.scaled(pref_log, pref_phase)
    out = val.value()
    if abs(out.imag) > 1e-8 * max(abs(out), 1e-300) or out.real <= 0.0:
        raise ArithmeticError(f"Laplace transform came out non-positive: {out}")
    return float(out.real)


# ---------------------------------------------------------------------------
# Monte Carlo oracles over the exact tridiagonal ensemble
# ---------------------------------------------------------------------------

def _char_poly_batch(N, xs, rng, n_samples):
    """det(x - A) for a batch of tridiagonal draws, at each x in xs.

    Uses the three-term determinant recurrence on the rescaled tridiagonal
    model, fully vectorized over samples.  Returns (n_samples, len(xs)).
    """
    s = 2.0 * math.sqrt(N)
    d = rng.standard_normal((n_samples, N)) / s
    if N > 1:
        dof = 2.0 * np.arange(N - 1, 0, -1)
        e = np.sqrt(rng.chisquare(dof, size=(n_samples, N - 1)) / 2.0) / s
    out = np.empty((n_samples, len(xs)), dtype=complex)
    for ix, x in enumerate(xs):
        Dm1 = np.ones(n_samples, dtype=complex)
        D = x - d[:, 0]
        for k in range(1, N):
            Dm1, D = D, (x - d[:, k]) * D - e[:, k - 1] ** 2 * Dm1
        out[:, ix] = D
    return out


def _batched_mean(values, n_batches=50):
    """Mean and batch-means standard error of a 1-d array."""
    values = np.asarray(values)
    n = len(values)
    nb = min(n_batches, n)
    means = np.array([c.mean() for c in np.array_split(values, nb)])
    return values.mean(), np.abs(means).std(ddof=1) / math.sqrt(nb) if nb > 1 else 0.0


def mc_char_ratio(N, p_pts, q_pts, n_samples, seed, chunk=200_000):
    """Monte Carlo E[prod det(p - A) / prod det(q - A)] with batch-means SE."""
    ps = [complex(v) for v in p_pts]
    qs = [complex(v) for v in q_pts]
    xs = ps + qs
    vals = np.empty(n_samples, dtype=complex)
    done = 0
    task = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        dets = _char_poly_batch(N, xs, substream(seed, task), m)
        num = np.prod(dets[:, :len(ps)], axis=1) if ps else np.ones(m)
        den = np.prod(dets[:, len(ps):], axis=1) if qs else np.ones(m)
        vals[done:done + m] = num / den
        done += m
        task += 1
    mean, se = _batched_mean(vals)
    return mean, se


def mc_abs2_moment(N, model, q, sign, n_samples, seed, chunk=200_000):
    """Monte Carlo E exp(+-2 Q_N(q)) = E |det(q-A)|^{+-2} e^{-+2N Re g(q)}."""
    q = complex(q)
    reg = model.g(q).real
    vals = np.empty(n_samples)
    done = 0
    task = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        dets = _char_poly_batch(N, [q], substream(seed, task), m)[:, 0]
        vals[done:done + m] = np.abs(dets) ** (2 * sign)
        done += m
        task += 1
    scale = math.exp(-sign * 2.0 * N * reg)
    mean, se = _batched_mean(vals)
    return mean * scale, se * scale


def mc_field_bias_moment(model, N, bias, n_samples, seed, chunk=100_000):
    """Monte Carlo E exp(B(Z)) for the matrix field, via sampled spectra."""
    Z = bias.plus_points
    W = bias.minus_points
    p_pts = [joukowsky(z) for z in Z]
    q_pts = [joukowsky(w) for w in W]
    xs = p_pts + q_pts
    log_center = sum(2.0 * model.g(x).real for x in p_pts) \
        - sum(2.0 * model.g(x).real for x in q_pts)
    vals = np.empty(n_samples)
    done = 0
    task = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        dets = _char_poly_batch(N, xs, substream(seed, task), m)
        logs = 2.0 * np.log(np.abs(dets))
        w = logs[:, :len(p_pts)].sum(axis=1) - logs[:, len(p_pts):].sum(axis=1)
        vals[done:done + m] = np.exp(w - N * log_center)
        done += m
        task += 1
    return _batched_mean(vals)


@dataclass
class VerificationCase:
    case_id: str
    N: int
    formula_value: float
    mc_value: float
    mc_stderr: float

    @property
    def z_score(self):
        if self.mc_stderr == 0.0:
            return 0.0 if self.formula_value == self.mc_value else math.inf
        return (self.mc_value - self.formula_value) / self.mc_stderr


def write_verification_report(cases, path):
    """CSV report: case_id, N, formula_value, mc_value, mc_stderr, z_score."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "N", "formula_value", "mc_value", "mc_stderr", "z_score"])
        for c in cases:
            w.writerow([c.case_id, c.N, f"{c.formula_value:.17g}",
                        f"{c.mc_value:.17g}", f"{c.mc_stderr:.17g}",
                        f"{c.z_score:.17g}"])
