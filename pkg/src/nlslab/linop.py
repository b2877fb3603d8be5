"""Linearized Hamiltonian machinery around the ground state.

The matrix operator Lt = (0, L_-; -L_+, 0) with L_+- = -Delta - W_+- is
applied through the grid's finite-difference stencils and inverted through
the factorization L_+- = A_+-^* A_+- whose Green's formulas reduce to two
cumulative quadratures.  Iterating the inverse on the scaling/phase zero
mode (Lambda Q, 0), (0, Q) produces the kernel families Phi_{k,+-} whose
growing tails drive the finite-dimensional blow-up dynamics; the localized
directions Xi_{M,+-} biorthogonalize against them.
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse import csr_matrix, diags

from .errors import GridTooShort, MTooSmall
from .fields import ComplexPair, RadialField, pair_inner, tail_fit
from .ground_state import lambda_q

__all__ = [
    "apply_Lplus", "apply_Lminus", "apply_Ltilde", "apply_Ltilde_star",
    "apply_Lambda", "invert_Lplus", "invert_Lminus",
    "ProfileFamily", "generate_phi_family", "psi_directions",
    "XiDirections", "build_xi", "cutoff_chi",
]


# -- forward applications ---------------------------------------------------

def apply_Lplus(f, pot):
    """L_+ f = -Delta f - p Q^(p-1) f."""
    return -f.laplacian() - pot.W_plus * f


def apply_Lminus(f, pot):
    """L_- f = -Delta f - Q^(p-1) f."""
    return -f.laplacian() - pot.W_minus * f


def apply_Ltilde(u, pot):
    """Lt (re, im) = (L_- im, -L_+ re)."""
    if u.re.grid is not pot.W_plus.grid:
        raise ValueError("grid mismatch between field and potentials")
    return ComplexPair(apply_Lminus(u.im, pot), -apply_Lplus(u.re, pot))


def apply_Ltilde_star(u, pot):
    """Lt* (re, im) = (-L_+ im, L_- re)."""
    if u.re.grid is not pot.W_plus.grid:
        raise ValueError("grid mismatch between field and potentials")
    return ComplexPair(-apply_Lplus(u.im, pot), apply_Lminus(u.re, pot))


def apply_Lambda(u, m):
    """Scaling generator Lambda u = m u + y u' componentwise."""
    return ComplexPair(u.re.scaling_gen(m), u.im.scaling_gen(m))


class DiscreteLt:
    """Sparse matrix form of Lt with a quadrature-exact transpose action.

    Pairings of fields against iterated-adjoint directions are represented
    through covectors a with a . u = (xi-iterate, u): the covector of
    (Lt*)^m xi is (Lt^T)^m (W xi) where W are the diagonal radial
    quadrature weights.  This makes (u, (Lt*)^m xi) = (Lt^m u, xi) hold to
    rounding, which the biorthogonalization needs; stencil-level adjointness
    (truncation-order only) is nowhere near tight enough on the rapidly
    growing kernel iterates.
    """

    def __init__(self, gs, pot):
        grid, d = gs.grid, gs.params.d
        self.grid, self.d = grid, d
        y = grid.y
        D1 = grid.diff_matrix(1, "even")
        D2 = grid.diff_matrix(2, "even")
        coef = np.zeros_like(y)
        coef[1:] = (d - 1.0) / y[1:]
        lap = (D2 + diags(coef) @ D1).tolil()
        lap[0] = d * D2[0].toarray().ravel()
        lap = lap.tocsr()
        self.Lp = (-lap - diags(pot.W_plus.values)).tocsr()
        self.Lm = (-lap - diags(pot.W_minus.values)).tocsr()
        self.LpT = self.Lp.T.tocsr()
        self.LmT = self.Lm.T.tocsr()
        w = grid.weights(d - 1).copy()
        w[w == 0.0] = np.finfo(float).tiny
        self.w = w

    def covector(self, u):
        """Covector (a, b) of a ComplexPair: a.re' + b.im' is the pairing."""
        return (self.w * u.re.values, self.w * u.im.values)

    def star_covector(self, cov):
        """Covector of Lt* applied to the direction behind ``cov``."""
        a, b = cov
        return (-(self.LpT @ b), self.LmT @ a)

    def pair(self, cov, u):
        return float(cov[0] @ u.re.values + cov[1] @ u.im.values)

    def field_of(self, cov, d):
        """Riesz field of a covector in the weighted inner product."""
        return ComplexPair(
            RadialField(self.grid, cov[0] / self.w, d),
            RadialField(self.grid, cov[1] / self.w, d))


# -- Green's-function inversions --------------------------------------------

def _is_zero(f):
    return not np.any(f.values)


def invert_Lplus(f, gs):
    """u with L_+ u = f by the two-step factorized quadrature.

    A_+ u = (y^(d-1) Lambda Q)^-1 * int_0^y f Lambda Q x^(d-1) dx,
    u = -Lambda Q * int_0^y (A_+ u / Lambda Q) dx.
    """
    grid, d = gs.grid, gs.params.d
    if _is_zero(f):
        return RadialField(grid, np.zeros(len(grid)), d)
    lam = lambda_q(gs).values
    cum = grid.cumint(f.values * lam, d - 1)
    au = np.empty_like(cum)
    au[0] = 0.0
    au[1:] = cum[1:] / (grid.y[1:] ** (d - 1) * lam[1:])
    u = -lam * grid.cumint(au / lam, 0)
    return RadialField(grid, u, d)


def _tail_exponent(y, g, decades=1.0):
    """Log-log slope of |g| over the outermost ``decades`` of the grid."""
    sel = (y >= y[-1] / 10.0 ** decades) & (np.abs(g) > 0)
    if sel.sum() < 8:
        return 0.0
    return np.polyfit(np.log(y[sel]), np.log(np.abs(g[sel])), 1)[0]


def _completed_tail(y, g):
    """Estimate integral(g, rmax..inf) for a power-law-like integrand.

    Fits g ~ A y^q + B y^(q-2) over the outer 1.5 decades, iterating the
    exponent against the curvature term; the normalization constant of the
    from-infinity inversion branch inherits this accuracy, and a sloppy
    (single point-value) completion leaves an O(1e-8) kernel component on
    every family member, visible in the Psi tails.
    """
    R = y[-1]
    sel = (y >= R / 10.0 ** 1.5) & (np.abs(g) > 0)
    if sel.sum() < 16:
        return 0.0
    ys, gs_ = y[sel], g[sel]
    ly = np.log(ys)
    q = np.polyfit(ly, np.log(np.abs(gs_)), 1)[0]
    A = B = 0.0
    for _ in range(3):
        design = np.column_stack([ys ** q, ys ** (q - 2.0)])
        (A, B), *_ = np.linalg.lstsq(design, gs_, rcond=None)
        resid = gs_ - B * ys ** (q - 2.0)
        good = np.abs(resid) > 0
        if good.sum() < 8:
            break
        q = np.polyfit(ly[good], np.log(np.abs(resid[good])), 1)[0]
    if q >= -1.0:
        return 0.0
    return -A * R ** (q + 1.0) / (q + 1.0) - B * R ** (q - 1.0) / (q - 1.0)


def invert_Lminus(f, gs, return_info=False):
    """u with L_- u = f, branch chosen by the outer-decade convergence test.

    v = (A_-^*)^-1 f is integrated from +infinity when int |v/Q| converges
    (the completed tail being estimated from a power-law fit), from 0
    otherwise.  An integrand too close to the convergence threshold is
    flagged 'branch-ambiguous' in the info dict and as a warning.
    """
    grid, d = gs.grid, gs.params.d
    y = grid.y
    if _is_zero(f):
        u = RadialField(grid, np.zeros(len(grid)), d)
        return (u, {"branch": "zero"}) if return_info else u
    Qv = gs.Q.values
    cum = grid.cumint(f.values * Qv, d - 1)
    v = np.empty_like(cum)
    v[0] = 0.0
    v[1:] = cum[1:] / (y[1:] ** (d - 1) * Qv[1:])

    integrand = np.abs(v / Qv)
    part = grid.cumint(integrand, 0)
    i2 = grid.index_at(grid.rmax / 10.0)
    i1 = grid.index_at(grid.rmax / 100.0)
    last = part[-1] - part[i2]
    prev = part[i2] - part[i1]
    ratio = last / prev if prev > 0 else np.inf
    convergent = ratio < 0.5
    ambiguous = 0.4 < ratio < 2.5
    if ambiguous:
        warnings.warn(
            f"branch-ambiguous: outer-decade ratio {ratio:.3f} is near the "
            "power-law integrability threshold", stacklevel=2)

    if convergent:
        signed = grid.cumint(v / Qv, 0)
        tail = _completed_tail(y, v / Qv)
        u = Qv * (signed[-1] + tail - signed)
        branch = "from-infinity"
    else:
        u = -Qv * grid.cumint(v / Qv, 0)
        branch = "from-zero"
    out = RadialField(grid, u, d)
    if return_info:
        return out, {"branch": branch, "ratio": float(ratio),
                     "ambiguous": ambiguous}
    return out


def invert_Ltilde(u, gs):
    """Lt^-1 (re, im) = (-L_+^-1 im, L_-^-1 re)."""
    return ComplexPair(-invert_Lplus(u.im, gs), invert_Lminus(u.re, gs))


# -- kernel families ---------------------------------------------------------

@dataclass
class ProfileFamily:
    """Phi_{k,+-} = Lt^-k of the zero modes, plus Psi directions and fits.

    The nonzero component of Phi_{k,+-} alternates re/im with k; its tail
    grows like y^(2k-gamma) (+ family) or y^(2k-2/(p-1)) (- family).
    """

    params: object
    gs: object
    pot: object
    L_plus: int
    L_minus: int
    phi_plus: list
    phi_minus: list
    psi_plus: dict = dc_field(default_factory=dict)
    psi_minus: dict = dc_field(default_factory=dict)
    tail_report: dict = dc_field(default_factory=dict)
    residual_report: dict = dc_field(default_factory=dict)

    @property
    def grid(self):
        return self.gs.grid

    def nonzero_component(self, family, k):
        """The single nonzero component field of Phi_{k,family}."""
        phi = (self.phi_plus if family == "plus" else self.phi_minus)[k]
        even_slot_is_re = (k % 2 == 0) if family == "plus" else (k % 2 == 1)
        return phi.re if even_slot_is_re else phi.im

    def expected_tail_exponent(self, family, k):
        base = self.params.tail_gamma if family == "plus" else self.params.m
        return 2.0 * k - base


def generate_phi_family(gs, pot, L_plus, L_minus=None, fit_window=None):
    """Build Phi_{k,+} for k <= L_plus and Phi_{k,-} for k <= L_minus.

    L_minus defaults to L_plus - delta_k.  Each member is checked by
    forward application (|Lt Phi_{k+1} - Phi_k| on the inner half of the
    grid) and tail-fitted against its expected leading exponent.
    """
    params = gs.params
    if L_minus is None:
        L_minus = L_plus - params.delta_k
    if L_minus < 0:
        raise ValueError(f"L_plus={L_plus} gives negative L_minus")
    grid = gs.grid
    zero = np.zeros(len(grid))
    lam = lambda_q(gs)

    def zf():
        return RadialField(grid, zero.copy(), params.d)

    phi_plus = [ComplexPair(lam, zf())]
    for _ in range(L_plus):
        phi_plus.append(invert_Ltilde(phi_plus[-1], gs))
    phi_minus = [ComplexPair(zf(), gs.Q)]
    for _ in range(L_minus):
        phi_minus.append(invert_Ltilde(phi_minus[-1], gs))

    fam = ProfileFamily(params=params, gs=gs, pot=pot,
                        L_plus=L_plus, L_minus=L_minus,
                        phi_plus=phi_plus, phi_minus=phi_minus)

    if fit_window is None:
        fit_window = (grid.rmax / 20.0, grid.rmax / 2.0)
    for family, members in (("plus", phi_plus), ("minus", phi_minus)):
        for k in range(1, len(members)):
            comp = fam.nonzero_component(family, k)
            fit = tail_fit(comp, fit_window)
            fam.tail_report[(family, k)] = {
                "fitted": fit.leading_exponent,
                "expected": fam.expected_tail_exponent(family, k),
                "coefficient": fit.leading_coefficient,
            }
    half = grid.index_at(grid.rmax / 2.0)
    for family, members in (("plus", phi_plus), ("minus", phi_minus)):
        for k in range(1, len(members)):
            back = apply_Ltilde(members[k], pot)
            diff = back - members[k - 1]
            ref = max(np.abs(members[k - 1].re.values[:half]).max(),
                      np.abs(members[k - 1].im.values[:half]).max())
            num = max(np.abs(diff.re.values[:half]).max(),
                      np.abs(diff.im.values[:half]).max())
            fam.residual_report[(family, k)] = num / ref
    return fam


def psi_directions(fam):
    """Psi_{i,+} = Lambda Phi_{i,+} - (2i - alpha) Phi_{i,+} and
    Psi_{i,-} = Lambda Phi_{i,-} - 2i Phi_{i,-}; the leading tail cancels,
    dropping the admissible degree by one."""
    m = fam.params.m
    alpha = fam.params.alpha
    for i in range(1, fam.L_plus + 1):
        fam.psi_plus[i] = (apply_Lambda(fam.phi_plus[i], m)
                           - (2.0 * i - alpha) * fam.phi_plus[i])
    for i in range(1, fam.L_minus + 1):
        fam.psi_minus[i] = (apply_Lambda(fam.phi_minus[i], m)
                            - (2.0 * i) * fam.phi_minus[i])
    return fam


# -- localized dual directions ------------------------------------------------

def cutoff_chi(y, M):
    """C^2 radial cutoff: 1 on y <= M, 0 on y >= 2M, quintic in between."""
    t = np.clip(y / M - 1.0, 0.0, 1.0)
    s = t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)
    return 1.0 - s


@dataclass
class XiDirections:
    """Compactly supported duals of the Phi family (support y <= 2M).

    ortho_cov_plus[k] / ortho_cov_minus[k] are the covectors of
    (Lt*)^k Xi_{M,+-}; dotting them against a (re, im) pair evaluates the
    orthogonality pairings used for modulation and coercivity constraints.
    """

    M: float
    xi_plus: ComplexPair
    xi_minus: ComplexPair
    coef_plus: dict    # c^+_{m,+-}
    coef_minus: dict   # c^-_{m,+-}
    pairing: float     # (J chi_M Phi_{0,+}, Phi_{0,-})
    ops: DiscreteLt
    ortho_cov_plus: list
    ortho_cov_minus: list
    bi_plus: np.ndarray = None
    bi_minus: np.ndarray = None
    cross_plus: np.ndarray = None
    cross_minus: np.ndarray = None

    def pair_eps(self, re, im):
        """All orthogonality pairings of a raw (re, im) sample pair."""
        out = [c[0] @ re + c[1] @ im for c in self.ortho_cov_plus]
        out += [c[0] @ re + c[1] @ im for c in self.ortho_cov_minus]
        return np.array(out)


def _iterated_pairing_tables(fam, ops, cov0):
    """T[m][(fam, k)] = ((Lt*)^m seed, Phi_{k,fam}) for one seed covector."""
    mmax = max(fam.L_plus, fam.L_minus)
    T = []
    cov = cov0
    for _ in range(mmax + 1):
        row = {}
        for fam_name, members in (("plus", fam.phi_plus),
                                  ("minus", fam.phi_minus)):
            for k, u in enumerate(members):
                row[(fam_name, k)] = ops.pair(cov, u)
        T.append(row)
        cov = ops.star_covector(cov)
    return T


def _xi_coefficients(fam, T_p, T_m, sign):
    """Coefficients of one Xi direction from the assembled pairing tables.

    T_p[m][k, fam] = ((Lt*)^m J chi Phi_{0,+}, Phi_{k,fam}) and likewise
    T_m for the J chi Phi_{0,-} seed, evaluated with the quadrature-exact
    adjoint.  The paper's recursion is triangular only up to the family's
    inversion residual, so the orthogonality constraints are solved as one
    equilibrated linear system; the re-evaluated pairings then vanish to
    the rounding floor of the M^(2k) dynamic range.
    """
    L_plus, L_minus = fam.L_plus, fam.L_minus
    c0_p = 1.0 if sign == "+" else 0.0   # coefficient of seed_m at m = 0
    c0_m = 0.0 if sign == "+" else 1.0   # coefficient of seed_p at m = 0
    n = L_plus + L_minus
    if n == 0:
        return {0: c0_p}, {0: c0_m}
    # unknowns: c_{m,+} for m = 1..L_plus then c_{m,-} for m = 1..L_minus
    A = np.zeros((n, n))
    b = np.zeros(n)
    rows = ([("plus", k) for k in range(1, L_plus + 1)]
            + [("minus", k) for k in range(1, L_minus + 1)])
    for r, (fam_name, k) in enumerate(rows):
        col = 0
        for m in range(1, L_plus + 1):
            A[r, col] = T_m[m][(fam_name, k)]
            col += 1
        for m in range(1, L_minus + 1):
            A[r, col] = T_p[m][(fam_name, k)]
            col += 1
        b[r] = -(c0_p * T_m[0][(fam_name, k)] + c0_m * T_p[0][(fam_name, k)])
    dr = 1.0 / np.max(np.abs(A), axis=1)
    As = A * dr[:, None]
    dc = 1.0 / np.maximum(np.max(np.abs(As), axis=0), 1e-300)
    x = dc * np.linalg.solve(As * dc[None, :], dr * b)
    cp = {0: c0_p}
    cm = {0: c0_m}
    for m in range(1, L_plus + 1):
        cp[m] = x[m - 1]
    for m in range(1, L_minus + 1):
        cm[m] = x[L_plus + m - 1]
    return cp, cm


def build_xi(fam, M, biorthogonality_check=True, ops=None):
    """Construct Xi_{M,+-} and verify the biorthogonality tables.

    The coefficient recursion and the returned tables use the exact kernel
    identities Lt^m Phi_k = Phi_{k-m}; the adjoint iterates are evaluated
    as quadrature-exact covectors so the enforced pairings vanish to
    rounding (amplified by the dynamic range M^(2k) of the intermediates).
    """
    gs, pot, params = fam.gs, fam.pot, fam.params
    grid = gs.grid
    if 2.0 * M > grid.rmax:
        raise GridTooShort(f"2M = {2 * M} exceeds rmax = {grid.rmax}")
    if M < 5.0:
        raise MTooSmall(f"M = {M} leaves no plateau around the soliton core")
    d = params.d
    y = grid.y
    chi = cutoff_chi(y, M)
    lam = lambda_q(gs).values
    if ops is None:
        ops = DiscreteLt(gs, pot)

    # J chi Phi_{0,+} = (0, chi Lambda Q); J chi Phi_{0,-} = (-chi Q, 0)
    zero = np.zeros_like(y)
    cov_p0 = (ops.w * zero, ops.w * (chi * lam))
    cov_m0 = (ops.w * (-chi * gs.Q.values), ops.w * zero)
    pairing = ops.pair(cov_p0, fam.phi_minus[0])

    T_p = _iterated_pairing_tables(fam, ops, cov_p0)
    T_m = _iterated_pairing_tables(fam, ops, cov_m0)
    cp_p, cm_p = _xi_coefficients(fam, T_p, T_m, "+")
    cp_m, cm_m = _xi_coefficients(fam, T_p, T_m, "-")

    # iterated-adjoint covectors of the two seeds
    mmax = max(fam.L_plus, fam.L_minus)
    its_p, its_m = [cov_p0], [cov_m0]
    for _ in range(mmax):
        its_p.append(ops.star_covector(its_p[-1]))
        its_m.append(ops.star_covector(its_m[-1]))

    def assemble_cov(cp, cm):
        a = np.zeros_like(y)
        b = np.zeros_like(y)
        for mdeg in range(mmax + 1):
            if mdeg <= fam.L_minus and cm.get(mdeg, 0.0) != 0.0:
                a += cm[mdeg] * its_p[mdeg][0]
                b += cm[mdeg] * its_p[mdeg][1]
            if mdeg <= fam.L_plus and cp.get(mdeg, 0.0) != 0.0:
                a += cp[mdeg] * its_m[mdeg][0]
                b += cp[mdeg] * its_m[mdeg][1]
        return (a, b)

    cov_xi_p = assemble_cov(cp_p, cm_p)
    cov_xi_m = assemble_cov(cp_m, cm_m)
    ortho_p = [cov_xi_p]
    ortho_m = [cov_xi_m]
    for _ in range(fam.L_plus):
        ortho_p.append(ops.star_covector(ortho_p[-1]))
    for _ in range(fam.L_minus):
        ortho_m.append(ops.star_covector(ortho_m[-1]))

    out = XiDirections(M=float(M),
                       xi_plus=ops.field_of(cov_xi_p, d),
                       xi_minus=ops.field_of(cov_xi_m, d),
                       coef_plus={"+": cp_p, "-": cm_p},
                       coef_minus={"+": cp_m, "-": cm_m},
                       pairing=float(pairing),
                       ops=ops,
                       ortho_cov_plus=ortho_p,
                       ortho_cov_minus=ortho_m)
    if biorthogonality_check:
        _xi_tables(out, fam, cov_xi_p, cov_xi_m)
    return out


def _xi_tables(xi, fam, cov_xi_p, cov_xi_m):
    """Pairing tables (Lt^i Phi_{j,+-}, Xi_{M,+-}) via the kernel identity
    Lt^i Phi_j = Phi_{j-i} (zero for i > j)."""
    ops = xi.ops
    Lp, Lm = fam.L_plus, fam.L_minus
    bp = np.zeros((Lp + 1, Lp + 1))
    xp = np.zeros((Lp + 1, Lm + 1))
    bm = np.zeros((Lp + 1, Lm + 1))
    xm = np.zeros((Lp + 1, Lp + 1))
    for i in range(Lp + 1):
        for j in range(Lp + 1):
            if j - i >= 0:
                bp[i, j] = ops.pair(cov_xi_p, fam.phi_plus[j - i])
                xm[i, j] = ops.pair(cov_xi_m, fam.phi_plus[j - i])
        for j in range(Lm + 1):
            if j - i >= 0:
                xp[i, j] = ops.pair(cov_xi_p, fam.phi_minus[j - i])
                bm[i, j] = ops.pair(cov_xi_m, fam.phi_minus[j - i])
    xi.bi_plus = bp        # should be pairing * delta_ij up to sign
    xi.cross_plus = xp     # should vanish
    xi.bi_minus = bm       # should be pairing * delta_ij up to sign
    xi.cross_minus = xm    # should vanish
