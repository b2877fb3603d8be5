"""Numerical validation of the Hardy inequalities and the constrained
weighted coercivity of iterated linearized operators.

Hardy checks evaluate both sides (boundary compensations included) by
radial quadrature with the weight exponents combined analytically, so the
huge log-range test functions of the critical variant never overflow.
Coercivity checks discretize u on a dedicated uniform grid, impose the
localized-dual orthogonality conditions as linear constraints, and
minimize the Rayleigh quotient

    (J Lt Lt^k u, Lt^k u) / sum_n integral(|D^n u|^2 / (1 + y^(4k+2-2n)))

by a projected generalized eigensolve; J Lt = diag(L_+, L_-) makes the
numerator a plain sum of the two scalar quadratic forms.
"""

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh
from scipy.sparse import diags

from .errors import NeedsRefinement
from .fields import RadialField
from .grids import RadialGrid, make_grid

__all__ = ["InequalityReport", "hardy_check", "coercivity_check",
           "kernel_direction_quotient", "hardy_test_function"]


@dataclass(frozen=True)
class InequalityReport:
    inequality_id: str
    test_function: str
    lhs: float
    rhs_weighted: float
    boundary_term: float
    ratio: float
    constant: float
    passes: bool

    def as_dict(self):
        return asdict(self)


def hardy_test_function(grid, kind="bump", center=5.0, width=1.0, eps=0.1):
    """Standard corpus entries: evenized Gaussian bumps and the near
    log-extremal family (1 + log y)**(1/2 + eps) smoothly cut off."""
    y = grid.y
    if kind == "bump":
        vals = (np.exp(-((y - center) / width) ** 2)
                + np.exp(-((y + center) / width) ** 2))
        name = f"bump(c={center},w={width})"
    elif kind == "log-extremal":
        t = np.log(np.maximum(y, 1.0))
        T = np.log(grid.rmax)
        ramp = np.clip((t - 0.6 * T) / (0.35 * T), 0.0, 1.0)
        cut = 1.0 - ramp ** 3 * (10.0 - 15.0 * ramp + 6.0 * ramp ** 2)
        vals = (1.0 + t) ** (0.5 + eps) * cut
        vals[y < 1.0] = 1.0
        name = f"log-extremal(eps={eps})"
    else:
        raise ValueError(kind)
    return RadialField(grid, vals, d=grid_d(grid)), name


def grid_d(grid, default=12):
    return getattr(grid, "ambient_d", default)


def _integral(grid, g, power, lo=None, hi=None):
    """integral(g * y**power dy) over [lo, hi] via the exact-moment rule."""
    vals = np.asarray(g, dtype=float).copy()
    y = grid.y
    if lo is not None:
        vals[y < lo] = 0.0
    if hi is not None:
        vals[y > hi] = 0.0
    return grid.integrate(vals, power)


def _value_at(field, r):
    y = field.grid.y
    return float(CubicSpline(y, field.values)(r))


def hardy_check(variant, d, u, q=None, k=None, j=None, delta=0.0,
                constant_margin=1.0, name=""):
    """Evaluate one Hardy-type inequality on a radial test function.

    variant: 'origin' (y <= 1, constant (d-2)^2/4, boundary -C_d u(1)^2),
    'global' (same constant on all of (0, inf), no boundary term),
    'exterior' (y >= 1, exponent q, constant ((d-2q-2)/2)^2),
    'critical' (q = (d-2)/2, log weight, constant 1/4),
    'weighted-general' (derivative interpolation with implied constant,
    pass at ratio <= constant_margin).
    """
    grid = u.grid
    du = u.deriv(1)
    uy2 = u.values ** 2
    dy2 = du.values ** 2
    if variant in ("origin", "global"):
        hi = 1.0 if variant == "origin" else None
        lhs = _integral(grid, dy2, d - 1, hi=hi)
        rhs = _integral(grid, uy2, d - 3, hi=hi)
        c_best = (d - 2.0) ** 2 / 4.0
        bterm = ((d - 2.0) / 2.0 * _value_at(u, 1.0) ** 2
                 if variant == "origin" else 0.0)
        ratio = (lhs + bterm) / rhs if rhs > 0 else math.inf
        passes = lhs + bterm >= c_best * rhs * (1.0 - 1e-9) or rhs == 0.0
        return InequalityReport(variant, name, lhs, rhs, bterm, ratio,
                                c_best, passes)
    if variant == "exterior":
        if q is None:
            raise ValueError("exterior variant needs q")
        lhs = _integral(grid, dy2, d - 1 - 2 * q, lo=1.0)
        rhs = _integral(grid, uy2, d - 3 - 2 * q, lo=1.0)
        c_best = ((d - (2 * q + 2.0)) / 2.0) ** 2
        bterm = abs(2 * q + 2.0 - d) / 2.0 * _value_at(u, 1.0) ** 2
        ratio = (lhs + bterm) / rhs if rhs > 0 else math.inf
        return InequalityReport(variant, name, lhs, rhs, bterm, ratio,
                                c_best, lhs + bterm >= c_best * rhs * (1 - 1e-9))
    if variant == "critical":
        qc = (d - 2.0) / 2.0
        y = grid.y
        logw = np.zeros_like(y)
        sel = y >= 1.0
        logw[sel] = 1.0 / (1.0 + np.log(y[sel])) ** 2
        lhs = _integral(grid, dy2, d - 1 - 2 * qc, lo=1.0)
        rhs = _integral(grid, uy2 * logw, d - 3 - 2 * qc, lo=1.0)
        bterm = 0.5 * _value_at(u, 1.0) ** 2
        ratio = (lhs + bterm) / rhs if rhs > 0 else math.inf
        return InequalityReport(variant, name, lhs, rhs, bterm, ratio, 0.25,
                                lhs + bterm >= 0.25 * rhs * (1 - 1e-9))
    if variant == "weighted-general":
        if k is None or j is None or not 1 <= j <= k - 1:
            raise ValueError("weighted-general needs 1 <= j <= k-1")
        y = grid.y

        def dn(field, n):
            out = field
            for _ in range(n // 2):
                out = out.laplacian()
            if n % 2:
                out = out.deriv(1)
            return out

        wj = 1.0 / (1.0 + y ** (delta + 2.0 * (k - j)))
        wk = 1.0 / (1.0 + y ** delta)
        w0 = 1.0 / (1.0 + y ** (delta + 2.0 * k))
        lhs = _integral(grid, dn(u, j).values ** 2 * wj, d - 1)
        rhs = (_integral(grid, dn(u, k).values ** 2 * wk, d - 1)
               + _integral(grid, uy2 * w0, d - 1))
        ratio = lhs / rhs if rhs > 0 else math.inf
        return InequalityReport(variant, name, lhs, rhs, 0.0, ratio,
                                constant_margin, ratio <= constant_margin)
    raise ValueError(f"unknown variant {variant!r}")


# -- coercivity of iterated Lt ------------------------------------------------


def _subgrid_operators(gs, y_max, n):
    """L_+, L_- on a uniform coercivity grid, finite-volume form.

    The flux-form radial Laplacian is exactly self-adjoint under the cell
    volumes V_j = integral(y^(d-1), cell), so V L_+- is symmetric and the
    Rayleigh forms carry no spurious boundary modes; symmetrized stencil
    discretizations are indefinite near the origin where V ~ y^(d-1)
    vanishes.
    """
    params = gs.params
    d, p = params.d, params.p
    sub = RadialGrid(np.linspace(0.0, y_max, n))
    y = sub.y
    h = y[1] - y[0]
    Q = CubicSpline(gs.y, gs.Q.values)(y)
    faces = np.concatenate([[0.0], 0.5 * (y[1:] + y[:-1]), [y[-1] + 0.5 * h]])
    vol = (faces[1:] ** d - faces[:-1] ** d) / d
    area = faces ** (d - 1.0)
    lap = np.zeros((n, n))
    for j in range(n):
        if j + 1 < n:
            c = area[j + 1] / h
            lap[j, j + 1] += c / vol[j]
            lap[j, j] -= c / vol[j]
        if j > 0:
            c = area[j] / h
            lap[j, j - 1] += c / vol[j]
            lap[j, j] -= c / vol[j]
    wm = Q ** (p - 1.0)
    Lp = -lap - np.diag(p * wm)
    Lm = -lap - np.diag(wm)
    D1 = sub.diff_matrix(1, "even").toarray()
    return sub, Lp, Lm, vol, D1, lap


def coercivity_check(gs, xi, k, y_max=None, n=420, boundary_pad=6,
                     constraints="auto"):
    """Minimum of the constrained Rayleigh quotient for Lt^k.

    constraints: 'auto' applies the orthogonality set of the coercivity
    lemma ((Lt*)^n Xi_+ for n <= k - k_+, plus (Lt*)^n Xi_- for
    n <= k - k_-); 'none' drops all constraints.  Returns the report dict.
    """
    params = gs.params
    if k > params.k_minus + 1:
        raise NeedsRefinement(
            f"k={k} beyond cap k_- + 1 = {params.k_minus + 1}", k=k)
    if y_max is None:
        y_max = max(3.0 * xi.M, 45.0)
    sub, Lp, Lm, w, D1, lap = _subgrid_operators(gs, y_max, n)
    y = sub.y
    n_pts = y.size

    # Lt as a 2n x 2n block matrix on stacked (re, im); the numerator form
    # (J Lt v, v) = (L_+ v_re, v_re) + (L_- v_im, v_im) with v = Lt^k u
    Z = np.zeros_like(Lp)
    Lt = np.block([[Z, Lm], [-Lp, Z]])
    Mk = np.linalg.matrix_power(Lt, k)
    quad = np.block([[w[:, None] * Lp, Z], [Z, w[:, None] * Lm]])
    A = Mk.T @ quad @ Mk
    A = 0.5 * (A + A.T)

    # weighted norm: D^n runs through Delta^m and d/dy Delta^m, n <= 2k+1
    B1 = np.zeros_like(Lp)
    lap_m = np.eye(n_pts)
    for m in range(0, k + 1):
        for parity in (0, 1):
            n_der = 2 * m + parity
            if n_der > 2 * k + 1:
                break
            op = lap_m if parity == 0 else D1 @ lap_m
            wt = w / (1.0 + y ** (4.0 * k + 2.0 - 2.0 * n_der))
            B1 += op.T @ (wt[:, None] * op)
        lap_m = lap @ lap_m
    B = np.block([[B1, Z], [Z, B1]])
    B = 0.5 * (B + B.T)

    # constraint rows: orthogonality covectors interpolated onto the subgrid
    rows = []
    if constraints == "auto":
        j_plus = k - params.k_plus
        j_minus = k - params.k_minus
        for nn in range(0, j_plus + 1):
            if 0 <= nn < len(xi.ortho_cov_plus):
                rows.append(_interp_cov(xi, xi.ortho_cov_plus[nn], sub, w))
        for nn in range(0, j_minus + 1):
            if 0 <= nn < len(xi.ortho_cov_minus):
                rows.append(_interp_cov(xi, xi.ortho_cov_minus[nn], sub, w))
    # Dirichlet pad at the outer boundary (test functions are compact)
    keep = np.ones(2 * n_pts, dtype=bool)
    for i in range(n_pts - boundary_pad, n_pts):
        keep[i] = keep[n_pts + i] = False
    idx = np.where(keep)[0]
    A = A[np.ix_(idx, idx)]
    B = B[np.ix_(idx, idx)]
    if rows:
        C = np.array(rows)[:, idx]
        ns = _nullspace(C)
        A_c = ns.T @ A @ ns
        B_c = ns.T @ B @ ns
    else:
        A_c, B_c = A, B
    out = {
        "k": int(k),
        "constraints": int(len(rows)),
        "min_quotient": _min_quotient(A_c, B_c),
        "y_max": float(y_max),
        "n": int(n_pts),
    }
    return out


def kernel_direction_quotient(gs, pot, xi, k):
    """Rayleigh quotient of the zero mode (Lambda Q, 0) for Lt^k.

    For k >= k_+ the mode has finite weighted norm and exactly vanishing
    numerator, so this value (pure discretization noise over an O(1) norm)
    is an upper bound for the unconstrained infimum: it is the degeneracy
    that the (u, Xi_+) = 0 constraint removes.  A variational minimum on a
    truncated domain cannot exhibit it, because forcing the slowly decaying
    mode to zero at the boundary costs ~ 1/log^2(y_max).

    Returns (quotient, constraint_pairing) with the pairing (u0, Xi_+)
    normalized by the Xi pairing constant.
    """
    from .ground_state import lambda_q
    from .linop import apply_Ltilde
    from .fields import ComplexPair, RadialField

    params = gs.params
    if k < params.k_plus:
        raise ValueError("the zero mode has infinite norm below k_+")
    grid, d = gs.grid, params.d
    y = grid.y
    lamq = lambda_q(gs)
    u0 = ComplexPair(lamq, RadialField(grid, np.zeros_like(y), d))
    v = u0
    for _ in range(k):
        v = apply_Ltilde(v, pot)
    # numerator (L_+ v_re, v_re) + (L_- v_im, v_im) as |A_+- .|^2 densities
    vp = pot.V_plus.values
    vm = pot.V_minus.values
    ap = -grid.deriv(v.re.values, 1, "even") + vp * v.re.values
    am = -grid.deriv(v.im.values, 1, "even") + vm * v.im.values
    cut = y <= grid.rmax / 4.0
    num = grid.integrate(np.where(cut, ap ** 2 + am ** 2, 0.0), d - 1)

    den = 0.0
    f = u0.re
    for m in range(0, k + 1):
        for parity in (0, 1):
            n_der = 2 * m + parity
            if n_der > 2 * k + 1:
                break
            g = f.deriv(1) if parity else f
            wt = 1.0 / (1.0 + y ** (4.0 * k + 2.0 - 2.0 * n_der))
            den += grid.integrate(np.where(cut, g.values ** 2 * wt, 0.0),
                                  d - 1)
        f = f.laplacian()
    pairing = (xi.ortho_cov_plus[0][0] @ u0.re.values) / abs(xi.pairing)
    return float(num / den), float(pairing)


def _min_quotient(A, B, rcond=1e-12):
    """Smallest eigenvalue of the pencil (A, B) via whitening of B.

    High powers of Lt make B nearly singular at rounding level; directions
    below rcond * ||B|| are projected out rather than fed to a Cholesky
    that would fail.
    """
    s, V = eigh(0.5 * (B + B.T))
    keep = s > rcond * s.max()
    wh = V[:, keep] / np.sqrt(s[keep])
    C = wh.T @ A @ wh
    return float(eigh(0.5 * (C + C.T), eigvals_only=True,
                      subset_by_index=[0, 0])[0])


def _interp_cov(xi, cov, sub, w_sub):
    """Move an orthogonality covector to the subgrid as a constraint row.

    The covector represents weighted pairing against some direction g:
    cov = W g on the master grid; the subgrid row is w_sub * g(y_sub)."""
    master = xi.ops.grid
    wm = xi.ops.w
    row = np.empty(2 * sub.y.size)
    for half, comp in enumerate(cov):
        g = comp / wm
        vals = CubicSpline(master.y, g)(sub.y)
        vals[sub.y > master.y[-1]] = 0.0
        row[half * sub.y.size:(half + 1) * sub.y.size] = w_sub * vals
    return row


def _nullspace(C, rcond=1e-12):
    u, s, vt = np.linalg.svd(C, full_matrices=True)
    rank = int(np.sum(s > rcond * s[0])) if s.size else 0
    return vt[rank:].T
