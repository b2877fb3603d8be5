"""Explicit eigenpairs of the linearized operator about the singular
self-similar profile.

The operator in self-similar variables is

    H psi = H0 psi - [1/(p-1) + (1/2) z d/dz] psi,
    H0 = (0, H_-; -H_+, 0),   H_+- = -Delta - (p|1) c_inf^(p-1) / z^2,

and carries two explicit families of generalized eigenvectors built from
the monomial ladders z^(2k - gamma) (plus family, decay rate l - alpha/2)
and z^(2k - 2/(p-1)) (minus family, decay rate l).  The coefficient
recursion c_{k+1} = (l - k) c_k / [(2k+2-beta)(2k+d-beta) + w_k] is exact;
when sqrt(Discr) is rational (e.g. d=13, p=5) the whole computation runs
in rational arithmetic and the monomial residual must vanish identically.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import RecursionDegenerate

__all__ = ["SelfSimilarEigenpair", "build_eigenpair", "eigen_residual",
           "eigen_residual_fd", "exact_numerology"]


def exact_numerology(d, p):
    """(m, c_inf^(p-1), discr, gamma) as Fractions; gamma is None when
    sqrt(Discr) is irrational."""
    m = Fraction(2, p - 1)
    c_pm1 = m * (d - 2 - m)
    discr = Fraction((d - 2) ** 2) - 4 * p * c_pm1
    gamma = None
    if discr >= 0:
        num, den = discr.numerator, discr.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            gamma = (Fraction(d - 2) - Fraction(rn, rd)) / 2
    return m, c_pm1, discr, gamma


@dataclass(frozen=True)
class SelfSimilarEigenpair:
    family: str                 # 'plus' | 'minus'
    ell: int
    decay_rate: float           # lambda with H psi = -lambda psi
    operator_eigenvalue: float  # -lambda
    base_exponent: float        # gamma (plus) or 2/(p-1) (minus)
    coefficients: tuple         # floats c_0..c_ell
    coefficients_exact: tuple   # Fractions, or None when irrational
    d: int
    p: float

    def component_exponents(self, k):
        """(slot, sign, exponent) of the k-th ladder monomial J^k z^(2k-b)."""
        return _jk_slot(self.family, k) + (2.0 * k - self.base_exponent,)


def _jk_slot(family, k):
    """Slot and sign of J^k applied to the family seed.

    J = (0, -1; 1, 0); the plus seed sits in slot 0, the minus in slot 1.
    """
    if family == "plus":
        slot = 0 if k % 2 == 0 else 1
        sign = 1 if k % 4 in (0, 1) else -1
    else:
        slot = 1 if k % 2 == 0 else 0
        sign = 1 if k % 4 == 0 or k % 4 == 3 else -1
        if k % 4 in (1, 2):
            sign = -1
    return slot, sign


def build_eigenpair(params, family, ell):
    """Coefficients and eigenvalue of the (family, ell) eigenpair."""
    if params.discr <= 0.0:
        raise ValueError("needs p > p_JL")
    if family not in ("plus", "minus"):
        raise ValueError("family must be 'plus' or 'minus'")
    d, p = params.d, params.p
    m_x, c_pm1_x, _, gamma_x = exact_numerology(d, int(p)) \
        if float(p).is_integer() else (None, None, None, None)
    exact_ok = gamma_x is not None

    if family == "plus":
        beta_f = params.tail_gamma
        beta_x = gamma_x if exact_ok else None
        lam = 1.0 / (p - 1.0) - params.tail_gamma / 2.0 + ell
        w_even, w_odd = 1, p  # multiplies c_inf^(p-1): H_- for even k
    else:
        beta_f = params.m
        beta_x = m_x if exact_ok else None
        lam = float(ell)
        w_even, w_odd = p, 1  # H_+ acts for even k

    coefs_f = [1.0]
    coefs_x = [Fraction(1)] if exact_ok else None
    for k in range(ell):
        e_k = ell - k
        D_f = ((2 * k + 2 - beta_f) * (2 * k + d - beta_f)
               + (w_even if k % 2 == 0 else w_odd) * params.c_inf_pm1)
        if abs(D_f) < 1e-12:
            raise RecursionDegenerate(
                f"denominator vanishes at k={k} (non-generic resonance)",
                k=k, family=family)
        coefs_f.append(e_k * coefs_f[-1] / D_f)
        if exact_ok:
            w = Fraction(w_even if k % 2 == 0 else w_odd)
            D_x = ((2 * k + 2 - beta_x) * (2 * k + d - beta_x) + w * c_pm1_x)
            if D_x == 0:
                raise RecursionDegenerate(
                    f"exact denominator vanishes at k={k}", k=k)
            coefs_x.append(e_k * coefs_x[-1] / D_x)

    return SelfSimilarEigenpair(
        family=family, ell=int(ell),
        decay_rate=float(lam), operator_eigenvalue=float(-lam),
        base_exponent=float(beta_f),
        coefficients=tuple(coefs_f),
        coefficients_exact=tuple(coefs_x) if exact_ok else None,
        d=int(d), p=p)


def _h_on_monomials(pair, exact):
    """Monomial coefficients of H psi + lambda psi.

    Returns a dict {(slot, lattice): coef}, where the monomial exponent is
    2*lattice - base_exponent; exact coefficient algebra, so the dict must
    cancel identically for a true eigenpair.
    """
    d = pair.d
    p = pair.p
    if exact:
        if pair.coefficients_exact is None:
            raise ValueError("exact arithmetic unavailable: sqrt(Discr) "
                             "irrational for this (d, p)")
        m_x, c_pm1_x, _, gamma_x = exact_numerology(d, int(p))
        beta = gamma_x if pair.family == "plus" else m_x
        lam = (Fraction(1, int(p) - 1) - gamma_x / 2 + pair.ell
               if pair.family == "plus" else Fraction(pair.ell))
        coefs = pair.coefficients_exact
        inv_pm1 = Fraction(1, int(p) - 1)
        w_plus, w_minus = int(p) * c_pm1_x, c_pm1_x
        zero = Fraction(0)
    else:
        beta = pair.base_exponent
        lam = pair.decay_rate
        coefs = pair.coefficients
        inv_pm1 = 1.0 / (p - 1.0)
        c_pm1 = 2.0 / (p - 1.0) * (d - 2.0 - 2.0 / (p - 1.0))
        w_plus, w_minus = p * c_pm1, c_pm1
        zero = 0.0

    out = {}

    def add(slot, lat, coef):
        key = (slot, lat)
        out[key] = out.get(key, zero) + coef

    for k, ck in enumerate(coefs):
        slot, sign, _ = pair.component_exponents(k)
        e = 2 * k - beta
        c = sign * ck
        # scalar part: (lam - 1/(p-1) - e/2) on the same slot/exponent
        add(slot, k, c * (lam - inv_pm1 - e / 2))
        # H0 part: maps slot 0 -> slot 1 with -H_+, slot 1 -> slot 0 with H_-
        lap = e * (e + d - 2)  # Delta z^e = e(e+d-2) z^(e-2)
        if slot == 0:
            add(1, k - 1, -c * (-(lap + w_plus)))
        else:
            add(0, k - 1, c * (-(lap + w_minus)))
    return {k: v for k, v in out.items() if v != zero}


def eigen_residual(pair, annulus=(1.0, 10.0), exact=False):
    """sup over the annulus of |H psi + lambda psi| / max |psi|.

    H is applied to the eigenvector term by term with exact exponent
    arithmetic; the surviving monomial coefficients (identically zero in
    rational arithmetic, rounding-level in floats) are then summed on a
    grid over the annulus.  exact=True skips the grid and returns the
    largest |coefficient| of the rational computation.  The independent
    stencil evaluation lives in eigen_residual_fd, whose own accuracy
    floor is several orders looser.
    """
    beta = pair.base_exponent
    if exact:
        res = _h_on_monomials(pair, exact=True)
        return max((abs(float(v)) for v in res.values()), default=0.0)

    z = np.geomspace(annulus[0], annulus[1], 128)
    res = _h_on_monomials(pair, exact=False)
    vals = np.zeros((2, z.size))
    for (slot, lat), coef in res.items():
        vals[slot] += coef * z ** (2.0 * lat - beta)
    psi = np.zeros((2, z.size))
    for k, ck in enumerate(pair.coefficients):
        slot, sign, e = pair.component_exponents(k)
        psi[slot] += sign * ck * z ** e
    ref = np.abs(psi).max()
    return float(np.abs(vals).max() / ref)


def eigen_residual_fd(pair, annulus=(1.0, 10.0), n_grid=2000):
    """Cross-check of eigen_residual by direct 4th-order stencils."""
    z = np.geomspace(annulus[0], annulus[1], 128)
    psi = np.zeros((2, z.size))
    for k, ck in enumerate(pair.coefficients):
        slot, sign, e = pair.component_exponents(k)
        psi[slot] += sign * ck * z ** e
    return float(_fd_residual(pair, annulus, n_grid) / np.abs(psi).max())


def _fd_residual(pair, annulus, n):
    """max |H psi + lambda psi| via 4th-order stencils in log z."""
    d, p = pair.d, pair.p
    pad = 1.2
    t = np.linspace(np.log(annulus[0] / pad), np.log(annulus[1] * pad), n)
    z = np.exp(t)
    h = t[1] - t[0]
    psi = np.zeros((2, n))
    for k, ck in enumerate(pair.coefficients):
        slot, sign, e = pair.component_exponents(k)
        psi[slot] += sign * ck * z ** e

    def dt(f):
        out = np.gradient(f, h, edge_order=2)
        out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
        return out

    c_pm1 = 2.0 / (p - 1.0) * (d - 2.0 - 2.0 / (p - 1.0))
    out = np.zeros((2, n))
    lap = []
    for s in range(2):
        f1 = dt(psi[s])
        f2 = dt(f1)
        lap.append((f2 + (d - 2.0) * f1) / z ** 2)
    H_m = -lap[1] - c_pm1 / z ** 2 * psi[1]
    H_p = -lap[0] - p * c_pm1 / z ** 2 * psi[0]
    scal = [1.0 / (p - 1.0) * psi[s] + 0.5 * z * dt(psi[s]) / z for s in range(2)]
    out[0] = H_m - scal[0] + pair.decay_rate * psi[0]
    out[1] = -H_p - scal[1] + pair.decay_rate * psi[1]
    sel = (z >= annulus[0]) & (z <= annulus[1])
    return np.abs(out[:, sel]).max()
