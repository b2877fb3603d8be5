"""Algebraic constants of the supercritical radial NLS blow-up problem.

Everything here is closed-form arithmetic on (d, p): the singular-profile
amplitude c_inf, the discriminant of the indicial equation, the tail
exponents gamma/gamma2, the phenomenological exponent alpha = gamma - 2/(p-1)
that quantizes blow-up rates, and the integer/fractional splittings
(k_plus, k_minus, delta_plus, delta_minus, k_ell, delta_ell) that count
instabilities and drive the weighted-Hardy machinery downstream.
"""

import math
from dataclasses import dataclass, asdict

from .errors import SubcriticalDiscrError

__all__ = [
    "SupercriticalParams",
    "AdmissibilityReport",
    "joseph_lundgren",
    "derive_params",
    "admissibility",
    "bk_coefficients",
]


def joseph_lundgren(d):
    """Joseph-Lundgren exponent p_JL(d); +inf for d <= 10."""
    if d < 3:
        raise ValueError("dimension must be >= 3")
    if d <= 10:
        return math.inf
    return 1.0 + 4.0 / (d - 4.0 - 2.0 * math.sqrt(d - 1.0))


def _floor_split(x):
    """Split x = k + delta with k integer, 0 <= delta < 1."""
    k = math.floor(x)
    return int(k), x - k


@dataclass(frozen=True)
class SupercriticalParams:
    """All derived constants of a supercritical configuration (d, p).

    c_inf is normalized by c_inf**(p-1) = (2/(p-1)) * (d - 2 - 2/(p-1)),
    which is the normalization that makes R(r) = c_inf * r**(-2/(p-1)) an
    exact singular solution of Delta R + R^p = 0.
    """

    d: int
    p: float
    c_inf: float
    discr: float
    tail_gamma: float  # gamma  = (d - 2 - sqrt(Discr)) / 2
    gamma2: float      # gamma2 = (d - 2 + sqrt(Discr)) / 2
    alpha: float       # gamma - 2/(p-1)
    s_c: float         # d/2 - 2/(p-1)
    k_plus: int
    k_minus: int
    delta_plus: float
    delta_minus: float
    delta_p: float     # max(delta_plus, delta_minus)
    delta_k: int       # k_minus - k_plus

    @property
    def m(self):
        """Scaling decay exponent 2/(p-1) of the singular profile."""
        return 2.0 / (self.p - 1.0)

    @property
    def c_inf_pm1(self):
        """c_inf**(p-1), the coefficient entering the indicial equation."""
        return (2.0 / (self.p - 1.0)) * (self.d - 2.0 - 2.0 / (self.p - 1.0))

    def as_dict(self):
        return asdict(self)


def derive_params(d, p, permissive=False):
    """Populate SupercriticalParams for integer d >= 11 and odd p > p_JL(d).

    With permissive=True any real p > p_JL(d) is accepted (exploratory
    numerology only; the analyticity of the nonlinearity needs odd p).
    """
    if d < 11:
        raise SubcriticalDiscrError(
            f"d={d}: p_JL is +inf below dimension 11", d=d, p=p)
    if not permissive:
        if p < 3 or int(p) != p or int(p) % 2 == 0:
            raise ValueError(f"p={p} must be an odd integer >= 3 "
                             "(use permissive=True for real p)")
    pm1 = p - 1.0
    m = 2.0 / pm1
    c_inf_pm1 = m * (d - 2.0 - m)
    discr = (d - 2.0) ** 2 - 4.0 * p * c_inf_pm1
    if discr < 0.0:
        raise SubcriticalDiscrError(
            f"(d={d}, p={p}) is below the Joseph-Lundgren exponent "
            f"p_JL({d})={joseph_lundgren(d):.4f}: Discr={discr:.4e} < 0",
            d=d, p=p, discr=discr)
    root = math.sqrt(discr)
    gamma = 0.5 * (d - 2.0 - root)
    gamma2 = 0.5 * (d - 2.0 + root)
    alpha = gamma - m
    s_c = 0.5 * d - m
    k_plus, delta_plus = _floor_split(0.5 + 0.5 * (0.5 * d - gamma))
    k_minus, delta_minus = _floor_split(0.5 + 0.5 * (0.5 * d - m))
    return SupercriticalParams(
        d=int(d), p=p,
        c_inf=c_inf_pm1 ** (1.0 / pm1),
        discr=discr,
        tail_gamma=gamma, gamma2=gamma2,
        alpha=alpha, s_c=s_c,
        k_plus=k_plus, k_minus=k_minus,
        delta_plus=delta_plus, delta_minus=delta_minus,
        delta_p=max(delta_plus, delta_minus),
        delta_k=k_minus - k_plus,
    )


@dataclass(frozen=True)
class AdmissibilityReport:
    """Checks of the theorem hypotheses for a configuration (d, p, ell).

    generic=False is advisory: downstream modules keep working, but the
    non-integrality conditions that rule out logarithmic losses fail.
    """

    is_p_analytic: bool
    above_pjl: bool
    discr_gt_4: bool
    generic: bool
    ell: int
    ell_ok: bool
    k_ell: int
    delta_ell: float
    unstable_count: int

    def as_dict(self):
        return asdict(self)


def _is_near_integer(x, tol=1e-9):
    return abs(x - round(x)) < tol


def admissibility(params, ell):
    """Admissibility report for a blow-up index ell (needs ell > alpha/2)."""
    p = params.p
    is_p_analytic = (int(p) == p) and int(p) % 2 == 1 and p >= 3
    above_pjl = params.discr > 0.0
    discr_gt_4 = params.discr > 4.0
    # the three non-integrality conditions: alpha/2, and the two half-integer
    # shifts defining k_plus / k_minus, must all avoid integers
    generic = not (
        _is_near_integer(params.alpha / 2.0)
        or _is_near_integer(0.5 + 0.5 * (0.5 * params.d - params.tail_gamma))
        or _is_near_integer(0.5 + 0.5 * (0.5 * params.d - params.m))
    )
    ell_ok = ell > params.alpha / 2.0
    if ell_ok:
        k_ell, delta_ell = _floor_split(ell - params.alpha / 2.0)
    else:
        k_ell, delta_ell = 0, 0.0
    return AdmissibilityReport(
        is_p_analytic=is_p_analytic,
        above_pjl=above_pjl,
        discr_gt_4=discr_gt_4,
        generic=generic,
        ell=int(ell),
        ell_ok=ell_ok,
        k_ell=k_ell,
        delta_ell=delta_ell,
        unstable_count=int(ell) - 1 + k_ell,
    )


def bk_coefficients(alpha, ell):
    """Coefficients c_1..c_ell of the explicit parameter-system orbit.

    c_1 = ell/(2 ell - alpha), c_{j+1} = -alpha (ell - j)/(2 ell - alpha) c_j,
    and c_j = 0 for j > ell.  ``alpha`` may be a SupercriticalParams or a
    bare float.
    """
    if hasattr(alpha, "alpha"):
        alpha = alpha.alpha
    if ell <= alpha / 2.0:
        raise ValueError(f"need ell > alpha/2, got ell={ell}, alpha={alpha}")
    c = [ell / (2.0 * ell - alpha)]
    for j in range(1, ell):
        c.append(-alpha * (ell - j) / (2.0 * ell - alpha) * c[j - 1])
    return c
