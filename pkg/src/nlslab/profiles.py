"""Localized approximate blow-up profiles Q_{b,a} at leading order.

The profile deforms Q along the kernel directions, cut off at the scale
B1 = b1^{-(1+eta)/2} where the growing tails would start to dominate:

    Q_{b,a} = Q + chi_{B1} ( sum_k b_k Phi_{k,+} + sum_k a_k Phi_{k,-} ).

The second-order corrections S_{j,+-} are omitted throughout, so the
renormalized residual carries an O(b1^2) error rather than O(b1^(L+2));
slopes, not sharp constants, are what the laboratory verifies.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import GridTooShort
from .fields import ComplexPair, RadialField
from .ground_state import lambda_q
from .linop import cutoff_chi, apply_Lambda

__all__ = ["ProfileConfig", "ApproxProfile", "assemble",
           "renormalized_residual"]


@dataclass(frozen=True)
class ProfileConfig:
    """Deformation parameters (b, a) and the localization scales."""

    b: tuple
    a: tuple
    eta0: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        if not self.b or self.b[0] <= 0.0:
            raise ValueError("b1 must be positive")

    @property
    def b1(self):
        return self.b[0]

    @property
    def eta(self):
        return self.eta0 / max(len(self.b), 1)

    @property
    def B0(self):
        return 1.0 / math.sqrt(self.b1)

    @property
    def B1(self):
        return self.B0 ** (1.0 + self.eta)

    def size_check(self, alpha, factor=10.0):
        """A-priori envelope |b_k| <~ b1^k, |a_k| <= b1^(k + alpha/2)."""
        ok = all(abs(bk) <= factor * self.b1 ** (k + 1)
                 for k, bk in enumerate(self.b))
        ok &= all(abs(ak) <= factor * self.b1 ** (k + 1 + alpha / 2.0)
                  for k, ak in enumerate(self.a))
        return ok


@dataclass(frozen=True)
class ApproxProfile:
    field: ComplexPair
    config: ProfileConfig
    family: object

    @property
    def grid(self):
        return self.field.grid


def assemble(fam, cfg):
    """Q + chi_{B1} * (b . Phi_+ + a . Phi_-) on the family grid."""
    if len(cfg.b) > fam.L_plus or len(cfg.a) > fam.L_minus:
        raise ValueError("more parameters than family members")
    grid = fam.grid
    if 2.0 * cfg.B1 > grid.rmax:
        raise GridTooShort(
            f"2 B1 = {2 * cfg.B1:.1f} exceeds rmax = {grid.rmax}")
    y = grid.y
    d = fam.params.d
    chi = cutoff_chi(y, cfg.B1)
    re = np.zeros_like(y)
    im = np.zeros_like(y)
    for k, bk in enumerate(cfg.b, start=1):
        if bk:
            re += bk * fam.phi_plus[k].re.values
            im += bk * fam.phi_plus[k].im.values
    for k, ak in enumerate(cfg.a, start=1):
        if ak:
            re += ak * fam.phi_minus[k].re.values
            im += ak * fam.phi_minus[k].im.values
    re = fam.gs.Q.values + chi * re
    im = chi * im
    return ApproxProfile(
        field=ComplexPair(RadialField(grid, re, d), RadialField(grid, im, d)),
        config=cfg, family=fam)


def _frozen_parameter_rates(cfg, alpha):
    """(b_k)_s = b_{k+1} - (2k - alpha) b1 b_k and
    (a_k)_s = a_{k+1} - 2k b1 a_k with vanishing trailing modes."""
    b, a = cfg.b, cfg.a
    b1 = cfg.b1
    bs = [(b[k] if k < len(b) else 0.0) - (2.0 * (k) - alpha) * b1 * b[k - 1]
          for k in range(1, len(b) + 1)]
    as_ = [(a[k] if k < len(a) else 0.0) - 2.0 * k * b1 * a[k - 1]
           for k in range(1, len(a) + 1)]
    return bs, as_


def renormalized_residual(prof, weight_power=None):
    """Residual of the renormalized flow on the frozen parameter laws.

    Evaluates  dQ/ds + b1 Lambda Qt + J a1 Qt - J [Delta Qt + f(Qt)]  with
    (b_k)_s, (a_k)_s substituted from the universal system, where dQ/ds
    collects the parameter derivatives of the localized profile including
    the moving cutoff.  Returns the residual pair plus a report with the
    weighted L2 norm on y <= B0 (weight 1/(1+y^2)^(wp) with wp defaulting
    to gamma so the kernel tails are integrable).
    """
    fam = prof.family
    cfg = prof.config
    params = fam.params
    d, p, m, alpha = params.d, params.p, params.m, params.alpha
    grid = prof.grid
    y = grid.y
    chi = cutoff_chi(y, cfg.B1)
    b1 = cfg.b1
    a1 = cfg.a[0] if cfg.a else 0.0

    Qt = prof.field
    # static part: -J[Delta Qt + f(Qt)] + b1 Lambda Qt + J a1 Qt
    lap_re = Qt.re.laplacian().values
    lap_im = Qt.im.laplacian().values
    amp = np.abs(Qt.re.values + 1j * Qt.im.values) ** (p - 1.0)
    F_re = lap_re + amp * Qt.re.values
    F_im = lap_im + amp * Qt.im.values
    lam_Qt = apply_Lambda(Qt, m)
    res_re = F_im + b1 * lam_Qt.re.values - a1 * Qt.im.values
    res_im = -F_re + b1 * lam_Qt.im.values + a1 * Qt.re.values

    # parameter-derivative part with the frozen laws
    bs, as_ = _frozen_parameter_rates(cfg, alpha)
    for k, bk_s in enumerate(bs, start=1):
        if bk_s:
            res_re += bk_s * chi * fam.phi_plus[k].re.values
            res_im += bk_s * chi * fam.phi_plus[k].im.values
    for k, ak_s in enumerate(as_, start=1):
        if ak_s:
            res_re += ak_s * chi * fam.phi_minus[k].re.values
            res_im += ak_s * chi * fam.phi_minus[k].im.values
    # moving cutoff: d/ds chi(y/B1) = -chi'(t) t (B1)_s/B1 acting on raw zeta
    if bs:
        b1_s = bs[0]
        zeta_re = np.zeros_like(y)
        zeta_im = np.zeros_like(y)
        for k, bk in enumerate(cfg.b, start=1):
            if bk:
                zeta_re += bk * fam.phi_plus[k].re.values
                zeta_im += bk * fam.phi_plus[k].im.values
        for k, ak in enumerate(cfg.a, start=1):
            if ak:
                zeta_re += ak * fam.phi_minus[k].re.values
                zeta_im += ak * fam.phi_minus[k].im.values
        t = y / cfg.B1
        dchi = np.where((t > 1.0) & (t < 2.0),
                        -30.0 * (t - 1.0) ** 2 * (2.0 - t) ** 2, 0.0)
        rate = -(1.0 + cfg.eta) / 2.0 * b1_s / b1   # (B1)_s / B1
        moving = -dchi * t * rate
        res_re += moving * zeta_re
        res_im += moving * zeta_im

    d_field = ComplexPair(RadialField(grid, res_re, d),
                          RadialField(grid, res_im, d))
    if weight_power is None:
        weight_power = params.tail_gamma
    sel = y <= cfg.B0
    w = 1.0 / (1.0 + y ** 2) ** weight_power
    dens = (res_re ** 2 + res_im ** 2) * w
    l2 = math.sqrt(grid.integrate(np.where(sel, dens, 0.0), d - 1))
    # beyond 2B1 the profile is exactly Q, so the residual reduces to the
    # unlocalized tail term b1 Lambda Q + a1 J Q; everything generated by
    # the cutoff itself must vanish there
    far = y >= 2.0 * cfg.B1
    lamq = lambda_q(fam.gs).values
    tail_re = res_re - b1 * lamq
    tail_im = res_im - a1 * fam.gs.Q.values
    report = {
        "weighted_l2_core": l2,
        "cutoff_component_sup_beyond_2B1": float(max(
            np.abs(tail_re[far]).max(initial=0.0),
            np.abs(tail_im[far]).max(initial=0.0))),
        "B0": cfg.B0, "B1": cfg.B1,
    }
    return d_field, report
