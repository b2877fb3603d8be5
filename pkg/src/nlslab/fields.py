"""Radial field carriers and power-law tail fitting."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit
from .grids import RadialGrid

__all__ = ["RadialField", "ComplexPair", "pair_inner", "tail_fit", "TailFit"]


@dataclass(frozen=True)
class RadialField:
    """Samples of a radial function on a shared grid.

    parity is the behavior under y -> -y of the 1-D restriction ('even' for
    plain radial functions, 'odd' for their radial derivatives); d is the
    ambient dimension used by the radial Laplacian and the measure.
    """

    grid: RadialGrid
    values: np.ndarray
    d: int
    parity: str = "even"

    def __post_init__(self):
        v = np.ascontiguousarray(self.values)
        if v.shape != self.grid.y.shape:
            raise ValueError("values do not match grid")
        object.__setattr__(self, "values", v)

    @property
    def y(self):
        return self.grid.y

    def deriv(self, order=1):
        out = self.grid.deriv(self.values, order, self.parity)
        par = self.parity
        if order % 2 == 1:
            par = "odd" if par == "even" else "even"
        return RadialField(self.grid, out, self.d, par)

    def laplacian(self):
        return RadialField(
            self.grid, self.grid.laplacian(self.values, self.d, self.parity),
            self.d, self.parity)

    def scaling_gen(self, m):
        """Lambda f = m f + y f' with m = 2/(p-1) passed explicitly."""
        f1 = self.grid.deriv(self.values, 1, self.parity)
        return RadialField(self.grid, m * self.values + self.y * f1,
                           self.d, self.parity)

    def __mul__(self, other):
        vals = self.values * (other.values if isinstance(other, RadialField)
                              else other)
        return RadialField(self.grid, vals, self.d, self.parity)

    __rmul__ = __mul__

    def __add__(self, other):
        vals = self.values + (other.values if isinstance(other, RadialField)
                              else other)
        return RadialField(self.grid, vals, self.d, self.parity)

    def __sub__(self, other):
        vals = self.values - (other.values if isinstance(other, RadialField)
                              else other)
        return RadialField(self.grid, vals, self.d, self.parity)

    def __neg__(self):
        return RadialField(self.grid, -self.values, self.d, self.parity)


@dataclass(frozen=True)
class ComplexPair:
    """(Re, Im) vector representation of a complex radial field."""

    re: RadialField
    im: RadialField

    def __post_init__(self):
        if self.re.grid is not self.im.grid and not np.array_equal(
                self.re.y, self.im.y):
            raise ValueError("components live on different grids")

    @property
    def grid(self):
        return self.re.grid

    @property
    def d(self):
        return self.re.d

    def apply_J(self):
        """J (re, im) = (-im, re)."""
        return ComplexPair(-self.im, self.re)

    def __add__(self, other):
        return ComplexPair(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return ComplexPair(self.re - other.re, self.im - other.im)

    def __mul__(self, scalar):
        return ComplexPair(self.re * scalar, self.im * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return ComplexPair(-self.re, -self.im)

    @staticmethod
    def zero(grid, d):
        z = np.zeros(len(grid))
        return ComplexPair(RadialField(grid, z, d), RadialField(grid, z.copy(), d))


def pair_inner(u, v, upto=None):
    """(u, v) = integral((u1 v1 + u2 v2) y^(d-1) dy), real vector pairing."""
    g = u.re.values * v.re.values + u.im.values * v.im.values
    return u.grid.integrate(g, u.d - 1, upto=upto)


@dataclass(frozen=True)
class TailFit:
    """Result of a power-law tail fit over a log window."""

    leading_exponent: float
    leading_coefficient: float
    exponents: tuple = ()
    coefficients: tuple = ()
    rms_relative_residual: float = np.nan
    window: tuple = (np.nan, np.nan)
    fit_noise: float = np.nan  # rms deviation of log|f| from the line


def tail_fit(f, window, exponent_hypotheses=None, grid=None):
    """Fit the far-field behavior of ``f`` on window = (r_lo, r_hi).

    Always performs the free log-log fit of the leading power; when
    ``exponent_hypotheses`` is given, additionally least-squares fits
    f ~ sum_i c_i y**e_i over the window and returns the coefficients.
    ``f`` is a RadialField, or a plain array with ``grid`` supplied.
    """
    if isinstance(f, RadialField):
        y, vals = f.y, f.values
    else:
        y, vals = grid.y, np.asarray(f)
    r_lo, r_hi = window
    if r_hi / r_lo < 10.0 - 1e-9:
        raise ValueError("window must span at least one decade")
    sel = (y >= r_lo) & (y <= r_hi)
    if sel.sum() < 8:
        raise DegenerateFit("window contains too few grid points",
                            window=window)
    yw = y[sel]
    fw = vals[sel]

    mag = np.abs(fw)
    good = mag > 0
    if good.sum() < 8:
        raise DegenerateFit("field vanishes on the fit window", window=window)
    ly = np.log(yw[good])
    lf = np.log(mag[good])
    slope, intercept = np.polyfit(ly, lf, 1)
    noise = float(np.sqrt(np.mean((lf - (slope * ly + intercept)) ** 2)))
    sign = float(np.sign(np.median(fw[good])))
    lead_c = sign * float(np.exp(intercept))

    exps, coefs, resid = (), (), np.nan
    if exponent_hypotheses is not None:
        exps = tuple(float(e) for e in exponent_hypotheses)
        design = np.column_stack([yw ** e for e in exps])
        scale = np.linalg.norm(design, axis=0)
        if np.any(scale == 0):
            raise DegenerateFit("degenerate design column", window=window)
        sol, _, rank, sv = np.linalg.lstsq(design / scale, fw, rcond=None)
        if rank < len(exps) or sv[0] / sv[-1] > 1e12:
            raise DegenerateFit("ill-conditioned design matrix",
                                window=window,
                                cond=float(sv[0] / sv[-1]))
        coefs = tuple(sol / scale)
        model = design @ np.asarray(coefs)
        resid = float(np.sqrt(np.mean((fw - model) ** 2))
                      / max(np.sqrt(np.mean(fw ** 2)), 1e-300))

    return TailFit(
        leading_exponent=float(slope),
        leading_coefficient=lead_c,
        exponents=exps,
        coefficients=coefs,
        rms_relative_residual=resid,
        window=(float(r_lo), float(r_hi)),
        fit_noise=noise,
    )
