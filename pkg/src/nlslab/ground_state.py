"""Radial ground state Q'' + (d-1)/y Q' + Q^p = 0, Q(0)=1, Q'(0)=0.

Above the Joseph-Lundgren exponent the solution is positive, decreasing and
approaches the singular profile R = c_inf y**(-2/(p-1)) with remainder
a1 * y**(-gamma).  The integration runs in two charts:

* (Q, Q') from a series start near the origin out to y_switch;
* the remainder w = Q - R (with R an exact solution) from y_switch to rmax,
  which keeps w, and hence the scaling generator Lambda Q = Lambda w,
  accurate *relative to its own size* in the tail.  Computing Lambda Q
  directly from m*Q + y*Q' out there loses ~7 digits to cancellation, which
  would wreck every tail-exponent fit downstream.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure, NotInGroundBranch
from .fields import RadialField, tail_fit
from .grids import RadialGrid, make_grid

__all__ = ["GroundState", "Potentials", "solve_ground_state", "lambda_q",
           "potentials"]

_Y_SERIES = 0.01
_Y_SWITCH = 10.0


def _pow_diff(base, delta, p):
    """(base + delta)**p - base**p without cancellation (base > 0)."""
    return base ** p * np.expm1(p * np.log1p(delta / base))


@dataclass(frozen=True)
class GroundState:
    """Ground state plus tail metadata.

    rem = Q - R and rem1 = (Q - R)' are integrator-accurate relative to
    themselves for y >= y_switch.  g is the remainder-order exponent
    min(alpha, sqrt(Discr)) > 2 of the asymptotic development.
    """

    params: object
    Q: RadialField
    q1: np.ndarray
    q2: np.ndarray
    rem: np.ndarray
    rem1: np.ndarray
    i_switch: int
    c_inf_fit: float
    a1_fit: float
    gamma_fit: float
    g: float
    fd_residual: float

    @property
    def grid(self):
        return self.Q.grid

    @property
    def y(self):
        return self.Q.grid.y


@dataclass(frozen=True)
class Potentials:
    """Factorization potentials V_+- and linearization potentials W_+-."""

    V_plus: RadialField   # d/dy log(Lambda Q)
    V_minus: RadialField  # d/dy log(Q)
    W_plus: RadialField   # p Q^(p-1)
    W_minus: RadialField  # Q^(p-1)


def _series(y, d, p):
    """Even Taylor start Q = 1 - y^2/(2d) + p y^4 / (8d(d+2))."""
    a2 = -1.0 / (2.0 * d)
    a4 = p / (8.0 * d * (d + 2.0))
    q = 1.0 + a2 * y ** 2 + a4 * y ** 4
    q1 = 2.0 * a2 * y + 4.0 * a4 * y ** 3
    return q, q1


def solve_ground_state(params, rmax=2000.0, tol=1e-12, grid=None):
    """Integrate the ground-state ODE and fit the tail on the last decade."""
    if not 1e-14 < tol < 1e-6:
        raise ValueError("tol must lie in (1e-14, 1e-6)")
    d, p, m = params.d, params.p, params.m
    c_inf, gamma = params.c_inf, params.tail_gamma
    if grid is None:
        grid = make_grid(rmax=rmax)
    y = grid.y
    if grid.rmax < 1000.0:
        raise ValueError("rmax must be >= 1e3 for the tail window")

    def rhs_q(t, v):
        q, q1 = v
        return (q1, -(d - 1) / t * q1 - np.sign(q) * np.abs(q) ** p)

    def hit_zero(t, v):
        return v[0]
    hit_zero.terminal = True

    q0, q10 = _series(_Y_SERIES, d, p)
    sol1 = solve_ivp(rhs_q, (_Y_SERIES, _Y_SWITCH), [q0, q10],
                     method="DOP853", rtol=tol, atol=tol * 1e-3,
                     dense_output=True, events=hit_zero)
    if not sol1.success:
        raise IntegrationFailure(sol1.message)
    if sol1.t_events[0].size:
        raise NotInGroundBranch(
            f"Q vanished at y={sol1.t_events[0][0]:.3f}; "
            "configuration is not above p_JL")

    def R(t):
        return c_inf * t ** (-m)

    def R1(t):
        return -m * c_inf * t ** (-m - 1.0)

    def rhs_w(t, v):
        w, w1 = v
        return (w1, -(d - 1) / t * w1 - _pow_diff(R(t), w, p))

    qs, q1s = sol1.sol(_Y_SWITCH)
    w0 = qs - R(_Y_SWITCH)
    w10 = q1s - R1(_Y_SWITCH)
    sol2 = solve_ivp(rhs_w, (_Y_SWITCH, grid.rmax), [w0, w10],
                     method="DOP853", rtol=tol, atol=1e-300,
                     dense_output=True)
    if not sol2.success:
        raise IntegrationFailure(sol2.message)

    # assemble Q, Q', w, w' on the grid from the three charts
    qv = np.empty_like(y)
    q1v = np.empty_like(y)
    rem = np.empty_like(y)
    rem1 = np.empty_like(y)
    ser = y <= _Y_SERIES
    qv[ser], q1v[ser] = _series(y[ser], d, p)
    mid = (~ser) & (y < _Y_SWITCH)
    qv[mid], q1v[mid] = sol1.sol(y[mid])
    i_switch = int(np.searchsorted(y, _Y_SWITCH))
    tail = y >= _Y_SWITCH
    rem[tail], rem1[tail] = sol2.sol(y[tail])
    qv[tail] = R(y[tail]) + rem[tail]
    q1v[tail] = R1(y[tail]) + rem1[tail]
    # head remainder by direct subtraction (Q and R are far apart there);
    # R is singular at y=0, so the first node carries a placeholder
    rem[1:i_switch] = qv[1:i_switch] - R(y[1:i_switch])
    rem1[1:i_switch] = q1v[1:i_switch] - R1(y[1:i_switch])
    rem[0] = rem[1]
    rem1[0] = rem1[1]

    if np.any(qv <= 0.0):
        raise NotInGroundBranch("negative Q sample on grid")
    q2v = np.empty_like(y)
    q2v[0] = -1.0 / d
    q2v[1:] = -(d - 1) / y[1:] * q1v[1:] - qv[1:] ** p

    Q = RadialField(grid, qv, d)
    # independent residual check via the grid's FD stencils
    lap = grid.laplacian(qv, d)
    res = lap + qv ** p
    interior = (y > 0.05) & (y < 0.9 * grid.rmax)
    fd_residual = float(np.max(np.abs(res[interior])))
    if fd_residual > max(tol, 1e-9) * 1e3:
        raise IntegrationFailure(
            f"FD residual {fd_residual:.2e} inconsistent with integration")

    window = (grid.rmax / 20.0, grid.rmax / 2.0)
    qfit = tail_fit(Q, window)
    wfit = tail_fit(np.abs(rem), window, grid=grid)
    a1 = float(np.median(rem[(y >= window[0]) & (y <= window[1])]
                         * y[(y >= window[0]) & (y <= window[1])] ** gamma))
    return GroundState(
        params=params, Q=Q, q1=q1v, q2=q2v, rem=rem, rem1=rem1,
        i_switch=i_switch,
        c_inf_fit=float(qfit.leading_coefficient),
        a1_fit=a1,
        gamma_fit=-float(wfit.leading_exponent),
        g=min(params.alpha, np.sqrt(params.discr)),
        fd_residual=fd_residual,
    )


def lambda_q(gs):
    """Lambda Q = (2/(p-1)) Q + y Q', assembled cancellation-free."""
    m = gs.params.m
    y = gs.y
    vals = np.empty_like(y)
    i = gs.i_switch
    vals[:i] = m * gs.Q.values[:i] + y[:i] * gs.q1[:i]
    vals[i:] = m * gs.rem[i:] + y[i:] * gs.rem1[i:]
    return RadialField(gs.grid, vals, gs.params.d)


def lambda_q_deriv(gs):
    """(Lambda Q)' = (m+1) Q' + y Q'', cancellation-free in the tail."""
    p, d, m = gs.params.p, gs.params.d, gs.params.m
    y = gs.y
    i = gs.i_switch
    vals = np.empty_like(y)
    vals[:i] = (m + 1.0) * gs.q1[:i] + y[:i] * gs.q2[:i]
    R = gs.params.c_inf * y[i:] ** (-m)
    w2 = -(d - 1) / y[i:] * gs.rem1[i:] - _pow_diff(R, gs.rem[i:], p)
    vals[i:] = (m + 1.0) * gs.rem1[i:] + y[i:] * w2
    return RadialField(gs.grid, vals, gs.params.d, parity="odd")


def potentials(gs):
    """V_+- = d/dy log(Lambda Q | Q) and W_+- = (p|1) Q^(p-1)."""
    p = gs.params.p
    lam = lambda_q(gs)
    lam1 = lambda_q_deriv(gs)
    vp = lam1.values / lam.values
    vm = gs.q1 / gs.Q.values
    wm = gs.Q.values ** (p - 1.0)
    return Potentials(
        V_plus=RadialField(gs.grid, vp, gs.params.d, parity="odd"),
        V_minus=RadialField(gs.grid, vm, gs.params.d, parity="odd"),
        W_plus=RadialField(gs.grid, p * wm, gs.params.d),
        W_minus=RadialField(gs.grid, wm, gs.params.d),
    )
