"""Finite-dimensional dynamical system driving the blow-up parameters.

The universal system (renormalized time s):

    (b_k)_s = b_{k+1} - (2k - alpha) b1 b_k,   b_{L_+ + 1} = 0,
    (a_k)_s = a_{k+1} - 2k b1 a_k,             a_{L_- + 1} = 0,
    lambda_s / lambda = -b1,   phase_s = a1,   t_s = lambda^2,

with the explicit orbit b_j = c_j / s^j, a = 0 whose linearization has the
closed-form spectra {-1, 2 alpha/(2l - alpha), ..., l alpha/(2l - alpha)}
(b modes) and the all-positive a-mode spectrum of size k_l.  In original
time the orbit focuses like lambda ~ (T - t)^(l/alpha).
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure, NotFocusing
from .numerology import bk_coefficients

__all__ = ["ParamState", "Trajectory", "LinearizationData",
           "explicit_solution", "rhs", "integrate", "linearization",
           "blowup_fit"]


@dataclass(frozen=True)
class ParamState:
    s: float
    t: float
    lam: float
    phase: float
    b: tuple
    a: tuple

    def pack(self):
        return np.concatenate([self.b, self.a,
                               [np.log(self.lam), self.phase, self.t]])

    @staticmethod
    def unpack(s, v, L_plus, L_minus):
        return ParamState(
            s=float(s), t=float(v[-1]), lam=float(np.exp(v[-3])),
            phase=float(v[-2]),
            b=tuple(v[:L_plus]), a=tuple(v[L_plus:L_plus + L_minus]))


def explicit_solution(params, ell, s, L_plus=None, L_minus=None):
    """Exact orbit b_j = c_j / s^j (zero past ell), a = 0, at time s."""
    if s <= 0:
        raise ValueError("explicit solution needs s > 0")
    if L_plus is None:
        L_plus = max(ell, 1)
    if L_minus is None:
        L_minus = max(L_plus - params.delta_k, 0)
    c = bk_coefficients(params.alpha, ell)
    b = [(c[j - 1] / s ** j if j <= ell else 0.0)
         for j in range(1, L_plus + 1)]
    return ParamState(s=float(s), t=0.0, lam=1.0, phase=0.0,
                      b=tuple(b), a=(0.0,) * L_minus)


def rhs(params, state):
    """Time derivative of (b, a, log lambda, phase, t) in s."""
    alpha = params.alpha
    b, a = state.b, state.a
    b1 = b[0] if b else 0.0
    db = tuple((b[k] if k < len(b) else 0.0)
               - (2.0 * k - alpha) * b1 * b[k - 1]
               for k in range(1, len(b) + 1))
    da = tuple((a[k] if k < len(a) else 0.0) - 2.0 * k * b1 * a[k - 1]
               for k in range(1, len(a) + 1))
    return db, da, -b1, (a[0] if a else 0.0), state.lam ** 2


@dataclass(frozen=True)
class Trajectory:
    params: object
    L_plus: int
    L_minus: int
    s: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    phase: np.ndarray
    b: np.ndarray  # (n, L_plus)
    a: np.ndarray  # (n, L_minus)
    blowup_reached: bool = False
    T_estimate: float = np.nan

    def state(self, i):
        return ParamState(s=float(self.s[i]), t=float(self.t[i]),
                          lam=float(self.lam[i]), phase=float(self.phase[i]),
                          b=tuple(self.b[i]), a=tuple(self.a[i]))

    def unstable_coordinates(self, lin, ell):
        """V = P U with U_k = s^k (b_k - b_k^e), and the diagonalized
        a-coordinates; rows follow the sample times."""
        c = bk_coefficients(self.params.alpha, ell)
        npts = self.s.size
        U = np.zeros((npts, ell))
        for k in range(1, ell + 1):
            be = (c[k - 1] if k <= ell else 0.0) / self.s ** k
            U[:, k - 1] = self.s ** k * (self.b[:, k - 1] - be)
        V = U @ lin.P_ell.T
        At = None
        if lin.k_ell and self.L_minus:
            kl = min(lin.k_ell, self.L_minus)
            A = np.zeros((npts, kl))
            for k in range(1, kl + 1):
                A[:, k - 1] = (self.s ** (k + self.params.alpha / 2.0)
                               * self.a[:, k - 1])
            At = A @ lin.Q_ell_inv.T
        return V, At


def integrate(params, state0, s_end, tol=1e-10, n_samples=400,
              lam_floor=0.0):
    """Integrate the system from state0 to s_end with dense sampling.

    With lam_floor > 0 the run stops once lambda drops below it; the
    trajectory is flagged blowup_reached and carries a T estimate from the
    focusing law.
    """
    L_plus, L_minus = len(state0.b), len(state0.a)

    def f(s, v):
        st = ParamState.unpack(s, v, L_plus, L_minus)
        db, da, dlog, dphase, dt = rhs(params, st)
        return np.concatenate([db, da, [dlog, dphase, dt]])

    events = None
    if lam_floor > 0.0:
        def hit_floor(s, v):
            return v[-3] - np.log(lam_floor)
        hit_floor.terminal = True
        events = hit_floor

    # max_step keeps the dense-output interpolant at the accuracy of the
    # integrator itself; DOP853 otherwise takes steps so large on this
    # smooth system that interpolation noise dominates sampled values
    sol = solve_ivp(f, (state0.s, s_end), state0.pack(), method="DOP853",
                    rtol=tol, atol=tol * 1e-3, dense_output=True,
                    max_step=(s_end - state0.s) / 500.0, events=events)
    stalled = not sol.success
    if stalled:
        # t saturates at T once lambda has collapsed; that is the expected
        # end of a focusing run, anything else is a genuine failure
        lam_span = np.exp(sol.y[-3, -1] - sol.y[-3, 0]) if sol.t.size else 1.0
        if lam_span > 0.1:
            raise IntegrationFailure(sol.message)
    s_stop = sol.t[-1]
    ss = np.geomspace(state0.s, s_stop, n_samples)
    vv = sol.sol(ss)
    lam = np.exp(vv[-3])
    traj = Trajectory(
        params=params, L_plus=L_plus, L_minus=L_minus,
        s=ss, t=vv[-1], lam=lam, phase=vv[-2],
        b=vv[:L_plus].T.copy(), a=vv[L_plus:L_plus + L_minus].T.copy(),
        blowup_reached=bool(stalled
                            or (events is not None and sol.t_events[0].size)),
    )
    if traj.blowup_reached and lam[-1] < 0.1 * lam[0]:
        T, _, _ = blowup_fit(traj.t, traj.lam, min_drop=2.0)
        object.__setattr__(traj, "T_estimate", T)
    return traj


@dataclass(frozen=True)
class LinearizationData:
    """Closed-form linearization matrices and their spectra."""

    ell: int
    k_ell: int
    M_ell: np.ndarray
    D_ell: np.ndarray          # eigenvalues, ascending (starts at -1)
    D_ell_closed: np.ndarray   # closed form {-1, 2a/(2l-a), ..., la/(2l-a)}
    P_ell: np.ndarray          # V = P U diagonalizes: s V_s = D V
    Mcal: np.ndarray
    D_kell: np.ndarray
    D_kell_closed: np.ndarray
    Q_ell_inv: np.ndarray      # At = Q^-1 A diagonalizes the a block


def linearization(params, ell):
    """Linearization of the explicit orbit: matrices, spectra, diagonalizers."""
    alpha = params.alpha
    if ell <= alpha / 2.0:
        raise ValueError("need ell > alpha/2")
    c = bk_coefficients(alpha, ell)
    denom = 2.0 * ell - alpha
    M = np.zeros((ell, ell))
    M[0, 0] = alpha * (ell - 1.0) / denom - (2.0 - alpha) * c[0]
    for i in range(2, ell + 1):
        M[i - 1, i - 1] = alpha * (ell - i) / denom
        M[i - 1, 0] = -(2.0 * i - alpha) * c[i - 1]
    for i in range(1, ell):
        M[i - 1, i] = 1.0
    evals, evecs = np.linalg.eig(M)
    order = np.argsort(evals.real)
    evals = evals[order].real
    P = np.linalg.inv(evecs[:, order]).real
    closed = np.array([-1.0] + [i * alpha / denom for i in range(2, ell + 1)])

    k_ell = int(np.floor(ell - alpha / 2.0))
    if k_ell >= 1:
        Mcal = np.zeros((k_ell, k_ell))
        for k in range(1, k_ell + 1):
            Mcal[k - 1, k - 1] = alpha * (ell - alpha / 2.0 - k) / denom
        for k in range(1, k_ell):
            Mcal[k - 1, k] = 1.0
        aev, avec = np.linalg.eig(Mcal)
        aorder = np.argsort(aev.real)[::-1]
        D_kell = aev[aorder].real
        Q_inv = np.linalg.inv(avec[:, aorder]).real
        closed_a = np.array([alpha * (ell - alpha / 2.0 - k) / denom
                             for k in range(1, k_ell + 1)])
    else:
        Mcal = np.zeros((0, 0))
        D_kell = np.zeros(0)
        Q_inv = np.zeros((0, 0))
        closed_a = np.zeros(0)
    return LinearizationData(
        ell=int(ell), k_ell=k_ell, M_ell=M, D_ell=evals,
        D_ell_closed=np.sort(closed), P_ell=P,
        Mcal=Mcal, D_kell=D_kell, D_kell_closed=closed_a, Q_ell_inv=Q_inv)


def blowup_fit(t, lam, p0=1.0, min_drop=10.0):
    """Fit lambda ~ c (T - t)^p on the final decade of a focusing series.

    A first T comes from the linear-in-t extrapolation of lambda^(1/p0)
    (exact for the pure power law when p0 is right); (T, p, c) are then
    polished by least squares on log lambda.
    """
    from scipy.optimize import least_squares

    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if lam[-1] <= 0.0 or lam[0] / lam[-1] < min_drop:
        raise NotFocusing(
            f"lambda only decreased {lam[0] / max(lam[-1], 1e-300):.2f}x")
    if np.any(np.diff(lam) > 0.05 * lam[:-1]):
        raise NotFocusing("lambda is not monotonically focusing")
    sel = lam <= lam[-1] * 10.0
    if sel.sum() < 8:
        sel = np.ones_like(lam, dtype=bool)
    ts, ls = t[sel], lam[sel]
    t_end = ts[-1]

    slope, inter = np.polyfit(ts, ls ** (1.0 / p0), 1)
    T0 = -inter / slope
    if not np.isfinite(T0) or T0 <= t_end:
        T0 = t_end + 0.5 * (t_end - ts[-2])
    lls = np.log(ls)

    def resid(x):
        theta, p, logc = x
        return logc + p * np.log(t_end + np.exp(theta) - ts) - lls

    p_init = np.polyfit(np.log(T0 - ts), lls, 1)[0]
    c_init = np.median(lls - p_init * np.log(T0 - ts))
    fit = least_squares(resid, [np.log(T0 - t_end), p_init, c_init],
                        method="lm")
    theta, p, logc = fit.x
    return float(t_end + np.exp(theta)), float(p), float(np.exp(logc))
