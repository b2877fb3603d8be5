"""Radial NLS evolution, modulation decomposition and shooting.

Scheme: Strang splitting of i u_t + Delta u + u|u|^(p-1) - mu u = 0 into
the exact nonlinear/gauge phase rotation and a Crank-Nicolson step of the
finite-volume radial Laplacian, which is self-adjoint under the cell
volumes, so the discrete mass is conserved to solver precision.  The
gauge mu is the exact rotating-frame equivalence u -> u e^(i mu t); with
mu = -1 the algebraic ground state Q (a static NLS solution) becomes the
periodic orbit Q e^(it).

Focusing runs zoom by the scaling symmetry: when the modulation scale
drops below a threshold the field is rescaled onto a fresh grid and the
accumulated (t, lambda) bookkeeping composed.
"""

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from . import _kernels
from .errors import DecompositionLost, NumericalBreakdown
from .fields import RadialField
from .grids import RadialGrid
from .param_flow import blowup_fit, linearization, explicit_solution
from .numerology import bk_coefficients

__all__ = ["SimConfig", "SimState", "make_sim_grid", "evolve",
           "conserved_quantities", "modulation_decompose", "rate_fit",
           "shooting_search", "sobolev_norm", "plant_profile"]


@dataclass(frozen=True)
class SimConfig:
    """Grid, stepper and diagnostic configuration of a simulation run."""

    params: object
    ell: int = 2
    L_plus: int = 3
    M: float = 12.0
    rmax: float = 200.0
    r_core: float = 3.0
    n_uniform: int = 900
    points_per_decade: int = 450
    dt: float = 1e-3
    sample_every: int = 50
    gauge_mu: float = 0.0
    amp_threshold: float = 1e4
    sigma: float = None

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(
                self, "sigma",
                0.5 * (self.params.s_c + 0.5 * self.params.d))
        if not self.params.s_c < self.sigma < 0.5 * self.params.d:
            raise ValueError("sigma must lie in (s_c, d/2)")

    @property
    def s_plus(self):
        return 2 * self.params.k_plus + 2 * self.L_plus + 1


def make_sim_grid(cfg):
    uni = np.linspace(0.0, cfg.r_core, cfg.n_uniform + 1)
    dec = math.log10(cfg.rmax / cfg.r_core)
    n_log = int(math.ceil(dec * cfg.points_per_decade))
    log = cfg.r_core * 10.0 ** (np.arange(1, n_log + 1) * dec / n_log)
    return RadialGrid(np.concatenate([uni, log]))


def _fv_volumes(y, d):
    faces = np.concatenate([[0.0],
                            0.5 * (y[1:] + y[:-1]),
                            [y[-1] + 0.5 * (y[-1] - y[-2])]])
    vol = (faces[1:] ** d - faces[:-1] ** d) / d
    return faces, vol


def _fv_tridiag(y, d):
    """(sub, diag, sup) of the flux-form radial Laplacian.

    Outer boundary is Dirichlet (u = 0 at the last face): with the slow
    power tails of this problem a zero-flux boundary admits constant-like
    modes on which L_+- = -Delta - W_+- is negative, and the linearized
    flow then blows up on a grid timescale.  Zero extension keeps the
    truncated operators nonnegative.
    """
    n = y.size
    faces, vol = _fv_volumes(y, d)
    area = faces ** (d - 1.0)
    sub = np.zeros(n - 1)
    sup = np.zeros(n - 1)
    diag = np.zeros(n)
    h = np.diff(y)
    c = area[1:-1] / h                      # interior face conductances
    sup[:] = c / vol[:-1]
    sub[:] = c / vol[1:]
    diag[:-1] -= c / vol[:-1]
    diag[1:] -= c / vol[1:]
    diag[-1] -= area[-1] / (0.5 * h[-1]) / vol[-1]
    return sub, diag, sup, vol


@dataclass
class SimState:
    t: float
    u: np.ndarray               # complex samples
    grid: RadialGrid
    cfg: SimConfig
    scale_accum: float = 1.0    # product of zoom factors
    t_offset: float = 0.0       # physical time before current zoom frame
    mass0: float = np.nan
    energy0: float = np.nan

    @property
    def t_phys(self):
        return self.t_offset + self.scale_accum ** 2 * self.t


def conserved_quantities(state):
    """(mass, energy) in the scheme's own finite-volume forms."""
    y = state.grid.y
    d, p = state.cfg.params.d, state.cfg.params.p
    faces, vol = _fv_volumes(y, d)
    u = state.u
    mass = float(np.sum(np.abs(u) ** 2 * vol))
    area = faces[1:-1] ** (d - 1.0)
    h = np.diff(y)
    kin = 0.5 * float(np.sum(area * np.abs(np.diff(u)) ** 2 / h))
    pot = float(np.sum(np.abs(u) ** (p + 1.0) * vol)) / (p + 1.0)
    return mass, kin - pot


def prepare_initial_state(cfg, u0):
    grid = make_sim_grid(cfg)
    vals = u0(grid.y) if callable(u0) else np.asarray(u0, dtype=complex)
    st = SimState(t=0.0, u=vals.astype(np.complex128), grid=grid, cfg=cfg)
    st.mass0, st.energy0 = conserved_quantities(st)
    return st


def evolve(state, t_end, nonlinear=True):
    """Advance to t_end (frame time); returns (state, diagnostics dict).

    diagnostics: arrays of (t, mass, energy, amp); terminates early with
    status 'focusing-singularity' when |u| passes the amplitude threshold,
    raises NumericalBreakdown on NaN.  nonlinear=False freezes the phase
    rotation entirely (linear propagator), for time-reversal checks.
    """
    cfg = state.cfg
    y = state.grid.y
    d, p = cfg.params.d, cfg.params.p
    sub, diag, sup, vol = _fv_tridiag(y, d)
    a = 0.5j * cfg.dt
    dl, dm, du = -a * sub, 1.0 - a * diag, -a * sup
    bl, bm, bu = a * sub, 1.0 + a * diag, a * sup

    times, masses, energies, amps = [], [], [], []
    status = "ok"
    nsteps_total = int(round((t_end - state.t) / cfg.dt))
    done = 0
    while done < nsteps_total:
        n = min(cfg.sample_every, nsteps_total - done)
        if nonlinear:
            _kernels.cn_steps(state.u, dl, dm, du, bl, bm, bu, cfg.dt,
                              p, cfg.gauge_mu, n)
        else:
            _kernels.cn_steps_linear(state.u, dl, dm, du, bl, bm, bu, n)
        done += n
        state.t += n * cfg.dt
        if not np.all(np.isfinite(state.u)):
            raise NumericalBreakdown(f"NaN at t={state.t:.4f}")
        m, e = conserved_quantities(state)
        amp = float(np.abs(state.u).max())
        times.append(state.t)
        masses.append(m)
        energies.append(e)
        amps.append(amp)
        if amp > cfg.amp_threshold:
            status = "focusing-singularity"
            break
    diag_out = {
        "t": np.array(times), "mass": np.array(masses),
        "energy": np.array(energies), "amp": np.array(amps),
        "status": status,
    }
    return state, diag_out


# -- modulation decomposition -------------------------------------------------

def edge_taper(y, rmax, start=0.55, end=0.85):
    """Smooth taper to zero before the Dirichlet wall.

    Data with the ground state's slow power tail must not hit the outer
    boundary at finite amplitude: the mismatch launches an inward
    transient that the radial geometry amplifies by r^(-(d-1)/2) and the
    focusing nonlinearity then detonates in the core.
    """
    t = np.clip((y / rmax - start) / (end - start), 0.0, 1.0)
    return 1.0 - t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def plant_profile(fam, cfg_profile, lam, phase, sim_grid, taper=True):
    """Sample lambda^(-m) Qt_{b,a}(r/lambda) e^(i phase) on the sim grid."""
    from .profiles import assemble
    prof = assemble(fam, cfg_profile)
    m = fam.params.m
    y = sim_grid.y
    re = CubicSpline(fam.grid.y, prof.field.re.values)
    im = CubicSpline(fam.grid.y, prof.field.im.values)
    x = np.minimum(y / lam, fam.grid.rmax)
    vals = lam ** (-m) * (re(x) + 1j * im(x)) * np.exp(1j * phase)
    if taper:
        vals = vals * edge_taper(y, sim_grid.rmax)
    return vals.astype(np.complex128)


class ModulationTracker:
    """Newton solver for the orthogonality-fixed decomposition
    u = lambda^(-m) (Qt_{b,a} + eps)(r/lambda) e^(i gamma)."""

    B1_FLOOR = 1e-6  # below this b1 the profile cutoff leaves the window

    def __init__(self, fam, xi):
        self.fam = fam
        self.xi = xi
        self.n_b = fam.L_plus
        self.n_a = fam.L_minus
        grid = fam.grid
        # evaluation window: the orthogonality covectors are supported in
        # y <= 2M (plus a stencil halo)
        self.i_hi = grid.index_at(min(2.3 * xi.M, grid.rmax)) + 1
        self.yw = grid.y[:self.i_hi]

    def pack(self, lam, phase, b, a):
        return np.concatenate([[math.log(lam), phase], b, a])

    def unpack(self, th):
        lam = math.exp(th[0])
        phase = th[1]
        b = tuple(th[2:2 + self.n_b])
        a = tuple(th[2 + self.n_b:2 + self.n_b + self.n_a])
        return lam, phase, b, a

    def _profile_window(self, b, a):
        """Localized profile values on the pairing window.

        Same cutoff convention as profiles.assemble; for b1 at or below
        the floor the cutoff scale B1 exceeds the window and the uncut sum
        is used, keeping the map smooth through b1 -> 0.
        """
        from .linop import cutoff_chi
        fam = self.fam
        re = np.zeros(self.i_hi)
        im = np.zeros(self.i_hi)
        for k in range(1, len(b) + 1):
            if b[k - 1]:
                re += b[k - 1] * fam.phi_plus[k].re.values[:self.i_hi]
                im += b[k - 1] * fam.phi_plus[k].im.values[:self.i_hi]
        for k in range(1, len(a) + 1):
            if a[k - 1]:
                re += a[k - 1] * fam.phi_minus[k].re.values[:self.i_hi]
                im += a[k - 1] * fam.phi_minus[k].im.values[:self.i_hi]
        if b and b[0] > self.B1_FLOOR:
            eta = 0.05 / max(len(b), 1)
            B1 = b[0] ** (-(1.0 + eta) / 2.0)
            chi = cutoff_chi(self.yw, B1)
            re *= chi
            im *= chi
        re += fam.gs.Q.values[:self.i_hi]
        return re, im

    def residual(self, th, u_re_spl, u_im_spl):
        lam, phase, b, a = self.unpack(th)
        x = lam * self.yw
        uu = (u_re_spl(x) + 1j * u_im_spl(x)) * np.exp(-1j * phase)
        ur = lam ** self.fam.params.m * uu
        prof_re, prof_im = self._profile_window(b, a)
        eps_re = np.zeros(len(self.fam.grid.y))
        eps_im = np.zeros(len(self.fam.grid.y))
        eps_re[:self.i_hi] = ur.real - prof_re
        eps_im[:self.i_hi] = ur.imag - prof_im
        return self.xi.pair_eps(eps_re, eps_im), (eps_re, eps_im)

    def solve(self, u, sim_grid, guess, tol=1e-10, max_iter=40):
        """Damped Newton on the pairing residuals; guess = (lam, phase, b, a)."""
        ys = sim_grid.y
        u_re_spl = CubicSpline(ys, u.real)
        u_im_spl = CubicSpline(ys, u.imag)
        th = self.pack(*guess)
        scale = abs(self.xi.pairing)
        F, eps = self.residual(th, u_re_spl, u_im_spl)
        best = np.linalg.norm(F)
        for _ in range(max_iter):
            if best < tol * scale:
                break
            n = th.size
            J = np.empty((F.size, n))
            for j in range(n):
                h = 1e-7 * max(1.0, abs(th[j]))
                tp = th.copy()
                tp[j] += h
                Fp, _ = self.residual(tp, u_re_spl, u_im_spl)
                J[:, j] = (Fp - F) / h
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError as exc:
                raise DecompositionLost(str(exc))
            damp = 1.0
            for _ in range(12):
                tn = th + damp * step
                Fn, epsn = self.residual(tn, u_re_spl, u_im_spl)
                if np.linalg.norm(Fn) < best:
                    th, F, eps, best = tn, Fn, epsn, np.linalg.norm(Fn)
                    break
                damp *= 0.5
            else:
                raise DecompositionLost(
                    f"Newton stalled at |F|/pairing = {best / scale:.2e}")
        else:
            if best >= tol * scale * 100.0:
                raise DecompositionLost(
                    f"no convergence: |F|/pairing = {best / scale:.2e}")
        lam, phase, b, a = self.unpack(th)
        eps_norms = self._eps_norms(eps)
        return {"lam": lam, "phase": phase, "b": b, "a": a,
                "residual": best / scale, "eps_norms": eps_norms}

    def _eps_norms(self, eps):
        grid = self.fam.grid
        d = self.fam.params.d
        er, ei = eps
        dens = er ** 2 + ei ** 2
        w = dens / (1.0 + grid.y ** (2.0 * self.fam.params.k_plus + 2.0))
        return {
            "l2_local": math.sqrt(grid.integrate(
                np.where(grid.y <= 2 * self.xi.M, dens, 0.0), d - 1)),
            "weighted": math.sqrt(grid.integrate(w, d - 1)),
        }


def modulation_decompose(state, fam, xi, guess=None):
    """Decompose a simulator state against the localized profile family."""
    tracker = ModulationTracker(fam, xi)
    if guess is None:
        guess = (1.0, 0.0, (1e-8,) + (0.0,) * (fam.L_plus - 1),
                 (0.0,) * fam.L_minus)
    return tracker.solve(state.u, state.grid, guess)


def rate_fit(t, lam, p0=1.0):
    """Blow-up law fit of modulation data; see param_flow.blowup_fit."""
    return blowup_fit(np.asarray(t), np.asarray(lam), p0=p0)


def sobolev_norm(u, grid, d, s, cache={}):
    """Approximate |nabla^s u|_L2 via eigen-decomposition of the discrete
    radial Laplacian on a coarse subsample (documented approximation)."""
    key = (id(grid), d)
    dec = cache.get(key)
    if dec is None:
        stride = max(1, len(grid) // 512)
        idx = np.arange(0, len(grid), stride)
        y = grid.y[idx]
        sub, diag, sup, vol = _fv_tridiag(y, d)
        L = np.diag(-diag)
        L -= np.diag(sub, -1) + np.diag(sup, 1)
        sq = np.sqrt(vol)
        Ls = (L * sq[None, :]) / sq[:, None]
        Ls = 0.5 * (Ls + Ls.T)
        evals, evecs = np.linalg.eigh(Ls)
        evals = np.clip(evals, 0.0, None)
        cache[key] = (idx, sq, evals, evecs)
        dec = cache[key]
    idx, sq, evals, evecs = dec
    coef = evecs.T @ (sq * u[idx])
    return float(np.sqrt(np.sum(evals ** s * np.abs(coef) ** 2)))


# -- shooting -----------------------------------------------------------------

def shooting_search(propagate, lo, hi, budget=40, rtol=1e-6):
    """Bisection on one unstable coordinate.

    propagate(x) -> (trap_time, exit_sign) with exit_sign in {-1, 0, +1};
    the bracket [lo, hi] must produce opposite exit signs.  Returns a dict
    with the best coordinate, its trapping time, and the bracket.
    """
    t_lo, s_lo = propagate(lo)
    t_hi, s_hi = propagate(hi)
    best = max((t_lo, lo), (t_hi, hi))
    evals = 2
    if s_lo == s_hi:
        return {"coordinate": best[1], "trap_time": best[0],
                "bracket": (lo, hi), "evaluations": evals,
                "converged": False, "note": "no sign change in bracket"}
    while evals < budget and (hi - lo) > rtol * max(1.0, abs(hi) + abs(lo)):
        mid = 0.5 * (lo + hi)
        t_mid, s_mid = propagate(mid)
        evals += 1
        best = max(best, (t_mid, mid))
        if s_mid == 0:
            best = (t_mid, mid)
            break
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid
    return {"coordinate": best[1], "trap_time": best[0],
            "bracket": (lo, hi), "evaluations": evals,
            "converged": (hi - lo) <= rtol * max(1.0, abs(hi) + abs(lo))}


def shooting_search_2d(propagate, x0, budget=60):
    """Nelder-Mead on two unstable coordinates (maximizes trapping time)."""
    res = minimize(lambda x: -propagate(tuple(x))[0], np.asarray(x0),
                   method="Nelder-Mead",
                   options={"maxfev": budget, "xatol": 1e-8, "fatol": 1e-10})
    return {"coordinate": tuple(res.x), "trap_time": float(-res.fun),
            "evaluations": int(res.nfev), "converged": bool(res.success)}


class PdeShooter:
    """One-unstable-mode shooting on the full PDE.

    The search coordinate perturbs the unstable V-mode of the explicit
    parameter orbit at s0; each trial evolves the NLS with periodic
    modulation decompositions, zooming via the scaling symmetry, until the
    trapped-regime proxy bounds (heuristic multiples of the initial
    deviation scale) are violated or the s-budget is exhausted.
    """

    def __init__(self, fam, xi, cfg, s0=10.0, s_budget=40.0,
                 exit_factor=30.0, seg_dt_frames=160, zoom_trigger=0.6):
        self.fam, self.xi, self.cfg = fam, xi, cfg
        self.params = fam.params
        self.s0 = s0
        self.s_budget = s_budget
        self.exit_factor = exit_factor
        self.seg_frames = seg_dt_frames
        self.zoom_trigger = zoom_trigger
        self.lin = linearization(self.params, cfg.ell)
        self.history = []

    def initial_data(self, x):
        """Profile data with the top unstable V-mode displaced by x."""
        from .profiles import ProfileConfig
        ell = self.cfg.ell
        st = explicit_solution(self.params, ell, self.s0,
                               L_plus=self.fam.L_plus,
                               L_minus=self.fam.L_minus)
        b = np.array(st.b)
        mode = np.zeros(ell)
        mode[-1] = x
        U0 = np.linalg.solve(self.lin.P_ell, mode)
        for k in range(ell):
            b[k] += U0[k] / self.s0 ** (k + 1)
        cfg_p = ProfileConfig(b=tuple(b), a=st.a)
        return cfg_p

    def propagate(self, x):
        cfg_p = self.initial_data(x)
        grid = make_sim_grid(self.cfg)
        u0 = plant_profile(self.fam, cfg_p, 1.0, 0.0, grid)
        state = SimState(t=0.0, u=u0, grid=grid, cfg=self.cfg)
        state.mass0, state.energy0 = conserved_quantities(state)

        tracker = ModulationTracker(self.fam, self.xi)
        guess = (1.0, 0.0, cfg_p.b, cfg_p.a)
        s = self.s0
        records = []
        scale0 = max(abs(x), 1e-8)
        exit_sign = 0
        c = bk_coefficients(self.params.alpha, self.cfg.ell)
        while s < self.s0 + self.s_budget:
            t_target = state.t + self.seg_frames * self.cfg.dt
            try:
                state, diag = evolve(state, t_target)
                dec = tracker.solve(state.u, state.grid, guess)
            except (DecompositionLost, NumericalBreakdown):
                exit_sign = 0
                break
            guess = (dec["lam"], dec["phase"], dec["b"], dec["a"])
            # renormalized time from the frozen law ds = dt / lam^2
            lam_seg = dec["lam"]
            s += self.seg_frames * self.cfg.dt / lam_seg ** 2
            lam_phys = state.scale_accum * lam_seg
            records.append({"s": s, "t": state.t_phys, "lam": lam_phys,
                            "b": dec["b"], "a": dec["a"]})
            U = np.array([(dec["b"][k - 1] - (c[k - 1] if k <= self.cfg.ell
                                              else 0.0) / s ** k) * s ** k
                          for k in range(1, self.cfg.ell + 1)])
            V = self.lin.P_ell @ U
            if abs(V[-1]) > self.exit_factor * scale0:
                exit_sign = int(np.sign(V[-1]))
                break
            if diag["status"] == "focusing-singularity":
                exit_sign = +1
                break
            if lam_seg < self.zoom_trigger:
                state = self._zoom(state, dec, tracker)
                guess = (1.0, dec["phase"], dec["b"], dec["a"])
        self.history.append({"x": x, "records": records,
                             "exit_sign": exit_sign})
        return s - self.s0, exit_sign

    def _zoom(self, state, dec, tracker):
        mu = dec["lam"]
        m = self.params.m
        spl_re = CubicSpline(state.grid.y, state.u.real)
        spl_im = CubicSpline(state.grid.y, state.u.imag)
        y = state.grid.y
        x = np.minimum(mu * y, state.grid.rmax)
        u_new = (mu ** m * (spl_re(x) + 1j * spl_im(x))).astype(complex)
        return SimState(t=0.0, u=u_new, grid=state.grid, cfg=state.cfg,
                        scale_accum=state.scale_accum * mu,
                        t_offset=state.t_phys,
                        mass0=state.mass0, energy0=state.energy0)
