"""Hot kernels of the time stepper: numba-jitted with a numpy fallback.

The Crank-Nicolson tridiagonal solve plus the split nonlinear phase
rotation dominate simulator runtime (executed once per step for 1e3-1e5
steps).  Set NLSLAB_DISABLE_NUMBA=1 to force the pure numpy/scipy path;
``backend()`` reports which one is active.  benchmarks/bench_kernels.py
times the two against each other.
"""

import os

import numpy as np

_DISABLE = os.environ.get("NLSLAB_DISABLE_NUMBA", "0") == "1"

try:
    if _DISABLE:
        raise ImportError("numba disabled by NLSLAB_DISABLE_NUMBA")
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    njit = None
    HAS_NUMBA = False


def backend():
    return "numba" if HAS_NUMBA else "numpy"


def _thomas_py(dl, dm, du, rhs):
    """Complex tridiagonal solve (Thomas); pure numpy reference."""
    n = dm.size
    cp = np.empty(n - 1, dtype=np.complex128)
    xp = np.empty(n, dtype=np.complex128)
    cp[0] = du[0] / dm[0]
    xp[0] = rhs[0] / dm[0]
    for i in range(1, n):
        denom = dm[i] - dl[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = du[i] / denom
        xp[i] = (rhs[i] - dl[i - 1] * xp[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        xp[i] -= cp[i] * xp[i + 1]
    return xp


def _cn_steps_py(u, dl, dm, du, bl, bm, bu, half_phase, nsteps):
    """nsteps of Strang splitting: half phase rotation, CN solve, half.

    (dl, dm, du) are the diagonals of (I - i dt/2 Lap); (bl, bm, bu) of
    (I + i dt/2 Lap).  half_phase(u) applies the exact nonlinear (plus
    gauge) rotation over dt/2 in place and is inlined by the numba path.
    """
    for _ in range(nsteps):
        half_phase(u)
        rhs = bm * u
        rhs[:-1] += bu * u[1:]
        rhs[1:] += bl * u[:-1]
        u[:] = _thomas_py(dl, dm, du, rhs)
        half_phase(u)
    return u


if HAS_NUMBA:

    @njit(cache=True)
    def _thomas_nb(dl, dm, du, rhs, cp, xp):
        n = dm.size
        cp[0] = du[0] / dm[0]
        xp[0] = rhs[0] / dm[0]
        for i in range(1, n):
            denom = dm[i] - dl[i - 1] * cp[i - 1]
            if i < n - 1:
                cp[i] = du[i] / denom
            xp[i] = (rhs[i] - dl[i - 1] * xp[i - 1]) / denom
        for i in range(n - 2, -1, -1):
            xp[i] -= cp[i] * xp[i + 1]

    @njit(cache=True)
    def _cn_steps_nb(u, dl, dm, du, bl, bm, bu, half_dt, q, mu, nsteps):
        n = u.size
        rhs = np.empty(n, dtype=np.complex128)
        cp = np.empty(n - 1, dtype=np.complex128)
        xp = np.empty(n, dtype=np.complex128)
        for _ in range(nsteps):
            for i in range(n):
                a2 = u[i].real * u[i].real + u[i].imag * u[i].imag
                amp = a2 ** q if q != 1 else a2
                phase = half_dt * (amp - mu)
                u[i] = u[i] * complex(np.cos(phase), np.sin(phase))
            for i in range(n):
                rhs[i] = bm[i] * u[i]
            for i in range(n - 1):
                rhs[i] += bu[i] * u[i + 1]
                rhs[i + 1] += bl[i] * u[i]
            _thomas_nb(dl, dm, du, rhs, cp, xp)
            for i in range(n):
                u[i] = xp[i]
            for i in range(n):
                a2 = u[i].real * u[i].real + u[i].imag * u[i].imag
                amp = a2 ** q if q != 1 else a2
                phase = half_dt * (amp - mu)
                u[i] = u[i] * complex(np.cos(phase), np.sin(phase))
        return u


def cn_steps(u, dl, dm, du, bl, bm, bu, dt, p, mu, nsteps):
    """Advance the split-step CN scheme by nsteps in place.

    u: complex samples; diagonals as in _cn_steps_py; p odd so the
    nonlinear amplitude is the integer power (|u|^2)^((p-1)/2).
    """
    q = (p - 1.0) / 2.0
    half_dt = 0.5 * dt
    if HAS_NUMBA:
        return _cn_steps_nb(u, dl, dm, du, bl, bm, bu, half_dt, q, mu,
                            nsteps)

    def half_phase(v):
        amp = (v.real ** 2 + v.imag ** 2) ** q
        v *= np.exp(1j * half_dt * (amp - mu))

    return _cn_steps_py(u, dl, dm, du, bl, bm, bu, half_phase, nsteps)


def cn_steps_linear(u, dl, dm, du, bl, bm, bu, nsteps):
    """nsteps of the bare CN propagator (no phase rotation)."""
    if HAS_NUMBA:
        return _cn_steps_nb(u, dl, dm, du, bl, bm, bu, 0.0, 1.0, 0.0,
                            nsteps)

    def no_phase(v):
        pass

    return _cn_steps_py(u, dl, dm, du, bl, bm, bu, no_phase, nsteps)
