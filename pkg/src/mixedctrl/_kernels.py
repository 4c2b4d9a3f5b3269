"""Compiled inner loops for split-operator sweeps.

All kernels work in the computational basis with two precomputed change-of-
basis matrices for a step of length ``dt``::

    Y = U0^dagger P,   Z = U0 P,   U0 = exp(-i dt/2 H0),   V = P diag(v) P^dagger

so that one symmetric step ``U = U0 exp(-i dt f V) U0`` reads
``U X U^dagger = Z (Y^dagger X Y * exp(-i dt f om)) Z^dagger`` with
``om[k, l] = v[k] - v[l]``, and its adjoint
``U^dagger X U = Y (Z^dagger X Z * exp(+i dt f om)) Y^dagger``.

Loops run in a fixed order, so results are bitwise reproducible.
"""

from __future__ import annotations

import numba
import numpy as np

_SOLVE_MAXITER = 200
_SOLVE_RTOL = 1e-15
_SOLVE_ACCEPT = 1e-11


@numba.njit(cache=True)
def _dagger(m):
    return np.ascontiguousarray(m.conj().T)


@numba.njit(cache=True)
def step_forward(x, f, Y, Z, om, dt):
    rt = _dagger(Y) @ x @ Y
    return Z @ (rt * np.exp(-1j * dt * f * om)) @ _dagger(Z)


@numba.njit(cache=True)
def step_backward(x, f, Y, Z, om, dt):
    bt = _dagger(Z) @ x @ Z
    return Y @ (bt * np.exp(1j * dt * f * om)) @ _dagger(Y)


@numba.njit(cache=True)
def propagate_forward(x0, f, Y, Z, om, dt):
    n_steps = f.shape[0]
    n = x0.shape[0]
    out = np.empty((n_steps + 1, n, n), dtype=np.complex128)
    out[0] = x0
    for j in range(n_steps):
        out[j + 1] = step_forward(out[j], f[j], Y, Z, om, dt)
    return out


@numba.njit(cache=True)
def propagate_backward(xF, f, Y, Z, om, dt):
    n_steps = f.shape[0]
    n = xF.shape[0]
    out = np.empty((n_steps + 1, n, n), dtype=np.complex128)
    out[n_steps] = xF
    for j in range(n_steps - 1, -1, -1):
        out[j] = step_backward(out[j + 1], f[j], Y, Z, om, dt)
    return out


@numba.njit(cache=True)
def propagate_ket(psi0, f, Y, Z, v, dt):
    n_steps = f.shape[0]
    n = psi0.shape[0]
    out = np.empty((n_steps + 1, n), dtype=np.complex128)
    out[0] = psi0
    yd = _dagger(Y)
    for j in range(n_steps):
        out[j + 1] = Z @ (np.exp(-1j * dt * f[j] * v) * (yd @ out[j]))
    return out


@numba.njit(cache=True)
def field_base(a, rho, V, lam):
    c = V @ rho - rho @ V
    return (-1j / lam * np.trace(a @ c)).real


@numba.njit(cache=True)
def field_correction(a, rho, K, lam, dt):
    c = K @ rho - rho @ K
    return dt / (2.0 * lam) * np.trace(a @ c).real


@numba.njit(cache=True)
def divided_difference(M, om, dt, x, y):
    """Real part of ``(F(x) - F(y)) / (x - y)`` for ``F(x) = sum M exp(-i dt x om)``.

    Written with a sinc so it is exact (no cancellation) as ``x -> y``.
    """
    s = 0.0
    n = M.shape[0]
    for k in range(n):
        for l in range(n):
            a = dt * om[k, l]
            h = 0.5 * a * (x - y)
            sc = 1.0 if h == 0.0 else np.sin(h) / h
            z = M[k, l] * (-1j * a) * np.exp(-0.5j * a * (x + y)) * sc
            s += z.real
    return s


@numba.njit(cache=True)
def solve_secant(M, om, dt, lam, other, x0):
    """Fixed point of ``x = D(x, other) / (lam dt)``; returns (x, converged)."""
    x = x0
    denom = lam * dt
    for _ in range(_SOLVE_MAXITER):
        xn = divided_difference(M, om, dt, x, other) / denom
        diff = abs(xn - x)
        x = xn
        if diff <= _SOLVE_RTOL * (1.0 + abs(x)):
            return x, True
    return x, diff <= _SOLVE_ACCEPT * (1.0 + abs(x))


@numba.njit(cache=True)
def sweep_backward(A, rho_prev, f_prev, Y, Z, om, V, K, lam, dt, corr_sign, exact):
    """Propagate ``A`` from tF to t0, generating the field step by step.

    Returns the trajectory, the field samples, and the number of steps whose
    refinement did not converge.
    """
    n_steps = rho_prev.shape[0] - 1
    n = A.shape[0]
    out = np.empty((n_steps + 1, n, n), dtype=np.complex128)
    f = np.empty(n_steps)
    out[n_steps] = A
    failures = 0
    zd = _dagger(Z)
    yd = _dagger(Y)
    for j in range(n_steps - 1, -1, -1):
        a = out[j + 1]
        x = field_base(a, rho_prev[j + 1], V, lam)
        x += corr_sign * field_correction(a, rho_prev[j + 1], K, lam, dt)
        bt = zd @ a @ Z
        if exact:
            rt = yd @ rho_prev[j] @ Y
            x, ok = solve_secant(bt.T * rt, om, dt, lam, f_prev[j], x)
            if not ok:
                failures += 1
        f[j] = x
        out[j] = Y @ (bt * np.exp(1j * dt * x * om)) @ yd
    return out, f, failures


@numba.njit(cache=True)
def sweep_forward(rho0, A_traj, f_bwd, Y, Z, om, V, K, lam, dt, exact):
    """Propagate ``rho0`` from t0 to tF, generating the field step by step."""
    n_steps = A_traj.shape[0] - 1
    n = rho0.shape[0]
    out = np.empty((n_steps + 1, n, n), dtype=np.complex128)
    f = np.empty(n_steps)
    out[0] = rho0
    failures = 0
    zd = _dagger(Z)
    yd = _dagger(Y)
    for j in range(n_steps):
        r = out[j]
        x = field_base(A_traj[j], r, V, lam) + field_correction(A_traj[j], r, K, lam, dt)
        rt = yd @ r @ Y
        if exact:
            bt = zd @ A_traj[j + 1] @ Z
            x, ok = solve_secant(bt.T * rt, om, dt, lam, f_bwd[j], x)
            if not ok:
                failures += 1
        f[j] = x
        out[j + 1] = Z @ (rt * np.exp(-1j * dt * x * om)) @ zd
    return out, f, failures


@numba.njit(cache=True)
def dynamics_residual(A_traj, rho_traj, f, Y, Z, om, dt):
    """``sum_j <<A_{j+1} | rho_{j+1} - U_j rho_j U_j^dagger>>``."""
    s = 0.0 + 0.0j
    for j in range(f.shape[0]):
        d = rho_traj[j + 1] - step_forward(rho_traj[j], f[j], Y, Z, om, dt)
        s += np.sum(np.conj(A_traj[j + 1]) * d)
    return s
