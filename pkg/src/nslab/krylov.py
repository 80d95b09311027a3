"""Lanczos approximation of exp(i t H) v for sparse Hermitian H."""
from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal


class KrylovConvergenceError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(f"Krylov propagation failed to converge (error estimate {residual:.3e})")
        self.residual = residual


def _lanczos(matvec, v: np.ndarray, m: int):
    """Orthonormal Krylov basis (full reorthogonalization) and tridiagonal coefficients."""
    n = v.shape[0]
    m = min(m, n)
    Q = np.zeros((m + 1, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    Q[0] = v
    k = m
    for j in range(m):
        w = matvec(Q[j])
        alpha[j] = np.vdot(Q[j], w).real
        w = w - alpha[j] * Q[j] - (beta[j - 1] * Q[j - 1] if j > 0 else 0.0)
        w -= Q[: j + 1].T @ (Q[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-14:
            k = j + 1
            break
        Q[j + 1] = w / beta[j]
    return Q, alpha[:k], beta[:k], k


def expm_multiply_hermitian(H, v: np.ndarray, t: float, tol: float = 1e-12,
                            krylov_dim: int = 30, max_substeps: int = 100000) -> np.ndarray:
    """exp(i t H) v with adaptive sub-stepping.

    Each sub-step builds a Krylov space from the current vector and accepts
    the step once the standard a-posteriori estimate
    ``beta_m |e_m^T exp(i tau T_m) e_1|`` is below ``tol * |tau| / |t|``.
    """
    v = np.asarray(v, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0 or t == 0:
        return v.copy()
    matvec = (lambda x: H @ x)
    w = v / nrm
    done = 0.0
    tau = t
    substeps = 0
    while abs(done) < abs(t):
        tau = t - done if abs(t - done) < abs(tau) else tau
        Q, a, b, k = _lanczos(matvec, w, krylov_dim)
        evals, evecs = eigh_tridiagonal(a, b[: k - 1]) if k > 1 else (a, np.ones((1, 1)))
        while True:
            y = evecs @ (np.exp(1j * tau * evals) * evecs[0].conj())
            invariant = k < min(krylov_dim, w.shape[0]) or k == w.shape[0]
            err = 0.0 if invariant else float(b[k - 1] * abs(y[-1]))
            if err <= tol * abs(tau) / abs(t) or invariant:
                break
            tau *= 0.5
            substeps += 1
            if substeps > max_substeps:
                raise KrylovConvergenceError(err)
        w = Q[:k].T @ y
        w /= np.linalg.norm(w)
        done += tau
        substeps += 1
        if substeps > max_substeps:
            raise KrylovConvergenceError(err)
    return w * nrm
