"""LQR synthesis for the upright pendulum.

The Riccati solver integrates the differential Riccati equation from
``P = Q`` until the flow's gain stabilizes the plant, then finishes with
Newton-Kleinman iterations (one Lyapunov solve per iteration).  Eigenvalues
for the stability check come from the characteristic polynomial
(Faddeev-LeVerrier) and simultaneous Aberth-Ehrlich root iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CareError, RootFindingError

VENDOR_A = np.array([
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 149.3, -0.01004, 0.0],
    [0.0, 261.6, 1.0, -0.0103],
])
VENDOR_B = np.array([0.0, 0.0, 49.73, 49.15])
DESIGN_Q = np.diag([12.0, 5.0, 1.0, 1.0])
DESIGN_R = 1.0

HURWITZ_MARGIN = 1e-9


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise ValueError(f"incompatible shapes A{A.shape}, B{B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @classmethod
    def vendor(cls) -> "LinearModel":
        return cls(VENDOR_A.copy(), VENDOR_B.copy())

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearModel":
        return cls(np.array(doc["A"], dtype=float), np.array(doc["B"], dtype=float))


@dataclass(frozen=True)
class LqrDesign:
    Q: np.ndarray
    R: float
    P: np.ndarray
    K: np.ndarray
    residual: float
    closed_loop_eigenvalues: np.ndarray

    def report(self) -> dict:
        return {
            "P": self.P.tolist(),
            "K": self.K.tolist(),
            "residual": self.residual,
            "closed_loop_real_parts": sorted(float(v) for v in self.closed_loop_eigenvalues.real),
            "hurwitz": bool(np.all(self.closed_loop_eigenvalues.real < -HURWITZ_MARGIN)),
        }


def _as_problem(A, B, Q, R):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if Q.shape != (n, n) or R.shape != (B.shape[1], B.shape[1]):
        raise ValueError("inconsistent Riccati problem dimensions")
    if np.any(np.linalg.eigvalsh(R) <= 0):
        raise ValueError("R must be positive definite")
    return A, B, Q, R


def care_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of ``A'P + PA - P B R^-1 B' P + Q``."""
    A, B, Q, R = _as_problem(A, B, Q, R)
    S = B @ np.linalg.solve(R, B.T)
    return float(np.linalg.norm(A.T @ P + P @ A - P @ S @ P + Q))


def _riccati_rhs(A, S, Q, P):
    return A.T @ P + P @ A - P @ S @ P + Q


def _lyapunov(F, C):
    """Solve ``F'X + XF + C = 0`` through its Kronecker form."""
    n = F.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(F'X) = (F' kron I) x, vec(XF) = (I kron F') x
    L = np.kron(F.T, eye) + np.kron(eye, F.T)
    X = np.linalg.solve(L, -C.reshape(-1)).reshape(n, n)
    return 0.5 * (X + X.T)


def _integrate_dre(A, S, Q, P, max_steps, check_every=10):
    """RK4 on the Riccati flow from ``P`` until its gain stabilizes ``A`` or the flow settles."""
    h = 0.0
    for i in range(max_steps):
        d = _riccati_rhs(A, S, Q, P)
        if np.linalg.norm(d) < 1e-12:
            break
        if i % check_every == 0:
            F = A - S @ P
            lam = eigenvalues(F)
            if np.all(lam.real < -HURWITZ_MARGIN):
                break
            # linearized flow X -> F'X + XF has eigenvalues lam_i + lam_j;
            # RK4 is stable while h * |lam_i + lam_j| stays below ~2.8
            h = 1.0 / (2.0 * np.max(np.abs(lam)) + 1.0)
        k1 = d
        k2 = _riccati_rhs(A, S, Q, P + 0.5 * h * k1)
        k3 = _riccati_rhs(A, S, Q, P + 0.5 * h * k2)
        k4 = _riccati_rhs(A, S, Q, P + h * k3)
        P = P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        P = 0.5 * (P + P.T)
        if not np.all(np.isfinite(P)) or np.abs(P).max() > 1e150:
            raise CareError("Riccati flow diverged")
    return P


def solve_care(A, B, Q, R, *, tol: float = 1e-8, max_flow_steps: int = 200_000, max_newton: int = 50) -> np.ndarray:
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Convergence is judged on the residual relative to ``max(1, ||P||_F)``, so
    ``tol`` is an absolute bound for well-scaled problems.
    """
    A, B, Q, R = _as_problem(A, B, Q, R)
    Rinv_Bt = np.linalg.solve(R, B.T)
    S = B @ Rinv_Bt
    P = _integrate_dre(A, S, Q, Q.copy(), max_flow_steps)

    # Newton-Kleinman: monotone convergence from any stabilizing gain
    res = care_residual(A, B, Q, R, P)
    for _ in range(max_newton):
        Kg = Rinv_Bt @ P
        F = A - B @ Kg
        if not is_hurwitz(F):
            break
        P_next = _lyapunov(F, Q + Kg.T @ R @ Kg)
        res_next = care_residual(A, B, Q, R, P_next)
        if res_next >= res and res < tol * max(1.0, np.linalg.norm(P)):
            break
        P, res = P_next, res_next
    if not res < tol * max(1.0, np.linalg.norm(P)):
        raise CareError("Riccati iteration did not converge", res)
    if not is_hurwitz(A - B @ (Rinv_Bt @ P)):
        raise CareError("solution is not stabilizing", res)
    return P


def lqr_gain(A, B, Q, R, P=None) -> np.ndarray:
    """``K = R^-1 B' P`` as a row vector (single input) or matrix."""
    A, B, Q, R = _as_problem(A, B, Q, R)
    if P is None:
        P = solve_care(A, B, Q, R)
    Kg = np.linalg.solve(R, B.T @ P)
    return Kg.reshape(-1) if Kg.shape[0] == 1 else Kg


def design_lqr(model: LinearModel, Q=DESIGN_Q, R=DESIGN_R) -> LqrDesign:
    P = solve_care(model.A, model.B, Q, R)
    Kg = lqr_gain(model.A, model.B, Q, R, P)
    closed = model.A - np.outer(model.B, Kg)
    return LqrDesign(
        Q=np.atleast_2d(np.asarray(Q, dtype=float)),
        R=float(np.asarray(R).reshape(-1)[0]),
        P=P,
        K=np.asarray(Kg, dtype=float),
        residual=care_residual(model.A, model.B, Q, R, P),
        closed_loop_eigenvalues=eigenvalues(closed),
    )


def characteristic_polynomial(M) -> np.ndarray:
    """Monic coefficients ``[1, c1, ..., cn]`` of ``det(sI - M)``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    Mk = np.zeros_like(M)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ (Mk + coeffs[k - 1] * eye)
        coeffs[k] = -np.trace(Mk) / k
    return coeffs


def polynomial_roots(coeffs, *, tol: float = 1e-14, max_iter: int = 500) -> np.ndarray:
    """All complex roots of a polynomial by Aberth-Ehrlich iteration."""
    c = np.asarray(coeffs, dtype=complex)
    c = c / c[0]
    n = len(c) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    dc = c[:-1] * np.arange(n, 0, -1)
    radius = 1.0 + np.max(np.abs(c[1:]))
    # Cauchy bound radius, start points off the real axis to break symmetry
    z = radius * 0.5 * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(max_iter):
        pz = np.polyval(c, z)
        dpz = np.polyval(dc, z)
        converged = np.abs(pz) <= tol * np.polyval(np.abs(c), np.abs(z))
        if np.all(converged):
            break
        ratio = np.where(dpz != 0, pz / np.where(dpz != 0, dpz, 1), 0)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        sums = inv.sum(axis=1)
        step = ratio / (1.0 - ratio * sums)
        z = np.where(converged, z, z - step)
        if not np.all(np.isfinite(z)):
            raise RootFindingError("root iteration diverged")
    else:
        pz = np.polyval(c, z)
        if np.any(np.abs(pz) > 1e-8 * np.polyval(np.abs(c), np.abs(z))):
            raise RootFindingError("root iteration did not converge")
    return z


def eigenvalues(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return polynomial_roots(characteristic_polynomial(M))


def is_hurwitz(M) -> bool:
    return bool(np.all(eigenvalues(M).real < -HURWITZ_MARGIN))


def scalar_selftest() -> dict:
    """The two closed-form scalar cases; used by ``design --selftest``."""
    out = {}
    for a, expected in ((0.0, 1.0), (-1.0, math.sqrt(2.0) - 1.0)):
        P = solve_care([[a]], [[1.0]], [[1.0]], [[1.0]])
        Kg = lqr_gain([[a]], [[1.0]], [[1.0]], [[1.0]], P)
        out[f"A={a:g}"] = {"P": float(P[0, 0]), "K": float(Kg[0]), "expected": expected}
    return out
