"""Dense Riccati and Lyapunov solvers used by the synthesis pipeline.

``solve_care`` computes the unique stabilizing solution of

    A'X + XA - (XB + S) R^{-1} (B'X + S') + Q = 0

by ordered real Schur decomposition of the 2n x 2n Hamiltonian matrix
(stable invariant subspace).  Admissibility is screened with PBH rank
tests, and every returned solution is certified by its relative residual.

``solve_lyapunov`` returns X with ``A X + X A' + Q = 0`` for Hurwitz A,
delegating the Schur back-substitution to SciPy's Bartels-Stewart
routine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SolverError",
    "NotStabilizable",
    "NotDetectable",
    "NoStabilizingSolution",
    "IllConditioned",
    "NotHurwitz",
    "CareProblem",
    "CareSolution",
    "solve_care",
    "solve_lyapunov",
    "RESIDUAL_TOL",
]

RESIDUAL_TOL = 1.0e-8
_PBH_TOL = 1.0e-10
_SYM_TOL = 1.0e-10


class SolverError(Exception):
    """Base class for matrix-equation solver failures."""


class NotStabilizable(SolverError):
    pass


class NotDetectable(SolverError):
    pass


class NoStabilizingSolution(SolverError):
    pass


class IllConditioned(SolverError):
    pass


class NotHurwitz(SolverError):
    pass


def _as_matrix(m, rows, cols, name):
    arr = np.asarray(m, dtype=float)
    if arr.shape != (rows, cols):
        raise ValueError(f"{name} must have shape ({rows}, {cols}), got {arr.shape}")
    return arr


def _check_symmetric(m, name):
    scale = max(1.0, float(np.linalg.norm(m)))
    if np.linalg.norm(m - m.T) > _SYM_TOL * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class CareProblem:
    """Data of a continuous algebraic Riccati equation with cross weight."""

    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray
    s: np.ndarray | None = None

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("a must be square")
        n = a.shape[0]
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 2 or b.shape[0] != n:
            raise ValueError("b must have n rows")
        m = b.shape[1]
        q = _check_symmetric(_as_matrix(self.q, n, n, "q"), "q")
        r = _check_symmetric(_as_matrix(self.r, m, m, "r"), "r")
        try:
            scipy.linalg.cholesky(r)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("r must be positive definite") from exc
        s = self.s
        s = np.zeros((n, m)) if s is None else _as_matrix(s, n, m, "s")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True)
class CareSolution:
    """Stabilizing solution, its gain, and the certification numbers."""

    x: np.ndarray
    gain: np.ndarray
    residual_norm: float
    closed_loop_spectral_abscissa: float


def _rank(m, tol):
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > tol))


def _pbh_checks(p: CareProblem, a_hat: np.ndarray, q_hat: np.ndarray) -> None:
    """PBH rank screens for existence of the stabilizing solution.

    Stabilizability is required outright; on the observation side only an
    unobservable mode on the imaginary axis blocks existence (a stable or
    anti-stable hidden mode still admits a stabilizing solution).
    """
    n = p.n
    scale = max(1.0, float(np.linalg.norm(p.a)))
    tol = _PBH_TOL * scale
    for lam in np.linalg.eigvals(p.a):
        if lam.real >= 0.0:
            pencil = np.hstack([p.a - lam * np.eye(n), p.b.astype(complex)])
            if _rank(pencil, tol) < n:
                raise NotStabilizable(
                    f"uncontrollable unstable mode at lambda={lam:.6g}"
                )
    for lam in np.linalg.eigvals(a_hat):
        if abs(lam.real) <= tol:
            pencil = np.vstack([a_hat - lam * np.eye(n), q_hat.astype(complex)])
            if _rank(pencil, tol) < n:
                raise NotDetectable(
                    f"unobservable imaginary-axis mode at lambda={lam:.6g}"
                )


def care_residual(p: CareProblem, x: np.ndarray) -> float:
    """Relative residual ``|A'X+XA-(XB+S)R^-1(B'X+S')+Q| / max(1, |X|)``."""
    k = scipy.linalg.solve(p.r, (p.b.T @ x + p.s.T), assume_a="pos")
    res = p.a.T @ x + x @ p.a - (x @ p.b + p.s) @ k + p.q
    return float(np.linalg.norm(res) / max(1.0, np.linalg.norm(x)))


def solve_care(p: CareProblem) -> CareSolution:
    """Solve the CARE by the ordered-Schur Hamiltonian method.

    Raises
    ------
    NotStabilizable, NotDetectable
        PBH rank test failure at an unstable eigenvalue.
    NoStabilizingSolution
        The stable invariant subspace does not define a solution.
    IllConditioned
        Residual above the certification tolerance.
    """
    n = p.n
    r_inv_st = scipy.linalg.solve(p.r, p.s.T, assume_a="pos")
    a_hat = p.a - p.b @ r_inv_st
    q_hat = p.q - p.s @ r_inv_st
    q_hat = 0.5 * (q_hat + q_hat.T)
    _pbh_checks(p, a_hat, q_hat)

    g = p.b @ scipy.linalg.solve(p.r, p.b.T, assume_a="pos")
    ham = np.block([[a_hat, -g], [-q_hat, -a_hat.T]])
    _, z, sdim = scipy.linalg.schur(ham, output="real", sort="lhp")
    if sdim != n:
        raise NoStabilizingSolution(
            f"stable subspace has dimension {sdim}, expected {n}"
        )
    u1 = z[:n, :n]
    u2 = z[n:, :n]
    if np.linalg.cond(u1) > 1.0 / np.finfo(float).eps:
        raise NoStabilizingSolution("stable subspace basis is singular")
    x = scipy.linalg.solve(u1.T, u2.T).T
    x = 0.5 * (x + x.T)

    gain = scipy.linalg.solve(p.r, p.b.T @ x + p.s.T, assume_a="pos")
    residual = care_residual(p, x)
    if residual > RESIDUAL_TOL:
        raise IllConditioned(f"CARE residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}")
    abscissa = float(np.max(np.linalg.eigvals(p.a - p.b @ gain).real))
    if abscissa >= 0.0:
        raise NoStabilizingSolution(
            f"closed loop not Hurwitz (spectral abscissa {abscissa:.3e})"
        )
    return CareSolution(
        x=x,
        gain=gain,
        residual_norm=residual,
        closed_loop_spectral_abscissa=abscissa,
    )


def solve_lyapunov(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve ``A X + X A' + Q = 0`` for Hurwitz ``A`` and symmetric ``Q``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("a must be square")
    q = _check_symmetric(_as_matrix(q, a.shape[0], a.shape[0], "q"), "q")
    abscissa = float(np.max(np.linalg.eigvals(a).real))
    if abscissa >= 0.0:
        raise NotHurwitz(f"a has spectral abscissa {abscissa:.3e} >= 0")
    x = scipy.linalg.solve_continuous_lyapunov(a, -q)
    return 0.5 * (x + x.T)
