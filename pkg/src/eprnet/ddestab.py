"""Rightmost characteristic roots of linear delay-differential systems.

Stability of ``x'(t) = sum_j A_j x(t - tau_j)`` is decided by the roots
of ``det(s I - sum_j A_j exp(-s tau_j)) = 0``.  The solution operator's
infinitesimal generator is discretized by pseudospectral collocation on
Chebyshev points over ``[-tau_max, 0]``; its rightmost eigenvalues seed a
Newton iteration on the characteristic determinant, using the trace
identity ``d/ds log det F(s) = tr(F(s)^{-1} F'(s))``.  The discretization
order is doubled until the reported refined root set stops moving, and
every reported root carries a determinant residual certificate.

All internal computations run on the time-rescaled system (delays mapped
to ``[0, 1]``), which keeps the collocation matrices well conditioned for
physical rate scales; reported roots are in 1/s units.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .closedloop import ClosedLoopSystem

__all__ = [
    "DegenerateDelay",
    "NoConvergence",
    "StabilityReport",
    "rightmost_roots",
    "stability_report",
    "check_closed_loop",
    "format_report",
]

_HAUSDORFF_TOL = 1.0e-6
_CERT_TOL = 1.0e-8
_MAX_ORDER_FACTOR = 8  # default order 40 auto-doubles at most to 320


class DegenerateDelay(Exception):
    """All delays are zero: use a plain eigenvalue solver instead."""


class NoConvergence(Exception):
    """Root refinement or the order-doubling protocol failed."""


@dataclass(frozen=True)
class StabilityReport:
    """Rightmost roots, discretization diagnostics, and the verdict.

    Roots are sorted by descending real part and occur in conjugate
    pairs.  ``verdict`` is ``"stable"`` when the rightmost real part is
    below ``-abs_tol``, ``"marginal"`` within ``abs_tol`` of zero, and
    ``"unstable"`` otherwise.
    """

    rightmost_roots: tuple[complex, ...]
    discretization_order: int
    converged: bool
    verdict: str
    abs_tol: float


def _cheb(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev differentiation matrix and points on [-1, 0], x[0] = 0.

    The matrix is built directly on the mapped points, so no extra
    interval-length scaling applies.
    """
    n = order
    theta = np.cos(np.pi * np.arange(n + 1) / n)
    x = (theta - 1.0) / 2.0
    c = np.hstack([2.0, np.ones(n - 1), 2.0]) * (-1.0) ** np.arange(n + 1)
    xm = np.tile(x, (n + 1, 1)).T
    dx = xm - xm.T
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    return d, x


def _lagrange_values(x: np.ndarray, point: float) -> np.ndarray:
    """Barycentric cardinal-function values at an off-mesh point."""
    n = x.size - 1
    exact = np.nonzero(np.isclose(x, point, rtol=0.0, atol=1.0e-15))[0]
    values = np.zeros(n + 1)
    if exact.size:
        values[exact[0]] = 1.0
        return values
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    ratios = w / (point - x)
    return ratios / ratios.sum()


def _generator(terms, order: int) -> np.ndarray:
    """Pseudospectral approximation of the delay semigroup generator."""
    n = terms[0][0].shape[0]
    d, x = _cheb(order)
    size = n * (order + 1)
    gen = np.zeros((size, size))
    gen[n:, :] = np.kron(d[1:, :], np.eye(n))
    for matrix, tau in terms:
        values = _lagrange_values(x, -tau)
        for k in np.nonzero(values)[0]:
            gen[:n, n * k : n * (k + 1)] += values[k] * matrix
    return gen


def _char_matrices(s: complex, terms) -> tuple[np.ndarray, np.ndarray]:
    n = terms[0][0].shape[0]
    f = s * np.eye(n, dtype=complex)
    fp = np.eye(n, dtype=complex)
    for matrix, tau in terms:
        factor = cmath.exp(-s * tau)
        f -= factor * matrix
        fp += (tau * factor) * matrix
    return f, fp


def _newton(s0: complex, terms, max_iter: int = 100) -> complex | None:
    s = complex(s0)
    for _ in range(max_iter):
        f, fp = _char_matrices(s, terms)
        try:
            trace = np.trace(np.linalg.solve(f, fp))
        except np.linalg.LinAlgError:
            return s  # exactly singular: s is a root to working precision
        if trace == 0.0:
            return None
        step = -1.0 / trace
        s = s + step
        if abs(step) <= 1.0e-12 * max(1.0, abs(s)):
            return s
    return None


def _log_residual(s: complex, terms) -> float:
    """log10 of |det F(s)| relative to a Hadamard-type bound at s.

    The bound uses the row magnitudes of the characteristic terms rather
    than of F itself, so it does not vanish at a root.
    """
    f, _ = _char_matrices(s, terms)
    n = f.shape[0]
    scale = np.full(n, abs(s))
    for matrix, tau in terms:
        scale = scale + math.exp(-s.real * tau) * np.linalg.norm(matrix, axis=1)
    scale = np.maximum(scale, 1.0e-300)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # exact singularity at a root is fine
        lu, _ = scipy.linalg.lu_factor(f, check_finite=False)
    diag = np.maximum(np.abs(np.diag(lu)), 1.0e-300)
    return float(np.sum(np.log10(diag)) - np.sum(np.log10(scale)))


def _dedupe(roots: list[complex]) -> list[complex]:
    kept: list[complex] = []
    for z in roots:
        tol = 1.0e-8 * max(1.0, abs(z))
        if all(abs(z - other) > tol for other in kept):
            kept.append(z)
    return kept


def _canonicalize(roots: list[complex]) -> list[complex]:
    """Dedupe and force exact conjugate pairing (real coefficients)."""
    normalized = []
    for z in roots:
        if abs(z.imag) <= 1.0e-9 * max(1.0, abs(z)):
            normalized.append(complex(z.real, 0.0))
        else:
            normalized.append(complex(z.real, abs(z.imag)))
    out: list[complex] = []
    for z in _dedupe(normalized):
        out.append(z)
        if z.imag != 0.0:
            out.append(z.conjugate())
    return out


def _select_rightmost(roots: list[complex], count: int) -> list[complex]:
    ordered = sorted(roots, key=lambda z: (-z.real, -abs(z.imag), z.imag))
    selected = ordered[:count]
    # never split a conjugate pair at the cut
    if len(ordered) > count and selected:
        last = selected[-1]
        nxt = ordered[count]
        if last.imag != 0.0 and abs(nxt - last.conjugate()) <= 1.0e-12 * max(
            1.0, abs(last)
        ):
            selected.append(nxt)
    return selected


def _hausdorff(a: list[complex], b: list[complex]) -> float:
    if not a or not b:
        return math.inf
    aa = np.array(a)
    bb = np.array(b)
    d = np.abs(aa[:, None] - bb[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _refined_set(terms, order: int, count: int, tau_max: float) -> list[complex]:
    gen = _generator(terms, order)
    eigs = np.linalg.eigvals(gen)
    candidates = sorted(eigs, key=lambda z: -z.real)[: max(4 * count, count + 16)]
    refined: list[complex] = []
    for cand in candidates:
        root = _newton(complex(cand), terms)
        if root is None:
            continue
        if _log_residual(root, terms) > math.log10(_CERT_TOL):
            continue
        refined.append(root)
    refined = _canonicalize(refined)
    # rescale to physical units before selecting, so the selection and the
    # convergence comparison both happen on reported values
    rescaled = [z / tau_max for z in refined]
    return _select_rightmost(rescaled, count)


def rightmost_roots(
    a_terms,
    count: int,
    order: int = 40,
) -> StabilityReport:
    """Locate the ``count`` rightmost characteristic roots.

    Parameters
    ----------
    a_terms : sequence of (matrix, delay) pairs
        The delayed drift terms; at least one delay must be positive.
    count : int
        Number of rightmost roots to report (a trailing conjugate partner
        may be appended so pairs are never split).
    order : int
        Initial pseudospectral order; doubled until the reported set is
        stable under doubling, up to eight times the initial order.

    Raises
    ------
    DegenerateDelay
        All delays are zero; use a plain eigenvalue solver.
    NoConvergence
        The order-doubling protocol exhausted the maximum order.
    """
    terms = [(np.asarray(m, dtype=float), float(tau)) for m, tau in a_terms]
    if not terms:
        raise ValueError("at least one drift term is required")
    if count < 1:
        raise ValueError("count must be >= 1")
    if any(tau < 0.0 for _, tau in terms):
        raise ValueError("delays must be >= 0")
    tau_max = max(tau for _, tau in terms)
    if tau_max == 0.0:
        raise DegenerateDelay("all delays are zero")

    # time rescaling t -> t / tau_max
    scaled = [(m * tau_max, tau / tau_max) for m, tau in terms]

    max_order = order * _MAX_ORDER_FACTOR
    previous: list[complex] | None = None
    current_order = order
    while current_order <= max_order:
        current = _refined_set(scaled, current_order, count, tau_max)
        if previous is not None and _hausdorff(previous, current) < _HAUSDORFF_TOL:
            roots = tuple(
                sorted(current, key=lambda z: (-z.real, -abs(z.imag), z.imag))
            )
            abs_tol = 1.0e-4 / tau_max
            return StabilityReport(
                rightmost_roots=roots,
                discretization_order=current_order,
                converged=True,
                verdict=_verdict(roots, abs_tol),
                abs_tol=abs_tol,
            )
        previous = current
        current_order *= 2
    raise NoConvergence(
        f"root set failed to stabilize up to pseudospectral order {max_order}"
    )


def _verdict(roots, abs_tol: float) -> str:
    max_re = max(z.real for z in roots)
    if abs(max_re) <= abs_tol:
        return "marginal"
    return "stable" if max_re < 0.0 else "unstable"


def stability_report(a_terms, count: int = 10, order: int = 40) -> StabilityReport:
    """Stability report for any delayed drift, with zero-delay fallback.

    Delegates to ``rightmost_roots``; when every delay tag is zero the
    characteristic roots are the eigenvalues of the collapsed drift and
    are reported directly (discretization order 0).
    """
    try:
        return rightmost_roots(a_terms, count=count, order=order)
    except DegenerateDelay:
        drift = sum(np.asarray(m, dtype=float) for m, _ in a_terms)
        eigs = np.linalg.eigvals(drift)
        roots = _select_rightmost(_canonicalize(list(eigs)), count)
        roots = tuple(sorted(roots, key=lambda z: (-z.real, -abs(z.imag), z.imag)))
        abs_tol = 1.0e-9 * max(1.0, float(np.linalg.norm(drift)))
        return StabilityReport(
            rightmost_roots=roots,
            discretization_order=0,
            converged=True,
            verdict=_verdict(roots, abs_tol),
            abs_tol=abs_tol,
        )


def check_closed_loop(cl: ClosedLoopSystem, order: int = 40) -> StabilityReport:
    """Stability report for an assembled closed loop (ten roots)."""
    return stability_report(cl.sys.a_terms, count=10, order=order)


def format_report(report: StabilityReport) -> str:
    """Render a stability report as structured text."""
    lines = [
        f"verdict: {report.verdict}",
        f"discretization_order: {report.discretization_order}",
        f"converged: {str(report.converged).lower()}",
        f"abs_tol: {report.abs_tol:.6e}",
        "roots (re, im):",
    ]
    for z in report.rightmost_roots:
        lines.append(f"  {z.real:+.9e}  {z.imag:+.9e}")
    return "\n".join(lines) + "\n"
