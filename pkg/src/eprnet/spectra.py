"""Frequency responses, entanglement spectra, and their CSV emission.

The spectra ``V+`` and ``V-`` are the power spectral densities of the
summed/differenced output quadratures; for a single-output system driven
by unit-intensity white noise they equal the squared Frobenius norm of
the row transfer function

    H(i w) = C(w) (i w I - A(w))^{-1} B(w) + D(w),

where each of A, B, C, D is the delay-weighted sum of its tagged terms,
``M(w) = sum_j M_j exp(-i w tau_j)``.  The pair of fields is entangled
at a frequency where ``V+ + V- < 4`` (6.0206 dB).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .quadnet import DelayedStateSpace

__all__ = [
    "SingularResolvent",
    "NonPositive",
    "FrequencyGrid",
    "SpectraResult",
    "freq_response",
    "freq_response_grid",
    "compute_spectra",
    "to_db",
    "write_csv",
    "ENTANGLEMENT_THRESHOLD",
]

ENTANGLEMENT_THRESHOLD = 4.0
_COND_LIMIT = 1.0e14

# default grid: 2000 log-spaced points over the plotted range; systems
# with delays get a densified high-frequency section because the
# exp(-i w T) factors oscillate quickly there
_GRID_LO = 1.0e3
_GRID_HI = 1.0e9
_GRID_N = 2000
_DENSE_SPLIT = 1.0e5
_DENSE_N = 8000


class SingularResolvent(Exception):
    """The resolvent is numerically singular at some frequency.

    Signals a pole on or near the imaginary axis; carries the offending
    angular frequency as ``omega``.
    """

    def __init__(self, omega: float, cond: float):
        super().__init__(
            f"resolvent condition number {cond:.3e} at omega={omega:.6e} rad/s"
        )
        self.omega = float(omega)
        self.cond = float(cond)


class NonPositive(ValueError):
    """dB conversion of a non-positive value."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing grid of positive angular frequencies (rad/s)."""

    omegas: np.ndarray

    def __post_init__(self) -> None:
        om = np.asarray(self.omegas, dtype=float)
        if om.ndim != 1 or om.size == 0:
            raise ValueError("grid must be a nonempty 1-d array")
        if not np.all(np.isfinite(om)):
            raise ValueError("grid must be finite")
        if om[0] <= 0.0:
            raise ValueError("grid frequencies must be positive")
        if np.any(np.diff(om) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        om = om.copy()
        om.setflags(write=False)
        object.__setattr__(self, "omegas", om)

    def __len__(self) -> int:
        return int(self.omegas.size)

    @classmethod
    def log(cls, lo: float, hi: float, n: int) -> "FrequencyGrid":
        """Logarithmically spaced grid of ``n`` points over ``[lo, hi]``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if n == 1:
            return cls(np.array([float(lo)]))
        return cls(np.geomspace(lo, hi, n))

    @classmethod
    def default(cls, delayed: bool = False) -> "FrequencyGrid":
        if not delayed:
            return cls.log(_GRID_LO, _GRID_HI, _GRID_N)
        span = math.log(_GRID_HI / _GRID_LO)
        n_low = round(_GRID_N * math.log(_DENSE_SPLIT / _GRID_LO) / span)
        low = np.geomspace(_GRID_LO, _DENSE_SPLIT, n_low, endpoint=False)
        high = np.geomspace(_DENSE_SPLIT, _GRID_HI, _DENSE_N)
        return cls(np.concatenate([low, high]))


@dataclass(frozen=True)
class SpectraResult:
    """Entanglement spectra on a grid, linear scale.

    ``band_edges`` lists the ``(low, high)`` frequency intervals on which
    ``v_sum`` stays below the entanglement threshold; edges interior to
    the grid are refined by bisection and reported to three significant
    figures, edges clipped by the grid boundary are the boundary itself.
    """

    grid: FrequencyGrid
    v_plus: np.ndarray
    v_minus: np.ndarray
    v_sum: np.ndarray
    entangled_mask: np.ndarray
    band_edges: tuple[tuple[float, float], ...]


def _delay_sum(terms, omega: complex | float) -> np.ndarray:
    acc = None
    for matrix, tau in terms:
        factor = np.exp(-1j * omega * tau) if tau != 0.0 else 1.0
        term = matrix * factor
        acc = term if acc is None else acc + term
    return acc


def freq_response(sys: DelayedStateSpace, omega: float) -> np.ndarray:
    """Evaluate the transfer matrix of a delayed system at one frequency.

    Raises ``SingularResolvent`` when ``i w I - A(w)`` has a 2-norm
    condition number above 1e14.
    """
    a = _delay_sum(sys.a_terms, omega)
    e = 1j * omega * np.eye(sys.state_dim) - a
    cond = float(np.linalg.cond(e))
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularResolvent(omega, cond)
    b = _delay_sum(sys.b_terms, omega)
    c = _delay_sum(sys.c_terms, omega)
    d = _delay_sum(sys.d_terms, omega)
    return c @ np.linalg.solve(e, b) + d


def _response_chunk(sys: DelayedStateSpace, omegas: np.ndarray) -> np.ndarray:
    nw = omegas.size
    n = sys.state_dim
    eye = np.eye(n)
    phase = {
        tau: np.exp(-1j * omegas * tau)
        for tau in sys.delays
        if tau != 0.0
    }

    def stack(terms, rows, cols):
        acc = np.zeros((nw, rows, cols), dtype=complex)
        for matrix, tau in terms:
            if tau == 0.0:
                acc += matrix[None, :, :]
            else:
                acc += phase[tau][:, None, None] * matrix[None, :, :]
        return acc

    a = stack(sys.a_terms, n, n)
    e = (1j * omegas)[:, None, None] * eye[None, :, :] - a
    cond = np.linalg.cond(e)
    bad = ~np.isfinite(cond) | (cond > _COND_LIMIT)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularResolvent(float(omegas[i]), float(cond[i]))
    b = stack(sys.b_terms, n, sys.input_dim)
    c = stack(sys.c_terms, sys.output_dim, n)
    d = stack(sys.d_terms, sys.output_dim, sys.input_dim)
    return c @ np.linalg.solve(e, b) + d


def freq_response_grid(
    sys: DelayedStateSpace,
    omegas: np.ndarray | FrequencyGrid,
    workers: int = 1,
    chunk: int = 512,
) -> np.ndarray:
    """Evaluate the transfer matrix over a grid of frequencies.

    Returns an array of shape ``(n_omega, output_dim, input_dim)`` ordered
    by grid index.  With ``workers > 1`` the chunks are evaluated
    concurrently; ordering of the result is unaffected.
    """
    if isinstance(omegas, FrequencyGrid):
        omegas = omegas.omegas
    omegas = np.asarray(omegas, dtype=float)
    chunks = [omegas[i : i + chunk] for i in range(0, omegas.size, chunk)]
    if workers <= 1 or len(chunks) <= 1:
        parts = [_response_chunk(sys, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _response_chunk(sys, c), chunks))
    return np.concatenate(parts, axis=0)


def _row_power(sys: DelayedStateSpace, omegas, workers: int) -> np.ndarray:
    h = freq_response_grid(sys, omegas, workers=workers)
    rows = h[:, 0, :]
    power = np.einsum("ij,ij->i", rows.conj(), rows)
    scale = np.maximum(power.real, 1.0e-300)
    if np.max(np.abs(power.imag) / scale) > 1.0e-12:
        raise AssertionError("squared row norm has a non-negligible imaginary part")
    return power.real


def _row_power_at(sys1, sys2, omega: float) -> float:
    h1 = freq_response(sys1, omega)[0]
    h2 = freq_response(sys2, omega)[0]
    return float(np.vdot(h1, h1).real + np.vdot(h2, h2).real)


def _round_sig(x: float, digits: int = 3) -> float:
    if x == 0.0:
        return 0.0
    return float(f"{x:.{digits - 1}e}")


def _refine_edge(sys1, sys2, lo: float, hi: float) -> float:
    """Bisect a bracketed crossing of v_sum through the threshold."""
    f_lo = _row_power_at(sys1, sys2, lo) - ENTANGLEMENT_THRESHOLD
    while hi / lo > 1.0 + 1.0e-4:
        mid = math.sqrt(lo * hi)
        f_mid = _row_power_at(sys1, sys2, mid) - ENTANGLEMENT_THRESHOLD
        if (f_mid <= 0.0) == (f_lo <= 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return _round_sig(math.sqrt(lo * hi))


def _band_edges(sys1, sys2, omegas, v_sum) -> tuple[tuple[float, float], ...]:
    below = v_sum < ENTANGLEMENT_THRESHOLD
    edges = []
    i = 0
    n = omegas.size
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        low = (
            float(omegas[0])
            if i == 0
            else _refine_edge(sys1, sys2, omegas[i - 1], omegas[i])
        )
        high = (
            float(omegas[-1])
            if j == n - 1
            else _refine_edge(sys1, sys2, omegas[j], omegas[j + 1])
        )
        edges.append((low, high))
        i = j + 1
    return tuple(edges)


def compute_spectra(
    sys1: DelayedStateSpace,
    sys2: DelayedStateSpace,
    grid: FrequencyGrid,
    workers: int = 1,
) -> SpectraResult:
    """Compute ``V+``, ``V-`` from two single-output systems on a grid."""
    if sys1.output_dim != 1 or sys2.output_dim != 1:
        raise ValueError("compute_spectra requires single-output systems")
    v_plus = _row_power(sys1, grid, workers)
    v_minus = _row_power(sys2, grid, workers)
    v_sum = v_plus + v_minus
    mask = v_sum < ENTANGLEMENT_THRESHOLD
    edges = _band_edges(sys1, sys2, grid.omegas, v_sum)
    return SpectraResult(
        grid=grid,
        v_plus=v_plus,
        v_minus=v_minus,
        v_sum=v_sum,
        entangled_mask=mask,
        band_edges=edges,
    )


def to_db(x):
    """Convert a positive linear-scale value (or array) to decibels."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise NonPositive("dB conversion requires strictly positive values")
    out = 10.0 * np.log10(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def _db_field(value: float) -> str:
    if value <= 0.0:
        return "nan"
    return f"{10.0 * math.log10(value):.8e}"


def write_csv(result: SpectraResult, path) -> None:
    """Emit one spectra table: omega, V+, V-, V++V- in dB, entangled flag.

    Values are written in scientific notation with 9 significant digits;
    non-positive values (only possible for degenerate systems) are masked
    as ``nan``.
    """
    lines = ["omega_rad_s,v_plus_db,v_minus_db,v_sum_db,entangled"]
    for i, omega in enumerate(result.grid.omegas):
        lines.append(
            ",".join(
                (
                    f"{omega:.8e}",
                    _db_field(result.v_plus[i]),
                    _db_field(result.v_minus[i]),
                    _db_field(result.v_sum[i]),
                    "1" if result.entangled_mask[i] else "0",
                )
            )
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
