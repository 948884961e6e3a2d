"""Synthesis of the 8th-order measurement-feedback controller.

The controller minimizes the stationary quadratic cost

    J = lim (1/T) E[ integral( rho * |M z|^2 + u' u ) ]

where ``M z`` stacks the two EPR signal combinations: the summed
position quadratures and the differenced momentum quadratures of the
radiating modes.  The regulator gain comes from the control Riccati
equation; the filter gain from the dual Riccati equation with process
covariance ``B B'``, measurement covariance ``D D'``, and the nonzero
cross covariance ``B D'`` induced by the vacuum fields shared between
the dynamics and the dual-homodyne signals.  Both equations are solved
on the zero-delay collapse of the models: the design deliberately
ignores transport and actuation delays.

Rates of order 1e8 rad/s make the raw Riccati data badly scaled, so the
solves run on an exactly time-rescaled problem (same solution matrix,
gains scale by the square root of the rescaling factor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadnet import (
    CONTROL_LABELS,
    EXTENDED_NOISE_LABELS,
    STATE_LABELS,
    DelayedStateSpace,
    NetworkParams,
)
from .solvers import CareProblem, solve_care

__all__ = [
    "SynthesisError",
    "DegenerateMeasurement",
    "LqgWeights",
    "LqgController",
    "cost_rows",
    "build_cost",
    "synthesize",
    "save_controller",
    "load_controller",
    "controller_to_text",
    "controller_from_text",
]


class SynthesisError(Exception):
    """Controller synthesis failed."""


class DegenerateMeasurement(SynthesisError):
    """Measurement noise covariance is singular."""


@dataclass(frozen=True)
class LqgWeights:
    """State and control weighting matrices of the quadratic cost."""

    state_weight: np.ndarray
    control_weight: np.ndarray

    def __post_init__(self) -> None:
        sw = np.asarray(self.state_weight, dtype=float)
        cw = np.asarray(self.control_weight, dtype=float)
        for name, m in (("state_weight", sw), ("control_weight", cw)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square")
            if np.linalg.norm(m - m.T) > 1.0e-10 * max(1.0, np.linalg.norm(m)):
                raise ValueError(f"{name} must be symmetric")
        if np.any(np.linalg.eigvalsh(sw) < -1.0e-10 * max(1.0, np.linalg.norm(sw))):
            raise ValueError("state_weight must be positive semidefinite")
        if np.any(np.linalg.eigvalsh(cw) <= 0.0):
            raise ValueError("control_weight must be positive definite")
        sw = 0.5 * (sw + sw.T)
        cw = 0.5 * (cw + cw.T)
        sw.setflags(write=False)
        cw.setflags(write=False)
        object.__setattr__(self, "state_weight", sw)
        object.__setattr__(self, "control_weight", cw)


@dataclass(frozen=True)
class LqgController:
    """Classical controller triple: zc' = Ac zc + Bc y,  u = Cc zc."""

    ac: np.ndarray
    bc: np.ndarray
    cc: np.ndarray

    def __post_init__(self) -> None:
        ac = np.asarray(self.ac, dtype=float)
        bc = np.asarray(self.bc, dtype=float)
        cc = np.asarray(self.cc, dtype=float)
        n = ac.shape[0]
        if ac.shape != (n, n) or bc.shape[0] != n or cc.shape[1] != n:
            raise ValueError("inconsistent controller dimensions")
        for m in (ac, bc, cc):
            m.setflags(write=False)
        object.__setattr__(self, "ac", ac)
        object.__setattr__(self, "bc", bc)
        object.__setattr__(self, "cc", cc)

    @property
    def order(self) -> int:
        return self.ac.shape[0]

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(np.linalg.eigvals(self.ac).real))


def cost_rows() -> np.ndarray:
    """The 2 x 8 map from the plant state to the penalized EPR signals.

    Row one is the sum of the node position quadratures, row two the
    difference of the node momentum quadratures; the cost penalizes the
    squared norm of this pair.
    """
    rows = np.zeros((2, 8))
    rows[0, STATE_LABELS.index("a1q")] = 1.0
    rows[0, STATE_LABELS.index("a2q")] = 1.0
    rows[1, STATE_LABELS.index("a1p")] = 1.0
    rows[1, STATE_LABELS.index("a2p")] = -1.0
    return rows


def build_cost(params: NetworkParams, interpretation: str = "linear") -> LqgWeights:
    """Build the cost weights from the scalar weighting constant.

    The state weight penalizes the squared norm of the two EPR signal
    rows, ``w * M'M`` with ``M`` from ``cost_rows``; the control weight
    is the identity.  ``interpretation`` selects how the weighting
    constant enters: ``"linear"`` uses ``w = rho`` (the weight multiplies
    the squared signal), ``"squared"`` uses ``w = rho**2`` (the weight is
    squared together with the signal).
    """
    if interpretation == "linear":
        w = params.rho
    elif interpretation == "squared":
        w = params.rho * params.rho
    else:
        raise ValueError(f"unknown interpretation {interpretation!r}")
    m = cost_rows()
    return LqgWeights(state_weight=w * (m.T @ m), control_weight=np.eye(8))


def _split_plant(plant: DelayedStateSpace):
    labels = plant.input_labels
    noise_cols = [i for i, lab in enumerate(labels) if not lab.startswith("u")]
    ctrl_cols = [i for i, lab in enumerate(labels) if lab.startswith("u")]
    if tuple(labels[i] for i in ctrl_cols) != CONTROL_LABELS:
        raise SynthesisError("plant must be built with control inputs")
    a, b_all, _, _ = plant.collapse()
    return a, b_all[:, noise_cols], b_all[:, ctrl_cols]


def synthesize(
    plant: DelayedStateSpace,
    meas: DelayedStateSpace,
    weights: LqgWeights,
) -> LqgController:
    """Design the optimal output-feedback controller for the plant.

    Both models are collapsed to zero delay before solving: the regulator
    Riccati equation uses the control channels and the cost weights, the
    filter Riccati equation the unit-intensity noise statistics with the
    cross covariance between process and measurement noise.  Returns the
    controller realization ``Ac = A - Bu K - L Cm``, ``Bc = L``,
    ``Cc = -K``.
    """
    a, b_noise, b_u = _split_plant(plant)
    if meas.input_labels != EXTENDED_NOISE_LABELS:
        raise SynthesisError("measurement map must cover the extended noise vector")
    _, _, c_m, d_m = meas.collapse()

    n = a.shape[0]
    n_meas = c_m.shape[0]
    b_w = np.hstack([b_noise, np.zeros((n, meas.input_dim - b_noise.shape[1]))])
    w_cov = b_w @ b_w.T
    v_cov = d_m @ d_m.T
    s_cov = b_w @ d_m.T
    if np.linalg.matrix_rank(v_cov) < n_meas:
        raise DegenerateMeasurement("measurement noise covariance is singular")

    # exact rescalings keep the Riccati data near unit norm: time scaling
    # (X invariant, gains scale by sqrt(omega0)) plus a joint (q, r, s)
    # scaling (gain invariant, X scales linearly) that balances the
    # Hamiltonian blocks
    omega0 = max(1.0, float(np.linalg.norm(a)))
    root = math.sqrt(omega0)

    def scaled_care(a_s, b_s, q_s, r_s, s_s=None):
        gram = b_s @ np.linalg.solve(r_s, b_s.T)
        c = math.sqrt(
            max(float(np.linalg.norm(gram)), 1.0e-30)
            / max(float(np.linalg.norm(q_s)), 1.0e-30)
        )
        c = min(c, 1.0)
        s_c = None if s_s is None else c * s_s
        return solve_care(CareProblem(a=a_s, b=b_s, q=c * q_s, r=c * r_s, s=s_c))

    reg = scaled_care(
        a / omega0,
        b_u / root,
        weights.state_weight / omega0,
        weights.control_weight,
    )
    k_gain = root * reg.gain

    fil = scaled_care(
        a.T / omega0,
        c_m.T / root,
        w_cov / omega0,
        v_cov,
        s_cov / root,
    )
    l_gain = root * fil.gain.T

    ac = a - b_u @ k_gain - l_gain @ c_m
    controller = LqgController(ac=ac, bc=l_gain, cc=-k_gain)
    if controller.spectral_abscissa >= 0.0:
        raise SynthesisError(
            f"controller is unstable (abscissa {controller.spectral_abscissa:.3e})"
        )
    return controller


_FMT = "%.17e"


def controller_to_text(ctrl: LqgController) -> str:
    """Serialize the controller matrices as labelled plain text."""
    lines = ["controller-format 1"]
    for name, m in (("ac", ctrl.ac), ("bc", ctrl.bc), ("cc", ctrl.cc)):
        lines.append(f"{name} {m.shape[0]} {m.shape[1]}")
        for row in m:
            lines.append(" ".join(_FMT % v for v in row))
    return "\n".join(lines) + "\n"


def controller_from_text(text: str) -> LqgController:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "controller-format 1":
        raise ValueError("not a controller file")
    pos = 1
    blocks = {}
    while pos < len(lines):
        name, rows, cols = lines[pos].split()
        rows, cols = int(rows), int(cols)
        data = [
            [float(v) for v in lines[pos + 1 + r].split()] for r in range(rows)
        ]
        m = np.array(data)
        if m.shape != (rows, cols):
            raise ValueError(f"matrix {name} has wrong shape")
        blocks[name] = m
        pos += 1 + rows
    missing = {"ac", "bc", "cc"} - set(blocks)
    if missing:
        raise ValueError(f"controller file missing blocks: {sorted(missing)}")
    return LqgController(ac=blocks["ac"], bc=blocks["bc"], cc=blocks["cc"])


def save_controller(ctrl: LqgController, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(controller_to_text(ctrl))


def load_controller(path) -> LqgController:
    with open(path, "r", encoding="ascii") as fh:
        return controller_from_text(fh.read())
