"""Measurement-feedback interconnection of plant and controller.

The controller integrates the four dual-homodyne signals (whose node-1
rows lag by the transport delay ``T``) and drives the plant through the
eight modulator channels (the node-1 channels lag by ``Tm``).  The
assembled system therefore has delay tags only in ``{0, T, Tm}`` --
delays never compound.

The entanglement outputs of the closed loop are the physical field
combinations with every classical controller contribution removed:
classical displacements have no bearing on the entanglement between the
fields, so the two output rows carry zero coefficients on all controller
states.  What was removed is retained as bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lqgsynth import LqgController
from .quadnet import (
    EXTENDED_NOISE_LABELS,
    NOISE_LABELS,
    DelayedStateSpace,
    NetworkParams,
)

__all__ = [
    "DimensionMismatch",
    "ClosedLoopSystem",
    "assemble",
    "modified_outputs",
]

_N_PLANT = 8
_N_NOISE = len(NOISE_LABELS)
_N_EXT = len(EXTENDED_NOISE_LABELS)

_OUTPUT_LABELS = ("out_sum_q", "out_diff_p")


class DimensionMismatch(ValueError):
    """Plant, measurement map, and controller dimensions disagree."""


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Assembled 16-state loop with entanglement outputs.

    ``sys`` maps the 24 extended noises to the two entanglement output
    combinations.  ``plant_output_rows`` records, per output label, the
    delay-tagged controller-state rows that were zeroed when the
    classical contributions were dropped.
    """

    sys: DelayedStateSpace
    plant_output_rows: dict

    @property
    def delays(self) -> tuple[float, ...]:
        return self.sys.delays


def _term_dict():
    return {}


def _add(terms: dict, tau: float, block, rows, cols, shape) -> None:
    tau = float(tau)
    if tau not in terms:
        terms[tau] = np.zeros(shape)
    terms[tau][np.ix_(rows, cols)] += block


def assemble(
    plant: DelayedStateSpace,
    meas: DelayedStateSpace,
    ctrl: LqgController,
    params: NetworkParams,
) -> ClosedLoopSystem:
    """Close the loop: plant + dual-homodyne map + classical controller.

    The controller state equation inherits the measurement delays
    (``zc' = Ac zc + Bc y`` with the node-1 measurement rows delayed by
    ``T``); the plant receives ``u = Cc zc`` with the node-1 channels
    delayed by ``Tm``.  Outputs are the modified entanglement rows.
    """
    labels = plant.input_labels
    ctrl_cols = [i for i, lab in enumerate(labels) if lab.startswith("u")]
    noise_cols = [i for i, lab in enumerate(labels) if not lab.startswith("u")]
    if len(ctrl_cols) != ctrl.cc.shape[0]:
        raise DimensionMismatch(
            f"plant exposes {len(ctrl_cols)} control channels, "
            f"controller provides {ctrl.cc.shape[0]}"
        )
    if meas.output_dim != ctrl.bc.shape[1]:
        raise DimensionMismatch(
            f"measurement map has {meas.output_dim} rows, "
            f"controller accepts {ctrl.bc.shape[1]}"
        )
    if plant.state_dim != _N_PLANT or meas.state_dim != _N_PLANT:
        raise DimensionMismatch("plant and measurement map must share 8 states")
    if len(noise_cols) != _N_NOISE or meas.input_dim != _N_EXT:
        raise DimensionMismatch("noise vectors do not match the extended layout")

    nc = ctrl.order
    n_total = _N_PLANT + nc
    plant_rows = range(_N_PLANT)
    ctrl_rows = range(_N_PLANT, n_total)

    a_terms: dict = _term_dict()
    shape_a = (n_total, n_total)

    for matrix, tau in plant.a_terms:
        _add(a_terms, tau, matrix, plant_rows, plant_rows, shape_a)
    # control drive: each tagged B-term contributes B_u(tau) @ Cc
    for matrix, tau in plant.b_terms:
        block = matrix[:, ctrl_cols] @ ctrl.cc
        if np.any(block != 0.0):
            _add(a_terms, tau, block, plant_rows, ctrl_rows, shape_a)
    # measurement injection: Bc @ Cm(tau)
    for matrix, tau in meas.c_terms:
        block = ctrl.bc @ matrix
        if np.any(block != 0.0):
            _add(a_terms, tau, block, ctrl_rows, plant_rows, shape_a)
    _add(a_terms, 0.0, ctrl.ac, ctrl_rows, ctrl_rows, shape_a)

    b_terms: dict = _term_dict()
    shape_b = (n_total, _N_EXT)
    for matrix, tau in plant.b_terms:
        block = matrix[:, noise_cols]
        if np.any(block != 0.0):
            _add(b_terms, tau, block, plant_rows, range(_N_NOISE), shape_b)
    for matrix, tau in meas.d_terms:
        block = ctrl.bc @ matrix
        if np.any(block != 0.0):
            _add(b_terms, tau, block, ctrl_rows, range(_N_EXT), shape_b)

    # entanglement outputs: physical sums/differences of the radiated
    # node fields, with classical (controller-state) terms dropped
    sum_rows = {"out_sum_q": (("out_11_q", +1.0), ("out_21_q", +1.0)),
                "out_diff_p": (("out_11_p", +1.0), ("out_21_p", -1.0))}
    out_index = {lab: i for i, lab in enumerate(plant.output_labels)}

    c_terms: dict = _term_dict()
    d_terms: dict = _term_dict()
    shape_c = (2, n_total)
    shape_d = (2, _N_EXT)
    dropped: dict = {lab: [] for lab in _OUTPUT_LABELS}
    for out_row, label in enumerate(_OUTPUT_LABELS):
        for src, sign in sum_rows[label]:
            k = out_index[src]
            for matrix, tau in plant.c_terms:
                row = sign * matrix[k, :]
                if np.any(row != 0.0):
                    _add(c_terms, tau, row[None, :], [out_row], plant_rows, shape_c)
            for matrix, tau in plant.d_terms:
                noise_row = sign * matrix[k, noise_cols]
                if np.any(noise_row != 0.0):
                    _add(
                        d_terms, tau, noise_row[None, :],
                        [out_row], range(_N_NOISE), shape_d,
                    )
                u_row = sign * matrix[k, ctrl_cols]
                if np.any(u_row != 0.0):
                    dropped[label].append((float(tau), u_row @ ctrl.cc))
    if not c_terms:
        c_terms[0.0] = np.zeros(shape_c)
    if not d_terms:
        d_terms[0.0] = np.zeros(shape_d)

    state_labels = plant.state_labels + tuple(f"zc{i + 1}" for i in range(nc))
    sys = DelayedStateSpace(
        state_dim=n_total,
        input_dim=_N_EXT,
        output_dim=2,
        a_terms=tuple((m, tau) for tau, m in sorted(a_terms.items())),
        b_terms=tuple((m, tau) for tau, m in sorted(b_terms.items())),
        c_terms=tuple((m, tau) for tau, m in sorted(c_terms.items())),
        d_terms=tuple((m, tau) for tau, m in sorted(d_terms.items())),
        state_labels=state_labels,
        input_labels=EXTENDED_NOISE_LABELS,
        output_labels=_OUTPUT_LABELS,
    )

    allowed = {0.0, float(params.T), float(params.Tm)}
    if not set(sys.delays) <= allowed:
        raise AssertionError(
            f"delay tags {sys.delays} escape the admissible set {sorted(allowed)}"
        )
    return ClosedLoopSystem(
        sys=sys,
        plant_output_rows={k: tuple(v) for k, v in dropped.items()},
    )


def modified_outputs(cl: ClosedLoopSystem) -> DelayedStateSpace:
    """The 2-output, 24-input delayed system of entanglement rows.

    The rows are already the modified ones (classical contributions
    removed at assembly); this accessor exists so downstream code reads
    the closed loop the same way it reads the uncontrolled subsystems.
    """
    return cl.sys
