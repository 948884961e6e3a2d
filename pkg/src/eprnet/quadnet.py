"""Quadrature state-space models of the two-node entangling network.

Two oscillator nodes, each holding an ``a`` mode and a ``b`` mode, are
linked by travelling fields.  Inside node 1 the modes interact through a
two-mode squeezing process of strength ``epsilon``; node 2 carries the
phase-conjugate process.  The ``b``-port output of each node is sent to
the ``a``-port of the other node through a lossy channel (beam splitter
with transmissivity ``alpha``) and a transport delay ``T``.  Amplification
losses couple every mode to an extra vacuum with rate ``chi``.

All models are built directly in quadrature (position/momentum)
coordinates, where every signal is a real-valued white-noise channel of
unit intensity.  Because time delays are part of the physics, systems are
represented as sums of delay-tagged matrix terms::

    dx/dt = sum_j A_j x(t - tau_j) + sum_j B_j w(t - tau_j)
    y     = sum_j C_j x(t - tau_j) + sum_j D_j w(t - tau_j)

A system whose tags are all zero is an ordinary LTI system; collapsing
the term lists by summation is then exact.

Fixed orderings used throughout the package:

* full plant state:  ``(a1q, a1p, b1q, b1p, a2q, a2p, b2q, b2p)``
* noise set 1:       ``(xi_in_11_q, xi_in_23_p, xi_in_13_q, xi_in_21_q,
  xi_loss_11_q, xi_loss_12_q, xi_loss_21_q, xi_loss_22_p, xi_bs_1_q,
  xi_bs_2_p)`` -- this set commutes and drives the ``(a1q, a2q, b1q,
  b2p)`` closed subsystem
* noise set 2:       the conjugate partners, driving ``(a1p, a2p, b1p,
  b2q)``
* homodyne vacua:    ``(xi_h_1_q, xi_h_1_p, xi_h_2_q, xi_h_2_p)``
* control channels:  ``(u11_q, u11_p, u21_q, u21_p, u12_q, u12_p,
  u22_q, u22_p)`` -- ``u11``/``u12`` reach node 1 after a delay ``Tm``

The transmissivity/reflectivity pair always satisfies
``alpha**2 + beta**2 == 1``; ``beta`` is derived, never stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ParameterError",
    "NetworkParams",
    "DelayedStateSpace",
    "SubsystemPair",
    "build_plant",
    "build_uncontrolled_subsystems",
    "build_measurement_map",
    "STATE_LABELS",
    "NOISE_SET_1",
    "NOISE_SET_2",
    "NOISE_LABELS",
    "HOMODYNE_LABELS",
    "EXTENDED_NOISE_LABELS",
    "CONTROL_LABELS",
    "PLANT_OUTPUT_LABELS",
    "MEASUREMENT_LABELS",
]


class ParameterError(ValueError):
    """Raised for physically inadmissible network parameters."""


STATE_LABELS = ("a1q", "a1p", "b1q", "b1p", "a2q", "a2p", "b2q", "b2p")

NOISE_SET_1 = (
    "xi_in_11_q",
    "xi_in_23_p",
    "xi_in_13_q",
    "xi_in_21_q",
    "xi_loss_11_q",
    "xi_loss_12_q",
    "xi_loss_21_q",
    "xi_loss_22_p",
    "xi_bs_1_q",
    "xi_bs_2_p",
)

NOISE_SET_2 = (
    "xi_in_11_p",
    "xi_in_23_q",
    "xi_in_13_p",
    "xi_in_21_p",
    "xi_loss_11_p",
    "xi_loss_12_p",
    "xi_loss_21_p",
    "xi_loss_22_q",
    "xi_bs_1_p",
    "xi_bs_2_q",
)

NOISE_LABELS = NOISE_SET_1 + NOISE_SET_2

HOMODYNE_LABELS = ("xi_h_1_q", "xi_h_1_p", "xi_h_2_q", "xi_h_2_p")

EXTENDED_NOISE_LABELS = NOISE_LABELS + HOMODYNE_LABELS

CONTROL_LABELS = (
    "u11_q",
    "u11_p",
    "u21_q",
    "u21_p",
    "u12_q",
    "u12_p",
    "u22_q",
    "u22_p",
)

PLANT_OUTPUT_LABELS = (
    "out_11_q",
    "out_11_p",
    "out_21_q",
    "out_21_p",
    "out_12_q",
    "out_12_p",
    "out_22_q",
    "out_22_p",
)

MEASUREMENT_LABELS = ("yc_11", "yc_12", "yc_21", "yc_22")

# subsystem orderings: set 1 states and set 2 states of the full plant
SUBSYS1_STATES = ("a1q", "a2q", "b1q", "b2p")
SUBSYS2_STATES = ("a1p", "a2p", "b1p", "b2q")


@dataclass(frozen=True)
class NetworkParams:
    """Physical constants of the two-node network.

    Rates are angular (rad/s), delays in seconds, ``alpha`` and ``rho``
    dimensionless.  ``beta = sqrt(1 - alpha**2)`` is always derived so
    that the beam-splitter identity holds exactly.
    """

    kappa: float
    gamma: float
    kappa1: float
    epsilon: float
    chi: float = 0.0
    alpha: float = 1.0
    T: float = 0.0
    Tm: float = 0.0
    rho: float = 1.0e7

    def __post_init__(self) -> None:
        for name in ("kappa", "gamma", "kappa1", "epsilon", "chi", "rho"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        for name in ("T", "Tm"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")

    @property
    def beta(self) -> float:
        """Beam-splitter reflectivity, ``sqrt(1 - alpha**2)``."""
        return math.sqrt(max(0.0, 1.0 - self.alpha * self.alpha))

    def replace(self, **changes) -> "NetworkParams":
        data = self.as_dict()
        data.update(changes)
        return NetworkParams(**data)

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "gamma": self.gamma,
            "kappa1": self.kappa1,
            "epsilon": self.epsilon,
            "chi": self.chi,
            "alpha": self.alpha,
            "T": self.T,
            "Tm": self.Tm,
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkParams":
        """Build from a mapping, e.g. a parsed config section."""
        known = {
            "kappa",
            "gamma",
            "kappa1",
            "epsilon",
            "chi",
            "alpha",
            "T",
            "Tm",
            "rho",
        }
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def _freeze(matrix: np.ndarray) -> np.ndarray:
    out = np.array(matrix, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _merge_terms(
    terms: Iterable[tuple[np.ndarray, float]], rows: int, cols: int
) -> tuple[tuple[np.ndarray, float], ...]:
    """Sum matrices that share a delay tag and drop all-zero terms."""
    by_delay: dict[float, np.ndarray] = {}
    for matrix, delay in terms:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (rows, cols):
            raise ValueError(f"term shape {matrix.shape} != ({rows}, {cols})")
        if delay < 0.0 or not math.isfinite(delay):
            raise ValueError(f"delay must be finite and >= 0, got {delay!r}")
        key = float(delay)
        if key in by_delay:
            by_delay[key] = by_delay[key] + matrix
        else:
            by_delay[key] = matrix.copy()
    merged = []
    for delay in sorted(by_delay):
        matrix = by_delay[delay]
        if delay == 0.0 or np.any(matrix != 0.0):
            merged.append((_freeze(matrix), delay))
    if not merged:
        merged.append((_freeze(np.zeros((rows, cols))), 0.0))
    return tuple(merged)


@dataclass(frozen=True)
class DelayedStateSpace:
    """LTI system whose matrices are sums of delay-tagged terms.

    Immutable: matrices are stored as read-only arrays, so instances can
    be shared freely across threads.
    """

    state_dim: int
    input_dim: int
    output_dim: int
    a_terms: tuple[tuple[np.ndarray, float], ...]
    b_terms: tuple[tuple[np.ndarray, float], ...]
    c_terms: tuple[tuple[np.ndarray, float], ...]
    d_terms: tuple[tuple[np.ndarray, float], ...]
    state_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()
    output_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n, m, p = self.state_dim, self.input_dim, self.output_dim
        object.__setattr__(self, "a_terms", _merge_terms(self.a_terms, n, n))
        object.__setattr__(self, "b_terms", _merge_terms(self.b_terms, n, m))
        object.__setattr__(self, "c_terms", _merge_terms(self.c_terms, p, n))
        object.__setattr__(self, "d_terms", _merge_terms(self.d_terms, p, m))
        for attr, dim in (
            ("state_labels", n),
            ("input_labels", m),
            ("output_labels", p),
        ):
            labels = tuple(getattr(self, attr))
            if not labels:
                prefix = attr[0]
                labels = tuple(f"{prefix}{i}" for i in range(dim))
            if len(labels) != dim:
                raise ValueError(f"{attr} has {len(labels)} entries, expected {dim}")
            object.__setattr__(self, attr, labels)

    @property
    def delays(self) -> tuple[float, ...]:
        """Sorted set of all delay tags appearing in any term."""
        tags = {delay for _, delay in self.a_terms + self.b_terms + self.c_terms + self.d_terms}
        return tuple(sorted(tags))

    @property
    def max_delay(self) -> float:
        return self.delays[-1]

    def collapse(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Sum the term lists into plain (A, B, C, D) matrices.

        This is the zero-delay evaluation of the system; it is exact when
        every tag is zero and corresponds to setting all delays to zero
        otherwise.
        """
        a = sum(m for m, _ in self.a_terms)
        b = sum(m for m, _ in self.b_terms)
        c = sum(m for m, _ in self.c_terms)
        d = sum(m for m, _ in self.d_terms)
        return np.array(a), np.array(b), np.array(c), np.array(d)

    def select_outputs(self, indices: Sequence[int]) -> "DelayedStateSpace":
        """Restrict the system to a subset of output rows."""
        idx = list(indices)
        return DelayedStateSpace(
            state_dim=self.state_dim,
            input_dim=self.input_dim,
            output_dim=len(idx),
            a_terms=self.a_terms,
            b_terms=self.b_terms,
            c_terms=tuple((m[idx, :], tau) for m, tau in self.c_terms),
            d_terms=tuple((m[idx, :], tau) for m, tau in self.d_terms),
            state_labels=self.state_labels,
            input_labels=self.input_labels,
            output_labels=tuple(self.output_labels[i] for i in idx),
        )

    def to_json(self, indent: int | None = 2) -> str:
        """Dump the model as structured text, one entry per delay-tagged term."""

        def pack(terms):
            return [
                {"delay_s": tau, "matrix": m.tolist()} for m, tau in terms
            ]

        doc = {
            "state_dim": self.state_dim,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "state_labels": list(self.state_labels),
            "input_labels": list(self.input_labels),
            "output_labels": list(self.output_labels),
            "a_terms": pack(self.a_terms),
            "b_terms": pack(self.b_terms),
            "c_terms": pack(self.c_terms),
            "d_terms": pack(self.d_terms),
        }
        return json.dumps(doc, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DelayedStateSpace":
        doc = json.loads(text)

        def unpack(entries):
            return tuple(
                (np.array(e["matrix"], dtype=float), float(e["delay_s"]))
                for e in entries
            )

        return cls(
            state_dim=doc["state_dim"],
            input_dim=doc["input_dim"],
            output_dim=doc["output_dim"],
            a_terms=unpack(doc["a_terms"]),
            b_terms=unpack(doc["b_terms"]),
            c_terms=unpack(doc["c_terms"]),
            d_terms=unpack(doc["d_terms"]),
            state_labels=tuple(doc["state_labels"]),
            input_labels=tuple(doc["input_labels"]),
            output_labels=tuple(doc["output_labels"]),
        )


@dataclass(frozen=True)
class SubsystemPair:
    """The two commuting 4-state subsystems of the uncontrolled network.

    ``sys1`` carries the summed position quadrature of the radiated
    fields, ``sys2`` the differenced momentum quadrature; their squared
    row transfer functions are the two entanglement spectra.
    """

    sys1: DelayedStateSpace
    sys2: DelayedStateSpace


class _TermSheet:
    """Accumulates (row, col, value, delay) entries for one matrix family."""

    def __init__(self, rows: Sequence[str], cols: Sequence[str]):
        self.row_index = {name: i for i, name in enumerate(rows)}
        self.col_index = {name: i for i, name in enumerate(cols)}
        self.shape = (len(self.row_index), len(self.col_index))
        self.entries: dict[float, np.ndarray] = {}

    def add(self, row: str, col: str, value: float, delay: float = 0.0) -> None:
        if value == 0.0:
            return
        key = float(delay)
        if key not in self.entries:
            self.entries[key] = np.zeros(self.shape)
        self.entries[key][self.row_index[row], self.col_index[col]] += value

    def terms(self) -> tuple[tuple[np.ndarray, float], ...]:
        if not self.entries:
            return ((np.zeros(self.shape), 0.0),)
        return tuple((self.entries[d], d) for d in sorted(self.entries))


def _drift_entries(params: NetworkParams):
    """Yield (state, state, coefficient, delay) for the 8-state drift.

    The cross-node couplings inherit the channel transport delay; every
    on-node term is instantaneous.
    """
    p = params
    da = p.gamma / 2.0 + p.kappa / 4.0 + p.chi / 4.0
    db = p.kappa1 / 2.0 + p.chi / 4.0
    e = p.epsilon / (2.0 * math.sqrt(2.0))
    g = p.alpha * math.sqrt(p.kappa * p.kappa1 / 2.0)
    T = p.T

    yield ("a1q", "a1q", -da, 0.0)
    yield ("a1q", "b1q", +e, 0.0)
    yield ("a1q", "b2p", -g, T)

    yield ("a1p", "a1p", -da, 0.0)
    yield ("a1p", "b1p", -e, 0.0)
    yield ("a1p", "b2q", +g, T)

    yield ("b1q", "a1q", +e, 0.0)
    yield ("b1q", "b1q", -db, 0.0)

    yield ("b1p", "a1p", -e, 0.0)
    yield ("b1p", "b1p", -db, 0.0)

    yield ("a2q", "a2q", -da, 0.0)
    yield ("a2q", "b2p", +e, 0.0)
    yield ("a2q", "b1q", -g, T)

    yield ("a2p", "a2p", -da, 0.0)
    yield ("a2p", "b2q", +e, 0.0)
    yield ("a2p", "b1p", -g, T)

    yield ("b2q", "a2p", +e, 0.0)
    yield ("b2q", "b2q", -db, 0.0)

    yield ("b2p", "a2q", +e, 0.0)
    yield ("b2p", "b2p", -db, 0.0)


def _noise_entries(params: NetworkParams):
    """Yield (state, noise, coefficient, delay) for the 8 x 20 noise map."""
    p = params
    sg = math.sqrt(p.gamma)
    sk = math.sqrt(p.kappa / 2.0)
    sk1 = math.sqrt(p.kappa1)
    sx = math.sqrt(p.chi / 2.0)
    a, b = p.alpha, p.beta
    T = p.T

    yield ("a1q", "xi_in_11_q", -sg, 0.0)
    yield ("a1q", "xi_in_23_p", -a * sk, T)
    yield ("a1q", "xi_bs_2_p", -b * sk, 0.0)
    yield ("a1q", "xi_loss_11_q", -sx, 0.0)

    yield ("a1p", "xi_in_11_p", -sg, 0.0)
    yield ("a1p", "xi_in_23_q", +a * sk, T)
    yield ("a1p", "xi_bs_2_q", +b * sk, 0.0)
    yield ("a1p", "xi_loss_11_p", -sx, 0.0)

    yield ("b1q", "xi_in_13_q", -sk1, 0.0)
    yield ("b1q", "xi_loss_12_q", -sx, 0.0)

    yield ("b1p", "xi_in_13_p", -sk1, 0.0)
    yield ("b1p", "xi_loss_12_p", -sx, 0.0)

    yield ("a2q", "xi_in_21_q", -sg, 0.0)
    yield ("a2q", "xi_in_13_q", -a * sk, T)
    yield ("a2q", "xi_bs_1_q", +b * sk, 0.0)
    yield ("a2q", "xi_loss_21_q", -sx, 0.0)

    yield ("a2p", "xi_in_21_p", -sg, 0.0)
    yield ("a2p", "xi_in_13_p", -a * sk, T)
    yield ("a2p", "xi_bs_1_p", -b * sk, 0.0)
    yield ("a2p", "xi_loss_21_p", -sx, 0.0)

    yield ("b2q", "xi_in_23_q", -sk1, 0.0)
    yield ("b2q", "xi_loss_22_q", -sx, 0.0)

    yield ("b2p", "xi_in_23_p", -sk1, 0.0)
    yield ("b2p", "xi_loss_22_p", -sx, 0.0)


def _control_entries(params: NetworkParams):
    """Yield (state, control, coefficient, delay) for the 8 x 8 drive map.

    The modulated fields replace the corresponding vacuum drives, so each
    channel inherits the vacuum's coupling coefficient; signals bound for
    node 1 arrive after the control-path delay.
    """
    p = params
    sg = math.sqrt(p.gamma)
    sk1 = math.sqrt(p.kappa1)
    Tm = p.Tm

    yield ("a1q", "u11_q", -sg, Tm)
    yield ("a1p", "u11_p", -sg, Tm)
    yield ("b1q", "u12_q", -sk1, Tm)
    yield ("b1p", "u12_p", -sk1, Tm)
    yield ("a2q", "u21_q", -sg, 0.0)
    yield ("a2p", "u21_p", -sg, 0.0)
    yield ("b2q", "u22_q", -sk1, 0.0)
    yield ("b2p", "u22_p", -sk1, 0.0)


def _output_state_entries(params: NetworkParams):
    """Yield (output, state, coefficient, delay) for the radiated fields."""
    p = params
    sg = math.sqrt(p.gamma)
    sk = math.sqrt(p.kappa / 2.0)
    ak1 = p.alpha * math.sqrt(p.kappa1)
    T = p.T

    yield ("out_11_q", "a1q", +sg, 0.0)
    yield ("out_11_p", "a1p", +sg, 0.0)
    yield ("out_21_q", "a2q", +sg, 0.0)
    yield ("out_21_p", "a2p", +sg, 0.0)

    yield ("out_12_q", "a1p", -sk, 0.0)
    yield ("out_12_q", "b2q", +ak1, T)
    yield ("out_12_p", "a1q", +sk, 0.0)
    yield ("out_12_p", "b2p", +ak1, T)

    yield ("out_22_q", "a2q", +sk, 0.0)
    yield ("out_22_q", "b1q", +ak1, T)
    yield ("out_22_p", "a2p", +sk, 0.0)
    yield ("out_22_p", "b1p", +ak1, T)


def _output_noise_entries(params: NetworkParams):
    p = params
    a, b = p.alpha, p.beta
    T = p.T

    yield ("out_11_q", "xi_in_11_q", 1.0, 0.0)
    yield ("out_11_p", "xi_in_11_p", 1.0, 0.0)
    yield ("out_21_q", "xi_in_21_q", 1.0, 0.0)
    yield ("out_21_p", "xi_in_21_p", 1.0, 0.0)

    yield ("out_12_q", "xi_in_23_q", a, T)
    yield ("out_12_q", "xi_bs_2_q", b, 0.0)
    yield ("out_12_p", "xi_in_23_p", a, T)
    yield ("out_12_p", "xi_bs_2_p", b, 0.0)

    yield ("out_22_q", "xi_in_13_q", a, T)
    yield ("out_22_q", "xi_bs_1_q", b, 0.0)
    yield ("out_22_p", "xi_in_13_p", a, T)
    yield ("out_22_p", "xi_bs_1_p", b, 0.0)


def _output_control_entries(params: NetworkParams):
    """Direct modulator feedthrough into the node-1/node-2 radiated fields."""
    Tm = params.Tm
    yield ("out_11_q", "u11_q", 1.0, Tm)
    yield ("out_11_p", "u11_p", 1.0, Tm)
    yield ("out_21_q", "u21_q", 1.0, 0.0)
    yield ("out_21_p", "u21_p", 1.0, 0.0)


def _measurement_entries(params: NetworkParams):
    """Rows of the dual-homodyne signals over states and extended noises.

    The detector watching node 1's measurement port sits at node 2's
    site, so its two rows lag by the transport delay; every term of those
    rows, noise included, carries the tag.
    """
    p = params
    hk = math.sqrt(p.kappa) / 2.0
    hk1 = p.alpha * math.sqrt(p.kappa1 / 2.0)
    ha = p.alpha / math.sqrt(2.0)
    hb = p.beta / math.sqrt(2.0)
    hv = 1.0 / math.sqrt(2.0)
    T = p.T

    state = [
        ("yc_11", "a2q", +hk, 0.0),
        ("yc_11", "b1q", +hk1, 0.0),
        ("yc_12", "a2p", -hk, 0.0),
        ("yc_12", "b1p", -hk1, 0.0),
        ("yc_21", "a1p", -hk, T),
        ("yc_21", "b2q", +hk1, T),
        ("yc_22", "a1q", -hk, T),
        ("yc_22", "b2p", -hk1, T),
    ]
    noise = [
        ("yc_11", "xi_in_13_q", +ha, 0.0),
        ("yc_11", "xi_bs_1_q", +hb, 0.0),
        ("yc_11", "xi_h_2_q", +hv, 0.0),
        ("yc_12", "xi_in_13_p", -ha, 0.0),
        ("yc_12", "xi_bs_1_p", -hb, 0.0),
        ("yc_12", "xi_h_2_p", +hv, 0.0),
        ("yc_21", "xi_in_23_q", +ha, T),
        ("yc_21", "xi_bs_2_q", +hb, T),
        ("yc_21", "xi_h_1_q", +hv, T),
        ("yc_22", "xi_in_23_p", -ha, T),
        ("yc_22", "xi_bs_2_p", -hb, T),
        ("yc_22", "xi_h_1_p", +hv, T),
    ]
    return state, noise


def build_plant(
    params: NetworkParams, with_control_inputs: bool = False
) -> DelayedStateSpace:
    """Build the full 8-state quadrature model of the network.

    Inputs are the 20 white-noise channels, optionally followed by the 8
    control channels.  Outputs are the 8 quadratures of the four radiated
    fields.  Cross-node couplings carry the transport delay ``T``;
    control channels bound for node 1 carry ``Tm``; everything else is
    instantaneous.
    """
    a_sheet = _TermSheet(STATE_LABELS, STATE_LABELS)
    for row, col, val, tau in _drift_entries(params):
        a_sheet.add(row, col, val, tau)

    input_labels = NOISE_LABELS + CONTROL_LABELS if with_control_inputs else NOISE_LABELS
    b_sheet = _TermSheet(STATE_LABELS, input_labels)
    for row, col, val, tau in _noise_entries(params):
        b_sheet.add(row, col, val, tau)
    if with_control_inputs:
        for row, col, val, tau in _control_entries(params):
            b_sheet.add(row, col, val, tau)

    c_sheet = _TermSheet(PLANT_OUTPUT_LABELS, STATE_LABELS)
    for row, col, val, tau in _output_state_entries(params):
        c_sheet.add(row, col, val, tau)

    d_sheet = _TermSheet(PLANT_OUTPUT_LABELS, input_labels)
    for row, col, val, tau in _output_noise_entries(params):
        d_sheet.add(row, col, val, tau)
    if with_control_inputs:
        for row, col, val, tau in _output_control_entries(params):
            d_sheet.add(row, col, val, tau)

    return DelayedStateSpace(
        state_dim=8,
        input_dim=len(input_labels),
        output_dim=8,
        a_terms=a_sheet.terms(),
        b_terms=b_sheet.terms(),
        c_terms=c_sheet.terms(),
        d_terms=d_sheet.terms(),
        state_labels=STATE_LABELS,
        input_labels=input_labels,
        output_labels=PLANT_OUTPUT_LABELS,
    )


def build_uncontrolled_subsystems(params: NetworkParams) -> SubsystemPair:
    """Extract the two decoupled 4-state subsystems and their output rows.

    Each subsystem is driven by its own commuting 10-channel noise
    vector.  The single outputs are the physical field combinations

    * ``sys1``: sum of the radiated position quadratures,
    * ``sys2``: difference of the radiated momentum quadratures,

    built from the output equations including the outcoupling factor
    ``sqrt(gamma)`` on the mode amplitudes.
    """
    sg = math.sqrt(params.gamma)

    def make(states, noises, out_label, signs):
        a_sheet = _TermSheet(states, states)
        for row, col, val, tau in _drift_entries(params):
            if row in a_sheet.row_index and col in a_sheet.col_index:
                a_sheet.add(row, col, val, tau)
        b_sheet = _TermSheet(states, noises)
        for row, col, val, tau in _noise_entries(params):
            if row in b_sheet.row_index and col in b_sheet.col_index:
                b_sheet.add(row, col, val, tau)
        c_sheet = _TermSheet((out_label,), states)
        d_sheet = _TermSheet((out_label,), noises)
        (s1, mode1, noise1), (s2, mode2, noise2) = signs
        c_sheet.add(out_label, mode1, s1 * sg, 0.0)
        c_sheet.add(out_label, mode2, s2 * sg, 0.0)
        d_sheet.add(out_label, noise1, s1, 0.0)
        d_sheet.add(out_label, noise2, s2, 0.0)
        return DelayedStateSpace(
            state_dim=4,
            input_dim=10,
            output_dim=1,
            a_terms=a_sheet.terms(),
            b_terms=b_sheet.terms(),
            c_terms=c_sheet.terms(),
            d_terms=d_sheet.terms(),
            state_labels=tuple(states),
            input_labels=tuple(noises),
            output_labels=(out_label,),
        )

    sys1 = make(
        SUBSYS1_STATES,
        NOISE_SET_1,
        "out_sum_q",
        (((+1.0), "a1q", "xi_in_11_q"), ((+1.0), "a2q", "xi_in_21_q")),
    )
    sys2 = make(
        SUBSYS2_STATES,
        NOISE_SET_2,
        "out_diff_p",
        (((+1.0), "a1p", "xi_in_11_p"), ((-1.0), "a2p", "xi_in_21_p")),
    )
    return SubsystemPair(sys1=sys1, sys2=sys2)


def build_measurement_map(params: NetworkParams) -> DelayedStateSpace:
    """Build the 4-row dual-homodyne output map over the extended noises.

    The returned object carries only ``c_terms``/``d_terms`` (it is an
    output map over the plant state, not a dynamical system of its own);
    inputs are the 20 plant noises followed by the 4 homodyne vacua.
    """
    state_entries, noise_entries = _measurement_entries(params)
    c_sheet = _TermSheet(MEASUREMENT_LABELS, STATE_LABELS)
    for row, col, val, tau in state_entries:
        c_sheet.add(row, col, val, tau)
    d_sheet = _TermSheet(MEASUREMENT_LABELS, EXTENDED_NOISE_LABELS)
    for row, col, val, tau in noise_entries:
        d_sheet.add(row, col, val, tau)
    zero = np.zeros((8, 8))
    return DelayedStateSpace(
        state_dim=8,
        input_dim=24,
        output_dim=4,
        a_terms=((zero, 0.0),),
        b_terms=((np.zeros((8, 24)), 0.0),),
        c_terms=c_sheet.terms(),
        d_terms=d_sheet.terms(),
        state_labels=STATE_LABELS,
        input_labels=EXTENDED_NOISE_LABELS,
        output_labels=MEASUREMENT_LABELS,
    )
