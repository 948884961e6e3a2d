"""Model-builder tests: transcription, structure, and the type contracts."""

import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from eprnet.quadnet import (
    CONTROL_LABELS,
    EXTENDED_NOISE_LABELS,
    NOISE_LABELS,
    NOISE_SET_1,
    NOISE_SET_2,
    PLANT_OUTPUT_LABELS,
    STATE_LABELS,
    DelayedStateSpace,
    NetworkParams,
    ParameterError,
    build_measurement_map,
    build_plant,
    build_uncontrolled_subsystems,
)
from eprnet.spectra import freq_response

from conftest import make_ideal_params

S = {name: i for i, name in enumerate(STATE_LABELS)}
N = {name: i for i, name in enumerate(NOISE_LABELS)}


# Independent transcription of the coupled quadrature Langevin equations,
# written per equation as {column: (coefficient, delay-kind)} with
# delay-kind "T" marking terms that ride the transmission channel.
def expected_drift(p):
    da = p.gamma / 2 + p.kappa / 4 + p.chi / 4
    db = p.kappa1 / 2 + p.chi / 4
    e = p.epsilon / (2 * math.sqrt(2))
    g = p.alpha * math.sqrt(p.kappa * p.kappa1 / 2)
    return {
        "a1q": {"a1q": (-da, 0), "b1q": (e, 0), "b2p": (-g, "T")},
        "a1p": {"a1p": (-da, 0), "b1p": (-e, 0), "b2q": (g, "T")},
        "b1q": {"a1q": (e, 0), "b1q": (-db, 0)},
        "b1p": {"a1p": (-e, 0), "b1p": (-db, 0)},
        "a2q": {"a2q": (-da, 0), "b2p": (e, 0), "b1q": (-g, "T")},
        "a2p": {"a2p": (-da, 0), "b2q": (e, 0), "b1p": (-g, "T")},
        "b2q": {"a2p": (e, 0), "b2q": (-db, 0)},
        "b2p": {"a2q": (e, 0), "b2p": (-db, 0)},
    }


def expected_noise(p):
    sg = math.sqrt(p.gamma)
    sk = math.sqrt(p.kappa / 2)
    sk1 = math.sqrt(p.kappa1)
    sx = math.sqrt(p.chi / 2)
    a, b = p.alpha, p.beta
    return {
        "a1q": {
            "xi_in_11_q": (-sg, 0),
            "xi_in_23_p": (-a * sk, "T"),
            "xi_bs_2_p": (-b * sk, 0),
            "xi_loss_11_q": (-sx, 0),
        },
        "a1p": {
            "xi_in_11_p": (-sg, 0),
            "xi_in_23_q": (a * sk, "T"),
            "xi_bs_2_q": (b * sk, 0),
            "xi_loss_11_p": (-sx, 0),
        },
        "b1q": {"xi_in_13_q": (-sk1, 0), "xi_loss_12_q": (-sx, 0)},
        "b1p": {"xi_in_13_p": (-sk1, 0), "xi_loss_12_p": (-sx, 0)},
        "a2q": {
            "xi_in_21_q": (-sg, 0),
            "xi_in_13_q": (-a * sk, "T"),
            "xi_bs_1_q": (b * sk, 0),
            "xi_loss_21_q": (-sx, 0),
        },
        "a2p": {
            "xi_in_21_p": (-sg, 0),
            "xi_in_13_p": (-a * sk, "T"),
            "xi_bs_1_p": (-b * sk, 0),
            "xi_loss_21_p": (-sx, 0),
        },
        "b2q": {"xi_in_23_q": (-sk1, 0), "xi_loss_22_q": (-sx, 0)},
        "b2p": {"xi_in_23_p": (-sk1, 0), "xi_loss_22_p": (-sx, 0)},
    }


def dense_by_delay(terms, p):
    out = {}
    for matrix, tau in terms:
        out[tau] = out.get(tau, 0) + matrix
    return out


def table_by_delay(table, rows, cols, p):
    out = {}
    for row, entries in table.items():
        for col, (value, kind) in entries.items():
            tau = p.T if kind == "T" else 0.0
            if tau not in out:
                out[tau] = np.zeros((len(rows), len(cols)))
            out[tau][rows[row], cols[col]] += value
    return out


@pytest.fixture
def random_params():
    rng = np.random.default_rng(20240817)
    return NetworkParams(
        kappa=rng.uniform(1e6, 1e8),
        gamma=rng.uniform(1e6, 1e8),
        kappa1=rng.uniform(1e7, 1e9),
        epsilon=rng.uniform(0, 5e7),
        chi=rng.uniform(0, 1e7),
        alpha=rng.uniform(0.5, 1.0),
        T=2.4e-6,
        Tm=1.1e-6,
    )


class TestNetworkParams:
    @pytest.mark.parametrize(
        "bad",
        [
            {"kappa": -1.0},
            {"gamma": -2.0},
            {"epsilon": -0.1},
            {"chi": -1e-9},
            {"alpha": 1.2},
            {"alpha": -0.01},
            {"T": -1e-9},
            {"Tm": -1.0},
            {"rho": -5.0},
            {"kappa": float("nan")},
        ],
    )
    def test_invalid_rejected(self, bad):
        base = make_ideal_params().as_dict()
        base.update(bad)
        with pytest.raises(ParameterError):
            NetworkParams(**base)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.77, 0.95, 1.0])
    def test_beta_identity(self, alpha):
        p = make_ideal_params().replace(alpha=alpha)
        assert abs(p.alpha**2 + p.beta**2 - 1.0) < 1e-15

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ParameterError):
            NetworkParams.from_dict({"kappa": 1.0, "bogus": 2.0})

    def test_roundtrip(self):
        p = make_ideal_params()
        assert NetworkParams.from_dict(p.as_dict()) == p


class TestPlantTranscription:
    def test_drift_diagonal_ideal(self, ideal_params):
        a, _, _, _ = build_plant(ideal_params).collapse()
        expected = -(ideal_params.gamma / 2 + ideal_params.kappa / 4)
        assert a[S["a1q"], S["a1q"]] == expected == -1.8e7

    def test_full_transcription_matches_independent_table(self, random_params):
        p = random_params
        plant = build_plant(p)
        got_a = dense_by_delay(plant.a_terms, p)
        want_a = table_by_delay(expected_drift(p), S, S, p)
        assert set(got_a) == set(want_a)
        for tau in want_a:
            npt.assert_allclose(got_a[tau], want_a[tau], rtol=0, atol=0)
        got_b = dense_by_delay(plant.b_terms, p)
        want_b = table_by_delay(expected_noise(p), S, N, p)
        assert set(got_b) == set(want_b)
        for tau in want_b:
            npt.assert_allclose(got_b[tau], want_b[tau], rtol=0, atol=0)

    def test_alpha_one_kills_reflection_terms(self, ideal_params):
        plant = build_plant(ideal_params.replace(alpha=1.0, chi=0.3e6))
        bs_cols = [i for i, lab in enumerate(NOISE_LABELS) if "bs" in lab]
        for matrix, _ in plant.b_terms + plant.d_terms:
            assert not np.any(matrix[:, bs_cols])

    def test_couplings_vanish_without_pump_and_channel(self, ideal_params):
        plant = build_plant(ideal_params.replace(epsilon=0.0, kappa=0.0))
        a, _, _, _ = plant.collapse()
        a_modes = [S[k] for k in ("a1q", "a1p", "a2q", "a2p")]
        b_modes = [S[k] for k in ("b1q", "b1p", "b2q", "b2p")]
        assert not np.any(a[np.ix_(a_modes, b_modes)])
        assert not np.any(a[np.ix_(b_modes, a_modes)])

    def test_decoupling_into_commuting_sets(self, random_params):
        plant = build_plant(random_params)
        set1 = [S[k] for k in ("a1q", "a2q", "b1q", "b2p")]
        set2 = [S[k] for k in ("a1p", "a2p", "b1p", "b2q")]
        for matrix, _ in plant.a_terms:
            assert not np.any(matrix[np.ix_(set1, set2)])
            assert not np.any(matrix[np.ix_(set2, set1)])

    def test_passive_network_is_hurwitz(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            p = NetworkParams(
                kappa=rng.uniform(1e5, 1e9),
                gamma=rng.uniform(1e5, 1e9),
                kappa1=rng.uniform(1e5, 1e9),
                epsilon=0.0,
                chi=0.0,
                alpha=rng.uniform(0, 1),
            )
            a, _, _, _ = build_plant(p).collapse()
            assert np.max(np.linalg.eigvals(a).real) < 0

    def test_delay_tags(self, ideal_params):
        p = ideal_params.replace(T=1e-6, Tm=2e-6)
        plant = build_plant(p, with_control_inputs=True)
        assert plant.delays == (0.0, 1e-6, 2e-6)
        a_delayed = dense_by_delay(plant.a_terms, p)[1e-6]
        g = math.sqrt(p.kappa * p.kappa1 / 2)
        assert a_delayed[S["a1q"], S["b2p"]] == -g
        assert a_delayed[S["a2q"], S["b1q"]] == -g

    def test_zero_delays_collapse_to_single_terms(self, ideal_params):
        plant = build_plant(ideal_params, with_control_inputs=True)
        assert plant.delays == (0.0,)
        assert len(plant.a_terms) == 1

    def test_control_channels(self, ideal_params):
        p = ideal_params.replace(Tm=2e-6)
        plant = build_plant(p, with_control_inputs=True)
        assert plant.input_labels[20:] == CONTROL_LABELS
        b = dense_by_delay(plant.b_terms, p)
        cols = {lab: 20 + i for i, lab in enumerate(CONTROL_LABELS)}
        sg, sk1 = math.sqrt(p.gamma), math.sqrt(p.kappa1)
        # node-1 drives lag by the control-path delay, node-2 drives do not
        assert b[2e-6][S["a1q"], cols["u11_q"]] == -sg
        assert b[2e-6][S["b1p"], cols["u12_p"]] == -sk1
        assert b[0.0][S["a2p"], cols["u21_p"]] == -sg
        assert b[0.0][S["b2q"], cols["u22_q"]] == -sk1

    def test_output_rows_carry_outcoupling(self, ideal_params):
        plant = build_plant(ideal_params)
        _, _, c, d = plant.collapse()
        out = {lab: i for i, lab in enumerate(PLANT_OUTPUT_LABELS)}
        sg = math.sqrt(ideal_params.gamma)
        assert c[out["out_11_q"], S["a1q"]] == sg
        assert d[out["out_11_q"], N["xi_in_11_q"]] == 1.0
        assert c[out["out_12_q"], S["a1p"]] == -math.sqrt(ideal_params.kappa / 2)


class TestSubsystems:
    def test_input_ordering_matches_commuting_noise_sets(self, ideal_subsystems):
        assert ideal_subsystems.sys1.input_labels == NOISE_SET_1
        assert ideal_subsystems.sys2.input_labels == NOISE_SET_2

    def test_dimensions(self, ideal_subsystems):
        for sys in (ideal_subsystems.sys1, ideal_subsystems.sys2):
            assert sys.state_dim == 4
            assert sys.input_dim == 10
            assert sys.output_dim == 1

    def test_loss_columns_zero_when_chi_zero(self, ideal_subsystems):
        loss_cols = [i for i, lab in enumerate(NOISE_SET_1) if "loss" in lab]
        for matrix, _ in ideal_subsystems.sys1.b_terms:
            assert not np.any(matrix[:, loss_cols])

    def test_submatrices_of_full_plant(self, random_params):
        plant = build_plant(random_params)
        pair = build_uncontrolled_subsystems(random_params)
        idx1 = [S[k] for k in ("a1q", "a2q", "b1q", "b2p")]
        a_full = dense_by_delay(plant.a_terms, random_params)
        a_sub = dense_by_delay(pair.sys1.a_terms, random_params)
        for tau, matrix in a_sub.items():
            npt.assert_allclose(matrix, a_full[tau][np.ix_(idx1, idx1)])

    def test_output_rows(self, ideal_params, ideal_subsystems):
        sg = math.sqrt(ideal_params.gamma)
        _, _, c1, d1 = ideal_subsystems.sys1.collapse()
        npt.assert_allclose(c1, [[sg, sg, 0.0, 0.0]])
        npt.assert_allclose(d1, [[1, 0, 0, 1, 0, 0, 0, 0, 0, 0]])
        _, _, c2, d2 = ideal_subsystems.sys2.collapse()
        npt.assert_allclose(c2, [[sg, -sg, 0.0, 0.0]])
        npt.assert_allclose(d2, [[1, 0, 0, -1, 0, 0, 0, 0, 0, 0]])

    def test_symmetric_spectra(self, ideal_subsystems):
        for omega in (1e3, 1e5, 1e7, 1e9):
            h1 = freq_response(ideal_subsystems.sys1, omega)
            h2 = freq_response(ideal_subsystems.sys2, omega)
            v1 = float(np.vdot(h1[0], h1[0]).real)
            v2 = float(np.vdot(h2[0], h2[0]).real)
            assert abs(v1 - v2) <= 1e-6 * v1


class TestMeasurementMap:
    def test_detector_rows(self, ideal_params):
        p = ideal_params
        meas = build_measurement_map(p)
        _, _, c, d = meas.collapse()
        assert c[0, S["a2q"]] == math.sqrt(p.kappa) / 2
        assert c[0, S["b1q"]] == p.alpha * math.sqrt(p.kappa1 / 2)
        assert c[1, S["a2p"]] == -math.sqrt(p.kappa) / 2
        assert c[2, S["a1p"]] == -math.sqrt(p.kappa) / 2
        assert c[3, S["a1q"]] == -math.sqrt(p.kappa) / 2

    def test_homodyne_vacuum_floor(self, ideal_params):
        meas = build_measurement_map(ideal_params)
        _, _, _, d = meas.collapse()
        h_cols = [EXTENDED_NOISE_LABELS.index(lab) for lab in
                  ("xi_h_1_q", "xi_h_1_p", "xi_h_2_q", "xi_h_2_p")]
        vacuum = d[:, h_cols]
        npt.assert_allclose(
            np.abs(vacuum[vacuum != 0.0]), 1 / math.sqrt(2), rtol=0, atol=1e-15
        )
        # one vacuum entry per measurement row
        assert np.count_nonzero(vacuum) == 4

    def test_no_delay_tags_without_transmission_delay(self, ideal_params):
        meas = build_measurement_map(ideal_params)
        assert meas.delays == (0.0,)

    def test_remote_rows_delayed(self, ideal_params):
        p = ideal_params.replace(T=1e-6)
        meas = build_measurement_map(p)
        c = dense_by_delay(meas.c_terms, p)
        d = dense_by_delay(meas.d_terms, p)
        # local detector rows instantaneous, remote rows fully delayed
        assert np.any(c[0.0][0]) and np.any(c[0.0][1])
        assert not np.any(c[0.0][2]) and not np.any(c[0.0][3])
        assert np.any(c[1e-6][2]) and np.any(c[1e-6][3])
        assert not np.any(d[0.0][2]) and not np.any(d[0.0][3])


class TestDelayedStateSpace:
    def test_collapse_is_identity_for_zero_delays(self, ideal_subsystems):
        sys = ideal_subsystems.sys1
        a, b, c, d = sys.collapse()
        plain = DelayedStateSpace(
            state_dim=4, input_dim=10, output_dim=1,
            a_terms=((a, 0.0),), b_terms=((b, 0.0),),
            c_terms=((c, 0.0),), d_terms=((d, 0.0),),
        )
        for omega in (1e2, 1e6, 3e8):
            npt.assert_allclose(
                freq_response(sys, omega), freq_response(plain, omega),
                rtol=1e-14, atol=0,
            )

    def test_conjugate_symmetry(self, random_params):
        plant = build_plant(random_params)
        for omega in (1e4, 1e7):
            npt.assert_allclose(
                freq_response(plant, -omega),
                freq_response(plant, omega).conj(),
                rtol=1e-13, atol=1e-18,
            )

    def test_merges_duplicate_delay_terms(self):
        m = np.eye(2)
        sys = DelayedStateSpace(
            state_dim=2, input_dim=1, output_dim=1,
            a_terms=((m, 0.5), (2 * m, 0.5), (-m, 0.0)),
            b_terms=((np.ones((2, 1)), 0.0),),
            c_terms=((np.ones((1, 2)), 0.0),),
            d_terms=((np.zeros((1, 1)), 0.0),),
        )
        assert len(sys.a_terms) == 2
        npt.assert_allclose(sys.a_terms[1][0], 3 * np.eye(2))

    def test_rejects_negative_delay(self):
        with pytest.raises(ValueError):
            DelayedStateSpace(
                state_dim=1, input_dim=1, output_dim=1,
                a_terms=((np.eye(1), -0.1),),
                b_terms=((np.eye(1), 0.0),),
                c_terms=((np.eye(1), 0.0),),
                d_terms=((np.eye(1), 0.0),),
            )

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            DelayedStateSpace(
                state_dim=1, input_dim=1, output_dim=1,
                a_terms=((np.eye(1), 0.0),),
                b_terms=((np.eye(1), 0.0),),
                c_terms=((np.eye(1), 0.0),),
                d_terms=((np.eye(1), 0.0),),
                state_labels=("x0", "x1"),
            )

    def test_matrices_immutable(self, ideal_subsystems):
        matrix, _ = ideal_subsystems.sys1.a_terms[0]
        with pytest.raises(ValueError):
            matrix[0, 0] = 99.0

    def test_json_roundtrip(self, random_params):
        plant = build_plant(random_params, with_control_inputs=True)
        text = plant.to_json()
        doc = json.loads(text)
        assert doc["state_dim"] == 8
        back = DelayedStateSpace.from_json(text)
        assert back.delays == plant.delays
        for (ma, ta), (mb, tb) in zip(plant.a_terms, back.a_terms):
            assert ta == tb
            npt.assert_allclose(ma, mb, rtol=0, atol=0)

    def test_select_outputs(self, ideal_params):
        plant = build_plant(ideal_params)
        sub = plant.select_outputs([2, 3])
        assert sub.output_labels == ("out_21_q", "out_21_p")
        for omega in (1e5,):
            npt.assert_allclose(
                freq_response(sub, omega),
                freq_response(plant, omega)[[2, 3], :],
            )
