import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clocksync.channel_algebra import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    ChannelParams,
    PauliTransferMatrix,
    apply_channel,
    bloch_z_rotation,
    choi_of,
    compose,
    cptp_region_closed_form,
    is_cptp,
    is_phase_covariant,
    make_channel,
    make_general_channel,
    project_equatorial,
    projected_channel_action,
)
from clocksync.errors import NonRotation, NotPhaseCovariant, OutOfRange

from conftest import kraus_to_ptm, random_density, random_operator

I2 = np.eye(2)


def rz(angle):
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


admissible = st.builds(
    lambda t, s, frac, alpha: (t, s, frac, alpha),
    st.floats(-0.5, 0.5),
    st.floats(-0.4, 0.5),
    st.floats(0.0, 1.0),
    st.floats(0.0, 2 * math.pi),
).map(
    # scale lambda into the CP region for the chosen (t, s)
    lambda v: ChannelParams(
        v[0] * (1 - v[1]) if 1 - v[1] > 0 else 0.0,
        v[1],
        v[2] * 0.5 * math.sqrt(max(0.0, (1 + v[1]) ** 2 - (v[0] * (1 - v[1])) ** 2)),
        v[3],
    )
)


class TestChannelParams:
    def test_negative_lambda_folds_into_alpha(self):
        p = ChannelParams(0.0, 1.0, -0.5, 0.25)
        assert p.lam == 0.5
        assert p.alpha == pytest.approx(0.25 + math.pi)

    def test_alpha_reduced(self):
        assert ChannelParams(alpha=-0.5).alpha == pytest.approx(2 * math.pi - 0.5)
        assert ChannelParams(alpha=4 * math.pi).alpha == 0.0

    @pytest.mark.parametrize("kwargs", [{"t": 1.5}, {"s": -1.2}, {"lam": 2.0}, {"alpha": math.nan}])
    def test_out_of_bounds(self, kwargs):
        with pytest.raises(OutOfRange):
            ChannelParams(**kwargs)

    def test_json_roundtrip(self):
        p = ChannelParams(-0.36, 0.64, 0.8, 0.2)
        text = json.dumps(p.to_dict())
        assert set(json.loads(text)) == {"t", "s", "lambda", "alpha"}
        assert ChannelParams.from_dict(json.loads(text)) == p


class TestMakeChannel:
    def test_identity(self):
        np.testing.assert_array_equal(make_channel(ChannelParams.identity()).entries, np.eye(4))

    def test_depolarizing_matches_kraus_oracle(self):
        p = 0.5
        kraus = [math.sqrt(1 - 3 * p / 4) * I2] + [math.sqrt(p / 4) * P for P in (PAULI_X, PAULI_Y, PAULI_Z)]
        oracle = kraus_to_ptm(kraus)
        np.testing.assert_allclose(oracle, np.diag([1, 0.5, 0.5, 0.5]), atol=1e-15)
        np.testing.assert_allclose(make_channel(ChannelParams(0, 0.5, 0.5, 0)).entries, oracle, atol=1e-15)

    def test_quarter_turn(self):
        m = make_channel(ChannelParams(0, 1, 1, math.pi / 2)).entries
        expected = np.eye(4)
        expected[2:, 2:] = [[0, -1], [1, 0]]
        np.testing.assert_allclose(m, expected, atol=1e-15)

    def test_rotation_matches_unitary_conjugation(self):
        alpha = 0.7
        oracle = kraus_to_ptm([rz(alpha)])
        np.testing.assert_allclose(make_channel(ChannelParams(alpha=alpha)).entries, oracle, atol=1e-14)

    def test_ptm_export(self):
        m = make_channel(ChannelParams(0.1, 0.8, 0.7, 0.3))
        data = json.loads(m.dumps())
        assert data["basis"] == ["I", "Z", "X", "Y"]
        assert len(data["entries"]) == 16
        assert data["entries"][4] == pytest.approx(0.1)  # row Z, column I
        assert PauliTransferMatrix.from_dict(data).allclose(m, 0)


class TestGeneralChannel:
    def test_identity(self):
        m = make_general_channel((0, 0, 0), np.eye(3), (1, 1, 1), np.eye(3))
        np.testing.assert_array_equal(m.entries, np.eye(4))

    def test_restricted_special_case(self):
        m = make_general_channel((0.2, 0, 0), np.eye(3), (0.7, 0.6, 0.6), np.eye(3))
        assert m.allclose(make_channel(ChannelParams(0.2, 0.7, 0.6, 0.0)), 1e-15)

    def test_pre_rotation(self):
        alpha = 1.1
        r1 = bloch_z_rotation(alpha)
        m = make_general_channel((0, 0, 0), r1, (0.5, 0.4, 0.4), np.eye(3))
        oracle = np.eye(4)
        oracle[1:, 1:] = np.eye(3) @ np.diag([0.5, 0.4, 0.4]) @ r1
        np.testing.assert_allclose(m.entries, oracle, atol=1e-15)
        assert m.allclose(make_channel(ChannelParams(0, 0.5, 0.4, alpha)), 1e-15)

    def test_rejects_reflection(self):
        with pytest.raises(NonRotation):
            make_general_channel((0, 0, 0), np.diag([1.0, 1.0, -1.0]), (1, 1, 1), np.eye(3))

    def test_rejects_non_orthogonal(self):
        with pytest.raises(NonRotation):
            make_general_channel((0, 0, 0), np.eye(3), (1, 1, 1), 1.1 * np.eye(3))


class TestCompose:
    def test_identity_is_neutral(self):
        m = make_channel(ChannelParams(0.1, 0.7, 0.6, 0.4))
        assert compose(make_channel(ChannelParams.identity()), m).allclose(m, 0)

    def test_diagonal_squares(self):
        f = make_channel(ChannelParams(0, 0.6, 0.7, 0))
        assert compose(f, f).allclose(make_channel(ChannelParams(0, 0.36, 0.49, 0)), 1e-15)

    def test_rotations_add(self):
        a, b = 4.0, 3.5
        got = compose(make_channel(ChannelParams(alpha=a)), make_channel(ChannelParams(alpha=b)))
        assert got.allclose(make_channel(ChannelParams(alpha=(a + b) % (2 * math.pi))), 1e-14)

    def test_order_is_first_then_second(self, rng):
        first = make_general_channel((0, 0, 0), np.eye(3), (0.5, 0.9, 0.3), np.eye(3))
        second = make_channel(ChannelParams(alpha=0.8))
        rho = random_density(1, rng)
        want = apply_channel(second, apply_channel(first, rho))
        np.testing.assert_allclose(apply_channel(second @ first, rho), want, atol=1e-14)


def choi_oracle(kraus):
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    proj = np.outer(phi, phi.conj())
    return sum(np.kron(k, I2) @ proj @ np.kron(k, I2).conj().T for k in kraus)


class TestChoi:
    def test_identity_is_bell_projector(self):
        c = choi_of(make_channel(ChannelParams.identity())).entries
        phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
        np.testing.assert_allclose(c, np.outer(phi, phi), atol=1e-15)

    def test_fully_depolarizing(self):
        c = choi_of(make_channel(ChannelParams(0, 0, 0, 0))).entries
        np.testing.assert_allclose(c, np.eye(4) / 4, atol=1e-15)

    def test_half_depolarizing_entries(self):
        c = choi_of(make_channel(ChannelParams(0, 0.5, 0.5, 0))).entries
        np.testing.assert_allclose(np.diag(c).real, np.array([1.5, 0.5, 0.5, 1.5]) / 4, atol=1e-15)
        assert c[0, 3] == pytest.approx(0.25)
        assert c[3, 0] == pytest.approx(0.25)
        p = 0.5
        kraus = [math.sqrt(1 - 3 * p / 4) * I2] + [math.sqrt(p / 4) * P for P in (PAULI_X, PAULI_Y, PAULI_Z)]
        np.testing.assert_allclose(c, choi_oracle(kraus), atol=1e-15)

    def test_amplitude_damping_matches_kraus(self):
        g = 0.36
        kraus = [np.diag([math.sqrt(1 - g), 1.0]), math.sqrt(g) * np.array([[0, 0], [1, 0]])]
        np.testing.assert_allclose(
            choi_of(make_channel(ChannelParams.amplitude_damping(g))).entries, choi_oracle(kraus), atol=1e-15
        )

    @given(admissible)
    def test_unit_trace_hermitian_marginal(self, params):
        choi = choi_of(make_channel(params))
        assert np.trace(choi.entries).real == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(choi.entries, choi.entries.conj().T, atol=1e-14)
        np.testing.assert_allclose(choi.input_marginal(), I2 / 2, atol=1e-14)

    def test_linear_in_matrix(self, rng):
        a = make_channel(ChannelParams(0.1, 0.5, 0.4, 0.2))
        b = make_channel(ChannelParams(-0.2, 0.3, 0.6, 1.2))
        mix = PauliTransferMatrix(0.3 * a.entries + 0.7 * b.entries)
        np.testing.assert_allclose(choi_of(mix).entries, 0.3 * choi_of(a).entries + 0.7 * choi_of(b).entries, atol=1e-15)


class TestIsCptp:
    def test_depolarizing_accepted(self):
        report = is_cptp(make_channel(ChannelParams(0, 0.5, 0.5, 0)))
        assert report.cptp
        assert min(report.eigenvalues) >= 0

    def test_overdisplaced_rejected(self):
        report = is_cptp(make_channel(ChannelParams(0.5, 1, 1, 0)))
        assert not report.cptp
        assert report.min_eigenvalue < 0

    def test_amplitude_damping_on_boundary(self):
        report = is_cptp(make_channel(ChannelParams(-0.36, 0.64, 0.8, 0)))
        assert report.cptp
        assert min(abs(e) for e in report.eigenvalues) <= 1e-9
        oracle = kraus_to_ptm([np.diag([0.8, 1.0]), 0.6 * np.array([[0, 0], [1, 0]])])
        np.testing.assert_allclose(make_channel(ChannelParams(-0.36, 0.64, 0.8, 0)).entries, oracle, atol=1e-15)

    def test_trace_nonpreserving_rejected(self):
        m = np.eye(4)
        m[0, 1] = 0.1
        report = is_cptp(PauliTransferMatrix(m))
        assert not report.cptp
        assert report.tp_residual == pytest.approx(0.1)

    def test_tol_must_be_positive(self):
        with pytest.raises(OutOfRange):
            is_cptp(make_channel(ChannelParams()), tol=0)

    def test_closed_form_region_matches_choi(self):
        grid = np.linspace(-1, 1, 9)
        for t in grid:
            for s in grid:
                for lam in np.linspace(0, 1, 6):
                    margins = cptp_region_closed_form(t, s, lam)
                    if min(abs(m) for m in margins) < 1e-6:
                        continue
                    expect = min(margins) > 0
                    assert bool(is_cptp(make_channel(ChannelParams(t, s, lam, 0.0)))) == expect, (t, s, lam)


class TestPhaseCovariance:
    @given(admissible)
    def test_restricted_form_covariant(self, params):
        assert is_phase_covariant(make_channel(params))

    def test_transverse_displacement_breaks_it(self):
        assert not is_phase_covariant(make_general_channel((0, 0.1, 0), np.eye(3), (1, 1, 1), np.eye(3)))

    def test_unequal_equatorial_compression_breaks_it(self):
        assert not is_phase_covariant(make_general_channel((0, 0, 0), np.eye(3), (1, 0.9, 0.8), np.eye(3)))

    def test_tilted_rotation_breaks_it(self):
        c, s = math.cos(0.3), math.sin(0.3)
        rx = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])  # mixes Z with X
        assert not is_phase_covariant(make_general_channel((0, 0, 0), rx, (1, 1, 1), np.eye(3)))


class TestProjector:
    def test_keeps_equatorial_part(self):
        a, b, c, d = 0.3, -1.2, 0.7 + 0.1j, 2.0
        op = a * I2 + b * PAULI_Z + c * PAULI_X + d * PAULI_Y
        np.testing.assert_allclose(project_equatorial(op), c * PAULI_X + d * PAULI_Y, atol=1e-15)

    def test_identity_annihilated(self):
        np.testing.assert_array_equal(project_equatorial(I2), np.zeros((2, 2)))

    def test_idempotent(self, rng):
        op = random_operator(rng)
        once = project_equatorial(op)
        np.testing.assert_allclose(project_equatorial(once), once, atol=1e-15)

    def test_off_diagonal_form(self, rng):
        op = random_operator(rng)
        np.testing.assert_allclose(project_equatorial(op), op - np.diag(np.diag(op)), atol=1e-15)

    def test_hermitian_wrt_operator_inner_product(self, rng):
        for _ in range(20):
            n, o = random_operator(rng), random_operator(rng)
            lhs = np.trace(n.conj().T @ project_equatorial(o))
            rhs = np.trace(project_equatorial(n).conj().T @ o)
            assert abs(lhs - rhs) <= 1e-12


class TestProjectedAction:
    def test_trivial(self):
        out = projected_channel_action(make_channel(ChannelParams.identity()), PAULI_X)
        np.testing.assert_allclose(out, PAULI_X, atol=1e-15)

    def test_raising_operator_scaled(self):
        out = projected_channel_action(make_channel(ChannelParams(0, 1, 0.9, 0)), PAULI_X + 1j * PAULI_Y)
        np.testing.assert_allclose(out, 0.9 * (PAULI_X + 1j * PAULI_Y), atol=1e-15)
        assert np.trace(PAULI_X @ out) == pytest.approx(1.8)

    def test_agrees_with_dense_composition(self, rng):
        m = make_channel(ChannelParams(0.05, 0.8, 0.9, 0.3))
        for _ in range(10):
            op = random_operator(rng)
            np.testing.assert_allclose(
                projected_channel_action(m, op), project_equatorial(apply_channel(m, op)), atol=1e-12
            )

    def test_rejects_non_covariant(self):
        m = make_general_channel((0, 0.1, 0), np.eye(3), (1, 1, 1), np.eye(3))
        with pytest.raises(NotPhaseCovariant):
            projected_channel_action(m, PAULI_X)


class TestChannelProperties:
    @settings(max_examples=50)
    @given(admissible, st.integers(0, 2**32 - 1))
    def test_trace_and_hermiticity_preserved(self, params, seed):
        rho = random_density(1, np.random.default_rng(seed))
        out = apply_channel(make_channel(params), rho)
        assert abs(np.trace(out) - 1) <= 1e-12
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)

    @settings(max_examples=50)
    @given(admissible, st.integers(0, 2**32 - 1))
    def test_rotation_before_or_after(self, params, seed):
        rho = random_density(1, np.random.default_rng(seed))
        f = make_channel(params.replace(alpha=0.0))
        u = rz(params.alpha)
        before = apply_channel(f, u @ rho @ u.conj().T)
        after = u @ apply_channel(f, rho) @ u.conj().T
        direct = apply_channel(make_channel(params), rho)
        np.testing.assert_allclose(direct, after, atol=1e-12)
        np.testing.assert_allclose(direct, before, atol=1e-12)

    @given(admissible, st.integers(0, 2**32 - 1))
    def test_projector_after_unrotated_channel(self, params, seed):
        op = random_operator(np.random.default_rng(seed))
        f = make_channel(params.replace(alpha=0.0))
        np.testing.assert_allclose(
            project_equatorial(apply_channel(f, op)), params.lam * project_equatorial(op), atol=1e-12
        )

    @given(admissible, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_subspaces_stay_separate(self, params, a, b, c, d):
        m = make_channel(params)
        iz = apply_channel(m, a * I2 + b * PAULI_Z)
        xy = apply_channel(m, c * PAULI_X + d * PAULI_Y)
        np.testing.assert_allclose(project_equatorial(iz), 0, atol=1e-12)
        np.testing.assert_allclose(xy - project_equatorial(xy), 0, atol=1e-12)
