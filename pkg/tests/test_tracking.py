import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heli_lqr.errors import DimensionError, InputError, ValidationError
from heli_lqr.model import N_STATES, RigidBodyState, StateSpaceModel
from heli_lqr.tracking import N_AUG, VELOCITY_COLUMNS, TrackingWeights, augment, compose, split, weights_from_dict

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_eta_entry(cruise_model):
    aug = augment(cruise_model, TrackingWeights.scaled(5.0, 1.0, 1.0))
    assert aug.A_aug[0, 3] == -5.0


def test_block_structure(cruise_model):
    aug = augment(cruise_model, TrackingWeights.scaled(0.7, 1.0, 1.0))
    A, B = aug.A_aug, aug.B_aug
    assert A.shape == (17, 17) and B.shape == (17, 4)
    assert not A[:3, :3].any()
    assert not B[:3].any()
    np.testing.assert_array_equal(A[3:, 3:], cruise_model.A)
    assert not A[3:, :3].any()
    np.testing.assert_array_equal(B[3:], cruise_model.B)
    top = np.zeros((3, 17))
    top[0, 3], top[1, 4], top[2, 11] = -0.7, -0.7, -0.7
    np.testing.assert_array_equal(A[:3], top)


def test_velocity_columns_are_u_v_w():
    # 0-based columns 3, 4, 11 are columns 4, 5, 12 of the 1-based layout
    assert VELOCITY_COLUMNS == (3, 4, 11)


def test_augment_linear_in_eta(cruise_model):
    def A(eta):
        return augment(cruise_model, TrackingWeights.scaled(eta, 1.0, 1.0)).A_aug

    np.testing.assert_array_equal(A(2.0) - A(1.0), A(1.0) - A(0.0))


def test_augment_dimension_check():
    small = StateSpaceModel(A=np.zeros((3, 3)), B=np.zeros((3, 1)), state_labels=("x", "y", "z"), input_labels=("u",))
    with pytest.raises(DimensionError):
        augment(small, TrackingWeights.scaled(1.0, 1.0, 1.0))


def test_compose_examples():
    assert np.array_equal(compose(np.zeros(3), np.zeros(N_STATES)), np.zeros(17))
    assert np.array_equal(compose((1, 2, 3), RigidBodyState())[:3], [1.0, 2.0, 3.0])


@given(arrays(float, 3, elements=finite), arrays(float, N_STATES, elements=finite))
def test_split_compose_round_trip(e, x):
    e2, s = split(compose(e, x))
    assert np.array_equal(e2, e)
    assert np.array_equal(np.asarray(s), x)
    assert isinstance(s, RigidBodyState)


def test_compose_shape_errors():
    with pytest.raises(DimensionError):
        compose(np.zeros(2), np.zeros(N_STATES))
    with pytest.raises(DimensionError):
        split(np.zeros(16))


def test_rejects_asymmetric_q():
    Q = np.eye(N_AUG)
    Q[0, 1] = 0.5
    with pytest.raises(ValidationError, match="symmetric"):
        TrackingWeights(1.0, Q, np.eye(4))


def test_rejects_indefinite_q():
    Q = np.eye(N_AUG)
    Q[5, 5] = -1.0
    with pytest.raises(ValidationError, match="positive semidefinite"):
        TrackingWeights(1.0, Q, np.eye(4))


@pytest.mark.parametrize("R", [np.diag([1.0, 1.0, 0.0, 1.0]), np.diag([1.0, -1.0, 1.0, 1.0]),
                               np.eye(4) + 0.1 * (np.ones((4, 4)) - np.eye(4))])
def test_rejects_bad_r(R):
    with pytest.raises(ValidationError):
        TrackingWeights(1.0, np.eye(N_AUG), R)


def test_rejects_indefinite_h():
    H = -np.eye(N_AUG)
    with pytest.raises(ValidationError):
        TrackingWeights(1.0, np.eye(N_AUG), np.eye(4), H)


@given(arrays(float, (N_AUG, N_AUG), elements=st.floats(-10, 10)))
def test_gram_matrices_accepted(M):
    w = TrackingWeights(1.0, M @ M.T, np.eye(4))
    assert np.linalg.eigvalsh(w.Q).min() >= -1e-8 * max(1.0, np.abs(w.Q).max())


def test_weights_from_dict_shorthand_and_matrix():
    w = weights_from_dict({"eta": 5, "q_scale": 1, "r_scale": 2})
    np.testing.assert_array_equal(w.R, 2 * np.eye(4))
    assert w.summary() == {"eta": 5.0, "q_scale": 1.0, "r_scale": 2.0}
    w2 = weights_from_dict({"eta": 1, "Q": np.eye(N_AUG).tolist(), "R": np.diag([1, 2, 3, 4]).tolist()})
    assert w2.summary()["r_scale"] is None


@pytest.mark.parametrize("doc", [
    {"q_scale": 1, "r_scale": 1},
    {"eta": 1, "r_scale": 1},
    {"eta": 1, "q_scale": 1, "Q": np.eye(N_AUG).tolist(), "r_scale": 1},
    {"eta": 1, "q_scale": "a lot", "r_scale": 1},
])
def test_weights_from_dict_errors(doc):
    with pytest.raises(InputError):
        weights_from_dict(doc)
