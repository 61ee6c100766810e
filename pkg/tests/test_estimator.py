import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from segfire.estimator import SegNetClassifier
from segfire.exceptions import InvalidInputError

SHAPE = (24, 32, 3)


def red_green(n, seed=0):
    """Reddish tiles are fire, greenish tiles are not; trivially separable."""
    rng = np.random.default_rng(seed)
    y = np.array(["fire", "nonfire"] * (n // 2), dtype=object)
    x = rng.integers(0, 60, size=(n, *SHAPE)).astype(np.uint8)
    x[y == "fire", ..., 0] += 180
    x[y == "nonfire", ..., 1] += 120
    return x, y


@pytest.fixture(scope="module")
def fitted():
    x, y = red_green(32)
    est = SegNetClassifier(input_shape=SHAPE, epochs=3, enhancements=(), seed=1)
    return est.fit(x, y)


def test_params_round_trip():
    est = SegNetClassifier(input_shape=SHAPE, lr=0.01, l2_scope="dense")
    params = clone(est).get_params()
    assert params["lr"] == 0.01 and params["l2_scope"] == "dense"
    assert params["batch_size"] == 8 and params["epochs"] == 15


def test_unfitted():
    with pytest.raises(NotFittedError):
        SegNetClassifier(input_shape=SHAPE).predict(np.zeros((1, *SHAPE), np.uint8))


def test_fit_learns_separable_task(fitted):
    x, y = red_green(16, seed=5)
    assert fitted.score(x, y) == 1.0
    assert set(fitted.predict(x)) <= {"fire", "nonfire"}
    assert list(fitted.classes_) == ["nonfire", "fire"]
    assert len(fitted.history_.records) == 3


def test_decision_function_sign_matches_predict(fitted):
    x, _ = red_green(8, seed=9)
    scores = fitted.decision_function(x)
    assert scores.shape == (8,)
    np.testing.assert_array_equal(fitted.predict(x) == "fire", scores >= 0)


def test_signed_labels():
    x, y = red_green(8)
    signed = np.where(y == "fire", 1, -1)
    est = SegNetClassifier(input_shape=SHAPE, epochs=1, enhancements=()).fit(x, signed)
    assert set(est.predict(x)) <= {-1, 1}


def test_single_image_accepted(fitted):
    x, _ = red_green(2)
    assert fitted.predict(x[0]).shape == (1,)


def test_wrong_shape(fitted):
    with pytest.raises(InvalidInputError):
        fitted.predict(np.zeros((1, 10, 10, 3), np.uint8))


def test_length_mismatch():
    x, y = red_green(4)
    with pytest.raises(InvalidInputError):
        SegNetClassifier(input_shape=SHAPE).fit(x, y[:3])


def test_from_model(small_model):
    est = SegNetClassifier.from_model(small_model)
    assert est.input_shape == small_model.input_shape
    assert est.predict(np.zeros((2, 24, 32, 3), np.uint8)).shape == (2,)
