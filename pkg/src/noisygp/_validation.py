"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def as_generator(random_state) -> np.random.Generator:
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def check_training_data(X, y):
    X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("need at least two training instances")
    if np.all(y == y[0]):
        raise ValueError("training targets are constant; normalised error is undefined")
    return X, y


def check_eval_set(eval_set, n_features):
    if eval_set is None:
        return None
    X_test, y_test = eval_set
    X_test = check_array(X_test, dtype=np.float64)
    y_test = np.asarray(y_test, dtype=np.float64).ravel()
    if X_test.shape[1] != n_features:
        raise ValueError(f"eval_set has {X_test.shape[1]} features, training data has {n_features}")
    if y_test.shape[0] != X_test.shape[0]:
        raise ValueError("eval_set inputs and targets differ in length")
    return X_test, y_test


def check_population_params(est):
    if est.pop_size < 2:
        raise ValueError("pop_size must be >= 2")
    if est.generations < 0:
        raise ValueError("generations must be >= 0")
    if not 1 <= est.tournament_size <= est.pop_size:
        raise ValueError("tournament_size must lie in 1..pop_size")
    if not 0 <= est.elitism < est.pop_size:
        raise ValueError("elitism must lie in 0..pop_size-1")
