"""scikit-learn compatible front end.

:class:`CEDLDetector` trains an MLP encoder with the radial-logit objective
(or one of the baselines) and scores samples by their distance to the
centre. It follows the estimator conventions (constructor only stores
hyperparameters, learned state ends with an underscore, ``fit`` returns
``self``), so it works with ``clone``, ``Pipeline`` and ``GridSearchCV``.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset
from .encoder import forward, init_encoder, mlp_specs
from .evaluation import best_f1
from .exceptions import DegenerateSplitError, LabelError
from .numerics import STREAM_INIT, SeededRng, stable_sigmoid
from .objective import ObjectiveConfig, weight_ratio
from .trainer import TrainConfig, train


def check_binary_labels(y):
    """Validate labels as 0 (normal) / 1 (anomaly) and return them as int64."""
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise LabelError("labels must be 0 (normal) or 1 (anomaly)")
    return y.astype(np.int64)


def resolve_class_weights(y, class_weight):
    """Turn ``class_weight`` into ``(w0, w1)``.

    ``"balanced"`` gives ``w0 = 1`` and ``w1 = n_normal / n_anomalous``;
    ``None`` gives unit weights; a pair or ``{0: w0, 1: w1}`` is used as is.
    """
    if class_weight is None:
        return 1.0, 1.0
    if isinstance(class_weight, str):
        if class_weight != "balanced":
            raise ValueError(f"unknown class_weight {class_weight!r}")
        return 1.0, weight_ratio(np.sum(y == 0), np.sum(y == 1))
    if isinstance(class_weight, dict):
        return float(class_weight[0]), float(class_weight[1])
    w0, w1 = class_weight
    return float(w0), float(w1)


class CEDLDetector(ClassifierMixin, BaseEstimator):
    """Supervised anomaly detector with distance-to-centre scoring.

    Parameters
    ----------
    objective : {"cedl", "bce", "svdd", "sad"}, default="cedl"
        Training objective. ``"bce"`` adds a linear logit head and scores
        with that logit; the other three score by distance to the centre.
    hidden_layer_sizes : tuple of int, default=(1000, 256, 64)
    latent_dim : int, default=32
    hidden_activation : str, default="relu"
    output_activation : str, default="tanh"
    alpha : float, default=1.0
        Radial scale of the logit ``alpha / sqrt(D) * ||r - c||``.
    class_weight : "balanced", None, pair or dict, default="balanced"
    centre_mode : {"fixed", "learnable"}, default="fixed"
        The centre starts at the origin either way.
    learning_rate : float, default=1e-4
    batch_size : int, default=64
    epochs : int, default=100
    shuffle : bool, default=True
    random_state : int, default=42

    Attributes
    ----------
    model_ : EncoderModel
        Encoder at the epoch with the lowest training loss.
    objective_config_ : ObjectiveConfig
    head_params_ : dict
        Linear head ``u``/``b`` for ``objective="bce"``, empty otherwise.
    train_report_ : TrainReport
    threshold_ : float
        Decision threshold on :meth:`decision_function` maximising F1 on the
        training data (the largest training score when ``fit`` saw only
        normal samples). ``predict`` uses it, since ``sigmoid(a) >= 0.5`` for
        every sample and a fixed 0.5 cut-off would flag everything.
    classes_ : ndarray of shape (2,)
    n_features_in_ : int
    """

    def __init__(self, objective="cedl", hidden_layer_sizes=(1000, 256, 64), latent_dim=32,
                 hidden_activation="relu", output_activation="tanh", alpha=1.0,
                 class_weight="balanced", centre_mode="fixed", learning_rate=1e-4,
                 batch_size=64, epochs=100, shuffle=True, random_state=42):
        self.objective = objective
        self.hidden_layer_sizes = hidden_layer_sizes
        self.latent_dim = latent_dim
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.alpha = alpha
        self.class_weight = class_weight
        self.centre_mode = centre_mode
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.shuffle = shuffle
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = check_binary_labels(y)
        if self.objective != "svdd" and (np.all(y == 0) or np.all(y == 1)):
            raise DegenerateSplitError("training data must contain both normal and anomalous samples")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        # class weights and a learnable centre only apply to the radial objective
        if self.objective == "cedl":
            w0, w1 = resolve_class_weights(y, self.class_weight)
            centre_mode = self.centre_mode
        else:
            w0, w1, centre_mode = 1.0, 1.0, "fixed"
        obj_cfg = ObjectiveConfig.at_origin(self.latent_dim, alpha=self.alpha, w0=w0, w1=w1,
                                            centre_mode=centre_mode)
        specs = mlp_specs(X.shape[1], self.hidden_layer_sizes, self.latent_dim,
                          self.hidden_activation, self.output_activation)
        model = init_encoder(specs, SeededRng(self.random_state).stream(STREAM_INIT))
        cfg = TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                          learning_rate=self.learning_rate, seed=self.random_state,
                          objective=self.objective, objective_config=obj_cfg, shuffle=self.shuffle)
        report = train(Dataset(X, y, provenance="fit"), model, cfg)
        self.train_report_ = report
        self.model_ = report.model
        self.objective_config_ = report.objective_config
        self.head_params_ = report.head_params
        scores = self.decision_function(X)
        if np.any(y == 1):
            self.threshold_ = best_f1(scores, y)[1]
        else:
            # normal-only training: flag anything beyond the training range
            self.threshold_ = float(scores.max())
        return self

    def _check(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, but the detector was fitted with "
                             f"{self.n_features_in_}")
        return X

    def transform(self, X):
        """Latent representations, shape ``(n_samples, latent_dim)``."""
        X = self._check(X)
        R, _ = forward(self.model_, X)
        return R

    def distance(self, X):
        """Euclidean distance of each representation to the centre."""
        return np.linalg.norm(self.transform(X) - self.objective_config_.centre, axis=1)

    def decision_function(self, X):
        """Anomaly score, higher is more anomalous.

        Distance to the centre, or the linear logit for ``objective="bce"``.
        """
        if self.objective == "bce":
            R = self.transform(X)
            return R @ self.head_params_["u"] + float(self.head_params_["b"][0])
        return self.distance(X)

    def predict_proba(self, X):
        """Columns ``[P(normal), P(anomaly)]``.

        For the distance objectives ``P(anomaly) = sigmoid(alpha/sqrt(D) * distance)``.
        """
        s = self.decision_function(X)
        p = stable_sigmoid(s if self.objective == "bce" else self.objective_config_.scale * s)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > self.threshold_).astype(np.int64)
