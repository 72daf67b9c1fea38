"""scikit-learn style estimator around a motif-defined QCNN."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import MinMaxScaler
from sklearn.utils.multiclass import type_of_target
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .architectures import reverse_binary_tree
from .backend.encoding import SCALE_RANGES, encode_batch
from .backend.program import compile_program
from .expansion import resolve
from .motif import Motif
from .training import TrainConfig, fit, predict_proba


class QCNNClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier whose model is a compiled QCNN circuit.

    Parameters
    ----------
    motif : Motif, str or None
        Architecture. A string is parsed with the inline motif grammar. When
        None, a reverse binary tree over ``n_qubits`` is built from
        ``conv_stride``, ``pool_stride`` and ``pool_filter``.
    encoding : {"qubit", "iqp", "amplitude", "state"}
        How feature rows become states. ``"state"`` takes rows that already
        are statevectors (complex arrays of length ``2**n_qubits``).
    positive_outcome : {0, 1}
        Readout outcome whose probability is reported for class 1.
    validation_fraction : float
        Share of the training rows held out to pick the best epoch; 0 uses
        the training cost.
    """

    def __init__(self, motif=None, n_qubits=8, conv_stride=1, pool_stride=0,
                 pool_filter="right", conv_mapping="u_ttn", pool_mapping="pool_crz_crx",
                 encoding="qubit", optimizer="adam", learning_rate=0.01, epochs=100,
                 batch_size=None, gradient="adjoint", positive_outcome=1,
                 readout=None, validation_fraction=0.0, random_state=0):
        self.motif = motif
        self.n_qubits = n_qubits
        self.conv_stride = conv_stride
        self.pool_stride = pool_stride
        self.pool_filter = pool_filter
        self.conv_mapping = conv_mapping
        self.pool_mapping = pool_mapping
        self.encoding = encoding
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.gradient = gradient
        self.positive_outcome = positive_outcome
        self.readout = readout
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    # -- building -------------------------------------------------------------

    def build_motif(self) -> Motif:
        if self.motif is None:
            return reverse_binary_tree(self.n_qubits, self.conv_stride, self.pool_stride,
                                       self.pool_filter)
        if isinstance(self.motif, str):
            from .grammar import parse_motif_expr
            return parse_motif_expr(self.motif)
        if isinstance(self.motif, Motif):
            return self.motif
        raise TypeError("motif must be a Motif, an expression string or None")

    def build_program(self):
        graphs = resolve(self.build_motif())
        return compile_program(graphs, conv_mapping=self.conv_mapping,
                               pool_mapping=self.pool_mapping, readout=self.readout)

    def _config(self) -> TrainConfig:
        return TrainConfig(optimizer=self.optimizer, learning_rate=self.learning_rate,
                           epochs=self.epochs, batch_size=self.batch_size,
                           gradient=self.gradient, seed=self.random_state or 0)

    # -- data -----------------------------------------------------------------

    def _validate_states(self, X, reset):
        X = np.asarray(X, dtype=complex)
        if X.ndim != 2 or X.shape[1] != 2 ** self.program_.num_qubits:
            raise ValueError(f"state rows must have length {2 ** self.program_.num_qubits}")
        if not np.all(np.isfinite(X)):
            raise ValueError("states must be finite")
        if reset:
            self.n_features_in_ = X.shape[1]
        return X / np.linalg.norm(X, axis=1, keepdims=True)

    def _encode(self, X, reset: bool):
        if self.encoding == "state":
            return self._validate_states(X, reset)
        X = check_array(X, dtype=float)
        if reset:
            self.n_features_in_ = X.shape[1]
            self.scaler_ = MinMaxScaler(feature_range=SCALE_RANGES[self.encoding]).fit(X)
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        Xs = self.scaler_.transform(X)
        lo, hi = SCALE_RANGES[self.encoding]
        Xs = np.clip(Xs, lo, hi)
        if self.encoding == "amplitude":
            Xs = Xs + (np.linalg.norm(Xs, axis=1, keepdims=True) == 0)  # avoid zero rows
        return encode_batch(Xs, self.encoding, self.program_.num_qubits)

    # -- estimator API ----------------------------------------------------------

    def fit(self, X, y):
        if self.encoding not in ("qubit", "iqp", "amplitude", "state"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.positive_outcome not in (0, 1):
            raise ValueError("positive_outcome must be 0 or 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.encoding == "state":
            y = np.asarray(y).reshape(-1)
            if len(y) != len(X):
                raise ValueError("X and y have different lengths")
        else:
            X, y = check_X_y(X, y, dtype=float)
        if type_of_target(y) not in ("binary", "unary"):
            raise ValueError("only binary targets are supported")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) == 1:
            self.classes_ = np.array([self.classes_[0], self.classes_[0]])
        self.program_ = self.build_program()
        states = self._encode(X, reset=True)
        cfg = self._config()
        val = {}
        if self.validation_fraction > 0:
            rng = np.random.default_rng(cfg.seed)
            idx = rng.permutation(len(y_idx))
            cut = max(1, int(round(self.validation_fraction * len(idx))))
            val = {"val_states": states[idx[:cut]], "val_y": y_idx[idx[:cut]]}
            states, y_idx = states[idx[cut:]], y_idx[idx[cut:]]
        self.fit_result_ = fit(self.program_, states, y_idx, cfg,
                               positive_outcome=self.positive_outcome, **val)
        self.params_ = self.fit_result_.params
        self.history_ = self.fit_result_.history
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        states = self._encode(X, reset=False)
        p = predict_proba(self.program_, self.params_, states, self.positive_outcome)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        p = self.predict_proba(X)[:, 1]
        return self.classes_[(p >= 0.5).astype(int)]

    def decision_function(self, X):
        return self.predict_proba(X)[:, 1] - 0.5
