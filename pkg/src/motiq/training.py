"""Binary classification with compiled circuits: cost, gradients, optimisers."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold, train_test_split

from .backend.gates import CONTROLLED_ROTATIONS, ROTATIONS
from .backend.program import CircuitProgram, run
from .backend.simulator import apply_unitary, readout

CLAMP = 1e-10
OPTIMIZERS = ("adam", "gradient_descent")
GRADIENTS = ("adjoint", "parameter_shift", "finite_difference")

# four-term rule for controlled rotations, whose generator has eigenvalues {0, +-1/2}
_C_PLUS = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
_C_MINUS = (np.sqrt(2) - 1) / (4 * np.sqrt(2))
_SHIFT_RULES = {
    **{k: ((0.5, np.pi / 2), (-0.5, -np.pi / 2)) for k in ROTATIONS},
    **{k: ((_C_PLUS, np.pi / 2), (-_C_PLUS, -np.pi / 2),
           (-_C_MINUS, 3 * np.pi / 2), (_C_MINUS, -3 * np.pi / 2))
       for k in CONTROLLED_ROTATIONS},
}


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int | None = None
    gradient: str = "adjoint"
    seed: int = 0
    folds: int = 5
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.gradient not in GRADIENTS:
            raise ValueError(f"gradient must be one of {GRADIENTS}")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.folds < 1:
            raise ValueError("folds must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    """Feature rows with binary labels and optional disjoint split indices."""

    X: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X)
        self.y = np.asarray(self.y).astype(int).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be 2-D with one row per label")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")
        if not set(np.unique(self.y)) <= {0, 1}:
            raise ValueError("labels must be 0 or 1")
        if self.train_idx is not None and self.test_idx is not None:
            if np.intersect1d(self.train_idx, self.test_idx).size:
                raise ValueError("train and test indices overlap")

    def split(self, test_size: float = 0.3, seed: int = 0) -> "Dataset":
        """Stratified split; returns a copy carrying the indices."""
        idx = np.arange(len(self.y))
        tr, te = train_test_split(idx, test_size=test_size, random_state=seed, stratify=self.y)
        return Dataset(self.X, self.y, np.sort(tr), np.sort(te), list(self.feature_names))

    @classmethod
    def from_csv(cls, path, label: str = "label") -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path} is empty")
        header, body = rows[0], rows[1:]
        if label not in header:
            raise ValueError(f"{path} has no {label!r} column")
        j = header.index(label)
        names = [h for i, h in enumerate(header) if i != j]
        X = np.array([[float(v) for i, v in enumerate(r) if i != j] for r in body], dtype=float)
        y = np.array([int(float(r[j])) for r in body])
        return cls(X.reshape(len(body), len(names)), y, feature_names=names)


@dataclass
class FitResult:
    params: np.ndarray
    initial_params: np.ndarray
    history: list[dict]
    best_epoch: int

    def history_csv(self, path) -> None:
        write_history(self.history, path)


# -- cost and predictions ----------------------------------------------------

def cross_entropy(y, yhat) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ValueError(f"{y.shape[0]} labels but {yhat.shape[0]} predictions")
    p = np.clip(yhat, CLAMP, 1 - CLAMP)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))


def _d_cost(y, yhat) -> np.ndarray:
    """Per-sample derivative of the mean cost with respect to each prediction."""
    p = np.clip(yhat, CLAMP, 1 - CLAMP)
    inside = (yhat > CLAMP) & (yhat < 1 - CLAMP)
    return np.where(inside, (p - y) / (p * (1 - p)), 0.0) / len(y)


def _prob(states, qubit: int, positive_outcome: int) -> np.ndarray:
    p1 = readout(states, qubit)
    return p1 if positive_outcome == 1 else 1.0 - p1


def predict_proba(prog: CircuitProgram, params, states, positive_outcome: int = 1) -> np.ndarray:
    """Probability of the positive class for each input state."""
    states = np.atleast_2d(states)
    return _prob(run(prog, params, states), prog.readout, positive_outcome)


def classify(yhat) -> np.ndarray:
    return (np.asarray(yhat) >= 0.5).astype(int)


def evaluate(prog: CircuitProgram, params, states, y, positive_outcome: int = 1
             ) -> tuple[float, float]:
    """(accuracy, mean cost); a prediction of exactly 0.5 counts as class 1."""
    yhat = predict_proba(prog, params, states, positive_outcome)
    y = np.asarray(y).reshape(-1)
    return float(np.mean(classify(yhat) == y)), cross_entropy(y, yhat)


# -- gradients ---------------------------------------------------------------

def prediction_jacobian(prog: CircuitProgram, params, states, positive_outcome: int = 1
                        ) -> np.ndarray:
    """``d yhat_b / d theta_k`` by the parameter-shift rule, shape ``(B, n_params)``.

    Each gate site contributes its own shift terms to the shared parameter it
    reads, so a weight-shared group accumulates over every edge it covers.
    """
    params = prog._check(params)
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    mats = prog.matrices(params)
    n = prog.num_qubits
    prefix = [states]
    for op, u in zip(prog.ops, mats):
        prefix.append(apply_unitary(prefix[-1], u, op.wires, n))
    jac = np.zeros((states.shape[0], prog.n_params))
    for i, op in enumerate(prog.ops):
        offset = prog.groups[op.group].offset
        local = params[prog.group_slice(op.group)]
        for gi, g in enumerate(op.mapping.gates):
            if not g.params:
                continue
            if g.kind not in _SHIFT_RULES or len(g.params) != 1:
                raise ValueError(f"gate {g.kind!r} in {op.mapping.name!r} has no shift rule; "
                                 "use finite differences")
            acc = np.zeros(states.shape[0])
            for coeff, delta in _SHIFT_RULES[g.kind]:
                u = op.mapping.matrix(local, shift=(gi, delta))
                psi = apply_unitary(prefix[i], u, op.wires, n)
                for op2, u2 in zip(prog.ops[i + 1:], mats[i + 1:]):
                    psi = apply_unitary(psi, u2, op2.wires, n)
                acc += coeff * _prob(psi, prog.readout, positive_outcome)
            jac[:, offset + g.params[0]] += acc
    return jac


def adjoint_jacobian(prog: CircuitProgram, params, states, positive_outcome: int = 1
                     ) -> np.ndarray:
    """``d yhat_b / d theta_k`` in one forward and one backward sweep.

    With ``yhat = <psi|P|psi>`` the backward state ``lam`` carries ``P psi``
    pulled back through the later ops, and each op contributes
    ``2 Re <lam| dU |psi_before>``. Exact for every gate kind, including
    Gell-Mann rotations.
    """
    params = prog._check(params)
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    mats = prog.matrices(params)
    n = prog.num_qubits
    forward = [states]
    for op, u in zip(prog.ops, mats):
        forward.append(apply_unitary(forward[-1], u, op.wires, n))
    bit = (np.arange(2 ** n) >> (n - prog.readout)) & 1
    lam = forward[-1] * (bit == positive_outcome)
    jac = np.zeros((states.shape[0], prog.n_params))
    derivs: dict[int, np.ndarray] = {}
    for i in reversed(range(len(prog.ops))):
        op = prog.ops[i]
        sl = prog.group_slice(op.group)
        if op.group not in derivs:
            derivs[op.group] = op.mapping.derivatives(params[sl])
        for k, d in enumerate(derivs[op.group]):
            moved = apply_unitary(forward[i], d, op.wires, n)
            jac[:, sl.start + k] += 2 * np.einsum("bi,bi->b", lam.conj(), moved).real
        lam = apply_unitary(lam, mats[i].conj().T, op.wires, n)
    return jac


def finite_difference_jacobian(prog: CircuitProgram, params, states, positive_outcome: int = 1,
                               h: float = 1e-5) -> np.ndarray:
    params = prog._check(params)
    states = np.atleast_2d(states)
    jac = np.zeros((states.shape[0], prog.n_params))
    for k in range(prog.n_params):
        e = np.zeros_like(params)
        e[k] = h
        up = predict_proba(prog, params + e, states, positive_outcome)
        down = predict_proba(prog, params - e, states, positive_outcome)
        jac[:, k] = (up - down) / (2 * h)
    return jac


def gradient(prog: CircuitProgram, params, states, y, method: str = "adjoint",
             positive_outcome: int = 1, h: float = 1e-5) -> np.ndarray:
    """Gradient of the mean cross-entropy over the batch."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if method == "adjoint":
        jac = adjoint_jacobian(prog, params, states, positive_outcome)
    elif method == "parameter_shift":
        jac = prediction_jacobian(prog, params, states, positive_outcome)
    elif method == "finite_difference":
        jac = finite_difference_jacobian(prog, params, states, positive_outcome, h)
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    yhat = predict_proba(prog, params, states, positive_outcome)
    return _d_cost(y, yhat) @ jac


# -- optimisation --------------------------------------------------------------

class Adam:
    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad ** 2
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class GradientDescent:
    def __init__(self, lr: float = 0.01):
        self.lr = lr

    def step(self, params, grad):
        return params - self.lr * grad


def make_optimizer(cfg: TrainConfig):
    return Adam(cfg.learning_rate) if cfg.optimizer == "adam" else GradientDescent(cfg.learning_rate)


def init_params(prog: CircuitProgram, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 2 * np.pi, prog.n_params)


def _choose_method(prog: CircuitProgram, method: str) -> str:
    if method == "parameter_shift" and not prog.shiftable:
        return "finite_difference"
    return method


def _checked_cost(y, yhat, epoch) -> float:
    c = cross_entropy(y, yhat)
    if not np.isfinite(c):
        raise FloatingPointError(f"non-finite cost at epoch {epoch}")
    return c


def fit(prog: CircuitProgram, states, y, cfg: TrainConfig | None = None, *,
        val_states=None, val_y=None, init=None, positive_outcome: int = 1) -> FitResult:
    """Train ``prog`` on encoded ``states``.

    Returns the parameters with the lowest validation cost seen (training
    cost when no validation set is given), epoch 0 being the initial point.
    With ``gradient="parameter_shift"``, programs containing gates without a
    shift rule fall back to finite differences.
    """
    cfg = cfg or TrainConfig()
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    y = np.asarray(y, dtype=float).reshape(-1)
    if states.shape[0] != y.shape[0]:
        raise ValueError(f"{states.shape[0]} states but {y.shape[0]} labels")
    rng = np.random.default_rng(cfg.seed)
    params = (np.asarray(init, dtype=float).copy() if init is not None
              else rng.uniform(0.0, 2 * np.pi, prog.n_params))
    start = params.copy()
    method = _choose_method(prog, cfg.gradient)
    opt = make_optimizer(cfg)
    has_val = val_states is not None

    def record(epoch, p):
        row = {"epoch": epoch,
               "train_cost": _checked_cost(y, predict_proba(prog, p, states, positive_outcome),
                                           epoch)}
        row["val_cost"] = (_checked_cost(val_y, predict_proba(prog, p, val_states,
                                                              positive_outcome), epoch)
                           if has_val else float("nan"))
        return row

    history = [record(0, params)]
    best = params.copy()
    best_cost = history[0]["val_cost" if has_val else "train_cost"]
    best_epoch = 0
    n = len(y)
    bs = cfg.batch_size or n
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if bs < n else np.arange(n)
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            g = gradient(prog, params, states[idx], y[idx], method, positive_outcome, cfg.fd_step)
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient at epoch {epoch}")
            params = opt.step(params, g)
        row = record(epoch, params)
        history.append(row)
        cost = row["val_cost" if has_val else "train_cost"]
        if cost < best_cost:
            best, best_cost, best_epoch = params.copy(), cost, epoch
    return FitResult(best, start, history, best_epoch)


def cross_validate(prog: CircuitProgram, states, y, cfg: TrainConfig | None = None,
                   positive_outcome: int = 1) -> list[float]:
    """Held-out fold accuracy for each of ``cfg.folds`` stratified folds."""
    cfg = cfg or TrainConfig()
    states = np.atleast_2d(states)
    y = np.asarray(y).astype(int).reshape(-1)
    if cfg.folds == 1:
        res = fit(prog, states, y, cfg, positive_outcome=positive_outcome)
        return [evaluate(prog, res.params, states, y, positive_outcome)[0]]
    folds = StratifiedKFold(cfg.folds, shuffle=True, random_state=cfg.seed)
    scores = []
    for tr, te in folds.split(np.zeros(len(y)), y):
        res = fit(prog, states[tr], y[tr], cfg, positive_outcome=positive_outcome)
        scores.append(evaluate(prog, res.params, states[te], y[te], positive_outcome)[0])
    return scores


def write_history(history: Sequence[dict], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_cost", "val_cost"])
        w.writeheader()
        for row in history:
            w.writerow(row)
