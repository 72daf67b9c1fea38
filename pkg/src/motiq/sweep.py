"""Exhaustive sweeps over the reverse-binary-tree family."""
from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import train_test_split

from .motif import FILTER_FAMILIES


@dataclass
class SweepSpace:
    conv_strides: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7)
    pool_strides: tuple[int, ...] = (0, 1, 2, 3)
    filters: tuple[str, ...] = FILTER_FAMILIES
    ansatzes: tuple[str, ...] = ("u_ttn",)

    def __iter__(self):
        """Cells in lexicographic order of (conv stride, pool stride, filter, ansatz)."""
        return iter(itertools.product(self.conv_strides, self.pool_strides,
                                      self.filters, self.ansatzes))

    def __len__(self):
        return (len(self.conv_strides) * len(self.pool_strides) * len(self.filters)
                * len(self.ansatzes))

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpace":
        allowed = {"conv_strides", "pool_strides", "filters", "ansatzes"}
        if set(d) - allowed:
            raise ValueError(f"unknown sweep keys {sorted(set(d) - allowed)}")
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass
class CellResult:
    conv_stride: int
    pool_stride: int
    filter: str
    ansatz: str
    status: str = "ok"
    n_params: int = 0
    accuracies: list[float] = field(default_factory=list)
    error: str = ""

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies)) if self.accuracies else float("nan")


def _run_cell(args) -> CellResult:
    from .estimator import QCNNClassifier

    (sc, sp, filt, ansatz), X, y, n_qubits, seeds, est_kw, test_size = args
    cell = CellResult(sc, sp, filt, ansatz)
    try:
        for seed in seeds:
            Xtr, Xte, ytr, yte = train_test_split(X, y, test_size=test_size,
                                                  random_state=seed, stratify=y)
            clf = QCNNClassifier(n_qubits=n_qubits, conv_stride=sc, pool_stride=sp,
                                 pool_filter=filt, conv_mapping=ansatz, random_state=seed,
                                 **est_kw)
            clf.fit(Xtr, ytr)
            cell.n_params = clf.program_.n_params
            cell.accuracies.append(float(clf.score(Xte, yte)))
    except (ValueError, FloatingPointError) as exc:
        cell.status, cell.error, cell.accuracies = "failed", str(exc), []
    return cell


def sweep(space: SweepSpace, X, y, *, n_qubits: int = 8, seeds=(0,), test_size: float = 0.3,
          workers: int = 1, **estimator_kw) -> list[CellResult]:
    """Train every architecture in ``space``; a failing cell is marked and skipped."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    jobs = [(cell, X, y, n_qubits, tuple(seeds), estimator_kw, test_size) for cell in space]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_run_cell, jobs))
    return [_run_cell(j) for j in jobs]


def write_long_csv(results: list[CellResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["conv_stride", "pool_stride", "filter", "ansatz", "n_params",
                    "mean_accuracy", "std_accuracy", "status", "error"])
        for r in results:
            w.writerow([r.conv_stride, r.pool_stride, r.filter, r.ansatz, r.n_params,
                        f"{r.mean:.6f}", f"{r.std:.6f}", r.status, r.error])


def write_table_csv(results: list[CellResult], path) -> None:
    """Rows are (ansatz, filter, pool stride), columns conv strides, cells mean accuracy."""
    strides = sorted({r.conv_stride for r in results})
    rows: dict[tuple, dict[int, str]] = {}
    for r in results:
        key = (r.ansatz, r.filter, r.pool_stride)
        rows.setdefault(key, {})[r.conv_stride] = (f"{r.mean:.4f}" if r.status == "ok"
                                                   else "failed")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ansatz", "filter", "pool_stride"] + [f"s_c={s}" for s in strides])
        for key, cells in rows.items():
            w.writerow(list(key) + [cells.get(s, "") for s in strides])
