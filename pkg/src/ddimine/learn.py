"""Linear classifiers: logistic and hinge loss with an L1 penalty.

The trained objective is

    (1/n) * sum_i loss(y_i, w.x_i + b) + lambda * ||w||_1

with the bias unpenalized.  The solver is proximal (sub)gradient descent with
a monotone backtracking line search, so the objective never increases across
iterations.  Training uses no randomness: the same data and config give the
same model bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .features import FeatureMatrix
from .metrics import roc_curve
from .rng import Rng

LOSS_KINDS = ("logistic", "hinge")

_CV_STREAM = 31
_MIN_STEP = 1e-15
_MONOTONE_SLACK = 1e-12


@dataclass
class TrainConfig:
    loss: str = "logistic"
    l1_lambda: float = 0.0
    max_iters: int = 10_000
    tolerance: float = 1e-6
    seed: int = 0
    standardize: bool = False


@dataclass
class TrainingMeta:
    iterations: int
    objective: float
    seed: int
    standardized: bool = False


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    loss_kind: str
    l1_lambda: float
    meta: TrainingMeta

    @property
    def nonzero_weights(self) -> int:
        return int(np.count_nonzero(self.weights))


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s, dtype=float)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


def _logistic_value(s: np.ndarray, y: np.ndarray) -> float:
    # log(1 + e^s) - y*s, computed stably
    return float(np.mean(np.maximum(s, 0.0) - y * s + np.log1p(np.exp(-np.abs(s)))))


def _hinge_value(s: np.ndarray, y: np.ndarray) -> float:
    margins = (2.0 * y - 1.0) * s
    return float(np.mean(np.maximum(0.0, 1.0 - margins)))


def loss_value(loss: str, s: np.ndarray, y: np.ndarray) -> float:
    """Mean unpenalized loss at scores ``s``."""
    if loss == "logistic":
        return _logistic_value(s, y)
    if loss == "hinge":
        return _hinge_value(s, y)
    raise ValidationError(f"unknown loss kind {loss!r}; expected one of {LOSS_KINDS}")


def loss_gradient(loss: str, X, y: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, float]:
    """(d/dw, d/db) of the mean unpenalized loss at scores ``s = Xw + b``.

    For hinge this is the subgradient that is zero at inactive margins; points
    with margin exactly 1 contribute zero.
    """
    n = len(y)
    if loss == "logistic":
        r = (_sigmoid(s) - y) / n
    elif loss == "hinge":
        ysign = 2.0 * y - 1.0
        active = ysign * s < 1.0
        r = np.where(active, -ysign, 0.0) / n
    else:
        raise ValidationError(f"unknown loss kind {loss!r}; expected one of {LOSS_KINDS}")
    return X.T @ r, float(r.sum())


def _soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _initial_bias(loss: str, y: np.ndarray) -> float:
    if loss == "logistic":
        ybar = float(y.mean())
        return float(np.log(ybar) - np.log1p(-ybar))
    return 0.0


def _check_matrix(matrix: FeatureMatrix) -> tuple:
    X, y = matrix.X, np.asarray(matrix.y, dtype=float)
    if matrix.dims < 1:
        raise ValidationError("feature matrix has no columns")
    if len(np.unique(matrix.y)) < 2:
        raise ValidationError("training data contains a single class")
    data = X.data if sp.issparse(X) else X
    if not np.all(np.isfinite(data)):
        raise ValidationError("feature matrix contains non-finite values")
    return X, y


def lambda_max(matrix: FeatureMatrix) -> float:
    """Smallest L1 penalty at which the all-zero weight vector is optimal.

    For logistic loss with the bias at its zero-weights optimum logit(mean(y)),
    this is max_j |(1/n) sum_i x_ij (y_i - mean(y))|.  Computed through the
    same code path as the trainer's first gradient so that training at
    ``lam >= lambda_max(matrix)`` yields exactly zero weights.
    """
    X, y = _check_matrix(matrix)
    b0 = _initial_bias("logistic", y)
    s = np.full(len(y), b0, dtype=float)
    gw, _ = loss_gradient("logistic", X, y, s)
    gw = np.asarray(gw).ravel()
    return float(np.max(np.abs(gw)))


def train(matrix: FeatureMatrix, config: TrainConfig) -> LinearModel:
    """Fit a linear model by monotone proximal (sub)gradient descent."""
    X, y = _check_matrix(matrix)
    if config.l1_lambda < 0:
        raise ValidationError(f"l1_lambda must be nonnegative, got {config.l1_lambda}")
    if config.loss not in LOSS_KINDS:
        raise ValidationError(f"unknown loss kind {config.loss!r}; expected one of {LOSS_KINDS}")
    scale = None
    if config.standardize:
        scale = _column_scale(X)
        X = _apply_scale(X, scale)
    w, b, iterations, objective = _fit(X, y, config)
    if scale is not None:
        w = w / scale
    meta = TrainingMeta(iterations, objective, config.seed, config.standardize)
    return LinearModel(w, b, config.loss, config.l1_lambda, meta)


def _column_scale(X) -> np.ndarray:
    if sp.issparse(X):
        mean = np.asarray(X.mean(axis=0)).ravel()
        mean_sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
    else:
        mean = X.mean(axis=0)
        mean_sq = (X * X).mean(axis=0)
    var = np.maximum(mean_sq - mean * mean, 0.0)
    std = np.sqrt(var)
    std[std == 0.0] = 1.0
    return std

def _apply_scale(X, scale: np.ndarray):
    if sp.issparse(X):
        return (X @ sp.diags(1.0 / scale)).tocsr()
    return X / scale


def _fit(
    X,
    y: np.ndarray,
    config: TrainConfig,
    w0: np.ndarray | None = None,
    b0: float | None = None,
) -> tuple[np.ndarray, float, int, float]:
    lam = config.l1_lambda
    loss = config.loss
    w = np.zeros(X.shape[1]) if w0 is None else w0.astype(float).copy()
    b = _initial_bias(loss, y) if b0 is None else float(b0)
    s = X @ w + b
    f = loss_value(loss, s, y)
    objective = f + lam * float(np.abs(w).sum())
    gw, gb = loss_gradient(loss, X, y, s)
    gw = np.asarray(gw).ravel()
    step = 1.0
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        step = min(step * 2.0, 1e8)
        accepted = False
        while step >= _MIN_STEP:
            w_new = _soft_threshold(w - step * gw, step * lam)
            b_new = b - step * gb
            s_new = X @ w_new + b_new
            f_new = loss_value(loss, s_new, y)
            objective_new = f_new + lam * float(np.abs(w_new).sum())
            if loss == "logistic":
                dw = w_new - w
                db = b_new - b
                quad = f + float(gw @ dw) + gb * db + (float(dw @ dw) + db * db) / (2.0 * step)
                ok = f_new <= quad + _MONOTONE_SLACK and objective_new <= objective + _MONOTONE_SLACK
            else:
                ok = objective_new <= objective + _MONOTONE_SLACK
            if ok:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # no descent step exists at the smallest step; treat as converged
        delta = objective - objective_new
        w, b, f, objective = w_new, b_new, f_new, objective_new
        if abs(delta) <= config.tolerance * max(1.0, abs(objective)):
            break
        gw, gb = loss_gradient(loss, X, y, s_new)
        gw = np.asarray(gw).ravel()
    if not np.isfinite(objective):
        raise ValidationError("training diverged to a non-finite objective")
    return w, b, iterations, objective


def predict_scores(model: LinearModel, matrix: FeatureMatrix) -> np.ndarray:
    """Raw margins w.x + b, one per row."""
    if matrix.dims != len(model.weights):
        raise ValidationError(
            f"model has {len(model.weights)} weights but matrix has {matrix.dims} columns"
        )
    return np.asarray(matrix.X @ model.weights).ravel() + model.bias


def gradient_check(
    loss: str, X, y: np.ndarray, w: np.ndarray, b: float, step: float = 1e-5
) -> float:
    """Max relative error, analytic vs central-difference gradients.

    Checks every weight coordinate and the bias on the unpenalized objective.
    For hinge loss the caller must supply a smooth point (no margin exactly 1).
    """
    y = np.asarray(y, dtype=float)
    s = X @ w + b
    gw, gb = loss_gradient(loss, X, y, s)
    gw = np.asarray(gw).ravel()
    worst = 0.0

    def value(w_probe: np.ndarray, b_probe: float) -> float:
        return loss_value(loss, X @ w_probe + b_probe, y)

    for j in range(len(w)):
        w_plus = w.copy()
        w_plus[j] += step
        w_minus = w.copy()
        w_minus[j] -= step
        fd = (value(w_plus, b) - value(w_minus, b)) / (2.0 * step)
        worst = max(worst, _relative_error(gw[j], fd))
    fd_b = (value(w, b + step) - value(w, b - step)) / (2.0 * step)
    return max(worst, _relative_error(gb, fd_b))


def _relative_error(a: float, b: float) -> float:
    denom = max(abs(a), abs(b))
    if denom < 1e-6:
        return abs(a - b)  # absolute scale for near-zero gradients
    return abs(a - b) / denom


@dataclass
class CvResult:
    lambda_grid: tuple[float, ...]  # descending
    fold_auc: np.ndarray  # shape (len(grid), k); nan where undefined
    mean_auc: np.ndarray
    best_lambda: float
    warnings: list[str] = field(default_factory=list)


def cross_validate(
    matrix: FeatureMatrix,
    grid: Sequence[float],
    k: int,
    config: TrainConfig,
    seed: int,
) -> CvResult:
    """Stratified k-fold AUC sweep over an L1 grid; folds cut within this matrix.

    A held-out fold with a single class has no AUC; it is excluded from that
    lambda's mean with a warning.  Ties in mean AUC resolve toward the larger
    lambda (the sparser model).
    """
    X, y = _check_matrix(matrix)
    if k < 2:
        raise ValidationError(f"cross-validation needs k >= 2, got {k}")
    if matrix.n_rows < k:
        raise ValidationError(f"cannot cut {k} folds from {matrix.n_rows} rows")
    if not grid or any(g <= 0 for g in grid):
        raise ValidationError("lambda grid must be non-empty and positive")
    grid = tuple(sorted(set(float(g) for g in grid), reverse=True))

    rng = Rng(seed).derive(_CV_STREAM)
    pos = [int(i) for i in np.flatnonzero(matrix.y == 1)]
    neg = [int(i) for i in np.flatnonzero(matrix.y == 0)]
    rng.shuffle(pos)
    rng.shuffle(neg)
    folds: list[list[int]] = [[] for _ in range(k)]
    for i, idx in enumerate(pos):
        folds[i % k].append(idx)
    for i, idx in enumerate(neg):
        folds[i % k].append(idx)

    fold_auc = np.full((len(grid), k), np.nan)
    warnings: list[str] = []
    for fold_i, held in enumerate(folds):
        held_arr = np.sort(np.array(held, dtype=np.int64))
        train_arr = np.setdiff1d(np.arange(matrix.n_rows, dtype=np.int64), held_arr)
        y_tr, y_ho = y[train_arr], matrix.y[held_arr]
        if len(np.unique(y_ho)) < 2:
            warnings.append(f"fold {fold_i}: held-out part has a single class; AUC undefined")
            continue
        if len(np.unique(y_tr)) < 2:
            warnings.append(f"fold {fold_i}: training part has a single class; fold skipped")
            continue
        X_tr, X_ho = X[train_arr], X[held_arr]
        w_prev: np.ndarray | None = None
        b_prev: float | None = None
        for gi, lam in enumerate(grid):
            cfg = replace(config, l1_lambda=lam)
            w, b, _, _ = _fit(X_tr, y_tr, cfg, w_prev, b_prev)
            w_prev, b_prev = w, b  # warm start down the path
            scores = np.asarray(X_ho @ w).ravel() + b
            fold_auc[gi, fold_i] = roc_curve(scores, y_ho).auc
    with np.errstate(invalid="ignore"):
        mean_auc = np.array(
            [np.nan if np.all(np.isnan(row)) else float(np.nanmean(row)) for row in fold_auc]
        )
    if np.all(np.isnan(mean_auc)):
        raise ValidationError("no fold produced a defined AUC; cannot select lambda")
    best_idx = int(np.nanargmax(mean_auc))  # first max in descending grid = larger lambda
    return CvResult(grid, fold_auc, mean_auc, float(grid[best_idx]), warnings)


def default_lambda_grid(matrix: FeatureMatrix, n_points: int = 7, decades: float = 3.0) -> list[float]:
    """Log-spaced grid from lambda_max down, the usual L1 path."""
    lmax = lambda_max(matrix)
    if lmax <= 0:
        raise ValidationError("lambda_max is zero; features carry no label signal")
    return [float(lmax * 10 ** (-decades * i / (n_points - 1))) for i in range(n_points)]


def save_model(model: LinearModel, path: Path | str, extra_header: dict[str, str] | None = None) -> None:
    """Header plus sparse nonzero weight records, plain text."""
    lines = ["# linear-model"]
    for key, val in (extra_header or {}).items():
        lines.append(f"# {key}: {val}")
    lines.append(f"loss {model.loss_kind}")
    lines.append(f"lambda {model.l1_lambda!r}")
    lines.append(f"dims {len(model.weights)}")
    lines.append(f"bias {model.bias!r}")
    lines.append(f"seed {model.meta.seed}")
    lines.append(f"objective {model.meta.objective!r}")
    lines.append(f"iterations {model.meta.iterations}")
    lines.append(f"standardized {int(model.meta.standardized)}")
    for col in np.flatnonzero(model.weights):
        lines.append(f"w {int(col)} {float(model.weights[col])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: Path | str) -> tuple[LinearModel, dict[str, str]]:
    header: dict[str, str] = {}
    meta: dict[str, str] = {}
    weights: list[tuple[int, float]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    k, _, v = body.partition(":")
                    header[k.strip()] = v.strip()
                continue
            parts = line.split(" ")
            if parts[0] == "w":
                weights.append((int(parts[1]), float(parts[2])))
            else:
                meta[parts[0]] = parts[1]
    try:
        dims = int(meta["dims"])
        w = np.zeros(dims)
        for col, val in weights:
            w[col] = val
        model = LinearModel(
            weights=w,
            bias=float(meta["bias"]),
            loss_kind=meta["loss"],
            l1_lambda=float(meta["lambda"]),
            meta=TrainingMeta(
                iterations=int(meta["iterations"]),
                objective=float(meta["objective"]),
                seed=int(meta["seed"]),
                standardized=bool(int(meta.get("standardized", "0"))),
            ),
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: malformed model file") from exc
    return model, header
