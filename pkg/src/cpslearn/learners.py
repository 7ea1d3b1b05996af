"""Trainable learners and the immutable models they produce.

A learner is a training algorithm; a model is its frozen output. Models
predict without any learner present and serialize to a versioned JSON
document, so a trained artifact can be shipped, reloaded, and used in a
process that never imports the training code.

Native implementations:

* :func:`fit_linear` / :class:`LinearRegressionLearner` -- ordinary least
  squares via a rank-revealing orthogonal decomposition.
* :func:`fit_tree` / :class:`RegressionTreeLearner` -- greedy binary
  regression tree minimizing weighted child variance.
* :class:`RecursiveLeastSquares` / :class:`IncrementalLinearLearner` --
  online least squares with a forgetting factor.
* :class:`EpsilonGreedyActiveLearner` -- an interactive policy that explores
  an action grid and maintains a linear one-step surrogate of the system.
"""

from __future__ import annotations

import abc
import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import ColumnKind, Dataset
from .environments import ActionSpace
from .errors import PipelineError

MODEL_FORMAT_VERSION = 1
MODEL_FILE_SUFFIX = ".fcm.json"

_SPLIT_TIE_EPS = 1e-12


class ShapeMismatch(PipelineError):
    """Inputs and outputs disagree in row count or column count."""


class SchemaMismatch(PipelineError):
    """Data columns do not match the schema a model or learner expects."""


class SingularDesign(PipelineError):
    """The least-squares design matrix is rank deficient.

    Raised instead of silently regularizing; add features, drop collinear
    columns, or use the incremental learner with explicit regularization.
    """


class TooFewSamples(PipelineError):
    """Not enough training rows for the requested tree configuration."""


class DimensionMismatch(PipelineError):
    """An input row does not match the dimension of the online estimator."""


class NeverUpdated(PipelineError):
    """Finalize was called on a learner that never saw any data."""


def _float_matrix(dataset: Dataset, columns: Sequence[str]) -> np.ndarray:
    """Stack float columns into an (n_rows, n_cols) design matrix."""
    for name in columns:
        if dataset.column_kind(name) is not ColumnKind.FLOAT64:
            raise SchemaMismatch(f"column {name!r} is not float64")
    if not columns:
        return np.empty((dataset.row_count, 0), dtype=np.float64)
    return np.column_stack([dataset.column(name) for name in columns])


def _target_vector(outputs: Dataset) -> np.ndarray:
    if len(outputs.column_names) != 1:
        raise ShapeMismatch(f"expected a single output column, got {len(outputs.column_names)}")
    return _float_matrix(outputs, outputs.column_names)[:, 0]


class Model(abc.ABC):
    """A trained, immutable prediction artifact.

    Predictions are deterministic and side-effect free; concurrent predict
    calls are safe. ``input_columns`` and ``output_column`` form the schema
    contract checked on every call.
    """

    kind: str

    def __init__(self, input_columns: Sequence[str], output_column: str):
        self.input_columns = tuple(input_columns)
        self.output_column = output_column

    def predict(self, inputs: Dataset) -> Dataset:
        """Predict one value per input row, as a single-column Dataset.

        Raises:
            SchemaMismatch: if input columns differ from the trained schema.
        """
        if set(inputs.column_names) != set(self.input_columns):
            raise SchemaMismatch(
                f"model expects columns {list(self.input_columns)}, got {list(inputs.column_names)}"
            )
        matrix = _float_matrix(inputs, self.input_columns)
        return Dataset([(self.output_column, self._predict_matrix(matrix))])

    @abc.abstractmethod
    def _predict_matrix(self, matrix: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _params(self) -> dict: ...

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "input_schema": list(self.input_columns),
            "output_schema": [self.output_column],
            "params": self._params(),
        }

    @property
    def model_id(self) -> str:
        """Deterministic content-based identifier."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return f"{self.kind}-{hashlib.sha256(canonical.encode()).hexdigest()[:12]}"


class LinearModel(Model):
    """Affine prediction: dot(weights, inputs) + intercept."""

    kind = "linear"

    def __init__(self, weights, intercept: float, input_columns: Sequence[str], output_column: str):
        super().__init__(input_columns, output_column)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(self.input_columns),):
            raise ShapeMismatch(
                f"{weights.shape[0] if weights.ndim else 0} weights for "
                f"{len(self.input_columns)} input columns"
            )
        weights.setflags(write=False)
        self.weights = weights
        self.intercept = float(intercept)

    def _predict_matrix(self, matrix: np.ndarray) -> np.ndarray:
        return matrix @ self.weights + self.intercept

    def _params(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept}


@dataclass(frozen=True)
class TreeNode:
    """One node of a binary regression tree.

    Internal nodes route on ``feature <= threshold`` (left) versus greater
    (right); leaves carry the mean target of the training rows they hold.
    """

    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float | None = None
    samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value, "samples": self.samples}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "value" in d:
            return cls(value=float(d["value"]), samples=int(d["samples"]))
        return cls(
            feature=int(d["feature"]),
            threshold=float(d["threshold"]),
            left=cls.from_dict(d["left"]),
            right=cls.from_dict(d["right"]),
        )


class RegressionTreeModel(Model):
    """A fitted binary regression tree."""

    kind = "regression_tree"

    def __init__(
        self,
        root: TreeNode,
        input_columns: Sequence[str],
        output_column: str,
        max_depth: int,
        min_samples_leaf: int,
    ):
        super().__init__(input_columns, output_column)
        self.root = root
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def _predict_matrix(self, matrix: np.ndarray) -> np.ndarray:
        out = np.empty(matrix.shape[0], dtype=np.float64)
        self._fill(self.root, matrix, np.arange(matrix.shape[0]), out)
        return out

    def _fill(self, node: TreeNode, matrix: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
        if node.is_leaf:
            out[rows] = node.value
            return
        mask = matrix[rows, node.feature] <= node.threshold
        self._fill(node.left, matrix, rows[mask], out)
        self._fill(node.right, matrix, rows[~mask], out)

    def _params(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "root": self.root.to_dict(),
        }


def fit_linear(inputs: Dataset, outputs: Dataset) -> LinearModel:
    """Fit ordinary least squares with an intercept.

    The solution minimizes squared error and is computed with a
    rank-revealing orthogonal decomposition; no silent regularization is
    applied.

    Raises:
        ShapeMismatch: if row counts differ or outputs are not one column.
        SingularDesign: if the design matrix (inputs plus intercept) is rank
            deficient, including the underdetermined case of fewer rows than
            coefficients.
    """
    y = _target_vector(outputs)
    if inputs.row_count != outputs.row_count:
        raise ShapeMismatch(f"{inputs.row_count} input rows vs {outputs.row_count} output rows")
    matrix = _float_matrix(inputs, inputs.column_names)
    design = np.column_stack([matrix, np.ones(inputs.row_count)])
    solution, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise SingularDesign(
            f"design matrix has rank {rank} < {design.shape[1]} coefficients"
        )
    return LinearModel(
        solution[:-1], solution[-1], inputs.column_names, outputs.column_names[0]
    )


def _best_split(matrix: np.ndarray, y: np.ndarray, min_samples_leaf: int):
    """Exhaustive greedy split search.

    Candidates are midpoints between consecutive distinct sorted feature
    values; the score is the weighted child variance. A candidate replaces
    the incumbent only when better by more than 1e-12, so ties resolve to
    the lowest feature index, then the lowest threshold.
    """
    n = len(y)
    best = None  # (score, feature, threshold)
    for feature in range(matrix.shape[1]):
        order = np.argsort(matrix[:, feature], kind="stable")
        xs = matrix[order, feature]
        ys = y[order]
        sums = np.concatenate([[0.0], np.cumsum(ys)])
        squares = np.concatenate([[0.0], np.cumsum(ys * ys)])
        total, total_sq = sums[n], squares[n]
        for i in range(min_samples_leaf, n - min_samples_leaf + 1):
            if xs[i - 1] == xs[i]:
                continue
            n_left, n_right = i, n - i
            var_left = max(0.0, squares[i] / n_left - (sums[i] / n_left) ** 2)
            var_right = max(
                0.0, (total_sq - squares[i]) / n_right - ((total - sums[i]) / n_right) ** 2
            )
            score = (n_left * var_left + n_right * var_right) / n
            if best is None or score < best[0] - _SPLIT_TIE_EPS:
                best = (score, feature, (xs[i - 1] + xs[i]) / 2.0)
    return best


def _grow_tree(matrix, y, depth, max_depth, min_samples_leaf) -> TreeNode:
    if depth >= max_depth or len(y) < 2 * min_samples_leaf or np.var(y) == 0.0:
        return TreeNode(value=float(np.mean(y)), samples=len(y))
    split = _best_split(matrix, y, min_samples_leaf)
    if split is None:  # all features constant within this node
        return TreeNode(value=float(np.mean(y)), samples=len(y))
    _, feature, threshold = split
    mask = matrix[:, feature] <= threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_grow_tree(matrix[mask], y[mask], depth + 1, max_depth, min_samples_leaf),
        right=_grow_tree(matrix[~mask], y[~mask], depth + 1, max_depth, min_samples_leaf),
    )


def fit_tree(
    inputs: Dataset,
    outputs: Dataset,
    max_depth: int,
    min_samples_leaf: int = 1,
) -> RegressionTreeModel:
    """Fit a greedy binary regression tree.

    At each node the (feature, threshold) pair minimizing the weighted child
    variance is chosen; recursion stops at ``max_depth`` (0 yields a single
    leaf), on pure nodes, or when a child would fall below
    ``min_samples_leaf`` rows.

    Raises:
        ShapeMismatch: if row counts differ or outputs are not one column.
        TooFewSamples: if fewer than ``2 * min_samples_leaf`` rows are given.
    """
    if max_depth < 0:
        raise ValueError(f"max_depth must be non-negative, got {max_depth}")
    if min_samples_leaf < 1:
        raise ValueError(f"min_samples_leaf must be positive, got {min_samples_leaf}")
    y = _target_vector(outputs)
    if inputs.row_count != outputs.row_count:
        raise ShapeMismatch(f"{inputs.row_count} input rows vs {outputs.row_count} output rows")
    if inputs.row_count < 2 * min_samples_leaf:
        raise TooFewSamples(
            f"{inputs.row_count} rows < 2 * min_samples_leaf = {2 * min_samples_leaf}"
        )
    matrix = _float_matrix(inputs, inputs.column_names)
    root = _grow_tree(matrix, y, 0, max_depth, min_samples_leaf)
    return RegressionTreeModel(
        root, inputs.column_names, outputs.column_names[0], max_depth, min_samples_leaf
    )


class LinearRegressionLearner:
    """Offline learner wrapping :func:`fit_linear`."""

    def fit(self, inputs: Dataset, outputs: Dataset) -> LinearModel:
        return fit_linear(inputs, outputs)


class RegressionTreeLearner:
    """Offline learner wrapping :func:`fit_tree`."""

    def __init__(self, max_depth: int = 5, min_samples_leaf: int = 1):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, inputs: Dataset, outputs: Dataset) -> RegressionTreeModel:
        return fit_tree(inputs, outputs, self.max_depth, self.min_samples_leaf)


class RecursiveLeastSquares:
    """Online least squares over a fixed regressor dimension.

    Maintains the weight vector and the inverse-Gram matrix P through
    rank-one updates. With ``forgetting_factor`` 1 and small
    ``regularization`` delta (P starts as I/delta), a full pass over a
    dataset converges to the batch least-squares solution.

    Note the regressor is used exactly as given: no intercept column is
    appended here. :class:`IncrementalLinearLearner` adds the bias term.

    Attributes:
        weights: current estimate, shape (dim,).
        updates: number of samples absorbed so far.
    """

    def __init__(self, dim: int, forgetting_factor: float = 1.0, regularization: float = 1e-8):
        if not 0.0 < forgetting_factor <= 1.0:
            raise ValueError(f"forgetting_factor must be in (0, 1], got {forgetting_factor}")
        if regularization <= 0.0:
            raise ValueError(f"regularization must be positive, got {regularization}")
        self.dim = dim
        self.forgetting_factor = forgetting_factor
        self.weights = np.zeros(dim, dtype=np.float64)
        self._P = np.eye(dim, dtype=np.float64) / regularization
        self.updates = 0

    def update(self, row, target: float) -> None:
        """Absorb one (regressor, target) sample.

        Raises:
            DimensionMismatch: if the regressor length differs from ``dim``.
        """
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (self.dim,):
            raise DimensionMismatch(f"regressor of shape {row.shape}, expected ({self.dim},)")
        forget = self.forgetting_factor
        Pr = self._P @ row
        gain = Pr / (forget + row @ Pr)
        self.weights = self.weights + gain * (target - row @ self.weights)
        self._P = (self._P - np.outer(gain, Pr)) / forget
        self._P = (self._P + self._P.T) / 2.0  # keep P numerically symmetric
        self.updates += 1

    def predictive_variance(self, row) -> float:
        """Quadratic form row' P row: relative uncertainty of a prediction."""
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (self.dim,):
            raise DimensionMismatch(f"regressor of shape {row.shape}, expected ({self.dim},)")
        return float(row @ self._P @ row)

    @property
    def covariance(self) -> np.ndarray:
        return self._P.copy()


class IncrementalLinearLearner:
    """Incremental learner: recursive least squares with an intercept.

    The schema (input columns and output column) is fixed by the first batch;
    later batches must match it. ``finalize`` snapshots the current estimate
    into a :class:`LinearModel`.
    """

    def __init__(self, forgetting_factor: float = 1.0, regularization: float = 1e-8):
        self.forgetting_factor = forgetting_factor
        self.regularization = regularization
        self._rls: RecursiveLeastSquares | None = None
        self._input_columns: tuple[str, ...] | None = None
        self._output_column: str | None = None

    def update(self, inputs: Dataset, outputs: Dataset) -> None:
        y = _target_vector(outputs)
        if inputs.row_count != outputs.row_count:
            raise ShapeMismatch(f"{inputs.row_count} input rows vs {outputs.row_count} output rows")
        if self._rls is None:
            self._input_columns = inputs.column_names
            self._output_column = outputs.column_names[0]
            self._rls = RecursiveLeastSquares(
                len(self._input_columns) + 1, self.forgetting_factor, self.regularization
            )
        elif inputs.column_names != self._input_columns:
            raise SchemaMismatch(
                f"batch columns {list(inputs.column_names)} != {list(self._input_columns)}"
            )
        matrix = _float_matrix(inputs, self._input_columns)
        for i in range(matrix.shape[0]):
            self._rls.update(np.append(matrix[i], 1.0), y[i])

    def finalize(self) -> LinearModel:
        """Snapshot the current weights as an immutable model.

        Raises:
            NeverUpdated: if no sample has been absorbed.
        """
        if self._rls is None or self._rls.updates == 0:
            raise NeverUpdated("incremental learner has not seen any data")
        weights = self._rls.weights
        return LinearModel(weights[:-1], weights[-1], self._input_columns, self._output_column)


class EpsilonGreedyActiveLearner:
    """Interactive policy over a discrete action grid.

    With probability epsilon a uniformly random grid action is proposed
    (seeded RNG); otherwise the grid action with the highest surrogate
    predictive variance is chosen, seeking the least-explored region. An
    untrained surrogate carries no information, so all actions tie and the
    first grid action is returned.

    The surrogate is a recursive-least-squares model of the next target
    value from (state features, action, bias).
    """

    def __init__(
        self,
        action_space: ActionSpace,
        state_columns: Sequence[str],
        target_column: str,
        epsilon: float = 0.1,
        action_grid_size: int = 11,
        seed: int = 0,
        forgetting_factor: float = 1.0,
        regularization: float = 1e-8,
    ):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
        if action_grid_size < 1:
            raise ValueError(f"action_grid_size must be positive, got {action_grid_size}")
        self.action_space = action_space
        self.state_columns = tuple(state_columns)
        self.target_column = target_column
        self.epsilon = epsilon
        self.action_grid = np.linspace(action_space.low, action_space.high, action_grid_size)
        self._rng = np.random.default_rng(seed)
        self._surrogate = RecursiveLeastSquares(
            len(self.state_columns) + 2, forgetting_factor, regularization
        )
        self.transitions: list[tuple[np.ndarray, float, float]] = []

    def _state_vector(self, observation: Dataset) -> np.ndarray:
        if observation.row_count != 1:
            raise SchemaMismatch(f"expected a single-row observation, got {observation.row_count}")
        selected = observation.select(self.state_columns)
        return _float_matrix(selected, self.state_columns)[0]

    def propose_action(self, observation: Dataset) -> float:
        """Pick the next action for the given single-row observation."""
        state = self._state_vector(observation)
        if self._rng.random() < self.epsilon:
            return float(self.action_grid[self._rng.integers(len(self.action_grid))])
        if self._surrogate.updates == 0:
            return float(self.action_grid[0])
        scores = [
            self._surrogate.predictive_variance(np.concatenate([state, [action, 1.0]]))
            for action in self.action_grid
        ]
        return float(self.action_grid[int(np.argmax(scores))])

    def observe_transition(self, observation: Dataset, action: float, next_observation: Dataset) -> None:
        """Absorb one (observation, action, next observation) transition."""
        state = self._state_vector(observation)
        target_cell = next_observation.column(self.target_column)
        if len(target_cell) != 1:
            raise SchemaMismatch("next observation must be a single row")
        target = float(target_cell[0])
        regressor = np.concatenate([state, [action, 1.0]])
        self._surrogate.update(regressor, target)
        self.transitions.append((regressor, float(action), target))

    def finalize(self) -> LinearModel:
        """Freeze the surrogate into a model predicting the next target value
        from (state features, action).

        Raises:
            NeverUpdated: if no transition has been observed.
        """
        if self._surrogate.updates == 0:
            raise NeverUpdated("active learner has not observed any transition")
        weights = self._surrogate.weights
        input_columns = (*self.state_columns, self.action_space.name)
        return LinearModel(weights[:-1], weights[-1], input_columns, self.target_column)


_MODEL_KINDS = {}


def _rebuild_linear(doc: dict) -> LinearModel:
    params = doc["params"]
    return LinearModel(
        params["weights"], params["intercept"], doc["input_schema"], doc["output_schema"][0]
    )


def _rebuild_tree(doc: dict) -> RegressionTreeModel:
    params = doc["params"]
    return RegressionTreeModel(
        TreeNode.from_dict(params["root"]),
        doc["input_schema"],
        doc["output_schema"][0],
        params["max_depth"],
        params["min_samples_leaf"],
    )


_MODEL_KINDS[LinearModel.kind] = _rebuild_linear
_MODEL_KINDS[RegressionTreeModel.kind] = _rebuild_tree


def model_from_dict(doc: dict) -> Model:
    """Rebuild a model from its serialized dictionary form."""
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {version}")
    kind = doc.get("kind")
    if kind not in _MODEL_KINDS:
        raise ValueError(f"unknown model kind: {kind}")
    return _MODEL_KINDS[kind](doc)


def save_model(model: Model, path) -> None:
    """Write a model as versioned JSON; floats round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def load_model(path) -> Model:
    """Load a model saved by :func:`save_model`."""
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
