"""Discrete measures, cost tabulation, and the uniform-bound validation gate.

An :class:`Instance` bundles marginals with a tabulated cost that passed the
conditional-average check: for every atom of every marginal, the cost averaged
against the other marginals' weights must be finite. The largest such average
is the constant K that controls every potential bound downstream. Costs may
contain +inf entries (singular kernels at coinciding atoms); such tabulations
are valid data, but they can never pass the gate because every atom carries
positive weight.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    AllTermsVanish,
    AssumptionViolated,
    DimensionMismatch,
    EmptySupport,
    NegativeCost,
    NonpositiveWeight,
    TooLarge,
    ValidationError,
    WeightSumOutOfRange,
)

WEIGHT_SUM_TOL = 1e-9
DENSE_ENTRY_CAP = 10**8

COST_KINDS = (
    "explicit-matrix",
    "explicit-tensor",
    "power-distance",
    "coulomb-pairwise",
    "custom-analytic",
)


def _frozen_array(values, dtype=np.float64, ndim=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud with strictly positive weights summing to one."""

    points: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)


def make_measure(points, weights) -> DiscreteMeasure:
    """Validate and build a discrete probability measure.

    Points may be scalars (a 1-d space) or coordinate vectors. Weights must be
    strictly positive and sum to 1 within 1e-9; they are renormalized to sum
    to 1 exactly on acceptance.
    """
    pts = np.array(points, dtype=np.float64)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    elif pts.ndim != 2:
        raise DimensionMismatch(f"points must be scalars or vectors, got shape {pts.shape}")
    w = np.array(weights, dtype=np.float64)
    if w.ndim != 1:
        raise DimensionMismatch(f"weights must be a vector, got shape {w.shape}")
    if pts.shape[0] == 0:
        raise EmptySupport("a measure needs at least one atom")
    if pts.shape[0] != w.shape[0]:
        raise DimensionMismatch(
            f"{pts.shape[0]} points but {w.shape[0]} weights"
        )
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points must be finite")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise NonpositiveWeight("every weight must be finite and > 0")
    total = float(np.sum(w))
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise WeightSumOutOfRange(f"weights sum to {total!r}, not 1 within {WEIGHT_SUM_TOL}")
    w = w / total
    pts.setflags(write=False)
    w.setflags(write=False)
    return DiscreteMeasure(points=pts, weights=w)


@dataclass(frozen=True)
class CostSpec:
    """Pointwise cost specification; values must land in [0, +inf]."""

    kind: str
    matrix: np.ndarray | None = None
    tensor: np.ndarray | None = None
    alpha: float | None = None
    exponent: float | None = None
    fn: Callable[..., np.ndarray] | None = None

    @classmethod
    def explicit_matrix(cls, matrix) -> "CostSpec":
        return cls(kind="explicit-matrix", matrix=_frozen_array(matrix, ndim=2))

    @classmethod
    def explicit_tensor(cls, tensor) -> "CostSpec":
        return cls(kind="explicit-tensor", tensor=_frozen_array(tensor))

    @classmethod
    def power_distance(cls, alpha: float) -> "CostSpec":
        if not (alpha > 0):
            raise ValidationError(f"power-distance needs alpha > 0, got {alpha}")
        return cls(kind="power-distance", alpha=float(alpha))

    @classmethod
    def coulomb_pairwise(cls, exponent: float) -> "CostSpec":
        if not (exponent > 0):
            raise ValidationError(f"coulomb-pairwise needs exponent > 0, got {exponent}")
        return cls(kind="coulomb-pairwise", exponent=float(exponent))

    @classmethod
    def custom(cls, fn: Callable[..., np.ndarray]) -> "CostSpec":
        """Analytic cost; `fn` gets one (tuples, dim_i) array per marginal."""
        return cls(kind="custom-analytic", fn=fn)


def _validate_cost_entries(entries: np.ndarray) -> np.ndarray:
    if np.any(np.isnan(entries)) or np.any(entries < 0.0):
        raise NegativeCost("cost entries must be in [0, +inf]")
    finite = np.isfinite(entries)
    for axis in range(entries.ndim):
        axes = tuple(i for i in range(entries.ndim) if i != axis)
        covered = np.any(finite, axis=axes) if axes else finite
        if not np.all(covered):
            bad = int(np.flatnonzero(~covered)[0])
            raise AllTermsVanish(
                f"axis {axis} atom {bad} has no finite cost entry; "
                "the conditional averages cannot be verified"
            )
    finite.setflags(write=False)
    return finite


@dataclass(frozen=True)
class CostMatrix:
    """Tabulated two-marginal cost c_ij with a finite-entry mask."""

    entries: np.ndarray
    finite: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class CostTensor:
    """Tabulated N-marginal cost c_{i1..iN} with a finite-entry mask."""

    entries: np.ndarray
    finite: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


TabulatedCost = Union[CostMatrix, CostTensor]


def _wrap_entries(entries: np.ndarray) -> TabulatedCost:
    entries = np.asarray(entries, dtype=np.float64)
    if entries.ndim < 2:
        raise DimensionMismatch("a tabulated cost needs at least two axes")
    if entries.size > DENSE_ENTRY_CAP:
        raise TooLarge(f"dense cost with {entries.size} entries exceeds the {DENSE_ENTRY_CAP} cap")
    entries = entries.copy()
    entries.setflags(write=False)
    finite = _validate_cost_entries(entries)
    if entries.ndim == 2:
        return CostMatrix(entries=entries, finite=finite)
    return CostTensor(entries=entries, finite=finite)


def _pairwise_distance(a: DiscreteMeasure, b: DiscreteMeasure) -> np.ndarray:
    if a.dim != b.dim:
        raise DimensionMismatch(f"point dimensions differ: {a.dim} vs {b.dim}")
    diff = a.points[:, None, :] - b.points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def tabulate_cost(spec: CostSpec, measures: Sequence[DiscreteMeasure]) -> TabulatedCost:
    """Evaluate a cost specification on the marginals' atom grid.

    Coinciding atoms under power-distance / coulomb-pairwise tabulate to +inf.
    """
    measures = list(measures)
    if len(measures) < 2:
        raise DimensionMismatch("need at least two marginals")
    shape = tuple(m.n_atoms for m in measures)
    if math.prod(shape) > DENSE_ENTRY_CAP:
        raise TooLarge(f"product grid with {math.prod(shape)} tuples exceeds the cap")

    if spec.kind == "explicit-matrix":
        if len(measures) != 2:
            raise DimensionMismatch("explicit-matrix needs exactly two marginals")
        if spec.matrix.shape != shape:
            raise DimensionMismatch(f"matrix shape {spec.matrix.shape} vs atoms {shape}")
        return _wrap_entries(spec.matrix)

    if spec.kind == "explicit-tensor":
        if spec.tensor.shape != shape:
            raise DimensionMismatch(f"tensor shape {spec.tensor.shape} vs atoms {shape}")
        return _wrap_entries(spec.tensor)

    if spec.kind == "power-distance":
        if len(measures) != 2:
            raise DimensionMismatch("power-distance needs exactly two marginals")
        d = _pairwise_distance(measures[0], measures[1])
        with np.errstate(divide="ignore"):
            return _wrap_entries(d ** (-spec.alpha))

    if spec.kind == "coulomb-pairwise":
        entries = np.zeros(shape)
        for a in range(len(measures)):
            for b in range(a + 1, len(measures)):
                d = _pairwise_distance(measures[a], measures[b])
                with np.errstate(divide="ignore"):
                    term = d ** (-spec.exponent)
                idx = [None] * len(measures)
                idx[a] = slice(None)
                idx[b] = slice(None)
                entries = entries + term[tuple(idx)]
        return _wrap_entries(entries)

    if spec.kind == "custom-analytic":
        if spec.fn is None:
            raise ValidationError("custom-analytic spec has no callable")
        grids = np.indices(shape)
        blocks = [
            measures[i].points[grids[i].reshape(-1)] for i in range(len(measures))
        ]
        values = np.asarray(spec.fn(*blocks), dtype=np.float64).reshape(shape)
        return _wrap_entries(values)

    raise ValidationError(f"unknown cost kind {spec.kind!r}")


@dataclass(frozen=True)
class AssumptionBound:
    """Uniform bound K on conditional cost averages, with per-atom audits.

    audits[i][k] is the cost at marginal-i atom k averaged over the remaining
    marginals; K is the maximum over all audits. For two marginals audits[0]
    is the per-row vector (averaged against nu) and audits[1] the per-column
    vector (averaged against mu).
    """

    K: float
    audits: tuple[np.ndarray, ...]


def assumption_bound(cost: TabulatedCost, measures: Sequence[DiscreteMeasure]) -> AssumptionBound:
    """Compute K = max conditional weighted cost average, or reject.

    Raises AssumptionViolated when any conditional average is infinite (an
    infinite cost entry always meets positive weight, so any +inf entry
    triggers rejection).
    """
    entries = cost.entries
    measures = list(measures)
    if entries.ndim != len(measures):
        raise DimensionMismatch(f"{entries.ndim}-axis cost vs {len(measures)} marginals")
    if entries.shape != tuple(m.n_atoms for m in measures):
        raise DimensionMismatch(
            f"cost shape {entries.shape} vs atom counts {tuple(m.n_atoms for m in measures)}"
        )
    audits = []
    for i in range(entries.ndim):
        weighted = entries
        for j in range(entries.ndim):
            if j == i:
                continue
            shape = [1] * entries.ndim
            shape[j] = measures[j].n_atoms
            weighted = weighted * measures[j].weights.reshape(shape)
        other_axes = tuple(j for j in range(entries.ndim) if j != i)
        audit = np.sum(weighted, axis=other_axes)
        if not np.all(np.isfinite(audit)):
            bad = int(np.flatnonzero(~np.isfinite(audit))[0])
            raise AssumptionViolated(
                f"conditional cost average at marginal {i} atom {bad} is infinite"
            )
        audit.setflags(write=False)
        audits.append(audit)
    K = max(float(np.max(a)) for a in audits)
    return AssumptionBound(K=K, audits=tuple(audits))


@dataclass(frozen=True)
class Instance:
    """Accepted problem data: marginals, tabulated cost, and the bound K."""

    marginals: tuple[DiscreteMeasure, ...]
    cost: TabulatedCost
    bound: AssumptionBound

    @property
    def n_marginals(self) -> int:
        return len(self.marginals)

    @property
    def shape(self):
        return self.cost.entries.shape

    @property
    def mu(self) -> DiscreteMeasure:
        return self.marginals[0]

    @property
    def nu(self) -> DiscreteMeasure:
        if self.n_marginals != 2:
            raise DimensionMismatch("nu is only defined for two-marginal instances")
        return self.marginals[1]


def build_instance(
    marginals: Sequence[DiscreteMeasure],
    cost: TabulatedCost | CostSpec,
) -> Instance:
    """Tabulate (if needed), verify the conditional-average bound, and bundle."""
    marginals = tuple(marginals)
    if len(marginals) < 2:
        raise DimensionMismatch("an instance needs at least two marginals")
    if isinstance(cost, CostSpec):
        cost = tabulate_cost(cost, marginals)
    bound = assumption_bound(cost, marginals)
    return Instance(marginals=marginals, cost=cost, bound=bound)


# --- instance files -------------------------------------------------------
#
# {"marginals": [{"points": [[f64, ...], ...], "weights": [...]}, ...],
#  "cost": {"kind": ..., "matrix": ... | "tensor": ... | "params": {...}},
#  "metric": "euclidean"}


def _cost_spec_from_dict(d: dict) -> CostSpec:
    kind = d.get("kind")
    if kind == "explicit-matrix":
        return CostSpec.explicit_matrix(d["matrix"])
    if kind == "explicit-tensor":
        return CostSpec.explicit_tensor(d["tensor"])
    if kind == "power-distance":
        return CostSpec.power_distance(float(d.get("params", {})["alpha"]))
    if kind == "coulomb-pairwise":
        return CostSpec.coulomb_pairwise(float(d.get("params", {})["exponent"]))
    raise ValidationError(f"unsupported cost kind in instance file: {kind!r}")


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict) or "marginals" not in data or "cost" not in data:
        raise ValidationError("instance document needs 'marginals' and 'cost' fields")
    metric = data.get("metric", "euclidean")
    if metric != "euclidean":
        raise ValidationError(f"only the euclidean metric is supported, got {metric!r}")
    marginals = [make_measure(m["points"], m["weights"]) for m in data["marginals"]]
    spec = _cost_spec_from_dict(data["cost"])
    return build_instance(marginals, spec)


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"instance file {path} is not valid JSON: {exc}") from exc
    return instance_from_dict(data)


def instance_to_dict(instance: Instance) -> dict:
    """Canonical document: marginals plus the fully tabulated cost."""
    cost_key = "matrix" if instance.cost.entries.ndim == 2 else "tensor"
    kind = "explicit-matrix" if cost_key == "matrix" else "explicit-tensor"
    return {
        "marginals": [
            {"points": m.points.tolist(), "weights": m.weights.tolist()}
            for m in instance.marginals
        ],
        "cost": {"kind": kind, cost_key: instance.cost.entries.tolist()},
        "metric": "euclidean",
    }


def instance_digest(instance: Instance) -> str:
    """sha256 of the canonical instance document (provenance hash)."""
    from .reporting import json_dumps

    payload = json_dumps(instance_to_dict(instance)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
