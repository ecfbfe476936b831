"""Tunable parameter space of the mini learned index.

The space has 14 dimensions: 5 continuous, 3 boolean, 4 integer and
2 discrete-choice knobs.  Tuners operate on points of the unit hypercube
[0,1]^14; ``decode_action`` maps such a point to a concrete ``ParamVector``
in native units (densities as fractions, sizes as slot counts, choices as
small enum ids).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

# Minimum enforced gap between the two gapped-array density bounds.
DENSITY_MIN_GAP = 0.05

N_DIMS = 14


class ParamError(ValueError):
    """Raised for out-of-domain actions or invalid parameter values."""


@dataclass(frozen=True)
class ParamDim:
    """One tunable dimension: name, kind, range/choices, default, scale."""

    name: str
    kind: str              # continuous | boolean | integer | choice
    lo: float = 0.0
    hi: float = 1.0
    choices: tuple = ()
    default: object = None
    scale: str = "linear"  # linear | log

    def contains(self, value) -> bool:
        if self.kind == "continuous":
            return self.lo <= value <= self.hi
        if self.kind == "boolean":
            return isinstance(value, (bool, np.bool_))
        if self.kind == "integer":
            return float(value) == int(value) and self.lo <= value <= self.hi
        return value in self.choices


@dataclass(frozen=True)
class ParamSpace:
    """Ordered collection of the 14 tunable dimensions."""

    dims: tuple[ParamDim, ...]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ParamError("duplicate dimension names")

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def dim(self, name: str) -> ParamDim:
        for d in self.dims:
            if d.name == name:
                return d
        raise KeyError(name)

    def counts_by_kind(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for d in self.dims:
            out[d.kind] = out.get(d.kind, 0) + 1
        return out


@dataclass(frozen=True)
class ParamVector:
    """One concrete configuration of the index, in native units.

    Densities are occupancy fractions in (0,1); ``*_log2`` knobs are
    exponents of slot counts; the out-of-domain knobs control the overflow
    buffer (see index module); choice knobs are small integer enum ids.
    """

    density_lower: float = 0.60
    density_upper: float = 0.80
    expected_insert_frac: float = 0.50
    kOutOfDomainToleranceFactor_norm: float = 0.50
    search_cost_weight: float = 0.50
    approximate_model_computation: bool = True
    approximate_cost_computation: bool = False
    allow_splitting_upwards: bool = False
    max_node_size_log2: int = 14
    kMaxOutOfDomainKeys: int = 32
    out_of_domain_buffer_cap: int = 1024
    max_fanout_log2: int = 8
    fanoutSelectionMethod: int = 1
    splittingPolicyMethod: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def as_array(self) -> np.ndarray:
        """Native values in canonical dim order (bools as 0/1)."""
        return np.array([float(v) for v in self.as_dict().values()])

    @property
    def max_node_size(self) -> int:
        return 1 << self.max_node_size_log2

    @property
    def max_fanout(self) -> int:
        return 1 << self.max_fanout_log2

    @property
    def ood_tolerance_factor(self) -> float:
        """Multiplier on kMaxOutOfDomainKeys before a buffer merge triggers.

        The normalized knob in [0,1] maps affinely onto [1, 5].
        """
        return 1.0 + 4.0 * self.kOutOfDomainToleranceFactor_norm

    def validate(self, space: ParamSpace | None = None) -> "ParamVector":
        if not (0.0 < self.density_lower < 1.0 and 0.0 < self.density_upper < 1.0):
            raise ParamError("densities must lie in (0,1)")
        if self.density_lower >= self.density_upper:
            raise ParamError("density_lower must be < density_upper")
        if not (8 <= self.max_node_size_log2 <= 20):
            raise ParamError("max_node_size_log2 outside [8, 20]")
        if self.kMaxOutOfDomainKeys < 1:
            raise ParamError("kMaxOutOfDomainKeys must be >= 1")
        space = space or define_param_space()
        for d in space.dims:
            if not d.contains(getattr(self, d.name)):
                raise ParamError(f"{d.name} outside its range")
        return self

    def with_values(self, **kwargs) -> "ParamVector":
        return replace(self, **kwargs)


def define_param_space() -> ParamSpace:
    """The canonical 14-dim space (5 continuous / 3 boolean / 4 integer / 2 choice).

    The default node capacity 2**14 slots is the desk-scale analog of the
    production index's 16MB default node; 2**16 plays the role of its 64MB
    setting and sits well inside the range.
    """
    dims = (
        ParamDim("density_lower", "continuous", lo=0.02, hi=0.85, default=0.60),
        ParamDim("density_upper", "continuous", lo=0.30, hi=0.98, default=0.80),
        ParamDim("expected_insert_frac", "continuous", lo=0.0, hi=1.0, default=0.50),
        ParamDim("kOutOfDomainToleranceFactor_norm", "continuous", lo=0.0, hi=1.0, default=0.50),
        ParamDim("search_cost_weight", "continuous", lo=0.0, hi=1.0, default=0.50),
        ParamDim("approximate_model_computation", "boolean", default=True),
        ParamDim("approximate_cost_computation", "boolean", default=False),
        ParamDim("allow_splitting_upwards", "boolean", default=False),
        ParamDim("max_node_size_log2", "integer", lo=8, hi=20, default=14),
        ParamDim("kMaxOutOfDomainKeys", "integer", lo=1, hi=4096, default=32, scale="log"),
        ParamDim("out_of_domain_buffer_cap", "integer", lo=64, hi=16384, default=1024, scale="log"),
        ParamDim("max_fanout_log2", "integer", lo=2, hi=12, default=8),
        ParamDim("fanoutSelectionMethod", "choice", choices=(0, 1), default=1),
        ParamDim("splittingPolicyMethod", "choice", choices=(0, 1, 2), default=0),
    )
    return ParamSpace(dims)


def default_params(space: ParamSpace | None = None) -> ParamVector:
    space = space or define_param_space()
    return ParamVector(**{d.name: d.default for d in space.dims}).validate(space)


def _decode_dim(d: ParamDim, a: float):
    if d.kind == "continuous":
        return d.lo + a * (d.hi - d.lo)
    if d.kind == "boolean":
        return bool(a >= 0.5)           # tie at 0.5 resolves to True
    if d.kind == "integer":
        if d.scale == "log":
            v = math.exp(math.log(d.lo) + a * (math.log(d.hi) - math.log(d.lo)))
        else:
            v = d.lo + a * (d.hi - d.lo)
        return int(min(d.hi, max(d.lo, round(v))))
    k = len(d.choices)
    return d.choices[min(int(a * k), k - 1)]


def _encode_dim(d: ParamDim, value) -> float:
    if d.kind == "continuous":
        return float((value - d.lo) / (d.hi - d.lo))
    if d.kind == "boolean":
        return 1.0 if value else 0.0
    if d.kind == "integer":
        if d.scale == "log":
            return float((math.log(value) - math.log(d.lo))
                         / (math.log(d.hi) - math.log(d.lo)))
        return float((value - d.lo) / (d.hi - d.lo))
    k = len(d.choices)
    return (d.choices.index(value) + 0.5) / k  # bin center


def repair_densities(lower: float, upper: float) -> tuple[float, float]:
    """Restore density ordering: swap if inverted, then enforce a minimum gap.

    Keeps the action space a full hypercube: any pair maps onto a valid one.
    """
    if lower > upper:
        lower, upper = upper, lower
    if upper - lower < DENSITY_MIN_GAP:
        upper = lower + DENSITY_MIN_GAP
        if upper > 0.98:
            upper = 0.98
            lower = upper - DENSITY_MIN_GAP
    return lower, upper


def decode_action(a, space: ParamSpace | None = None) -> ParamVector:
    """Map a point of [0,1]^14 to a valid ParamVector.

    Affine map for linear dims, exponential for log-scaled integers (then
    rounded), >=0.5 threshold for booleans and equal-width bins for choices.
    Density ordering is repaired by swap plus minimum gap.
    """
    space = space or define_param_space()
    a = np.asarray(a, dtype=float)
    if a.shape != (len(space.dims),):
        raise ParamError(f"action must have shape ({len(space.dims)},)")
    if np.any(a < 0.0) or np.any(a > 1.0) or not np.all(np.isfinite(a)):
        raise ParamError("action coordinates must lie in [0, 1]")
    values = {d.name: _decode_dim(d, float(x)) for d, x in zip(space.dims, a)}
    values["density_lower"], values["density_upper"] = repair_densities(
        values["density_lower"], values["density_upper"])
    return ParamVector(**values).validate(space)


def encode_params(p: ParamVector, space: ParamSpace | None = None) -> np.ndarray:
    """Approximate inverse of decode_action (exact for continuous dims)."""
    space = space or define_param_space()
    return np.array([_encode_dim(d, getattr(p, d.name)) for d in space.dims])
