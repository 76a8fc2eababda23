"""Pick the policy parameter that yields a target message complexity."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParameterError, RangeError
from .gossip import PolicyKind
from .model import TopologyModel, message_profile, predict_message_complexity
from .topology import TopologySpec

TOLERANCE = 1e-6
_MAX_ITER = 200


@dataclass(frozen=True)
class CalibrationRequest:
    model: TopologyModel
    policy_kind: PolicyKind
    target_M: float

    @classmethod
    def analytic(cls, spec: TopologySpec, kind: PolicyKind | str, target_M: float) -> "CalibrationRequest":
        return cls(TopologyModel.analytic(spec), PolicyKind.parse(kind), float(target_M))


def predicted_m(model: TopologyModel, kind: PolicyKind, param: float) -> float:
    return predict_message_complexity(model.dist, message_profile(model, kind, param))


def _bisect(f, lo: float, hi: float, target: float) -> float:
    """Root of the non-decreasing ``f(x) = target`` on [lo, hi]."""
    f_lo, f_hi = f(lo) - target, f(hi) - target
    if abs(f_lo) <= TOLERANCE * 1e-3:
        return lo
    if abs(f_hi) <= TOLERANCE * 1e-3:
        return hi
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid) - target
        if abs(f_mid) <= TOLERANCE * 1e-3 or hi - lo <= 1e-14 * max(1.0, abs(hi)):
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_parameter(req: CalibrationRequest) -> float:
    kind = PolicyKind.parse(req.policy_kind)
    model = req.model
    target = req.target_M
    vbar = model.dist.mean_degree
    if kind is PolicyKind.FLOODING:
        raise ParameterError("flooding has no tunable parameter")
    if not (0.0 <= target <= vbar + TOLERANCE):
        raise RangeError(f"target M={target} outside achievable range [0, {vbar:.6g}]")
    target = min(target, vbar)
    if kind is PolicyKind.PE:
        return min(target / vbar, 1.0)
    if kind is PolicyKind.PINE and target <= model.dist.min_degree:
        return target  # no degree is capped, so M equals c_e exactly
    hi = float(model.dist.max_degree)
    return _bisect(lambda c: predicted_m(model, kind, c), 0.0, hi, target)


def calibrate(spec: TopologySpec, kind: PolicyKind | str, target_M: float) -> float:
    """Analytic-model calibration, the default used by the experiment harness."""
    return solve_parameter(CalibrationRequest.analytic(spec, kind, target_M))
