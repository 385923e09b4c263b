"""Iterative closest point refinement.

Each iteration: (1) match every moving point to its nearest fixed point,
(2) solve the closed-form least-squares rigid fit onto those matches,
(3) apply it, (4) measure the mean square error against the matches and
stop once it falls below the configured threshold. The alternation can
only lower the error, so the MSE trace is non-increasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, InputError
from .geometry import RigidTransform, compose
from .nnindex import NNIndex
from .registration import CorrespondencePairs, absolute_orientation


@dataclass(frozen=True)
class IcpParams:
    """Termination controls.

    epsilon: MSE threshold in mm^2; max_iterations: hard cap;
    min_relative_improvement: stop when (prev - cur) / prev drops below it.
    """

    epsilon: float = 1e-4
    max_iterations: int = 100
    min_relative_improvement: float = 1e-6

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise InputError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iterations < 1:
            raise InputError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not (0.0 <= self.min_relative_improvement < 1.0):
            raise InputError(
                f"min_relative_improvement must be in [0, 1), got {self.min_relative_improvement}"
            )


@dataclass(frozen=True)
class IcpResult:
    """Refined transform plus the per-iteration MSE trace."""

    transform: RigidTransform
    mse_trace: list[float] = field(default_factory=list)
    termination: str = "max-iterations"  # epsilon-reached | stalled | max-iterations

    @property
    def iterations(self) -> int:
        return len(self.mse_trace)

    @property
    def final_mse(self) -> float:
        return self.mse_trace[-1] if self.mse_trace else float("nan")

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_mse_mm2": self.final_mse,
            "termination": self.termination,
        }


def icp(
    moving: np.ndarray,
    fixed: NNIndex,
    init: RigidTransform | None = None,
    params: IcpParams | None = None,
) -> IcpResult:
    """Refine init so the moving cloud lands on the fixed cloud.

    The returned transform maps the original moving points into the fixed
    cloud's frame (init composed with all refinement steps).
    """
    moving = np.asarray(moving, dtype=np.float64)
    if moving.ndim != 2 or moving.shape[1] != 3 or len(moving) == 0:
        raise InputError("moving cloud must be a non-empty (n, 3) array")
    if init is None:
        init = RigidTransform.identity()
    if params is None:
        params = IcpParams()

    current = init
    pts = init.apply(moving)
    trace: list[float] = []
    termination = "max-iterations"

    for _ in range(params.max_iterations):
        match_idx, _ = fixed.query(pts)
        matches = fixed.points[match_idx]
        if np.ptp(matches, axis=0).max() == 0.0:
            raise DegenerateConfigurationError("closest-point set collapsed to a single point")

        step = absolute_orientation(CorrespondencePairs(pts, matches))
        current = compose(step, current)
        pts = step.apply(pts)

        mse = float(np.mean(np.sum((pts - matches) ** 2, axis=1)))
        trace.append(mse)
        if mse < params.epsilon:
            termination = "epsilon-reached"
            break
        if len(trace) >= 2:
            prev = trace[-2]
            if prev > 0.0 and (prev - mse) / prev < params.min_relative_improvement:
                termination = "stalled"
                break

    return IcpResult(transform=current, mse_trace=trace, termination=termination)


def residual_mse(t: RigidTransform, moving: np.ndarray, fixed: NNIndex) -> float:
    """Mean over moving points of squared distance from t(p) to its nearest fixed point."""
    moving = np.asarray(moving, dtype=np.float64)
    if len(moving) == 0:
        raise InputError("moving cloud is empty")
    _, dist = fixed.query(t.apply(moving))
    return float(np.mean(dist**2))
