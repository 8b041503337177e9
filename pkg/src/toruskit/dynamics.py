"""Model systems and their evolution: dissipative standard map, dissipative
forced pendulum, the Poincare section map and the relaxation-iteration count.

The pendulum flow is driven by an embedded 8th-order Runge-Kutta pair with
step-size control (see _kernels); all operations are pure functions of their
inputs and safe to evaluate concurrently.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateConversion, InvalidEta, StepLimitExceeded

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DissStdMapParams:
    """Parameters of the dissipative standard map.

    epsilon : perturbation size (>= 0)
    eta     : friction coefficient (>= 0; < 1 for the relaxation formula)
    Omega   : external forcing frequency, radians per iterate
    """

    epsilon: float
    eta: float
    Omega: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


@dataclass(frozen=True)
class ForcedPendulumParams:
    """Parameters of the dissipative forced pendulum.

    epsilon : perturbation size (>= 0)
    eta     : friction coefficient (>= 0)
    Omega   : external forcing frequency of the action friction term
    """

    epsilon: float
    eta: float
    Omega: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


@dataclass
class MapState:
    """Action/angle state of the standard map; x is kept in [0, 2*pi)."""

    y: float
    x: float

    def __post_init__(self):
        self.x = self.x % TWO_PI


@dataclass
class FlowState:
    """Pendulum state (p1, q1, q2); angles reduced mod 2*pi on output only."""

    p1: float
    q1: float
    q2: float


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step budget for the adaptive flow integrator."""

    abs_tol: float = 1e-14
    rel_tol: float = 1e-14
    max_steps_per_section: int = 100_000

    def __post_init__(self):
        for tol in (self.abs_tol, self.rel_tol):
            if not 0.0 < tol <= 1e-6:
                raise ValueError("tolerances must lie in (0, 1e-6]")
        if self.max_steps_per_section < 1:
            raise ValueError("max_steps_per_section must be positive")


DEFAULT_INTEGRATOR = IntegratorConfig()


def std_map_step(state: MapState, params: DissStdMapParams) -> MapState:
    """One iterate: y' = y + eps*sin(x) - eta*(y - Omega), x' = x + y' mod 2*pi."""
    y1 = state.y + params.epsilon * math.sin(state.x) - params.eta * (state.y - params.Omega)
    return MapState(y=y1, x=(state.x + y1) % TWO_PI)


def std_map_orbit(state: MapState, params: DissStdMapParams, n_iter: int):
    """Iterate the map n_iter times; returns (y, x, winding) arrays of length
    n_iter + 1 with x wrapped and winding counting accumulated 2*pi turns."""
    return _kernels.std_map_orbit(
        state.y, state.x, params.epsilon, params.eta, params.Omega, n_iter
    )


def std_map_cell_convert(b: float, c: float):
    """Convert the (b, c) parametrisation to (eta, Omega): eta = 1 - b and
    eta*Omega = 2*pi*c; raises DegenerateConversion when b = 1."""
    if b == 1.0:
        raise DegenerateConversion("b = 1 leaves Omega indeterminate")
    eta = 1.0 - b
    return eta, TWO_PI * c / eta


def pendulum_vector_field(state: FlowState, params: ForcedPendulumParams):
    """Right-hand side (dp1, dq1, dq2) of the pendulum equations of motion."""
    dp1 = params.epsilon * (
        math.sin(state.q1) + math.sin(state.q1 - state.q2)
    ) - params.eta * (state.p1 - params.Omega)
    return dp1, state.p1, 1.0


def integrate_flow(
    state: FlowState,
    duration: float,
    params: ForcedPendulumParams,
    cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> FlowState:
    """Flow the pendulum state for `duration`; deterministic for fixed inputs."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration == 0:
        return FlowState(state.p1, state.q1 % TWO_PI, state.q2 % TWO_PI)
    p1, q1, q2, status, _ = _kernels.pend_flow(
        state.p1,
        state.q1,
        state.q2,
        duration,
        params.epsilon,
        params.eta,
        params.Omega,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_steps_per_section,
    )
    if status == _kernels.STATUS_STEP_LIMIT:
        raise StepLimitExceeded(
            f"step budget {cfg.max_steps_per_section} exhausted (eta too large?)"
        )
    return FlowState(p1, q1 % TWO_PI, q2 % TWO_PI)


def poincare_map(point, params: ForcedPendulumParams, cfg: IntegratorConfig = DEFAULT_INTEGRATOR):
    """Apply the q2 = 0 -> 2*pi section map to (p1, q1)."""
    p1, q1 = point
    ps, qs, _, status, done = _kernels.pend_sections(
        p1,
        q1,
        1,
        params.epsilon,
        params.eta,
        params.Omega,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_steps_per_section,
    )
    if status == _kernels.STATUS_STEP_LIMIT:
        raise StepLimitExceeded(
            f"step budget {cfg.max_steps_per_section} exhausted (eta too large?)"
        )
    return ps[1], qs[1]


def poincare_sections(
    point,
    n_sections: int,
    params: ForcedPendulumParams,
    cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
):
    """Record n_sections successive Poincare points starting from (p1, q1) at
    q2 = 0; returns (p1, q1 wrapped, winding) arrays of length n_sections + 1."""
    ps, qs, wind, status, done = _kernels.pend_sections(
        point[0],
        point[1],
        n_sections,
        params.epsilon,
        params.eta,
        params.Omega,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_steps_per_section,
    )
    if status == _kernels.STATUS_STEP_LIMIT:
        raise StepLimitExceeded(f"step budget exhausted in section {done}")
    return ps, qs, wind


def relaxation_count(eta: float) -> int:
    """Number of iterates after which the transient (1-eta)^n factor falls
    below ~15 decimal digits: ceil(-15*log(10)/log(1-eta))."""
    if not 0.0 < eta < 1.0:
        raise InvalidEta(f"eta = {eta} outside (0, 1)")
    return math.ceil(-15.0 * math.log(10.0) / math.log(1.0 - eta))
