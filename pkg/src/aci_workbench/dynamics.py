"""Numerical flows: a Cash-Karp integrator with invariant-drift monitoring and Laurent seeds."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from aci_workbench.algebra import CompiledPolys
from aci_workbench.errors import DimensionError, SeriesDivergenceError
from aci_workbench.painleve import LaurentFamily, detect_weights
from aci_workbench.systems import HamiltonianSystem

logger = logging.getLogger(__name__)

# Cash-Karp 5(4) tableau
STAGES = (0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8)
TABLEAU = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
WEIGHTS = np.array([37 / 378, 0, 250 / 621, 125 / 594, 0, 512 / 1771])
ERROR_WEIGHTS = np.array([-277 / 64512, 0, 6925 / 370944, -6925 / 202752, -277 / 14336, 277 / 7084])

STEP_TOLERANCE = 1e-12
BLOW_UP_NORM = 1e12
MAX_HALVINGS = 24


def cash_karp_step(rhs: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> tuple[np.ndarray, float]:
    """One autonomous Cash-Karp step: fifth-order update and embedded error norm."""
    k = np.zeros((6, x.shape[0]), dtype=complex)
    k[0] = rhs(x)
    for i, row in enumerate(TABLEAU, start=1):
        k[i] = rhs(x + h * (np.asarray(row) @ k[:i]))
    update = x + h * (WEIGHTS @ k)
    error = float(np.max(np.abs(h * (ERROR_WEIGHTS @ k))))
    return update, error


@dataclass
class Trajectory:
    """States on the nominal time grid with per-invariant drift."""

    times: np.ndarray
    states: np.ndarray
    invariant_names: tuple[str, ...]
    drift: np.ndarray
    blow_up_time: float | None = None
    drift_tolerance: float = 1e-8
    warnings: list[str] = field(default_factory=list)

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift, initial=0.0))

    @property
    def flagged(self) -> bool:
        return self.max_drift > self.drift_tolerance

    @property
    def truncated(self) -> bool:
        return self.blow_up_time is not None

    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_rows(self) -> np.ndarray:
        """time, then re/im pairs of each state component, then each drift."""
        columns = [self.times]
        for j in range(self.states.shape[1]):
            columns += [self.states[:, j].real, self.states[:, j].imag]
        columns += [self.drift[:, j] for j in range(self.drift.shape[1])]
        return np.column_stack(columns)

    def to_json(self) -> dict[str, Any]:
        return {
            "steps": len(self.times) - 1,
            "t_start": float(self.times[0]),
            "t_end": float(self.times[-1]),
            "invariants": list(self.invariant_names),
            "max_drift": self.max_drift,
            "max_drift_by_invariant": {
                name: float(np.max(self.drift[:, j], initial=0.0)) for j, name in enumerate(self.invariant_names)
            },
            "flagged": self.flagged,
            "blow_up_time": self.blow_up_time,
        }


def _advance(rhs: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float, depth: int = 0) -> np.ndarray:
    """Advance by h, halving into substeps while the embedded error exceeds the step tolerance."""
    update, error = cash_karp_step(rhs, x, h)
    scale = max(1.0, float(np.max(np.abs(x))))
    if error <= STEP_TOLERANCE * scale or depth >= MAX_HALVINGS or not np.all(np.isfinite(update)):
        return update
    middle = _advance(rhs, x, h / 2, depth + 1)
    return _advance(rhs, middle, h / 2, depth + 1)


def _blow_up_estimate(times: Sequence[float], states: Sequence[np.ndarray], weights: Sequence[int]) -> float:
    """Extrapolate |x_i|^(-1/w_i), linear in t near a pole, to zero.

    The estimate comes from the component with the largest |x_i|^(1/w_i)
    at the later state.
    """
    (t1, t2), (x1, x2) = times[-2:], states[-2:]
    growth = [abs(v) ** (1 / w) if w > 0 else 0.0 for v, w in zip(x2, weights)]
    i = int(np.argmax(growth))
    if growth[i] == 0.0 or x1[i] == 0:
        return float(t2)
    u1, u2 = abs(x1[i]) ** (-1 / weights[i]), abs(x2[i]) ** (-1 / weights[i])
    if u1 == u2:
        return float(t2)
    return float(t2 - u2 * (t2 - t1) / (u2 - u1))


def integrate(
    system: HamiltonianSystem,
    x0: Sequence[complex],
    t_end: float,
    step: float,
    *,
    t_start: float = 0.0,
    adaptive: bool = True,
    drift_tolerance: float = 1e-8,
    weights: Sequence[int] | None = None,
) -> Trajectory:
    """Integrate the vector field on a fixed nominal grid and monitor every invariant.

    With ``adaptive`` each nominal step is subdivided until the embedded
    error estimate is below 1e-12. A state norm above 1e12 stops the run and
    records an estimated blow-up time, extrapolated with the quasi-homogeneous
    ``weights`` (detected from the vector field when not given).
    """
    x = np.asarray(x0, dtype=complex)
    if x.shape != (system.dimension,):
        raise DimensionError(f"initial state has {x.size} entries, {system.name} needs {system.dimension}")
    if not np.all(np.isfinite(x)):
        raise ValueError("initial state must be finite")
    if step <= 0 or t_end == t_start:
        raise ValueError("step must be positive and the time span non-empty")
    direction = 1.0 if t_end > t_start else -1.0
    steps = int(np.ceil(abs(t_end - t_start) / step - 1e-9))
    h = direction * abs(t_end - t_start) / steps

    rhs = CompiledPolys(system.vector_field)
    invariants = CompiledPolys(system.invariants) if system.invariants else None
    h0 = invariants(x) if invariants else np.zeros(0)
    denominators = np.maximum(1.0, np.abs(h0))

    times = [t_start]
    states = [x]
    drift = [np.zeros(len(h0))]
    blow_up = None
    for i in range(steps):
        if adaptive:
            x = _advance(rhs, x, h)
        else:
            x, _ = cash_karp_step(rhs, x, h)
        t = t_start + (i + 1) * h
        norm = float(np.linalg.norm(x))
        if not np.isfinite(norm) or norm > BLOW_UP_NORM:
            weights = weights or system.weights or detect_weights(system)
            if np.all(np.isfinite(x)):
                blow_up = _blow_up_estimate(times[-1:] + [t], states[-1:] + [x], weights)
            elif len(states) > 1:
                blow_up = _blow_up_estimate(times[-2:], states[-2:], weights)
            else:
                blow_up = float(t)
            logger.warning("%s: state norm exceeded %.0e near t=%.6g; trajectory truncated", system.name,
                           BLOW_UP_NORM, blow_up)
            break
        times.append(t)
        states.append(x)
        drift.append(np.abs(invariants(x) - h0) / denominators if invariants else np.zeros(0))

    trajectory = Trajectory(
        np.asarray(times), np.asarray(states), system.invariant_names, np.asarray(drift), blow_up, drift_tolerance
    )
    if trajectory.flagged:
        message = f"invariant drift {trajectory.max_drift:.3g} exceeds {drift_tolerance:.0e}"
        trajectory.warnings.append(message)
        logger.warning("%s: %s", system.name, message)
    return trajectory


def estimate_order(system: HamiltonianSystem, x0: Sequence[complex], t_end: float, step: float) -> float:
    """Empirical convergence order from fixed steps h, h/2, h/4 (Richardson ratio)."""
    finals = [
        integrate(system, x0, t_end, h, adaptive=False, drift_tolerance=np.inf).final_state()
        for h in (step, step / 2, step / 4)
    ]
    coarse = float(np.max(np.abs(finals[0] - finals[1])))
    fine = float(np.max(np.abs(finals[1] - finals[2])))
    if fine == 0:
        return float("inf")
    return float(np.log2(coarse / fine))


def laurent_seed(family: LaurentFamily, point: Sequence[Any], t0: complex = 1e-2) -> np.ndarray:
    """Evaluate the truncated family at t0, refusing visibly divergent series."""
    for i, component in enumerate(family.series.components()):
        terms = [m for m in component.term_magnitudes(point, t0) if m > 0]
        if len(terms) >= 3 and terms[-1] > terms[-2] > terms[-3]:
            name = family.series.phase_variables[i]
            raise SeriesDivergenceError(f"{name}: series terms grow at t0={t0} ({terms[-3]:.3g} -> {terms[-1]:.3g})")
    return family.evaluate(point, t0)


def seed_cross_check(
    system: HamiltonianSystem,
    family: LaurentFamily,
    point: Sequence[Any],
    t0: float = 1e-2,
    tol: float = 1e-6,
) -> dict[str, Any]:
    """Integrate a Laurent seed from t0 to 2 t0 and compare with the series there."""
    seed = laurent_seed(family, point, t0)
    trajectory = integrate(system, seed, 2 * t0, t0 / 1000, t_start=t0, drift_tolerance=np.inf)
    series_value = family.evaluate(point, 2 * t0)
    error = float(np.max(np.abs(trajectory.final_state() - series_value))) / max(
        1.0, float(np.max(np.abs(series_value)))
    )
    passed = error <= tol
    if not passed:
        logger.warning("%s: seed and series disagree at 2*t0 (relative %.3g)", system.name, error)
    return {"t0": t0, "relative_error": error, "passed": passed}
