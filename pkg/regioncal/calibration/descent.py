"""Coordinate descent with a grid line search.

Only a single parameter changes at a time, keeping all others fixed.
The classes are visited in ascending order, first ``a_c`` then ``b_c``.
Each line search evaluates the loss at every grid value, and the first grid
value with the lowest loss is adopted only when it strictly improves the loss.
The search stops after a full sweep over all parameters that changed nothing.

As the grid is finite and every adopted step strictly lowers the loss,
this always terminates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .sigmoid import CalibrationParams, GridSpec

logger = logging.getLogger(__name__)

LossFunction = Callable[[CalibrationParams], float]


@dataclass(frozen=True)
class TraceStep:
    """A single adopted parameter change."""

    sweep: int
    class_id: int
    parameter: str
    old: float
    new: float
    loss: float

    def as_dict(self) -> dict:
        return {
            "sweep": self.sweep,
            "class_id": self.class_id,
            "parameter": self.parameter,
            "old": self.old,
            "new": self.new,
            "loss": self.loss,
        }


@dataclass
class DescentResult:
    params: CalibrationParams
    initial_loss: float
    final_loss: float
    trace: list[TraceStep] = field(default_factory=list)

    #: Number of sweeps, including the final sweep that changed nothing.
    sweeps: int = 0


def coordinate_descent(
    loss_function: LossFunction,
    initial: CalibrationParams,
    grid: GridSpec,
    classes: Optional[Iterable[int]] = None,
    max_sweeps: Optional[int] = None,
) -> DescentResult:
    """Minimize the loss over the ``(a, b)`` parameters of the given classes."""
    classes = list(range(initial.class_count) if classes is None else classes)
    lines = (("a", grid.a_values), ("b", grid.b_values))

    params = initial
    loss = loss_function(params)
    result = DescentResult(params=params, initial_loss=loss, final_loss=loss)

    while max_sweeps is None or result.sweeps < max_sweeps:
        result.sweeps += 1
        changed = False
        for class_id in classes:
            for parameter, values in lines:
                candidates = [params.replace(class_id, **{parameter: value}) for value in values]
                losses = np.array([loss_function(candidate) for candidate in candidates])
                logger.debug(
                    "Class %d, line search over %s: %s", class_id, parameter, losses.tolist()
                )

                best = int(losses.argmin())  # first minimum
                if losses[best] < loss:
                    old = getattr(params, parameter)[class_id]
                    params = candidates[best]
                    loss = float(losses[best])
                    changed = True
                    result.trace.append(
                        TraceStep(
                            sweep=result.sweeps,
                            class_id=class_id,
                            parameter=parameter,
                            old=old,
                            new=getattr(params, parameter)[class_id],
                            loss=loss,
                        )
                    )

        logger.info("Sweep %d finished, loss is %.6f", result.sweeps, loss)
        if not changed:
            break

    result.params = params
    result.final_loss = loss
    return result
