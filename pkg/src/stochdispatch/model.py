"""System description for single-bus economic dispatch.

The network is flattened: per-bus cost fields exist so the data model can
grow into a networked formulation, but only aggregate power balance is
ever enforced. All types are frozen value objects and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ThermalGenerator:
    name: str
    cost: float  # currency per MW dispatched
    min_output: float  # MW
    max_output: float  # MW
    ramp_up: float  # MW per step
    ramp_down: float  # MW per step


@dataclass(frozen=True)
class WindPlant:
    name: str
    dispatch_cost: float  # currency per MW of wind actually used
    spill_cost: float  # currency per MW of available wind curtailed


@dataclass(frozen=True)
class LoadBus:
    name: str
    shortfall_cost: float  # currency per MW of unserved load
    surplus_cost: float  # currency per MW of excess committed capacity


@dataclass(frozen=True)
class SystemModel:
    generators: tuple[ThermalGenerator, ...]
    wind: tuple[WindPlant, ...]
    loads: tuple[LoadBus, ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "wind", tuple(self.wind))
        object.__setattr__(self, "loads", tuple(self.loads))

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def n_wind(self) -> int:
        return len(self.wind)

    @property
    def n_load(self) -> int:
        return len(self.loads)

    # Array views used by the LP assemblers.

    def gen_costs(self) -> np.ndarray:
        return np.array([g.cost for g in self.generators])

    def gen_min(self) -> np.ndarray:
        return np.array([g.min_output for g in self.generators])

    def gen_max(self) -> np.ndarray:
        return np.array([g.max_output for g in self.generators])

    def gen_ramp_up(self) -> np.ndarray:
        return np.array([g.ramp_up for g in self.generators])

    def gen_ramp_down(self) -> np.ndarray:
        return np.array([g.ramp_down for g in self.generators])

    def wind_costs(self) -> np.ndarray:
        return np.array([w.dispatch_cost for w in self.wind])

    def spill_costs(self) -> np.ndarray:
        return np.array([w.spill_cost for w in self.wind])

    def shortfall_costs(self) -> np.ndarray:
        return np.array([q.shortfall_cost for q in self.loads])

    def surplus_costs(self) -> np.ndarray:
        return np.array([q.surplus_cost for q in self.loads])


@dataclass(frozen=True)
class TimestepInput:
    """Per-step exogenous data: demand per bus, forecast wind per plant,
    and the dispatch the fleet is currently sitting at (None relaxes the
    ramp coupling, used only to seed a simulation)."""

    demand: np.ndarray
    wind_forecast: np.ndarray
    prev_dispatch: np.ndarray | None = None

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.demand, dtype=float))
        w = np.atleast_1d(np.asarray(self.wind_forecast, dtype=float))
        if d.size == 0:
            raise InputError("demand vector is empty")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise InputError("demand must be finite and >= 0")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("wind forecast must be finite and >= 0")
        prev = self.prev_dispatch
        if prev is not None:
            prev = np.atleast_1d(np.asarray(prev, dtype=float))
            if not np.all(np.isfinite(prev)):
                raise InputError("previous dispatch must be finite")
        object.__setattr__(self, "demand", d)
        object.__setattr__(self, "wind_forecast", w)
        object.__setattr__(self, "prev_dispatch", prev)


def validate_system(model: SystemModel) -> list[str]:
    """Collect every invariant violation in the model.

    Returns a list of human-readable violations; an empty list means the
    model is valid. Pure: never raises for bad data, only reports it.
    """
    issues: list[str] = []
    if model.n_gen == 0:
        issues.append("system has no generators")
    for g in model.generators:
        if not 0 <= g.min_output <= g.max_output:
            issues.append(
                f"generator {g.name}: need 0 <= min_output <= max_output, "
                f"got [{g.min_output}, {g.max_output}]"
            )
        if g.ramp_up < 0:
            issues.append(f"generator {g.name}: ramp_up {g.ramp_up} < 0")
        if g.ramp_down < 0:
            issues.append(f"generator {g.name}: ramp_down {g.ramp_down} < 0")
        if g.cost < 0:
            issues.append(f"generator {g.name}: cost {g.cost} < 0")
    if model.n_gen and sum(g.max_output for g in model.generators) <= 0:
        issues.append("total generator capacity is zero")
    for w in model.wind:
        if w.dispatch_cost < 0:
            issues.append(f"wind {w.name}: dispatch_cost {w.dispatch_cost} < 0")
        if w.spill_cost < 0:
            issues.append(f"wind {w.name}: spill_cost {w.spill_cost} < 0")
    for q in model.loads:
        if q.surplus_cost < 0:
            issues.append(f"load {q.name}: surplus_cost {q.surplus_cost} < 0")
        if q.shortfall_cost <= q.surplus_cost:
            issues.append(
                f"load {q.name}: shortfall_cost {q.shortfall_cost} must exceed "
                f"surplus_cost {q.surplus_cost}"
            )
    return issues


def check_step(sys: SystemModel, step: TimestepInput) -> None:
    """Raise InputError when a TimestepInput is inconsistent with the model."""
    if step.demand.shape[0] != sys.n_load:
        raise InputError(
            f"demand has {step.demand.shape[0]} entries for {sys.n_load} load buses"
        )
    if step.wind_forecast.shape[0] != sys.n_wind:
        raise InputError(
            f"wind forecast has {step.wind_forecast.shape[0]} entries for "
            f"{sys.n_wind} plants"
        )
    if step.prev_dispatch is not None:
        prev = step.prev_dispatch
        if prev.shape[0] != sys.n_gen:
            raise InputError(
                f"previous dispatch has {prev.shape[0]} entries for "
                f"{sys.n_gen} generators"
            )
        lo = sys.gen_min()
        hi = sys.gen_max()
        tol = 1e-9 * (1.0 + np.abs(hi))
        bad = np.flatnonzero((prev < lo - tol) | (prev > hi + tol))
        if bad.size:
            g = sys.generators[bad[0]]
            raise InputError(
                f"previous dispatch {prev[bad[0]]:g} outside "
                f"[{g.min_output:g}, {g.max_output:g}] for generator {g.name}"
            )


# Desk-scale defaults.
#
# Costs follow a merit-order ladder: cheap baseload, a cluster of mid-merit
# units, one expensive peaker. Wind is free to use and free to spill, unserved
# load is an order of magnitude above the peaker, and surplus capacity carries
# a mild penalty. Everything is overridable via config.
LADDER_COSTS = (12.0, 55.0, 64.0, 72.0, 120.0)
DEFAULT_SHORTFALL_COST = 1000.0
DEFAULT_SURPLUS_COST = 50.0


def default_system(
    unit_capacity: float = 400.0,
    ramp_per_step: float = 40.0,
    ladder: Sequence[float] = LADDER_COSTS,
) -> SystemModel:
    """Build the bundled desk-scale fleet: one aggregate wind plant, one
    aggregate load bus, and one thermal unit per ladder cost."""
    gens = tuple(
        ThermalGenerator(
            name=f"g{i + 1}",
            cost=c,
            min_output=0.0,
            max_output=unit_capacity,
            ramp_up=ramp_per_step,
            ramp_down=ramp_per_step,
        )
        for i, c in enumerate(ladder)
    )
    return SystemModel(
        generators=gens,
        wind=(WindPlant(name="w1", dispatch_cost=0.0, spill_cost=0.0),),
        loads=(
            LoadBus(
                name="q1",
                shortfall_cost=DEFAULT_SHORTFALL_COST,
                surplus_cost=DEFAULT_SURPLUS_COST,
            ),
        ),
    )
