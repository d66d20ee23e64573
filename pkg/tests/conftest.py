"""Shared fixtures: the small hand-checkable system used across test modules.

The "desk" system is sized so every recourse LP can be verified by
enumerating vertices: two thermal units, one wind plant with a 5/MW usage
cost, one load bus with a 1000/50 shortfall/surplus penalty pair, demand
100 MW and a 30 MW wind forecast.
"""

import numpy as np
import pytest

from stochdispatch.model import LoadBus, SystemModel, ThermalGenerator, TimestepInput, WindPlant


@pytest.fixture
def desk_sys() -> SystemModel:
    return SystemModel(
        generators=(
            ThermalGenerator("g1", cost=12.0, min_output=0.0, max_output=60.0,
                             ramp_up=60.0, ramp_down=60.0),
            ThermalGenerator("g2", cost=25.0, min_output=0.0, max_output=60.0,
                             ramp_up=60.0, ramp_down=60.0),
        ),
        wind=(WindPlant("w1", dispatch_cost=5.0, spill_cost=0.0),),
        loads=(LoadBus("q1", shortfall_cost=1000.0, surplus_cost=50.0),),
    )


@pytest.fixture
def desk_step() -> TimestepInput:
    return TimestepInput(demand=np.array([100.0]), wind_forecast=np.array([30.0]))


@pytest.fixture
def desk_x() -> np.ndarray:
    # a committed dispatch totalling 80 MW, leaving a 20 MW wind-or-penalty gap
    return np.array([60.0, 20.0])
