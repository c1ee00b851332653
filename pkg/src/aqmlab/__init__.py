"""aqmlab: deterministic bottleneck-queue simulation with classic AQMs and a
self-organizing-map RED controller."""

from .aqm import (AredState, DropTail, FredState, PiState, QueueDiscipline,
                  RedParams, ared_adapt, count_corrected_prob, ewma_update,
                  fred_adapt, make_discipline, pi_update, red_mark_prob)
from .cartpole import ValidationReport, pole_balance_validate
from .engine import (Event, Link, Packet, RunReport, SchedulingError,
                     Simulator, substream, transmit_time)
from .kred import (KredQueue, TrainingResult, convergence_check, kred_train,
                   teacher_max_p)
from .newreno import NewRenoFlow
from .scenario import (ConfigError, RttModel, RunMetrics, ScenarioSpec,
                       build_scenario, emit_timeseries, run_comparison,
                       run_scenario, write_summary)
from .som import (FrozenMapError, LearnParams, SomFormatError, SomMap,
                  load_map, save_map)

__version__ = "0.1.0"
