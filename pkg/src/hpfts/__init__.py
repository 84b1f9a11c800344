"""Hamilton-Perry population projection with functional time-series ratio forecasts."""

from .demog_data import AgeGrid, MortalityPanel, PopulationPanel, Sex
from .errors import HpftsError, Unsatisfiable, ValidationError
from .hp_engine import ProjectionConfig, ProjectionResult, project, simulate_paths
from .pension import PensionAge, PensionAgeScheme, oadr, solve_scheme
from .welfare import life_table

__version__ = "0.1.0"

__all__ = [
    "AgeGrid", "MortalityPanel", "PopulationPanel", "Sex",
    "HpftsError", "Unsatisfiable", "ValidationError",
    "ProjectionConfig", "ProjectionResult", "project", "simulate_paths",
    "PensionAge", "PensionAgeScheme", "oadr", "solve_scheme",
    "life_table",
]
