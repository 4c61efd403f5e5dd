"""Multi-frequency Maxwell workbench: forward solves, zeta-complete covers and internal-data reconstruction."""
from .config import ExperimentConfig
from .forward import MaxwellOperator, MeasurementSet, SyntheticDataset, solve_maxwell, solve_static, synthesize_measurements
from .frequency import CoverReport, FrequencyGrid, scan, select_cover
from .functionals import ZETAS
from .grid import Grid
from .materials import Bump, Illumination, MaterialParams, ScalarSpec
from .reconstruct import SeedValue, electroseismic_pipeline, integrate_method1, integrate_method2

__all__ = [
    "Bump", "CoverReport", "ExperimentConfig", "FrequencyGrid", "Grid", "Illumination", "MaterialParams",
    "MaxwellOperator", "MeasurementSet", "ScalarSpec", "SeedValue", "SyntheticDataset", "ZETAS",
    "electroseismic_pipeline", "integrate_method1", "integrate_method2", "scan", "select_cover",
    "solve_maxwell", "solve_static", "synthesize_measurements",
]
