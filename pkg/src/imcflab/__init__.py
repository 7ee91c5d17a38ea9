"""Numerical inverse mean curvature flow of star-shaped graphs in
asymptotically hyperbolic 3-manifolds."""
from .ambient import AmbientMetric, Point, QSpec, christoffels, curvature, eval_metric
from .config import ExperimentConfig, parse_config
from .flow import BarrierPair, FlowHalted, FlowSettings, FlowState, FlowTrace, barrier_radius, run_flow, step
from .grid import SphereGrid
from .surface import GraphSurface, assemble_geometry, extract_f, hawking_mass, limit_functional

__version__ = "0.1.0"

__all__ = [
    "AmbientMetric",
    "BarrierPair",
    "ExperimentConfig",
    "FlowHalted",
    "FlowSettings",
    "FlowState",
    "FlowTrace",
    "GraphSurface",
    "Point",
    "QSpec",
    "SphereGrid",
    "assemble_geometry",
    "barrier_radius",
    "christoffels",
    "curvature",
    "eval_metric",
    "extract_f",
    "hawking_mass",
    "limit_functional",
    "parse_config",
    "run_flow",
    "step",
]
