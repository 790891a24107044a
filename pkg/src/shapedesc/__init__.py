"""Shape optimization by steepest descent with interchangeable shape update methods."""
from .mesh import BoundaryCurve, TriMesh, boundary_loops, displace, min_quality
from .optimizer import DescentConfig, DescentResult, line_search, max_displacement_step, run_descent
from .problem import AnalyticProvider, IllustrativeProblem, levelset_oracle
from .remesh import generate_annulus, generate_diamond_annulus, remesh
from .updates import UpdateMethod, compute_update

__version__ = "0.1.0"

__all__ = [
    "AnalyticProvider",
    "BoundaryCurve",
    "DescentConfig",
    "DescentResult",
    "IllustrativeProblem",
    "TriMesh",
    "UpdateMethod",
    "boundary_loops",
    "compute_update",
    "displace",
    "generate_annulus",
    "generate_diamond_annulus",
    "levelset_oracle",
    "line_search",
    "max_displacement_step",
    "min_quality",
    "remesh",
    "run_descent",
]
