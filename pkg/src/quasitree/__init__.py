"""Projection complexes and quasi-trees of metric spaces, built from finite
families with pairwise projection distances, with empirical checks of the
inequalities they satisfy.

The numerical kernels come from a compiled extension when it is built and
from numpy otherwise; ``quasitree.kernels.BACKEND`` says which.
"""
from quasitree.core import (BarrierError, CoreParams, OrderError, ProjectionSystem,
                            TabularSystem, auto_K, check_theorem_main, find_barrier,
                            h_set, is_barrier, is_guard, large_set, modified_distance,
                            order_interval, validate_axioms)
from quasitree.complex import ProjectionComplex, bottleneck_delta, build_complex, graph_distance
from quasitree.blowup import BlowupSpace, PointRef, blowup_distance, build_blowup
from quasitree.hyperbolic import (BoundaryPoint, Geodesic, GeodesicSystem, HPoint, MoebiusMap,
                                  chain_instance, dpi_geodesics, random_geodesic_instance,
                                  schottky_instance)
from quasitree.action import ActionContext, GroupElement
from quasitree.kernels import BACKEND

__version__ = "0.1.0"
