"""
Analysis-suitable G1 multi-patch spline surfaces: construction from G1 input,
AS-G1 checks, the C1 isogeometric space and biharmonic Galerkin solvers.
"""
from utils.shared import APP_VERSION

from .c1space import C1Space, DiscreteField, build_c1_space, verify_c1
from .construction import ConstructionParams, check_asg1, construct_global, construct_local
from .errors import Asg1Error
from .geometry_io import read_geometry, write_geometry
from .gluing import GluingData, estimate_gluing, gluing_for
from .iga import MANUFACTURED, ProblemSpec, convergence_study, error_norms, solve
from .mpatch import MultiPatchSpline, build_topology, canonicalize, relative_errors
from .splinecore import SplineSpace1D

__version__ = APP_VERSION.lstrip('v')
