"""s-parameterized quasi-probability distributions and nonclassicality depth."""
from .depth import (DepthConfig, DepthReport, analyze_depth, check_quasiclassical,
                    degree_estimate, depth_by_global_scan, depth_by_origin_roots, origin_scan)
from .errors import (ConfigError, ConsistencyError, ConvergenceError, GridCoverageError,
                     NumericalError, PoleError, QDepthError, TruncationError, TruncationWarning)
from .hermite2d import hermite2d_eval, hermite2d_table
from .phasespace import (OrderedMomentArray, PhaseGrid, apply_ladder, evaluate,
                         extract_coefficients, moments_transform, origin_value, smooth,
                         trace_pair, w_closed_form, w_eval, w_fock_element, w_via_charfn)
from .states import (ClosedFormState, FockDensityMatrix, StateSpec, make_coherent, make_fock,
                     make_thermal, mix, normalize, photon_add, photon_subtract, superpose)

__version__ = "0.1.0"
