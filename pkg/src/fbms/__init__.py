"""Second-variation spectra and index bounds for free-boundary minimal surfaces."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .mesh import (TopologyInvariants, TriangulatedSurface, builtin_surface, compute_topology,  # noqa: E402
                   load_mesh, make_surface, refine_mesh, save_mesh)
from .ambient import (AmbientSpace, ImmersedSurface, ambient_bounds, ambient_from_spec,  # noqa: E402
                      boundary_second_form, evaluate_curvature_operator, immerse, space_form,
                      unit_ball, validate_free_boundary)
from .forms import (FormAssembly, SectionField, assemble_area_form, assemble_energy_form,  # noqa: E402
                    assemble_robin_form, assemble_tangential_form, normal_section)
from .dbar import comparison_defect, solve_dbar_reparametrization  # noqa: E402
from .spectral import Spectrum, beta_count, classify_spectrum, solve_spectrum  # noqa: E402
from .heat import (HeatTrace, betti_bound_evaluator, boundary_trace_check, heat_trace,  # noqa: E402
                   index_bound_closed_form, kernel_domination_check, sobolev_check)
from .bounds import (BoundReport, acs_lower_bound, geometric_area_bounds, riemann_roch,  # noqa: E402
                     upsilon, verify_inequalities)
from .estimators import MorseIndexEstimator, SobolevRatioTransformer  # noqa: E402
