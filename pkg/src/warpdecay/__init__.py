"""Decay-rate barriers and spectral checks for radial eigenfunctions on warped products."""
from .barriers import (BoundTemplate, GrowthRateCase, barrier_candidate, case_bound, case_table,
                       check_hypothesis, comparison_envelope, hypothesis_profile, make_case, rates,
                       rates_negative, subsolution_check, supersolution_check)
from .expr import Expr, parse
from .models import build_prop12, build_prop13, build_remark61, euclidean_ball_mode
from .profiles import (WarpingProfile, distance_mean_curvature, ess_spectrum_bottom, load_profile,
                       mean_curvature, measure_density)
from .radial import (DecayFit, RadialSolution, decay_exponent_fit, integrate_radial,
                     normalized_residual, residual)
from .spectral import (count_eigenvalues_below, dirichlet_eigenvalue_annulus, fd_oracle,
                       ground_state_search, rayleigh_test, shooting_eigenvalues)

__version__ = "0.1.0"
