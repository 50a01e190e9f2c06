"""plasmon_lab: linearized Hartree dynamics of a charged quantum gas around a radial equilibrium.

Modules
-------
equilibria  radial steady states mu(e) and their one-dimensional marginals phi(u)
hilbert     Cauchy/Hilbert transform of the marginal in all three half-plane modes
dielectric  Lindhard dielectric function D(lambda, k), Cauchy and Laplace forms
spectral    survival threshold, plasmon branch, Landau damping, Nyquist certificates
evolution   free-gas mode densities, Volterra ground truth, mode fitting, radial synthesis
green       mode-wise Green function decomposition and the oscillatory Green function
cli         command-line front end (``plasmon-lab``)
"""
from .dielectric import DielectricValue, InteractionSymbol, coulomb, eval_D, eval_D_laplace, volterra_kernel
from .equilibria import (EquilibriumProfile, Marginal, bose_einstein, build_marginal, compact_poly, fermi_dirac,
                         maxwell, moment, phi_hat, user_table)
from .errors import (ConfigError, DomainError, InconclusiveError, NoRootError, PlasmonLabError,
                     UnsupportedModeError, WrongRegimeError)
from .hilbert import HilbertEvaluator, eval_boundary, eval_continued, eval_derivative, eval_interior
from .spectral import (DispersionPoint, NyquistCertificate, ThresholdResult, group_velocity, landau_rate_compact,
                       landau_rate_gaussian, moment_integrals, nyquist_certificate, solve_damped_root,
                       solve_tau_star, solve_threshold)
from .evolution import (InitialKernel, ModeTrace, assemble_density, fit_mode, free_density,
                        free_density_derivatives, solve_volterra)
from .green import GreenDecomposition, GreenSolver, osc_green_radial, remainder_trace, residues

__version__ = "0.1.0"
