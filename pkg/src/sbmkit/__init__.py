"""Subordinate Brownian motion toolkit.

Bernstein functions and their scaling certificates, Laplace inversion of the
subordinator densities, jump/Green/heat kernels, the ladder-height renewal
function, a reproducible Monte Carlo engine and the comparability suite that
ties them together.
"""
from .bernstein import (
    BernsteinSpec,
    ScalingCertificate,
    capital_phi,
    capital_phi_inv,
    certify,
    check_bernstein_sanity,
    conjugate,
    estimate_scaling_indices,
    eval_phi,
    eval_phi_prime,
    make_spec,
    example_families,
    pure_power,
    rescale,
)
from .errors import (
    BorderlineError,
    CertificationError,
    ConvergenceError,
    DomainError,
    McError,
    ParameterError,
    SbmError,
    TableResolutionError,
)
from .kernels import (
    free_heat_kernel,
    green_radial_g,
    half_space_green_estimate,
    half_space_hk_estimate,
    jump_density_j,
    p_estimate,
)
from .laplace import DEFAULT_CONFIG, QuadratureConfig, invert_cm, levy_density_mu, levy_tail, potential_density_u
from .renewal import bhp_decay_comparator, ladder_exponent_chi, renewal_density_v, renewal_table
from .rng import RandomSource

__version__ = "0.1.0"
