"""Spin-1/2 lattice models with Boltzmann-amplitude ground states.

Builders for the Hamiltonians, exact verification of their eigenstate,
ground-state, correlation-bound and classical-reduction properties, and
classical Gibbs machinery (exact enumeration and Metropolis sampling) for
the order parameters.
"""

__version__ = "0.1.0"

from .classical import (
    ClassicalPotential,
    MetropolisResult,
    classical_expectation,
    flip,
    flip_weight,
    metropolis_estimate,
    partition_function,
    spin_product,
    squared_magnetization,
)
from .errors import (
    ConfigError,
    ConstraintError,
    ConvergenceError,
    GibbsGroundError,
    InternalConsistencyError,
    NonHermitianError,
    SizeCapError,
    UnsupportedModelError,
)
from .lattice import (
    Lattice,
    build_hypercube,
    linear_height,
    mask_from_sites,
    nearest_neighbor_pairs,
    sites_from_mask,
)
from .models import (
    CouplingTable,
    DiagonalCoupling,
    ModelInstance,
    build_gibbs_state,
    build_h,
    build_h0,
    build_v,
    conjugate_hamiltonian,
    diagonal_couplings,
    xxz_diagonal,
    xxz_hamiltonian,
    xxz_site_field,
)
from .operators import (
    OperatorMatrix,
    apply,
    basis_vector,
    diagonal_operator,
    pauli,
    product_operator,
    weighted_inner_product,
)
from .verify import (
    CheckRecord,
    HypothesisReport,
    ScanRow,
    SpectralResult,
    VerificationReport,
    dirichlet_form_check,
    eigen_residual,
    groundstate_hypotheses,
    min_eigenvalue,
    order_parameter_scan,
    quantum_expectation,
    reversibility_check,
    sx_product_bound,
    verify_model,
)
