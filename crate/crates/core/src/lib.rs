//! Numerical library for the semiclassical mean-field model of a
//! harmonically trapped Bose gas: special functions, interaction potentials,
//! the ideal gas, the self-consistent phase-space solver, the critical
//! temperature and its interaction shift, a finite-N Hartree solver, and
//! property checks for the supporting inequalities.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod critical_temperature;
pub mod error;
pub mod hartree_radial;
pub mod ideal_gas;
pub mod inequality_lab;
pub mod potentials;
pub mod quadrature;
pub mod sc_solver;
pub mod special_functions;
pub mod tridiagonal;

pub use critical_temperature::{
    find_tc, tc_slope_check, xi_coefficient, SlopeReport, TcOptions, TcResult,
};
pub use error::{Error, Result};
pub use hartree_radial::{
    compare_to_semiclassical, condensate_fraction, dual_objective, husimi_slice, solve_hartree,
    spectral_gap, DistanceReport, HartreeOptions, HartreeState, HusimiSlice, Ray,
};
pub use ideal_gas::{ideal_state, IdealState};
pub use inequality_lab::{run_suite, Suite, SuiteReport};
pub use potentials::{
    make_gaussian_potential, radial_convolution, validate_assumption, Potential, RadialDensity,
    ValidationReport,
};
pub use quadrature::RadialGrid;
pub use sc_solver::{solve_selfconsistent, SCState, SolverOptions};
