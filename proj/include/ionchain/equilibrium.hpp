#ifndef IONCHAIN_EQUILIBRIUM_HPP
#define IONCHAIN_EQUILIBRIUM_HPP

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "ionchain/dubin.hpp"

namespace ionchain {

// Equilibrium axial positions of an N-ion chain, dimensionless in units of
// the two-body length scale l. Strictly increasing and reflection-symmetric
// about 0 to solver tolerance.
struct ChainConfiguration {
    std::vector<double> positions;
    double converged_grad_norm = 0.0;

    long n_ions() const { return static_cast<long>(positions.size()); }
};

// Largest stable trap aspect ratio (omega_z / omega_r)^2 for a linear chain
// of n_ions. Equals 1 at N = 2 and decreases with N.
struct StabilityResult {
    double critical_ratio = 0.0;
    long n_ions = 0;
};

struct SolveOptions {
    double grad_tol = 1e-12;  // infinity norm of the dimensionless gradient
    int max_iterations = 500;
    // When set, receives the energy after the warm start and after every
    // accepted line-searched step (strictly decreasing).
    std::vector<double>* energy_trace = nullptr;
};

// Dimensionless chain energy  E(u) = sum u_i^2 / 2 + sum_{i<j} 1 / |u_i - u_j|.
// Throws DomainError on coincident positions.
double chain_energy(std::span<const double> u);

// Analytic gradient and Hessian of chain_energy.
Eigen::VectorXd chain_gradient(std::span<const double> u);
Eigen::MatrixXd chain_hessian(std::span<const double> u);

// Damped Newton minimization of chain_energy from the parabolic-density
// warm start. Deterministic; throws NumericalError on non-convergence,
// reporting the final gradient norm.
ChainConfiguration solve_equilibrium(long n_ions, const SolveOptions& options = {});

// Minimum adjacent spacing of a valid configuration (units of l).
double min_spacing_numeric(const ChainConfiguration& cfg);

// Adjacent spacings located at pair midpoints. position/spacing fields are in
// units of `scale` (pass the length scale in meters to get meters; the
// default keeps them dimensionless).
std::vector<SpacingSample> spacings_with_midpoints(const ChainConfiguration& cfg,
                                                   double scale = 1.0);

// Dimensionless transverse coupling matrix of the linear chain:
// A_ii = sum_{k != i} 1/|u_i - u_k|^3,  A_ij = -1/|u_i - u_j|^3.
// A transverse mode at eigenvalue lambda softens when (omega_r/omega_z)^2
// drops to lambda.
Eigen::MatrixXd transverse_coupling_matrix(const ChainConfiguration& cfg);

// Zigzag stability threshold: critical_ratio = 1 / lambda_max(A). The chain
// is a stable line iff (omega_z / omega_r)^2 < critical_ratio.
StabilityResult zigzag_critical_ratio(long n_ions);

}  // namespace ionchain

#endif
