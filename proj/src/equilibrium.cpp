#include "ionchain/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ionchain/errors.hpp"

namespace ionchain {

namespace {

void require_distinct(std::span<const double> u) {
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = i + 1; j < u.size(); ++j)
            if (u[i] == u[j])
                throw DomainError("chain energy undefined for coincident positions");
}

// Warm start: equal-charge quantiles of the parabolic density law. The
// cumulative density (3/4)t - (1/4)t^3 = q, t = z/L, solves in closed form
// as t = 2 sin(asin(2q) / 3).
std::vector<double> density_warm_start(long n_ions) {
    const double n = static_cast<double>(n_ions);
    const double big_l = std::cbrt(3.0 * n) * std::cbrt(chain_log_factor(n));
    std::vector<double> u(static_cast<std::size_t>(n_ions));
    for (long i = 0; i < n_ions; ++i) {
        const double q = (static_cast<double>(i) + 0.5) / n - 0.5;
        u[static_cast<std::size_t>(i)] = big_l * 2.0 * std::sin(std::asin(2.0 * q) / 3.0);
    }
    return u;
}

void require_valid(const ChainConfiguration& cfg) {
    if (cfg.positions.empty())
        throw DomainError("empty chain configuration");
    for (std::size_t i = 1; i < cfg.positions.size(); ++i)
        if (!(cfg.positions[i] > cfg.positions[i - 1]))
            throw DomainError("chain configuration must be strictly increasing");
}

}  // namespace

double chain_energy(std::span<const double> u) {
    require_distinct(u);
    double trap = 0.0, coulomb = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        trap += 0.5 * u[i] * u[i];
        for (std::size_t j = i + 1; j < u.size(); ++j)
            coulomb += 1.0 / std::abs(u[i] - u[j]);
    }
    return trap + coulomb;
}

Eigen::VectorXd chain_gradient(std::span<const double> u) {
    require_distinct(u);
    const auto n = static_cast<Eigen::Index>(u.size());
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        // Neumaier-compensated sum: the Coulomb terms cancel to ~1e-14 of
        // their individual magnitudes near equilibrium, and plain summation
        // would put a noise floor above the 1e-12 convergence tolerance.
        double sum = u[static_cast<std::size_t>(i)];
        double comp = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = u[static_cast<std::size_t>(i)] - u[static_cast<std::size_t>(j)];
            const double term = -(d > 0.0 ? 1.0 : -1.0) / (d * d);
            const double t = sum + term;
            if (std::abs(sum) >= std::abs(term))
                comp += (sum - t) + term;
            else
                comp += (term - t) + sum;
            sum = t;
        }
        g[i] = sum + comp;
    }
    return g;
}

Eigen::MatrixXd chain_hessian(std::span<const double> u) {
    require_distinct(u);
    const auto n = static_cast<Eigen::Index>(u.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double diag = 1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = std::abs(u[static_cast<std::size_t>(i)] - u[static_cast<std::size_t>(j)]);
            const double inv3 = 1.0 / (d * d * d);
            diag += 2.0 * inv3;
            h(i, j) = -2.0 * inv3;
        }
        h(i, i) = diag;
    }
    return h;
}

namespace {

bool strictly_increasing(const std::vector<double>& u) {
    for (std::size_t i = 1; i < u.size(); ++i)
        if (!(u[i] > u[i - 1])) return false;
    return true;
}

}  // namespace

ChainConfiguration solve_equilibrium(long n_ions, const SolveOptions& options) {
    if (n_ions < 1)
        throw DomainError("solve_equilibrium: need at least one ion");
    if (n_ions == 1) return ChainConfiguration{{0.0}};

    std::vector<double> u = density_warm_start(n_ions);
    const auto n = static_cast<Eigen::Index>(n_ions);

    // Phase 1: damped Newton with a backtracking Armijo line search until the
    // gradient is small enough that energy differences approach rounding.
    constexpr double kPolishThreshold = 1e-5;
    double energy = chain_energy(u);
    if (options.energy_trace) {
        options.energy_trace->clear();
        options.energy_trace->push_back(energy);
    }
    double grad_norm = std::numeric_limits<double>::infinity();
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd g = chain_gradient(u);
        grad_norm = g.lpNorm<Eigen::Infinity>();
        if (grad_norm <= kPolishThreshold) break;

        Eigen::VectorXd step;
        const Eigen::MatrixXd h = chain_hessian(u);
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() == Eigen::Success) {
            step = llt.solve(-g);
        } else {
            step = -g;  // steepest descent fallback off the convex region
        }

        const double slope = g.dot(step);
        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> trial(u.size());
        for (int bt = 0; bt < 60; ++bt) {
            for (Eigen::Index i = 0; i < n; ++i)
                trial[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + alpha * step[i];
            // Ions may not cross or coincide along a step; that would pass a
            // Coulomb singularity.
            if (strictly_increasing(trial)) {
                const double trial_energy = chain_energy(trial);
                if (trial_energy < energy + 1e-4 * alpha * slope) {
                    u = std::move(trial);
                    energy = trial_energy;
                    if (options.energy_trace) options.energy_trace->push_back(energy);
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted)
            throw NumericalError(
                "solve_equilibrium: line search stalled at gradient norm " +
                std::to_string(grad_norm) + " for N = " + std::to_string(n_ions));
    }
    if (grad_norm > kPolishThreshold)
        throw NumericalError("solve_equilibrium: no convergence after " +
                             std::to_string(options.max_iterations) +
                             " iterations (gradient norm " + std::to_string(grad_norm) +
                             ") for N = " + std::to_string(n_ions));

    // Phase 2: full Newton steps polish the gradient with quadratic
    // convergence. Positions move in ulp quanta here, so the gradient norm
    // bottoms out at ~ ||H||_inf * ulp(u_max); the requested tolerance is
    // clamped at that representational floor.
    double best = grad_norm;
    std::vector<double> best_u = u;
    int stalls = 0;
    for (; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd g = chain_gradient(u);
        grad_norm = g.lpNorm<Eigen::Infinity>();
        if (grad_norm < best) {
            best = grad_norm;
            best_u = u;
            stalls = 0;
        } else if (++stalls >= 3) {
            break;
        }
        if (grad_norm <= options.grad_tol) break;

        const Eigen::MatrixXd h = chain_hessian(u);
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() != Eigen::Success)
            throw NumericalError("solve_equilibrium: Hessian lost positive definiteness during polish");
        const Eigen::VectorXd step = llt.solve(-g);
        std::vector<double> trial(u.size());
        for (Eigen::Index i = 0; i < n; ++i)
            trial[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + step[i];
        if (!strictly_increasing(trial))
            throw NumericalError("solve_equilibrium: polish step crossed ions");
        u = std::move(trial);
    }

    u = std::move(best_u);
    const double u_max = std::max(std::abs(u.front()), std::abs(u.back()));
    const double floor = 2.0 * chain_hessian(u).cwiseAbs().rowwise().sum().maxCoeff() *
                         std::numeric_limits<double>::epsilon() * std::max(1.0, u_max);
    if (best <= std::max(options.grad_tol, floor)) {
        std::sort(u.begin(), u.end());
        return ChainConfiguration{std::move(u), best};
    }
    throw NumericalError("solve_equilibrium: no convergence after " +
                         std::to_string(options.max_iterations) +
                         " iterations (gradient norm " + std::to_string(best) +
                         ") for N = " + std::to_string(n_ions));
}

double min_spacing_numeric(const ChainConfiguration& cfg) {
    require_valid(cfg);
    if (cfg.positions.size() < 2)
        throw DomainError("min_spacing_numeric: need at least two ions");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < cfg.positions.size(); ++i)
        best = std::min(best, cfg.positions[i] - cfg.positions[i - 1]);
    return best;
}

std::vector<SpacingSample> spacings_with_midpoints(const ChainConfiguration& cfg,
                                                   double scale) {
    require_valid(cfg);
    std::vector<SpacingSample> samples;
    samples.reserve(cfg.positions.size() - 1);
    for (std::size_t i = 1; i < cfg.positions.size(); ++i) {
        const double lo = cfg.positions[i - 1], hi = cfg.positions[i];
        samples.push_back(SpacingSample{scale * 0.5 * (lo + hi), scale * (hi - lo)});
    }
    return samples;
}

Eigen::MatrixXd transverse_coupling_matrix(const ChainConfiguration& cfg) {
    require_valid(cfg);
    const auto n = static_cast<Eigen::Index>(cfg.positions.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double diag = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = std::abs(cfg.positions[static_cast<std::size_t>(i)] -
                                      cfg.positions[static_cast<std::size_t>(j)]);
            const double inv3 = 1.0 / (d * d * d);
            diag += inv3;
            a(i, j) = -inv3;
        }
        a(i, i) = diag;
    }
    return a;
}

StabilityResult zigzag_critical_ratio(long n_ions) {
    if (n_ions < 2)
        throw DomainError("zigzag_critical_ratio: need at least 2 ions");
    const ChainConfiguration cfg = solve_equilibrium(n_ions);
    const Eigen::MatrixXd a = transverse_coupling_matrix(cfg);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("zigzag_critical_ratio: eigenvalue solve failed for N = " +
                             std::to_string(n_ions));
    const double lambda_max = es.eigenvalues().maxCoeff();
    return StabilityResult{1.0 / lambda_max, n_ions};
}

}  // namespace ionchain
