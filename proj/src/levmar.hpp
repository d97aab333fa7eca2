#ifndef IONCHAIN_SRC_LEVMAR_HPP
#define IONCHAIN_SRC_LEVMAR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>

namespace ionchain::detail {

struct LevMarOptions {
    int max_iterations = 200;
    double grad_tol = 1e-12;
    double step_tol = 1e-14;
    double lambda0 = 1e-3;
};

struct LevMarResult {
    Eigen::VectorXd theta;
    double rss = 0.0;
    int iterations = 0;
    bool converged = false;
    Eigen::MatrixXd jtj;  // at the solution, for covariance estimates
};

// Minimizes ||r(theta)||^2 for a residual functor eval(theta, r, J) with an
// analytic Jacobian. Marquardt damping scales the JtJ diagonal.
inline LevMarResult levenberg_marquardt(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>& eval,
    Eigen::VectorXd theta, const LevMarOptions& options = {}) {
    LevMarResult result;
    const auto p = theta.size();
    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    eval(theta, r, j);
    double rss = r.squaredNorm();
    double lambda = options.lambda0;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        result.iterations = iter + 1;
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() <= options.grad_tol) {
            result.converged = true;
            break;
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            for (Eigen::Index i = 0; i < p; ++i) {
                const double d = jtj(i, i);
                damped(i, i) = d + lambda * (d > 0.0 ? d : 1.0);
            }
            const Eigen::VectorXd delta = damped.ldlt().solve(-g);
            if (!delta.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            const Eigen::VectorXd trial = theta + delta;
            Eigen::VectorXd r_trial;
            Eigen::MatrixXd j_trial;
            eval(trial, r_trial, j_trial);
            const double rss_trial = r_trial.squaredNorm();
            if (std::isfinite(rss_trial) && rss_trial <= rss) {
                const double step_scale = delta.lpNorm<Eigen::Infinity>() /
                                          (1.0 + theta.lpNorm<Eigen::Infinity>());
                theta = trial;
                r = std::move(r_trial);
                j = std::move(j_trial);
                const bool tiny_step = step_scale <= options.step_tol;
                const bool tiny_gain = (rss - rss_trial) <= options.step_tol * (1.0 + rss);
                rss = rss_trial;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (tiny_step && tiny_gain) result.converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!stepped || result.converged) {
            result.converged = result.converged || !stepped;
            break;
        }
    }

    result.theta = std::move(theta);
    result.rss = rss;
    result.jtj = j.transpose() * j;
    return result;
}

}  // namespace ionchain::detail

#endif
