#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ttot/tot_model.hpp"
#include "ttot/tt_tensor.hpp"

namespace ttot {

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loss blow-up factor treated as divergence (signals a bad step size).
inline constexpr double kDivergenceFactor = 1e6;

struct IhtConfig {
    double step_size{0.5};
    Index max_iters{1000};
    std::vector<Index> target_ranks;
    double stop_tol{1e-12};
    double max_wall_s{300.0};
};

enum class RgdScaleMode {
    ground_truth_sigma_max_sq,
    iterate_frobenius_sq,
};

struct RgdConfig {
    double step_size{0.5};
    Index max_iters{1000};
    std::vector<Index> target_ranks;
    RgdScaleMode scale_mode{RgdScaleMode::iterate_frobenius_sq};
    double stop_tol{1e-12};
    double max_wall_s{300.0};
};

struct TraceRecord {
    Index iter{0};
    double loss{0.0};
    double recovery_error_sq{-1.0}; // -1 when ground truth absent
    double wall_time_s{0.0};
};

struct SolverTrace {
    std::vector<TraceRecord> iterations;
    bool timed_out{false};
};

/// Per-factor Euclidean gradients of the factorized objective.
struct FactorGradients {
    std::vector<DenseTensor> grads; // grads[i] has shape (r_{i-1}, d_i, r_i)
};

/// Spectral initialization: sequential-SVD truncation of the backprojected
/// responses (1/m) A*(Y).
inline TTTensor spectral_init(const TotProblem& problem, const std::vector<Index>& ranks) {
    DenseTensor back = adjoint_map(problem.covariates, problem.responses);
    back *= 1.0 / static_cast<double>(problem.n_samples());
    return tt_svd(back, ranks);
}

/// Gradient of the full-tensor objective: (1/m) A*(A(X) - Y).
inline DenseTensor iht_gradient(const TotProblem& problem, const DenseTensor& x) {
    DenseTensor residual = forward_map(problem.covariates, x);
    residual -= problem.responses;
    DenseTensor g = adjoint_map(problem.covariates, residual);
    g *= 1.0 / static_cast<double>(problem.n_samples());
    return g;
}

namespace detail {

inline double recovery_err_sq(const DenseTensor& x, const std::optional<DenseTensor>& truth) {
    if (!truth) return -1.0;
    DenseTensor d = x;
    d -= *truth;
    return d.frobenius_norm_sq();
}

} // namespace detail

/// Projected gradient descent over the full tensor: gradient step followed by
/// sequential-SVD truncation to the target ranks.
inline std::pair<TTTensor, SolverTrace> iht_run(const TotProblem& problem, const TTTensor& init,
                                                const IhtConfig& cfg,
                                                const std::optional<TTTensor>& ground_truth = std::nullopt) {
    if (cfg.step_size <= 0.0 || cfg.max_iters < 1 || cfg.stop_tol < 0.0)
        throw std::invalid_argument("iht_run: invalid config");
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    std::optional<DenseTensor> truth_dense;
    if (ground_truth) truth_dense = tt_to_dense(*ground_truth);

    TTTensor iterate = init;
    DenseTensor x = tt_to_dense(iterate);
    SolverTrace trace;
    const double loss0 = loss(problem, x);

    for (Index t = 0; t < cfg.max_iters; ++t) {
        DenseTensor g = iht_gradient(problem, x);
        DenseTensor stepped = x;
        g *= cfg.step_size;
        stepped -= g;
        iterate = tt_svd(stepped, cfg.target_ranks);
        DenseTensor x_next = tt_to_dense(iterate);

        const double l = loss(problem, x_next);
        trace.iterations.push_back({t + 1, l, detail::recovery_err_sq(x_next, truth_dense), elapsed()});
        if (l > kDivergenceFactor * loss0 && l > 1e-12)
            throw DivergenceError("iht_run: loss exceeded 1e6x initial loss (step size too large?)");

        DenseTensor delta = x_next;
        delta -= x;
        const double rel_change = delta.frobenius_norm() / std::max(x.frobenius_norm(), 1e-300);
        x = std::move(x_next);
        if (rel_change < cfg.stop_tol) break;
        if (elapsed() > cfg.max_wall_s) {
            trace.timed_out = true;
            break;
        }
    }
    return {std::move(iterate), std::move(trace)};
}

/// Projection onto the tangent space of the Stiefel manifold at `base`:
/// grad - (1/2) base (grad^T base + base^T grad).
inline Eigen::MatrixXd stiefel_project(const Eigen::MatrixXd& base, const Eigen::MatrixXd& grad) {
    const Eigen::MatrixXd gram = base.transpose() * base;
    if ((gram - Eigen::MatrixXd::Identity(base.cols(), base.cols())).norm() > 1e-8)
        throw std::invalid_argument("stiefel_project: base is not orthonormal");
    return grad - 0.5 * base * (grad.transpose() * base + base.transpose() * grad);
}

/// Polar retraction: the orthonormal polar factor of base + step.
inline Eigen::MatrixXd polar_retract(const Eigen::MatrixXd& base, const Eigen::MatrixXd& step) {
    Eigen::MatrixXd y = base + step;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()(svd.singularValues().size() - 1) < 1e-12)
        throw std::invalid_argument("polar_retract: base + step is rank-deficient");
    return svd.matrixU() * svd.matrixV().transpose();
}

/// Euclidean gradients of the factorized objective with respect to every
/// factor, evaluated by backprojecting the residual once and contracting it
/// against the complementary factor chains.
inline FactorGradients rgd_factor_gradients(const TotProblem& problem, const TTTensor& factors) {
    factors.validate();
    const Index k = factors.order();
    DenseTensor g = iht_gradient(problem, tt_to_dense(factors));
    std::vector<double> g_colex = to_colex(g);

    FactorGradients out;
    out.grads.reserve(static_cast<std::size_t>(k));
    for (Index i = 1; i <= k; ++i) {
        const DenseTensor& f = factors.factors[static_cast<std::size_t>(i - 1)];
        const Index r0 = f.dim(0), d = f.dim(1), r1 = f.dim(2);

        Eigen::MatrixXd lchain = detail::left_chain(factors, i - 1);   // n_left x r0
        Eigen::MatrixXd rchain = detail::right_chain(factors, i + 1);  // r1 x n_right
        const Index n_left = lchain.rows();
        const Index n_right = rchain.cols();

        // Colex layout of g splits as (n_left * d) x n_right.
        Eigen::Map<const Eigen::MatrixXd> gm(g_colex.data(), n_left * d, n_right);
        Eigen::MatrixXd tmp = gm * rchain.transpose(); // (n_left d) x r1

        DenseTensor grad({r0, d, r1});
        for (Index s = 0; s < d; ++s) {
            Eigen::MatrixXd block = lchain.transpose() * tmp.middleRows(s * n_left, n_left); // r0 x r1
            for (Index a = 0; a < r0; ++a)
                for (Index b = 0; b < r1; ++b)
                    grad[(a * d + s) * r1 + b] = block(a, b);
        }
        out.grads.push_back(std::move(grad));
    }
    return out;
}

/// Riemannian gradient descent over left-orthogonal factors: factors
/// 1..K-1 move by project-then-retract on the Stiefel manifold, the last
/// factor by a plain gradient step. The last core is not re-orthogonalized
/// between iterations, so only the first K-1 unfoldings stay orthonormal.
inline std::pair<TTTensor, SolverTrace> rgd_run(const TotProblem& problem, const TTTensor& init,
                                                const RgdConfig& cfg,
                                                const std::optional<TTTensor>& ground_truth = std::nullopt) {
    if (cfg.step_size <= 0.0 || cfg.max_iters < 1 || cfg.stop_tol < 0.0)
        throw std::invalid_argument("rgd_run: invalid config");
    if (!is_left_orthogonal(init, 1e-8))
        throw std::invalid_argument("rgd_run: initialization must be left-orthogonal");
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    std::optional<DenseTensor> truth_dense;
    double truth_sigma_max_sq = 0.0;
    if (ground_truth) {
        truth_dense = tt_to_dense(*ground_truth);
        if (cfg.scale_mode == RgdScaleMode::ground_truth_sigma_max_sq)
            truth_sigma_max_sq = tt_spectrum(*ground_truth).sigma_max * tt_spectrum(*ground_truth).sigma_max;
    } else if (cfg.scale_mode == RgdScaleMode::ground_truth_sigma_max_sq) {
        throw std::invalid_argument("rgd_run: ground_truth_sigma_max_sq scaling requires the ground truth");
    }

    TTTensor iterate = init;
    const Index k = iterate.order();
    SolverTrace trace;
    DenseTensor x = tt_to_dense(iterate);
    const double loss0 = loss(problem, x);

    for (Index t = 0; t < cfg.max_iters; ++t) {
        FactorGradients fg = rgd_factor_gradients(problem, iterate);

        const double scale = cfg.scale_mode == RgdScaleMode::ground_truth_sigma_max_sq
                                 ? truth_sigma_max_sq
                                 : x.frobenius_norm_sq();

        TTTensor next = iterate;
        for (Index i = 0; i < k - 1; ++i) {
            const DenseTensor& f = iterate.factors[static_cast<std::size_t>(i)];
            Eigen::MatrixXd base = left_unfold(f);
            Eigen::MatrixXd grad = left_unfold(fg.grads[static_cast<std::size_t>(i)]);
            Eigen::MatrixXd tangent = stiefel_project(base, grad);
            Eigen::MatrixXd updated = polar_retract(base, -(cfg.step_size / scale) * tangent);
            next.factors[static_cast<std::size_t>(i)] = fold_left(updated, f.dim(0), f.dim(1), f.dim(2));
        }
        {
            const DenseTensor& f = iterate.factors[static_cast<std::size_t>(k - 1)];
            Eigen::MatrixXd updated =
                left_unfold(f) - cfg.step_size * left_unfold(fg.grads[static_cast<std::size_t>(k - 1)]);
            next.factors[static_cast<std::size_t>(k - 1)] = fold_left(updated, f.dim(0), f.dim(1), f.dim(2));
        }
        next.left_orthogonal = true;

        DenseTensor x_next = tt_to_dense(next);
        const double l = loss(problem, x_next);
        trace.iterations.push_back({t + 1, l, detail::recovery_err_sq(x_next, truth_dense), elapsed()});
        if (l > kDivergenceFactor * loss0 && l > 1e-12)
            throw DivergenceError("rgd_run: loss exceeded 1e6x initial loss (step size too large?)");

        DenseTensor delta = x_next;
        delta -= x;
        const double rel_change = delta.frobenius_norm() / std::max(x.frobenius_norm(), 1e-300);
        iterate = std::move(next);
        x = std::move(x_next);
        if (rel_change < cfg.stop_tol) break;
        if (elapsed() > cfg.max_wall_s) {
            trace.timed_out = true;
            break;
        }
    }
    return {std::move(iterate), std::move(trace)};
}

/// Theoretical IHT step-size upper bound (1 - delta) / (2 (1 + delta)^2).
inline double iht_step_upper_bound(double delta) {
    return (1.0 - delta) / (2.0 * (1.0 + delta) * (1.0 + delta));
}

/// Theoretical IHT step-size lower bound; requires the initialization error
/// and the smallest unfolding singular value of the ground truth.
inline double iht_step_lower_bound(double delta, Index order, double init_error, double sigma_min) {
    const double c = 600.0 * static_cast<double>(order) / sigma_min * init_error;
    return c / ((1.0 + c) * (1.0 - delta));
}

/// Theoretical RGD step size (7 - 30 delta) / (20 (9K - 5) (1 + delta)^2).
inline double rgd_step_bound(double delta, Index order) {
    return (7.0 - 30.0 * delta) /
           (20.0 * (9.0 * static_cast<double>(order) - 5.0) * (1.0 + delta) * (1.0 + delta));
}

} // namespace ttot
