#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ttot/tt_tensor.hpp"

namespace ttot {

class HypothesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// ||X - X*||_F^2 between two TT representations.
inline double recovery_error_sq(const TTTensor& x, const TTTensor& truth) {
    DenseTensor d = tt_to_dense(x);
    d -= tt_to_dense(truth);
    return d.frobenius_norm_sq();
}

/// Best rotations aligning the factors of a reference chain to an iterate,
/// together with the achieved weighted factor distance.
struct FactorAlignment {
    std::vector<Eigen::MatrixXd> rotations; // R_1 .. R_{K-1}, R_i is r_i x r_i
    double dist_sq{0.0};
    bool converged{false};
};

namespace detail {

/// L(R_{i-1}^T X*_i R_i): stacked rotated slices of the reference factor.
inline Eigen::MatrixXd rotated_left_unfold(const DenseTensor& f, const Eigen::MatrixXd& r_prev,
                                           const Eigen::MatrixXd& r_next) {
    const Index r0 = f.dim(0), d = f.dim(1), r1 = f.dim(2);
    Eigen::MatrixXd out(r0 * d, r1);
    for (Index s = 0; s < d; ++s)
        out.middleRows(s * r0, r0) = r_prev.transpose() * factor_slice(f, s) * r_next;
    return out;
}

/// Nearest rotation maximizing tr(R^T M), the orthogonal polar factor of M.
inline Eigen::MatrixXd procrustes_rotation(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().transpose();
}

} // namespace detail

/// Gauge-invariant squared factor distance between an iterate and a
/// reference: the rotations R_i minimize
///   sum_{i<K} sigma_max^2(X*) ||L(X_i) - L(R_{i-1}^T X*_i R_i)||_F^2
///            + ||L(X_K) - L(R_{K-1}^T X*_K)||_F^2
/// via alternating per-rotation Procrustes solves. Each single-rotation
/// subproblem is solved in closed form, so the objective is monotone in the
/// sweep; the alternation can stop short of the joint optimum, in which case
/// the returned value is an upper bound on the distance.
inline FactorAlignment factor_distance_sq(const TTTensor& x, const TTTensor& reference,
                                          double sigma_max_sq_reference, Index max_sweeps = 20,
                                          double tol = 1e-12) {
    x.validate();
    reference.validate();
    if (x.dims() != reference.dims() || x.ranks() != reference.ranks())
        throw DimensionError("factor_distance_sq: shape or rank mismatch");
    if (!is_left_orthogonal(x, 1e-8) || !is_left_orthogonal(reference, 1e-8))
        throw DimensionError("factor_distance_sq: inputs must be left-orthogonal");
    if (max_sweeps < 1) throw DimensionError("factor_distance_sq: need at least one sweep");

    const Index k = x.order();
    const std::vector<Index> ranks = x.ranks();
    const double w = sigma_max_sq_reference;

    FactorAlignment out;
    out.rotations.reserve(static_cast<std::size_t>(k - 1));
    for (Index i = 0; i < k - 1; ++i)
        out.rotations.push_back(Eigen::MatrixXd::Identity(ranks[static_cast<std::size_t>(i)],
                                                          ranks[static_cast<std::size_t>(i)]));

    auto rotation_at = [&out, k](Index i) -> Eigen::MatrixXd {
        // R_0 and R_K are fixed 1 x 1 identities (boundary ranks are 1).
        if (i == 0 || i == k) return Eigen::MatrixXd::Identity(1, 1);
        return out.rotations[static_cast<std::size_t>(i - 1)];
    };
    auto weight = [w, k](Index i) { return i < k ? w : 1.0; };

    auto objective = [&] {
        double total = 0.0;
        for (Index i = 1; i <= k; ++i) {
            Eigen::MatrixXd a = left_unfold(x.factors[static_cast<std::size_t>(i - 1)]);
            Eigen::MatrixXd b = detail::rotated_left_unfold(reference.factors[static_cast<std::size_t>(i - 1)],
                                                            rotation_at(i - 1), rotation_at(i));
            total += weight(i) * (a - b).squaredNorm();
        }
        return total;
    };

    // Greedy forward pass: solve each R_i against the left term only, using
    // the rotations already chosen to its left. Exact when x is a pure gauge
    // transform of the reference; a plain starting point otherwise.
    for (Index i = 1; i <= k - 1; ++i) {
        const DenseTensor& ref_i = reference.factors[static_cast<std::size_t>(i - 1)];
        Eigen::MatrixXd b_i = detail::rotated_left_unfold(ref_i, rotation_at(i - 1),
                                                          Eigen::MatrixXd::Identity(ref_i.dim(2), ref_i.dim(2)));
        Eigen::MatrixXd a_i = left_unfold(x.factors[static_cast<std::size_t>(i - 1)]);
        out.rotations[static_cast<std::size_t>(i - 1)] = detail::procrustes_rotation(b_i.transpose() * a_i);
    }

    double prev = objective();
    for (Index sweep = 0; sweep < max_sweeps; ++sweep) {
        for (Index i = 1; i <= k - 1; ++i) {
            // Cross-Gram of the two terms touching R_i; the trace-linear part
            // of the objective as a function of R_i alone.
            const DenseTensor& ref_i = reference.factors[static_cast<std::size_t>(i - 1)];
            const DenseTensor& ref_n = reference.factors[static_cast<std::size_t>(i)];
            const DenseTensor& x_n = x.factors[static_cast<std::size_t>(i)];

            Eigen::MatrixXd b_i = detail::rotated_left_unfold(ref_i, rotation_at(i - 1),
                                                              Eigen::MatrixXd::Identity(ref_i.dim(2), ref_i.dim(2)));
            Eigen::MatrixXd a_i = left_unfold(x.factors[static_cast<std::size_t>(i - 1)]);
            Eigen::MatrixXd m = weight(i) * b_i.transpose() * a_i;

            for (Index s = 0; s < ref_n.dim(1); ++s)
                m += weight(i + 1) * detail::factor_slice(ref_n, s) * rotation_at(i + 1) *
                     detail::factor_slice(x_n, s).transpose();

            out.rotations[static_cast<std::size_t>(i - 1)] = detail::procrustes_rotation(m);
        }
        const double cur = objective();
        if (prev - cur <= tol * std::max(1.0, prev)) {
            out.dist_sq = cur;
            out.converged = true;
            return out;
        }
        prev = cur;
    }
    out.dist_sq = prev;
    return out;
}

/// Convenience overload: weight from the reference's spectrum.
inline FactorAlignment factor_distance_sq(const TTTensor& x, const TTTensor& reference) {
    const double s = tt_spectrum(reference).sigma_max;
    return factor_distance_sq(x, reference, s * s);
}

/// Two-sided comparison between the full-tensor error and the aligned factor
/// distance:
///   dist^2 / (8 (K + 1 + sum_{i=2}^{K-1} r_i) kappa^2(X*)) <= ||X - X*||_F^2
///   ||X - X*||_F^2 <= (9K/4) dist^2
/// The aligned distance upper-bounds the true minimum, so the upper check is
/// conservative-valid while the lower check uses it as a surrogate; slacks
/// are reported either way. Requires sigma_max^2(x) <= (9/4) sigma_max^2(truth).
struct SandwichReport {
    bool lower_ok{false};
    bool upper_ok{false};
    double lower_slack{0.0}; // ambient_error_sq - lower bound
    double upper_slack{0.0}; // upper bound - ambient_error_sq
    double ambient_error_sq{0.0};
    double dist_sq{0.0};
};

inline SandwichReport check_distance_sandwich(const TTTensor& x, const TTTensor& truth) {
    const TTSpectrum spec_x = tt_spectrum(x);
    const TTSpectrum spec_t = tt_spectrum(truth);
    if (spec_x.sigma_max * spec_x.sigma_max > 2.25 * spec_t.sigma_max * spec_t.sigma_max)
        throw HypothesisError("check_distance_sandwich: iterate spectrum violates the 9/4 hypothesis");

    const Index k = truth.order();
    const std::vector<Index> ranks = truth.ranks();
    double rank_sum = 0.0;
    for (std::size_t i = 1; i < ranks.size(); ++i) rank_sum += static_cast<double>(ranks[i]);

    SandwichReport b;
    b.dist_sq = factor_distance_sq(x, truth, spec_t.sigma_max * spec_t.sigma_max).dist_sq;
    b.ambient_error_sq = recovery_error_sq(x, truth);
    const double lower =
        b.dist_sq / (8.0 * (static_cast<double>(k) + 1.0 + rank_sum) * spec_t.kappa * spec_t.kappa);
    const double upper = 9.0 * static_cast<double>(k) / 4.0 * b.dist_sq;
    b.lower_slack = b.ambient_error_sq - lower;
    b.upper_slack = upper - b.ambient_error_sq;
    b.lower_ok = b.lower_slack >= -1e-9;
    b.upper_ok = b.upper_slack >= -1e-9;
    return b;
}

} // namespace ttot
