#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ttot/dense_tensor.hpp"
#include "ttot/rng.hpp"

namespace ttot {

/// Singular values below this fraction of sigma_1 count as zero when
/// inferring numerical ranks.
inline constexpr double kRankTolerance = 1e-9;

/// Tensor in TT format: a chain of order-3 factors, factor i of shape
/// (r_{i-1}, d_i, r_i) with r_0 = r_K = 1.
struct TTTensor {
    std::vector<DenseTensor> factors;
    bool left_orthogonal{false};

    Index order() const { return static_cast<Index>(factors.size()); }

    std::vector<Index> dims() const {
        std::vector<Index> d;
        d.reserve(factors.size());
        for (const auto& f : factors) d.push_back(f.dim(1));
        return d;
    }

    /// Internal ranks (r_1 .. r_{K-1}).
    std::vector<Index> ranks() const {
        std::vector<Index> r;
        for (std::size_t i = 0; i + 1 < factors.size(); ++i) r.push_back(factors[i].dim(2));
        return r;
    }

    void validate() const {
        if (factors.empty()) throw DimensionError("TTTensor: no factors");
        for (const auto& f : factors)
            if (f.order() != 3) throw DimensionError("TTTensor: factors must be order 3");
        if (factors.front().dim(0) != 1 || factors.back().dim(2) != 1)
            throw DimensionError("TTTensor: boundary ranks must be 1");
        for (std::size_t i = 0; i + 1 < factors.size(); ++i)
            if (factors[i].dim(2) != factors[i + 1].dim(0))
                throw DimensionError("TTTensor: factor chain incompatible at position " + std::to_string(i));
    }
};

/// Left unfolding L(X_i): the (r_{i-1} d_i) x r_i matrix stacking the lateral
/// slices X_i(s_i) vertically.
inline Eigen::MatrixXd left_unfold(const DenseTensor& factor) {
    if (factor.order() != 3) throw DimensionError("left_unfold: factor must be order 3");
    const Index r0 = factor.dim(0), d = factor.dim(1), r1 = factor.dim(2);
    Eigen::MatrixXd out(r0 * d, r1);
    for (Index s = 0; s < d; ++s)
        for (Index a = 0; a < r0; ++a)
            for (Index b = 0; b < r1; ++b)
                out(s * r0 + a, b) = factor[(a * d + s) * r1 + b];
    return out;
}

/// Inverse of left_unfold.
inline DenseTensor fold_left(const Eigen::MatrixXd& m, Index r0, Index d, Index r1) {
    if (m.rows() != r0 * d || m.cols() != r1) throw DimensionError("fold_left: shape mismatch");
    DenseTensor out({r0, d, r1});
    for (Index s = 0; s < d; ++s)
        for (Index a = 0; a < r0; ++a)
            for (Index b = 0; b < r1; ++b)
                out[(a * d + s) * r1 + b] = m(s * r0 + a, b);
    return out;
}

namespace detail {

/// X_i(s) as an r_{i-1} x r_i matrix.
inline Eigen::MatrixXd factor_slice(const DenseTensor& f, Index s) {
    const Index r0 = f.dim(0), d = f.dim(1), r1 = f.dim(2);
    Eigen::MatrixXd m(r0, r1);
    for (Index a = 0; a < r0; ++a)
        for (Index b = 0; b < r1; ++b)
            m(a, b) = f[(a * d + s) * r1 + b];
    return m;
}

/// Left chain X^{<= i}: (d_1...d_i) x r_i, rows colexicographic (s_1 fastest).
/// i is 1-based; i = 0 yields the 1 x 1 identity.
inline Eigen::MatrixXd left_chain(const TTTensor& tt, Index i) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(1, 1);
    for (Index j = 0; j < i; ++j) {
        const DenseTensor& f = tt.factors[static_cast<std::size_t>(j)];
        const Index d = f.dim(1), r1 = f.dim(2);
        const Index n_prev = acc.rows();
        Eigen::MatrixXd next(n_prev * d, r1);
        for (Index s = 0; s < d; ++s)
            next.middleRows(s * n_prev, n_prev) = acc * factor_slice(f, s);
        acc = std::move(next);
    }
    return acc;
}

/// Right chain X^{>= j}: r_{j-1} x (d_j...d_K), columns colexicographic
/// (s_j fastest). j is 1-based; j = K+1 yields the 1 x 1 identity.
inline Eigen::MatrixXd right_chain(const TTTensor& tt, Index j) {
    const Index k = tt.order();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(1, 1);
    for (Index p = k; p >= j; --p) {
        const DenseTensor& f = tt.factors[static_cast<std::size_t>(p - 1)];
        const Index r0 = f.dim(0), d = f.dim(1);
        const Index n_prev = acc.cols();
        Eigen::MatrixXd next(r0, d * n_prev);
        for (Index c = 0; c < n_prev; ++c)
            for (Index s = 0; s < d; ++s)
                next.col(s + d * c) = factor_slice(f, s) * acc.col(c);
        acc = std::move(next);
    }
    return acc;
}

} // namespace detail

/// Materialize the dense tensor represented by a TT chain.
inline DenseTensor tt_to_dense(const TTTensor& tt) {
    tt.validate();
    const std::vector<Index> dims = tt.dims();
    if (product(dims) > kDenseEntryCap)
        throw DimensionError("tt_to_dense: refusing to materialize " + std::to_string(product(dims)) + " entries");
    Eigen::MatrixXd chain = detail::left_chain(tt, tt.order()); // (d_1...d_K) x 1, colex rows
    std::vector<double> colex(chain.data(), chain.data() + chain.rows());
    return from_colex(dims, colex);
}

/// Frobenius norm of a TT tensor without densification.
inline double tt_norm(const TTTensor& tt) {
    if (tt.left_orthogonal) {
        return left_unfold(tt.factors.back()).norm();
    }
    // Gram sweep over factors.
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(1, 1);
    for (const auto& f : tt.factors) {
        const Index r1 = f.dim(2);
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(r1, r1);
        for (Index s = 0; s < f.dim(1); ++s) {
            Eigen::MatrixXd slice = detail::factor_slice(f, s);
            next += slice.transpose() * g * slice;
        }
        g = std::move(next);
    }
    return std::sqrt(std::max(0.0, g(0, 0)));
}

inline bool is_left_orthogonal(const TTTensor& tt, double tol = 1e-10) {
    for (std::size_t i = 0; i + 1 < tt.factors.size(); ++i) {
        Eigen::MatrixXd l = left_unfold(tt.factors[i]);
        const double dev = (l.transpose() * l - Eigen::MatrixXd::Identity(l.cols(), l.cols())).norm();
        if (dev > tol) return false;
    }
    return true;
}

namespace detail {

/// Fix SVD sign ambiguity: make the largest-magnitude entry of each left
/// singular vector positive, compensating in the right factor.
inline void fix_svd_signs(Eigen::MatrixXd& u, Eigen::MatrixXd& vt) {
    for (Index c = 0; c < u.cols(); ++c) {
        Index imax = 0;
        u.col(c).cwiseAbs().maxCoeff(&imax);
        if (u(imax, c) < 0.0) {
            u.col(c) = -u.col(c);
            if (c < vt.rows()) vt.row(c) = -vt.row(c);
        }
    }
}

} // namespace detail

/// Sequential left-to-right TT-SVD truncated to the requested ranks exactly.
/// The output is left-orthogonal; factors are zero-padded if the data's
/// numerical rank falls short of the request.
inline TTTensor tt_svd(const DenseTensor& x, const std::vector<Index>& ranks) {
    const Index k = x.order();
    if (static_cast<Index>(ranks.size()) != k - 1)
        throw DimensionError("tt_svd: rank vector must have length K-1");
    Index n_left = 1, n_right = x.size();
    for (Index i = 0; i < k - 1; ++i) {
        n_left *= x.dim(i);
        n_right /= x.dim(i);
        if (ranks[static_cast<std::size_t>(i)] < 1 ||
            ranks[static_cast<std::size_t>(i)] > std::min(n_left, n_right))
            throw DimensionError("tt_svd: requested rank " +
                                 std::to_string(ranks[static_cast<std::size_t>(i)]) +
                                 " exceeds unfolding dimension at split " + std::to_string(i + 1));
    }

    TTTensor out;
    out.factors.reserve(static_cast<std::size_t>(k));

    // Remainder held as r_{i-1} x (d_i ... d_K), columns colexicographic.
    std::vector<double> colex = to_colex(x);
    Eigen::MatrixXd rem = Eigen::Map<const Eigen::MatrixXd>(colex.data(), 1, x.size());

    for (Index i = 0; i < k - 1; ++i) {
        const Index r_prev = rem.rows();
        const Index d = x.dim(i);
        const Index cols = rem.cols() / d;
        // Colexicographic column order makes this a zero-copy reshape.
        Eigen::Map<const Eigen::MatrixXd> m(rem.data(), r_prev * d, cols);

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Index r = ranks[static_cast<std::size_t>(i)];
        const Index avail = std::min<Index>(svd.matrixU().cols(), r);

        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(r_prev * d, r);
        u.leftCols(avail) = svd.matrixU().leftCols(avail);
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(r, cols);
        next.topRows(avail) = svd.singularValues().head(avail).asDiagonal() *
                              svd.matrixV().leftCols(avail).transpose();
        detail::fix_svd_signs(u, next);

        out.factors.push_back(fold_left(u, r_prev, d, r));
        rem = std::move(next);
    }
    // rem is r_{K-1} x d_K with colexicographic columns; its column-major data
    // already runs in left-unfolding row order (alpha fastest).
    Eigen::Map<const Eigen::MatrixXd> last(rem.data(), rem.rows() * rem.cols(), 1);
    out.factors.push_back(fold_left(last, rem.rows(), x.dim(k - 1), 1));
    out.left_orthogonal = true;
    out.validate();
    return out;
}

/// Bring a TT chain to left-orthogonal form via an SVD sweep. Represents the
/// same dense tensor. `rank_deficient`, when supplied, reports whether some
/// left unfolding was numerically rank-deficient.
inline TTTensor left_orthogonalize(const TTTensor& tt, bool* rank_deficient = nullptr) {
    tt.validate();
    if (rank_deficient) *rank_deficient = false;

    TTTensor out = tt;
    const Index k = out.order();
    for (Index i = 0; i < k - 1; ++i) {
        DenseTensor& f = out.factors[static_cast<std::size_t>(i)];
        Eigen::MatrixXd l = left_unfold(f);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(l, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (rank_deficient && sv.size() > 0 && sv(sv.size() - 1) <= kRankTolerance * sv(0))
            *rank_deficient = true;

        Eigen::MatrixXd u = svd.matrixU();
        Eigen::MatrixXd carry = sv.asDiagonal() * svd.matrixV().transpose();
        detail::fix_svd_signs(u, carry);

        f = fold_left(u, f.dim(0), f.dim(1), static_cast<Index>(u.cols()));

        DenseTensor& g = out.factors[static_cast<std::size_t>(i + 1)];
        const Index d_next = g.dim(1), r_next = g.dim(2);
        DenseTensor updated({static_cast<Index>(carry.rows()), d_next, r_next});
        for (Index s = 0; s < d_next; ++s) {
            Eigen::MatrixXd slice = carry * detail::factor_slice(g, s);
            for (Index a = 0; a < slice.rows(); ++a)
                for (Index b = 0; b < r_next; ++b)
                    updated[(a * d_next + s) * r_next + b] = slice(a, b);
        }
        g = std::move(updated);
    }
    out.left_orthogonal = true;
    return out;
}

/// Singular extremes over the sequential unfoldings.
struct TTSpectrum {
    std::vector<double> per_unfolding_sigma_min; // sigma_{r_i}(X^<i>)
    std::vector<double> per_unfolding_sigma_max; // sigma_1(X^<i>)
    double sigma_min{0.0};
    double sigma_max{0.0};
    double kappa{0.0};
};

inline TTSpectrum tt_spectrum(const TTTensor& tt) {
    tt.validate();
    const DenseTensor x = tt_to_dense(tt);
    const std::vector<Index> ranks = tt.ranks();
    TTSpectrum spec;
    for (Index i = 1; i < tt.order(); ++i) {
        Eigen::MatrixXd m = unfold_matrix(x, i);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
        const auto& sv = svd.singularValues();
        const Index r = ranks[static_cast<std::size_t>(i - 1)];
        spec.per_unfolding_sigma_max.push_back(sv(0));
        spec.per_unfolding_sigma_min.push_back(r <= sv.size() ? sv(r - 1) : 0.0);
    }
    spec.sigma_min = *std::min_element(spec.per_unfolding_sigma_min.begin(), spec.per_unfolding_sigma_min.end());
    spec.sigma_max = *std::max_element(spec.per_unfolding_sigma_max.begin(), spec.per_unfolding_sigma_max.end());
    spec.kappa = spec.sigma_max / spec.sigma_min;
    return spec;
}

/// Singular values of the right part X^{>= i+1}; for a left-orthogonal chain
/// these equal the singular values of the i-th unfolding.
inline Eigen::VectorXd right_part_singular_values(const TTTensor& tt, Index i) {
    Eigen::MatrixXd right = detail::right_chain(tt, i + 1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(right);
    return svd.singularValues();
}

/// Random unit-norm TT tensor of exact requested ranks: an i.i.d. standard
/// normal dense tensor, sequentially truncated, then scaled to unit Frobenius
/// norm.
inline TTTensor random_tt_unit(const std::vector<Index>& dims, const std::vector<Index>& ranks,
                               std::uint64_t seed) {
    DenseTensor g(dims);
    CounterRng rng(seed);
    for (Index i = 0; i < g.size(); ++i) g[i] = rng.next_gaussian();
    TTTensor tt = tt_svd(g, ranks);
    const double nrm = tt_norm(tt);
    tt.factors.back() *= 1.0 / nrm;
    return tt;
}

/// Restricted Frobenius norm: max over splits of the energy in the top-r_i
/// singular values of each unfolding.
inline double restricted_frobenius_norm(const DenseTensor& h, const std::vector<Index>& ranks) {
    const Index k = h.order();
    if (static_cast<Index>(ranks.size()) != k - 1)
        throw DimensionError("restricted_frobenius_norm: rank vector must have length K-1");
    double best = 0.0;
    for (Index i = 1; i < k; ++i) {
        Eigen::MatrixXd m = unfold_matrix(h, i);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
        const auto& sv = svd.singularValues();
        const Index r = std::min<Index>(ranks[static_cast<std::size_t>(i - 1)], sv.size());
        double acc = 0.0;
        for (Index j = 0; j < r; ++j) acc += sv(j) * sv(j);
        best = std::max(best, std::sqrt(acc));
    }
    return best;
}

/// Numerical TT ranks of a dense tensor from its unfolding SVDs.
inline std::vector<Index> numerical_tt_ranks(const DenseTensor& x) {
    std::vector<Index> ranks;
    for (Index i = 1; i < x.order(); ++i) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(unfold_matrix(x, i));
        const auto& sv = svd.singularValues();
        Index r = 0;
        for (Index j = 0; j < sv.size(); ++j)
            if (sv(j) > kRankTolerance * sv(0)) ++r;
        ranks.push_back(r);
    }
    return ranks;
}

} // namespace ttot
