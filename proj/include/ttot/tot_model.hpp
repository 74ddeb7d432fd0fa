#pragma once

#include <cstdint>
#include <vector>

#include "ttot/dense_tensor.hpp"
#include "ttot/rng.hpp"
#include "ttot/tt_tensor.hpp"

namespace ttot {

/// A tensor-on-tensor regression instance: covariates B of shape
/// (m, d_1..d_N) and responses Y of shape (m, d_{N+1}..d_{N+M}).
struct TotProblem {
    DenseTensor covariates;
    DenseTensor responses;
    Index n_covariate_modes{0}; // N
    Index n_response_modes{0};  // M

    Index n_samples() const { return covariates.dim(0); }

    /// Dimensions of the coefficient tensor (d_1 .. d_{N+M}).
    std::vector<Index> coefficient_dims() const {
        std::vector<Index> d;
        for (Index i = 1; i <= n_covariate_modes; ++i) d.push_back(covariates.dim(i));
        for (Index i = 1; i <= n_response_modes; ++i) d.push_back(responses.dim(i));
        return d;
    }

    void validate() const {
        if (n_covariate_modes < 1 || n_response_modes < 1)
            throw DimensionError("TotProblem: need at least one covariate and one response mode");
        if (covariates.order() != n_covariate_modes + 1)
            throw DimensionError("TotProblem: covariate order does not match N");
        if (responses.order() != n_response_modes + 1)
            throw DimensionError("TotProblem: response order does not match M");
        if (covariates.dim(0) != responses.dim(0))
            throw DimensionError("TotProblem: covariates and responses disagree on sample count");
    }
};

struct NoiseSpec {
    double variance{0.0};
    std::uint64_t seed{0};
};

/// Empirical restricted-isometry probe: extreme values of
/// |(1/m)||A(X)||_F^2 / ||X||_F^2 - 1| over random unit TT tensors.
/// delta_upper is the certified lower bound on the true RIP constant.
struct RipEstimate {
    double delta_lower{0.0};
    double delta_upper{0.0};
    Index n_samples{0};
    std::vector<Index> rank_probed;
};

/// A(X): contract the covariates' feature modes against the first N modes of
/// the coefficient tensor. Output shape (m, d_{N+1}..d_{N+M}).
inline DenseTensor forward_map(const DenseTensor& covariates, const DenseTensor& x) {
    const Index n = covariates.order() - 1;
    if (x.order() <= n) throw DimensionError("forward_map: coefficient order too small");
    for (Index i = 0; i < n; ++i)
        if (covariates.dim(i + 1) != x.dim(i))
            throw DimensionError("forward_map: covariate/coefficient extent mismatch on mode " + std::to_string(i + 1));
    ContractionSpec spec;
    for (Index i = 0; i < n; ++i) {
        spec.left_modes.push_back(i + 1);
        spec.right_modes.push_back(i);
    }
    return contract(covariates, x, spec);
}

/// A*(Z): backproject stacked responses through the covariates,
/// sum_k Z(k, s_resp) B(k, s_cov). Output shape (d_1 .. d_{N+M}).
inline DenseTensor adjoint_map(const DenseTensor& covariates, const DenseTensor& z) {
    if (covariates.dim(0) != z.dim(0))
        throw DimensionError("adjoint_map: sample count mismatch");
    return contract(covariates, z, ContractionSpec{{0}, {0}});
}

/// (1/2m) ||A(X) - Y||_F^2.
inline double loss(const TotProblem& problem, const DenseTensor& x) {
    DenseTensor r = forward_map(problem.covariates, x);
    r -= problem.responses;
    return r.frobenius_norm_sq() / (2.0 * static_cast<double>(problem.n_samples()));
}

/// Synthetic instance following the standard protocol: unit-norm TT ground
/// truth, i.i.d. N(0,1) covariates, responses with i.i.d. N(0, variance)
/// noise. Deterministic in `seed` (noise uses noise.seed).
inline std::pair<TotProblem, TTTensor> generate_problem(const std::vector<Index>& dims,
                                                        const std::vector<Index>& ranks, Index m,
                                                        Index n_covariate_modes,
                                                        const NoiseSpec& noise, std::uint64_t seed) {
    const Index n = n_covariate_modes;
    const Index total = static_cast<Index>(dims.size());
    if (n < 1 || n >= total) throw DimensionError("generate_problem: invalid covariate mode count");
    if (m < 1) throw DimensionError("generate_problem: m must be >= 1");

    TTTensor truth = random_tt_unit(dims, ranks, derive_seed(seed, 0));

    std::vector<Index> cov_dims{m};
    cov_dims.insert(cov_dims.end(), dims.begin(), dims.begin() + n);
    DenseTensor covariates(cov_dims);
    CounterRng cov_rng(derive_seed(seed, 1));
    for (Index i = 0; i < covariates.size(); ++i) covariates[i] = cov_rng.next_gaussian();

    DenseTensor responses = forward_map(covariates, tt_to_dense(truth));
    if (noise.variance > 0.0) {
        CounterRng noise_rng(derive_seed(noise.seed, 2));
        const double sd = std::sqrt(noise.variance);
        for (Index i = 0; i < responses.size(); ++i) responses[i] += sd * noise_rng.next_gaussian();
    }

    TotProblem problem{std::move(covariates), std::move(responses), n, total - n};
    problem.validate();
    return {std::move(problem), std::move(truth)};
}

/// Isometry deviations |(1/m)||A(X)||^2 / ||X||^2 - 1| over explicit probes.
inline RipEstimate estimate_rip_over(const DenseTensor& covariates,
                                     const std::vector<DenseTensor>& probes,
                                     std::vector<Index> ranks) {
    if (probes.empty()) throw DimensionError("estimate_rip: need at least one sample");
    const double m = static_cast<double>(covariates.dim(0));
    double dev_min = 0.0, dev_max = 0.0;
    bool first = true;
    for (const DenseTensor& xd : probes) {
        const double ratio = forward_map(covariates, xd).frobenius_norm_sq() / (m * xd.frobenius_norm_sq());
        const double dev = std::abs(ratio - 1.0);
        if (first) {
            dev_min = dev_max = dev;
            first = false;
        } else {
            dev_min = std::min(dev_min, dev);
            dev_max = std::max(dev_max, dev);
        }
    }
    return RipEstimate{dev_min, dev_max, static_cast<Index>(probes.size()), std::move(ranks)};
}

/// Sample the isometry ratio over random unit TT tensors of the given ranks.
inline RipEstimate estimate_rip(const DenseTensor& covariates, const std::vector<Index>& x_dims,
                                const std::vector<Index>& ranks, Index n_samples,
                                std::uint64_t seed) {
    if (n_samples < 1) throw DimensionError("estimate_rip: need at least one sample");
    std::vector<DenseTensor> probes;
    probes.reserve(static_cast<std::size_t>(n_samples));
    for (Index i = 0; i < n_samples; ++i)
        probes.push_back(tt_to_dense(random_tt_unit(x_dims, ranks, derive_seed(seed, static_cast<std::uint64_t>(i)))));
    return estimate_rip_over(covariates, probes, ranks);
}

} // namespace ttot
