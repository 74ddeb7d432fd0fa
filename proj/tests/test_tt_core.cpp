#include <catch2/catch_amalgamated.hpp>

#include "ttot/dense_tensor.hpp"
#include "ttot/rng.hpp"
#include "ttot/tt_tensor.hpp"

using namespace ttot;

namespace {

DenseTensor random_dense(const std::vector<Index>& dims, std::uint64_t seed) {
    DenseTensor t(dims);
    CounterRng rng(seed);
    for (Index i = 0; i < t.size(); ++i) t[i] = rng.next_gaussian();
    return t;
}

TTTensor random_tt(const std::vector<Index>& dims, const std::vector<Index>& ranks, std::uint64_t seed) {
    return tt_svd(random_dense(dims, seed), ranks);
}

// Entry of a TT chain by explicit matrix products, the definitional oracle.
double chain_entry(const TTTensor& tt, const std::vector<Index>& idx) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(1, 1);
    for (std::size_t i = 0; i < tt.factors.size(); ++i)
        acc = acc * detail::factor_slice(tt.factors[i], idx[i]);
    return acc(0, 0);
}

} // namespace

TEST_CASE("tt_to_dense: scalar chain product") {
    TTTensor tt;
    for (double v : {2.0, 3.0, 5.0}) tt.factors.push_back(DenseTensor({1, 1, 1}, {v}));
    DenseTensor x = tt_to_dense(tt);
    REQUIRE(x.dims() == std::vector<Index>{1, 1, 1});
    REQUIRE(x[0] == 30.0);
}

TEST_CASE("tt_to_dense: rank-1 outer product") {
    TTTensor tt;
    tt.factors.push_back(DenseTensor({1, 2, 1}, {1.0, 2.0}));
    tt.factors.push_back(DenseTensor({1, 2, 1}, {3.0, 4.0}));
    DenseTensor x = tt_to_dense(tt);
    REQUIRE(x.dims() == std::vector<Index>{2, 2});
    REQUIRE(x.at({0, 0}) == 3.0);
    REQUIRE(x.at({0, 1}) == 4.0);
    REQUIRE(x.at({1, 0}) == 6.0);
    REQUIRE(x.at({1, 1}) == 8.0);
}

TEST_CASE("tt_to_dense: brute-force oracle on K=3, d=2, r=2") {
    TTTensor tt;
    CounterRng rng(11);
    auto rand_factor = [&rng](Index r0, Index d, Index r1) {
        DenseTensor f({r0, d, r1});
        for (Index i = 0; i < f.size(); ++i) f[i] = rng.next_gaussian();
        return f;
    };
    tt.factors.push_back(rand_factor(1, 2, 2));
    tt.factors.push_back(rand_factor(2, 2, 2));
    tt.factors.push_back(rand_factor(2, 2, 1));

    DenseTensor x = tt_to_dense(tt);
    for (Index s1 = 0; s1 < 2; ++s1)
        for (Index s2 = 0; s2 < 2; ++s2)
            for (Index s3 = 0; s3 < 2; ++s3)
                REQUIRE(x.at({s1, s2, s3}) == Catch::Approx(chain_entry(tt, {s1, s2, s3})).margin(1e-13));
}

TEST_CASE("tt_to_dense: chain incompatibility raises") {
    TTTensor tt;
    tt.factors.push_back(DenseTensor({1, 2, 2}));
    tt.factors.push_back(DenseTensor({3, 2, 1}));
    REQUIRE_THROWS_AS(tt_to_dense(tt), DimensionError);
}

TEST_CASE("contract: matrix multiply special case") {
    DenseTensor a = random_dense({2, 3}, 1);
    DenseTensor b = random_dense({3, 2}, 2);
    DenseTensor c = contract(a, b, {{1}, {0}});
    REQUIRE(c.dims() == std::vector<Index>{2, 2});
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
            double s = 0.0;
            for (Index k = 0; k < 3; ++k) s += a.at({i, k}) * b.at({k, j});
            REQUIRE(c.at({i, j}) == Catch::Approx(s).margin(1e-13));
        }
}

TEST_CASE("contract: full self-contraction gives squared norm") {
    DenseTensor a = random_dense({2, 3, 4}, 3);
    DenseTensor s = contract(a, a, {{0, 1, 2}, {0, 1, 2}});
    REQUIRE(s.dims() == std::vector<Index>{1});
    REQUIRE(s[0] == Catch::Approx(a.frobenius_norm_sq()).epsilon(1e-13));
}

TEST_CASE("contract: two mode pairs vs 5-nested-loop oracle") {
    DenseTensor a = random_dense({2, 3, 4}, 4);
    DenseTensor b = random_dense({3, 2, 4}, 5);
    // contract a modes (1, 2) with b modes (0, 2); survivors a0 then b1
    DenseTensor c = contract(a, b, {{1, 2}, {0, 2}});
    REQUIRE(c.dims() == std::vector<Index>{2, 2});
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
            double s = 0.0;
            for (Index p = 0; p < 3; ++p)
                for (Index q = 0; q < 4; ++q)
                    s += a.at({i, p, q}) * b.at({p, j, q});
            REQUIRE(c.at({i, j}) == Catch::Approx(s).margin(1e-12));
        }
}

TEST_CASE("contract: extent mismatch raises") {
    DenseTensor a = random_dense({2, 3}, 6);
    DenseTensor b = random_dense({2, 3}, 7);
    REQUIRE_THROWS_AS(contract(a, b, {{1}, {0}}), DimensionError);
    REQUIRE_THROWS_AS(contract(a, b, {{0, 0}, {0, 1}}), DimensionError);
}

TEST_CASE("contract is bilinear") {
    DenseTensor a1 = random_dense({2, 3, 2}, 8);
    DenseTensor a2 = random_dense({2, 3, 2}, 9);
    DenseTensor b = random_dense({3, 2}, 10);
    const double alpha = 0.7, beta = -1.3;
    ContractionSpec spec{{1, 2}, {0, 1}};
    DenseTensor lhs = contract(alpha * a1 + beta * a2, b, spec);
    DenseTensor rhs = alpha * contract(a1, b, spec) + beta * contract(a2, b, spec);
    rhs -= lhs;
    REQUIRE(rhs.frobenius_norm() <= 1e-12 * lhs.frobenius_norm());
}

TEST_CASE("unfold: identity on matrices") {
    DenseTensor a = random_dense({3, 4}, 12);
    DenseTensor u = unfold(a, 1);
    REQUIRE(u.dims() == a.dims());
    for (Index i = 0; i < a.size(); ++i) REQUIRE(u[i] == a[i]);
}

TEST_CASE("unfold: index arithmetic on (2,2,2)") {
    DenseTensor x({2, 2, 2});
    for (Index i = 0; i < 8; ++i) x[i] = static_cast<double>(i + 1);
    DenseTensor u = unfold(x, 2);
    REQUIRE(u.dims() == std::vector<Index>{4, 2});
    // row index s1 + 2 s2, first index fastest
    for (Index s1 = 0; s1 < 2; ++s1)
        for (Index s2 = 0; s2 < 2; ++s2)
            for (Index s3 = 0; s3 < 2; ++s3)
                REQUIRE(u.at({s1 + 2 * s2, s3}) == x.at({s1, s2, s3}));
}

TEST_CASE("unfold: out-of-range split raises") {
    DenseTensor x = random_dense({2, 2, 2}, 13);
    REQUIRE_THROWS_AS(unfold(x, 0), DimensionError);
    REQUIRE_THROWS_AS(unfold(x, 3), DimensionError);
}

TEST_CASE("unfold rank equals TT rank for exact-rank tensors") {
    TTTensor tt = random_tt({3, 4, 3, 2}, {2, 3, 2}, 14);
    DenseTensor x = tt_to_dense(tt);
    REQUIRE(numerical_tt_ranks(x) == std::vector<Index>{2, 3, 2});
}

TEST_CASE("left_unfold: 1 x d x 1 factor is a column") {
    DenseTensor f({1, 3, 1}, {1.0, 2.0, 3.0});
    Eigen::MatrixXd l = left_unfold(f);
    REQUIRE(l.rows() == 3);
    REQUIRE(l.cols() == 1);
    REQUIRE(l(0, 0) == 1.0);
    REQUIRE(l(2, 0) == 3.0);
}

TEST_CASE("left_unfold round trip is bitwise") {
    DenseTensor f = random_dense({2, 3, 4}, 15);
    DenseTensor g = fold_left(left_unfold(f), 2, 3, 4);
    for (Index i = 0; i < f.size(); ++i) REQUIRE(g[i] == f[i]);
}

TEST_CASE("tt_svd: rank-1 exactness") {
    TTTensor outer;
    outer.factors.push_back(DenseTensor({1, 3, 1}, {1.0, -2.0, 0.5}));
    outer.factors.push_back(DenseTensor({1, 2, 1}, {2.0, 3.0}));
    outer.factors.push_back(DenseTensor({1, 2, 1}, {-1.0, 4.0}));
    DenseTensor x = tt_to_dense(outer);
    TTTensor tt = tt_svd(x, {1, 1});
    DenseTensor back = tt_to_dense(tt);
    back -= x;
    REQUIRE(back.frobenius_norm() <= 1e-12 * x.frobenius_norm());
}

TEST_CASE("tt_svd: exact rank-(2,2) recovery") {
    TTTensor src = random_tt({3, 3, 3}, {2, 2}, 16);
    DenseTensor x = tt_to_dense(src);
    TTTensor tt = tt_svd(x, {2, 2});
    REQUIRE(is_left_orthogonal(tt));
    DenseTensor back = tt_to_dense(tt);
    back -= x;
    REQUIRE(back.frobenius_norm() <= 1e-10 * x.frobenius_norm());
}

TEST_CASE("tt_svd: rank exceeding unfolding dimension raises") {
    DenseTensor x = random_dense({2, 3, 2}, 17);
    REQUIRE_THROWS_AS(tt_svd(x, {3, 2}), DimensionError);
    REQUIRE_THROWS_AS(tt_svd(x, {2}), DimensionError);
}

TEST_CASE("tt_svd reconstruction over 100 random exact-rank instances") {
    CounterRng pick(18);
    for (int n = 0; n < 100; ++n) {
        const Index k = 2 + static_cast<Index>(pick.next_u64() % 5); // K in 2..6
        std::vector<Index> dims, ranks;
        for (Index i = 0; i < k; ++i) dims.push_back(2 + static_cast<Index>(pick.next_u64() % 3));
        Index n_left = 1, n_right = product(dims);
        for (Index i = 0; i + 1 < k; ++i) {
            n_left *= dims[static_cast<std::size_t>(i)];
            n_right /= dims[static_cast<std::size_t>(i)];
            const Index cap = std::min({Index(3), n_left, n_right});
            ranks.push_back(1 + static_cast<Index>(pick.next_u64() % cap));
        }
        TTTensor src = random_tt(dims, ranks, derive_seed(19, static_cast<std::uint64_t>(n)));
        DenseTensor x = tt_to_dense(src);
        DenseTensor back = tt_to_dense(tt_svd(x, ranks));
        back -= x;
        REQUIRE(back.frobenius_norm() <= 1e-10 * x.frobenius_norm());
    }
}

TEST_CASE("difference of rank-r TT tensors has rank 2r") {
    const std::vector<Index> dims{3, 4, 3};
    const std::vector<Index> ranks{2, 2};
    TTTensor a = random_tt(dims, ranks, 20);
    TTTensor b = random_tt(dims, ranks, 21);
    DenseTensor diff = tt_to_dense(a);
    diff -= tt_to_dense(b);
    // doubled ranks, clamped to the unfolding dimensions
    DenseTensor back = tt_to_dense(tt_svd(diff, {3, 3}));
    back -= diff;
    REQUIRE(back.frobenius_norm() <= 1e-9 * diff.frobenius_norm());
}

TEST_CASE("tt_svd perturbation bound on 50 instances") {
    // For C ||D||_F <= sigma_min(X*) with C = 500 K:
    //   ||ttsvd(X* + D) - X*||_F^2 <= ||D||_F^2 + 600 K ||D||_F^3 / sigma_min
    CounterRng pick(22);
    for (int n = 0; n < 50; ++n) {
        const Index k = 3 + static_cast<Index>(pick.next_u64() % 2);
        std::vector<Index> dims(static_cast<std::size_t>(k), 3);
        std::vector<Index> ranks(static_cast<std::size_t>(k - 1), 2);
        TTTensor truth = random_tt(dims, ranks, derive_seed(23, static_cast<std::uint64_t>(n)));
        DenseTensor x = tt_to_dense(truth);
        const double sigma_min = tt_spectrum(truth).sigma_min;

        DenseTensor d = random_dense(dims, derive_seed(24, static_cast<std::uint64_t>(n)));
        const double cap = sigma_min / (500.0 * static_cast<double>(k));
        d *= (0.9 * cap / d.frobenius_norm());
        const double dn = d.frobenius_norm();

        DenseTensor noisy = x + d;
        DenseTensor est = tt_to_dense(tt_svd(noisy, ranks));
        est -= x;
        const double err_sq = est.frobenius_norm_sq();
        REQUIRE(err_sq <= dn * dn + 600.0 * static_cast<double>(k) * dn * dn * dn / sigma_min);
    }
}

TEST_CASE("left_orthogonalize: preserves dense tensor and orthogonality") {
    TTTensor tt = random_tt({3, 4, 3}, {2, 3}, 25);
    // Unbalance the gauge: scale a bond by t and 1/t.
    tt.factors[0] *= 7.0;
    tt.factors[1] *= 1.0 / 7.0;
    tt.left_orthogonal = false;
    DenseTensor before = tt_to_dense(tt);

    TTTensor orth = left_orthogonalize(tt);
    DenseTensor after = tt_to_dense(orth);
    after -= before;
    REQUIRE(after.frobenius_norm() <= 1e-10 * before.frobenius_norm());

    double max_dev = 0.0;
    for (std::size_t i = 0; i + 1 < orth.factors.size(); ++i) {
        Eigen::MatrixXd l = left_unfold(orth.factors[i]);
        max_dev = std::max(max_dev,
                           (l.transpose() * l - Eigen::MatrixXd::Identity(l.cols(), l.cols())).norm());
    }
    REQUIRE(max_dev <= 1e-10);
    REQUIRE(std::abs(tt_norm(orth) - left_unfold(orth.factors.back()).norm()) <=
            1e-10 * tt_norm(orth));
}

TEST_CASE("left_orthogonalize: already-orthogonal input keeps the dense tensor") {
    TTTensor tt = random_tt({2, 3, 2}, {2, 2}, 26);
    TTTensor again = left_orthogonalize(tt);
    DenseTensor diff = tt_to_dense(again);
    diff -= tt_to_dense(tt);
    REQUIRE(diff.frobenius_norm() <= 1e-10);
}

TEST_CASE("left_orthogonalize: flags rank deficiency") {
    TTTensor tt;
    tt.factors.push_back(DenseTensor({1, 2, 2}, {1.0, 0.0, 2.0, 0.0})); // rank-1 left unfolding
    tt.factors.push_back(DenseTensor({2, 2, 1}, {1.0, 2.0, 3.0, 4.0}));
    bool deficient = false;
    left_orthogonalize(tt, &deficient);
    REQUIRE(deficient);
}

TEST_CASE("tt_spectrum: rank-1 tensor has kappa 1") {
    TTTensor tt = random_tt({3, 2, 3}, {1, 1}, 27);
    const double c = 2.5;
    tt.factors.back() *= c / tt_norm(tt);
    TTSpectrum s = tt_spectrum(tt);
    REQUIRE(s.sigma_min == Catch::Approx(c).epsilon(1e-10));
    REQUIRE(s.sigma_max == Catch::Approx(c).epsilon(1e-10));
    REQUIRE(s.kappa == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("tt_spectrum: unfolding singular values match the right part") {
    TTTensor tt = random_tt({3, 3, 3, 3}, {2, 3, 2}, 28);
    REQUIRE(is_left_orthogonal(tt));
    DenseTensor x = tt_to_dense(tt);
    for (Index i = 1; i < tt.order(); ++i) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(unfold_matrix(x, i));
        Eigen::VectorXd via_right = right_part_singular_values(tt, i);
        REQUIRE(svd.singularValues().size() >= via_right.size());
        for (Index j = 0; j < via_right.size(); ++j)
            REQUIRE(svd.singularValues()(j) == Catch::Approx(via_right(j)).margin(1e-10));
    }
}

TEST_CASE("tt_spectrum: dense route matches the TT-internal route") {
    TTTensor tt = random_tt({2, 4, 3, 2}, {2, 2, 2}, 29);
    TTSpectrum s = tt_spectrum(tt);
    for (Index i = 1; i < tt.order(); ++i) {
        Eigen::VectorXd sv = right_part_singular_values(tt, i);
        REQUIRE(s.per_unfolding_sigma_max[static_cast<std::size_t>(i - 1)] ==
                Catch::Approx(sv(0)).epsilon(1e-9));
        const Index r = tt.ranks()[static_cast<std::size_t>(i - 1)];
        REQUIRE(s.per_unfolding_sigma_min[static_cast<std::size_t>(i - 1)] ==
                Catch::Approx(sv(r - 1)).margin(1e-9));
    }
}

TEST_CASE("random_tt_unit: unit norm, exact ranks, deterministic") {
    const std::vector<Index> dims{3, 4, 3};
    const std::vector<Index> ranks{2, 3};
    TTTensor a = random_tt_unit(dims, ranks, 30);
    REQUIRE(std::abs(tt_norm(a) - 1.0) <= 1e-12);
    REQUIRE(numerical_tt_ranks(tt_to_dense(a)) == ranks);

    TTTensor b = random_tt_unit(dims, ranks, 30);
    for (std::size_t i = 0; i < a.factors.size(); ++i)
        for (Index j = 0; j < a.factors[i].size(); ++j)
            REQUIRE(a.factors[i][j] == b.factors[i][j]);
}

TEST_CASE("restricted_frobenius_norm: full and rank-1 cases") {
    DenseTensor h = random_dense({3, 3, 3}, 31);
    REQUIRE(restricted_frobenius_norm(h, {9, 9}) ==
            Catch::Approx(h.frobenius_norm()).epsilon(1e-12));

    TTTensor r1 = random_tt({3, 3, 3}, {1, 1}, 32);
    DenseTensor hr = tt_to_dense(r1);
    REQUIRE(restricted_frobenius_norm(hr, {1, 1}) ==
            Catch::Approx(hr.frobenius_norm()).epsilon(1e-10));
}

TEST_CASE("restricted_frobenius_norm: rank-(1,..,1) equals max top singular value") {
    DenseTensor h = random_dense({3, 4, 2}, 33);
    double expect = 0.0;
    for (Index i = 1; i < h.order(); ++i) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(unfold_matrix(h, i));
        expect = std::max(expect, svd.singularValues()(0));
    }
    REQUIRE(restricted_frobenius_norm(h, {1, 1}) == Catch::Approx(expect).epsilon(1e-12));
}
