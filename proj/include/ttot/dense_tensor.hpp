#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ttot {

using Index = std::int64_t;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Refuse to materialize dense tensors above this entry count.
inline constexpr Index kDenseEntryCap = Index(1) << 28;

inline Index product(const std::vector<Index>& dims) {
    Index p = 1;
    for (Index d : dims) p *= d;
    return p;
}

/// Order-K array of doubles with an explicit dimension vector.
///
/// Storage is row-major: the first index is slowest-varying, the last index
/// fastest. Indices are 0-based in code.
class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(std::vector<Index> dims)
        : dims_(std::move(dims)) {
        check_dims(dims_);
        data_.assign(static_cast<std::size_t>(product(dims_)), 0.0);
    }

    DenseTensor(std::vector<Index> dims, std::vector<double> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        check_dims(dims_);
        if (static_cast<Index>(data_.size()) != product(dims_))
            throw DimensionError("DenseTensor: data length does not match product of dims");
    }

    Index order() const { return static_cast<Index>(dims_.size()); }
    const std::vector<Index>& dims() const { return dims_; }
    Index dim(Index i) const { return dims_[static_cast<std::size_t>(i)]; }
    Index size() const { return static_cast<Index>(data_.size()); }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double operator[](Index linear) const { return data_[static_cast<std::size_t>(linear)]; }
    double& operator[](Index linear) { return data_[static_cast<std::size_t>(linear)]; }

    /// Row-major linear offset of a multi-index.
    Index offset(const std::vector<Index>& idx) const {
        Index o = 0;
        for (std::size_t i = 0; i < dims_.size(); ++i) o = o * dims_[i] + idx[i];
        return o;
    }

    double at(const std::vector<Index>& idx) const { return data_[static_cast<std::size_t>(offset(idx))]; }
    double& at(const std::vector<Index>& idx) { return data_[static_cast<std::size_t>(offset(idx))]; }

    double frobenius_norm_sq() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return s;
    }
    double frobenius_norm() const { return std::sqrt(frobenius_norm_sq()); }

    double inner(const DenseTensor& other) const {
        if (dims_ != other.dims_) throw DimensionError("inner: dimension mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) s += data_[i] * other.data_[i];
        return s;
    }

    DenseTensor& operator+=(const DenseTensor& other) {
        if (dims_ != other.dims_) throw DimensionError("operator+=: dimension mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }
    DenseTensor& operator-=(const DenseTensor& other) {
        if (dims_ != other.dims_) throw DimensionError("operator-=: dimension mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
        return *this;
    }
    DenseTensor& operator*=(double a) {
        for (double& v : data_) v *= a;
        return *this;
    }

    friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
    friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
    friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

private:
    static void check_dims(const std::vector<Index>& dims) {
        if (dims.empty()) throw DimensionError("DenseTensor: order must be at least 1");
        for (Index d : dims)
            if (d < 1) throw DimensionError("DenseTensor: every dimension must be >= 1");
        if (product(dims) > kDenseEntryCap)
            throw DimensionError("DenseTensor: refusing to materialize " +
                                 std::to_string(product(dims)) + " entries (cap " +
                                 std::to_string(kDenseEntryCap) + ")");
    }

    std::vector<Index> dims_;
    std::vector<double> data_;
};

/// Advance a row-major multi-index; returns false after wrapping past the end.
inline bool next_index(std::vector<Index>& idx, const std::vector<Index>& dims) {
    for (std::size_t i = dims.size(); i-- > 0;) {
        if (++idx[i] < dims[i]) return true;
        idx[i] = 0;
    }
    return false;
}

/// Copy of the entries in colexicographic (first index fastest) order.
/// This is the linearization used by the sequential unfoldings.
inline std::vector<double> to_colex(const DenseTensor& x) {
    const auto& dims = x.dims();
    std::vector<double> out(static_cast<std::size_t>(x.size()));
    std::vector<Index> strides(dims.size());
    Index s = 1;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        strides[i] = s;
        s *= dims[i];
    }
    std::vector<Index> idx(dims.size(), 0);
    Index linear = 0;
    do {
        Index c = 0;
        for (std::size_t i = 0; i < dims.size(); ++i) c += idx[i] * strides[i];
        out[static_cast<std::size_t>(c)] = x[linear++];
    } while (next_index(idx, dims));
    return out;
}

/// Inverse of to_colex: build a row-major tensor from colexicographic data.
inline DenseTensor from_colex(const std::vector<Index>& dims, const std::vector<double>& colex) {
    DenseTensor out(dims);
    std::vector<Index> strides(dims.size());
    Index s = 1;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        strides[i] = s;
        s *= dims[i];
    }
    std::vector<Index> idx(dims.size(), 0);
    Index linear = 0;
    do {
        Index c = 0;
        for (std::size_t i = 0; i < dims.size(); ++i) c += idx[i] * strides[i];
        out[linear++] = colex[static_cast<std::size_t>(c)];
    } while (next_index(idx, dims));
    return out;
}

/// Mode pairs to contract: left_modes[k] of the first tensor is summed
/// against right_modes[k] of the second.
struct ContractionSpec {
    std::vector<Index> left_modes;
    std::vector<Index> right_modes;
};

namespace detail {

inline void validate_spec(const DenseTensor& a, const DenseTensor& b, const ContractionSpec& spec) {
    if (spec.left_modes.size() != spec.right_modes.size())
        throw DimensionError("contract: mode lists differ in length");
    auto check_dupes = [](const std::vector<Index>& modes, Index order, const char* side) {
        std::vector<Index> sorted = modes;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw DimensionError(std::string("contract: duplicate mode in ") + side + " list");
        for (Index m : modes)
            if (m < 0 || m >= order) throw DimensionError("contract: mode index out of range");
    };
    check_dupes(spec.left_modes, a.order(), "left");
    check_dupes(spec.right_modes, b.order(), "right");
    for (std::size_t k = 0; k < spec.left_modes.size(); ++k)
        if (a.dim(spec.left_modes[k]) != b.dim(spec.right_modes[k]))
            throw DimensionError("contract: extent mismatch on contracted mode pair " + std::to_string(k));
}

// Flatten tensor `t` into a (kept x contracted) matrix, rows indexed row-major
// over the kept modes, columns row-major over `modes` in the given order.
inline Eigen::MatrixXd flatten(const DenseTensor& t, const std::vector<Index>& modes, bool contracted_first) {
    const Index order = t.order();
    std::vector<char> is_contracted(static_cast<std::size_t>(order), 0);
    for (Index m : modes) is_contracted[static_cast<std::size_t>(m)] = 1;

    std::vector<Index> kept;
    for (Index i = 0; i < order; ++i)
        if (!is_contracted[static_cast<std::size_t>(i)]) kept.push_back(i);

    Index n_kept = 1, n_con = 1;
    for (Index m : kept) n_kept *= t.dim(m);
    for (Index m : modes) n_con *= t.dim(m);

    // row-major strides in t
    std::vector<Index> stride(static_cast<std::size_t>(order));
    Index s = 1;
    for (Index i = order; i-- > 0;) {
        stride[static_cast<std::size_t>(i)] = s;
        s *= t.dim(i);
    }

    Eigen::MatrixXd out(contracted_first ? n_con : n_kept, contracted_first ? n_kept : n_con);
    std::vector<Index> kidx(kept.size(), 0), cidx(modes.size(), 0);
    std::vector<Index> kdims(kept.size()), cdims(modes.size());
    for (std::size_t i = 0; i < kept.size(); ++i) kdims[i] = t.dim(kept[i]);
    for (std::size_t i = 0; i < modes.size(); ++i) cdims[i] = t.dim(modes[i]);

    Index row = 0;
    do {
        Index base = 0;
        for (std::size_t i = 0; i < kept.size(); ++i) base += kidx[i] * stride[static_cast<std::size_t>(kept[i])];
        std::fill(cidx.begin(), cidx.end(), 0);
        Index col = 0;
        do {
            Index off = base;
            for (std::size_t i = 0; i < modes.size(); ++i) off += cidx[i] * stride[static_cast<std::size_t>(modes[i])];
            if (contracted_first)
                out(col, row) = t[off];
            else
                out(row, col) = t[off];
            ++col;
        } while (!modes.empty() && next_index(cidx, cdims));
        ++row;
    } while (!kept.empty() && next_index(kidx, kdims));
    return out;
}

} // namespace detail

/// General pairwise tensor contraction. Output modes are the surviving modes
/// of `a` (in order) followed by the surviving modes of `b`.
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b, const ContractionSpec& spec) {
    detail::validate_spec(a, b, spec);

    Eigen::MatrixXd am = detail::flatten(a, spec.left_modes, /*contracted_first=*/false);
    Eigen::MatrixXd bm = detail::flatten(b, spec.right_modes, /*contracted_first=*/true);
    Eigen::MatrixXd cm = am * bm;

    std::vector<Index> out_dims;
    std::vector<char> a_con(static_cast<std::size_t>(a.order()), 0), b_con(static_cast<std::size_t>(b.order()), 0);
    for (Index m : spec.left_modes) a_con[static_cast<std::size_t>(m)] = 1;
    for (Index m : spec.right_modes) b_con[static_cast<std::size_t>(m)] = 1;
    for (Index i = 0; i < a.order(); ++i)
        if (!a_con[static_cast<std::size_t>(i)]) out_dims.push_back(a.dim(i));
    for (Index i = 0; i < b.order(); ++i)
        if (!b_con[static_cast<std::size_t>(i)]) out_dims.push_back(b.dim(i));
    if (out_dims.empty()) out_dims.push_back(1); // full contraction yields a scalar tensor

    DenseTensor out(out_dims);
    for (Index r = 0; r < cm.rows(); ++r)
        for (Index c = 0; c < cm.cols(); ++c)
            out[r * cm.cols() + c] = cm(r, c);
    return out;
}

/// The i-th sequential unfolding: a (d_1...d_i) x (d_{i+1}...d_K) matrix whose
/// row index is colexicographic over the first i modes and column index
/// colexicographic over the rest. `i` is 1-based, 1 <= i <= K-1.
inline DenseTensor unfold(const DenseTensor& x, Index i) {
    const Index k = x.order();
    if (i < 1 || i > k - 1) throw DimensionError("unfold: split index out of range");

    Index n_left = 1, n_right = 1;
    for (Index j = 0; j < i; ++j) n_left *= x.dim(j);
    for (Index j = i; j < k; ++j) n_right *= x.dim(j);

    std::vector<double> colex = to_colex(x);
    // colex linear index = row + n_left * col by construction
    DenseTensor out({n_left, n_right});
    for (Index r = 0; r < n_left; ++r)
        for (Index c = 0; c < n_right; ++c)
            out[r * n_right + c] = colex[static_cast<std::size_t>(r + n_left * c)];
    return out;
}

/// unfold(x, i) as an Eigen matrix.
inline Eigen::MatrixXd unfold_matrix(const DenseTensor& x, Index i) {
    const Index k = x.order();
    if (i < 1 || i > k - 1) throw DimensionError("unfold: split index out of range");
    Index n_left = 1;
    for (Index j = 0; j < i; ++j) n_left *= x.dim(j);
    const Index n_right = x.size() / n_left;
    std::vector<double> colex = to_colex(x);
    return Eigen::Map<const Eigen::MatrixXd>(colex.data(), n_left, n_right);
}

} // namespace ttot
