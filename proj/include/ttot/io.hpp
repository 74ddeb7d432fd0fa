#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttot/dense_tensor.hpp"
#include "ttot/tt_tensor.hpp"

namespace ttot {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

inline std::uint32_t read_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw FormatError(path + ": truncated file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline double read_f64(std::istream& is, const std::string& path) {
    const std::uint64_t bits = read_u64(is, path);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void write_dense_body(std::ostream& os, const DenseTensor& t) {
    os.write("DTF1", 4);
    write_u32(os, static_cast<std::uint32_t>(t.order()));
    for (Index d : t.dims()) write_u64(os, static_cast<std::uint64_t>(d));
    for (Index i = 0; i < t.size(); ++i) write_f64(os, t[i]);
}

inline DenseTensor read_dense_body(std::istream& is, const std::string& path) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "DTF1", 4) != 0)
        throw FormatError(path + ": bad magic (expected DTF1)");
    const std::uint32_t order = read_u32(is, path);
    if (order == 0 || order > 64) throw FormatError(path + ": implausible tensor order");
    std::vector<Index> dims(order);
    for (auto& d : dims) {
        d = static_cast<Index>(read_u64(is, path));
        if (d < 1) throw FormatError(path + ": nonpositive dimension");
    }
    if (product(dims) > kDenseEntryCap) throw FormatError(path + ": tensor exceeds entry cap");
    std::vector<double> data(static_cast<std::size_t>(product(dims)));
    for (auto& v : data) v = read_f64(is, path);
    return DenseTensor(std::move(dims), std::move(data));
}

} // namespace detail

/// Write a dense tensor: magic "DTF1", u32 order, u64 dims, f64 entries in
/// row-major order, all little-endian.
inline void write_dense(const std::string& path, const DenseTensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(path + ": cannot open for writing");
    detail::write_dense_body(os, t);
    if (!os) throw FormatError(path + ": write failed");
}

inline DenseTensor read_dense(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(path + ": cannot open");
    DenseTensor t = detail::read_dense_body(is, path);
    is.peek();
    if (!is.eof()) throw FormatError(path + ": trailing bytes after tensor data");
    return t;
}

/// Write a TT chain: u32 order, u64 internal ranks, then each factor as a
/// DTF1 block.
inline void write_tt(const std::string& path, const TTTensor& tt) {
    tt.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(path + ": cannot open for writing");
    detail::write_u32(os, static_cast<std::uint32_t>(tt.order()));
    for (Index r : tt.ranks()) detail::write_u64(os, static_cast<std::uint64_t>(r));
    for (const auto& f : tt.factors) detail::write_dense_body(os, f);
    if (!os) throw FormatError(path + ": write failed");
}

inline TTTensor read_tt(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(path + ": cannot open");
    const std::uint32_t order = detail::read_u32(is, path);
    if (order == 0 || order > 64) throw FormatError(path + ": implausible chain order");
    std::vector<Index> ranks(order - 1);
    for (auto& r : ranks) r = static_cast<Index>(detail::read_u64(is, path));
    TTTensor tt;
    for (std::uint32_t i = 0; i < order; ++i) tt.factors.push_back(detail::read_dense_body(is, path));
    is.peek();
    if (!is.eof()) throw FormatError(path + ": trailing bytes after factor data");
    try {
        tt.validate();
    } catch (const DimensionError& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (tt.ranks() != ranks) throw FormatError(path + ": rank header disagrees with factor shapes");
    return tt;
}

/// Shortest round-trip decimal representation of a double, locale-independent
/// ('.' decimal separator).
inline std::string format_double(double v) {
    // Integral values print without an exponent ("100", not "1e+02").
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::ostringstream t;
        t.imbue(std::locale::classic());
        t << std::fixed << std::setprecision(0) << v;
        return t.str();
    }
    std::ostringstream ss;
    ss.imbue(std::locale::classic());
    ss.precision(17);
    ss << v;
    // Prefer the shortest representation that still round-trips.
    for (int p = 1; p < 17; ++p) {
        std::ostringstream t;
        t.imbue(std::locale::classic());
        t.precision(p);
        t << v;
        if (std::stod(t.str()) == v) return t.str();
    }
    return ss.str();
}

/// Write rows of doubles as CSV with '\n' line endings.
inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(path + ": cannot open for writing");
    os << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ",";
            os << format_double(row[i]);
        }
        os << "\n";
    }
    if (!os) throw FormatError(path + ": write failed");
}

} // namespace ttot
