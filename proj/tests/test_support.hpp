#pragma once

// Shared test oracles and fixtures. Everything here is independent of the
// library's computation paths: the chi-square machinery is its own
// implementation, IDX bytes are written from the public format description,
// and gzip goes through zlib directly.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <zlib.h>

namespace testsupport {

// Wilson-Hilferty approximation; adequate for the large dof used here.
inline double chi_square_quantile(double p, double dof) {
    // normal quantile via Acklam's rational approximation
    auto norm_quantile = [](double q) {
        static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
        static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
        static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
        static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
        const double plow = 0.02425, phigh = 1 - plow;
        double x;
        if (q < plow) {
            double u = std::sqrt(-2 * std::log(q));
            x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1);
        } else if (q <= phigh) {
            double u = q - 0.5, r = u * u;
            x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
                (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
        } else {
            double u = std::sqrt(-2 * std::log(1 - q));
            x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1);
        }
        return x;
    };
    const double z = norm_quantile(p);
    const double t = 1.0 - 2.0 / (9.0 * dof) + z * std::sqrt(2.0 / (9.0 * dof));
    return dof * t * t * t;
}

// Pearson statistic for an r x c contingency table.
inline double contingency_chi_square(const std::vector<std::vector<int64_t>>& table) {
    const size_t R = table.size(), C = table[0].size();
    std::vector<double> row(R, 0), col(C, 0);
    double total = 0;
    for (size_t r = 0; r < R; ++r)
        for (size_t c = 0; c < C; ++c) {
            row[r] += static_cast<double>(table[r][c]);
            col[c] += static_cast<double>(table[r][c]);
            total += static_cast<double>(table[r][c]);
        }
    double stat = 0;
    for (size_t r = 0; r < R; ++r)
        for (size_t c = 0; c < C; ++c) {
            double e = row[r] * col[c] / total;
            if (e > 0) {
                double d = static_cast<double>(table[r][c]) - e;
                stat += d * d / e;
            }
        }
    return stat;
}

inline double uniform_histogram_chi_square(const std::vector<int64_t>& counts) {
    double total = 0;
    for (int64_t c : counts) total += static_cast<double>(c);
    const double e = total / static_cast<double>(counts.size());
    double stat = 0;
    for (int64_t c : counts) {
        double d = static_cast<double>(c) - e;
        stat += d * d / e;
    }
    return stat;
}

inline void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline std::vector<uint8_t> make_idx_images(uint32_t count, uint32_t rows, uint32_t cols,
                                            const std::vector<uint8_t>& pixels) {
    std::vector<uint8_t> out;
    put_be32(out, 0x00000803u);
    put_be32(out, count);
    put_be32(out, rows);
    put_be32(out, cols);
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

inline std::vector<uint8_t> make_idx_labels(const std::vector<uint8_t>& labels) {
    std::vector<uint8_t> out;
    put_be32(out, 0x00000801u);
    put_be32(out, static_cast<uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

inline std::vector<uint8_t> gzip_bytes(const std::vector<uint8_t>& in) {
    z_stream zs{};
    deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY);
    std::vector<uint8_t> out(in.size() + 1024);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(out.size() - zs.avail_out);
    deflateEnd(&zs);
    return out;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("ifmlab_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testsupport
