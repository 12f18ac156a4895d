#pragma once

// Reference implementations used as test oracles. Plain std::vector code,
// deliberately independent of the library and of Eigen's solvers.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// Gaussian elimination with partial pivoting.
inline Vec solve(Mat a, Vec b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        if (a[c][c] == 0.0) throw std::runtime_error("singular");
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    Vec x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// (gamma I + X^T X)^{-1} X^T y from the full sample matrix.
inline Vec batch_ridge(const std::vector<Vec>& xs, const Vec& ys, double gamma, std::size_t d) {
    Mat a(d, Vec(d, 0.0));
    Vec b(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) a[i][i] = gamma;
    for (std::size_t s = 0; s < xs.size(); ++s)
        for (std::size_t i = 0; i < d; ++i) {
            b[i] += xs[s][i] * ys[s];
            for (std::size_t k = 0; k < d; ++k) a[i][k] += xs[s][i] * xs[s][k];
        }
    return solve(a, b);
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// v^T A^{-1} v via a solve.
inline double quad_inverse(const Mat& a, const Vec& v) { return dot(v, solve(a, v)); }

// Forced frames by scanning every t and testing the definition directly.
inline std::vector<std::uint64_t> forced_by_scan(std::uint64_t horizon, double i_param) {
    const double t = static_cast<double>(horizon);
    const double step_real = std::pow(t, 1.0 / (std::log(t) / std::log(i_param)));
    const auto step = static_cast<std::uint64_t>(std::llround(step_real));
    std::vector<std::uint64_t> out;
    for (std::uint64_t k = 1; k <= horizon; ++k)
        if (k % step == 0) out.push_back(k);
    return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

} // namespace oracle
