#pragma once

// Independent least-squares oracle: explicit Gram-matrix assembly and a plain
// Gaussian-elimination solve. Deliberately shares no code with the library's
// QR-based fits.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

inline std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (a[pivot][col] == 0.0) throw std::runtime_error("oracle: singular system");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double v = b[i];
        for (std::size_t c = i + 1; c < n; ++c) v -= a[i][c] * x[c];
        x[i] = v / a[i][i];
    }
    return x;
}

/// Solves min ||X w - y|| via (X'X + ridge I) w = X'y.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& rows,
                                            const std::vector<double>& y, double ridge = 0.0) {
    const std::size_t n = rows.size();
    const std::size_t k = rows.front().size();
    std::vector<std::vector<double>> gram(k, std::vector<double>(k, 0.0));
    std::vector<double> rhs(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            rhs[p] += rows[i][p] * y[i];
            for (std::size_t q = 0; q < k; ++q) gram[p][q] += rows[i][p] * rows[i][q];
        }
    }
    for (std::size_t p = 0; p < k; ++p) gram[p][p] += ridge;
    return solve_linear(std::move(gram), std::move(rhs));
}

inline double fit_residual(const std::vector<std::vector<double>>& rows,
                           const std::vector<double>& y, const std::vector<double>& w) {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) v += rows[i][j] * w[j];
        worst = std::max(worst, std::abs(v - y[i]));
    }
    return worst;
}

} // namespace oracle
