#pragma once

// Slow, independent reference implementations used as test oracles. None of
// these share code with the library.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(Matrix a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
        if (std::fabs(a[p][c]) < 1e-300) throw std::runtime_error("singular");
        std::swap(a[p], a[c]);
        std::swap(b[p], b[c]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// Ordinary least squares with intercept via the normal equations.
// Returns [w..., b] in the units of the rows given.
inline std::vector<double> least_squares(const Matrix& rows, const std::vector<double>& y) {
    const std::size_t d = rows.at(0).size() + 1;
    Matrix ata(d, std::vector<double>(d, 0.0));
    std::vector<double> aty(d, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<double> a = rows[r];
        a.push_back(1.0);
        for (std::size_t i = 0; i < d; ++i) {
            aty[i] += a[i] * y[r];
            for (std::size_t j = 0; j < d; ++j) ata[i][j] += a[i] * a[j];
        }
    }
    return gauss_solve(ata, aty);
}

// Central difference of f at x along coordinate i with step h.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

// Exact Shapley values by enumerating every coalition. Features outside the
// coalition take the reference value.
inline std::vector<double> brute_force_shapley(const std::function<double(const std::vector<double>&)>& f,
                                               const std::vector<double>& x,
                                               const std::vector<double>& reference) {
    const std::size_t d = x.size();
    std::vector<double> fact(d + 1, 1.0);
    for (std::size_t k = 1; k <= d; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
    auto value = [&](unsigned mask) {
        std::vector<double> z = reference;
        for (std::size_t i = 0; i < d; ++i)
            if (mask & (1u << i)) z[i] = x[i];
        return f(z);
    };
    std::vector<double> phi(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (unsigned mask = 0; mask < (1u << d); ++mask) {
            if (mask & (1u << i)) continue;
            const auto s = static_cast<std::size_t>(__builtin_popcount(mask));
            const double w = fact[s] * fact[d - s - 1] / fact[d];
            phi[i] += w * (value(mask | (1u << i)) - value(mask));
        }
    }
    return phi;
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace oracle
