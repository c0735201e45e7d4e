#include "ratekit/rdc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "ratekit/errors.hpp"
#include "ratekit/rng.hpp"

namespace ratekit::rdc {

namespace {

using Matrix = std::vector<std::vector<double>>;   // row-major, small (k x k)

Matrix make_matrix(std::size_t r, std::size_t c) { return Matrix(r, std::vector<double>(c, 0.0)); }

/// Cholesky factor (lower) of a symmetric positive-definite matrix.
Matrix cholesky(const Matrix& a) {
    const std::size_t n = a.size();
    Matrix l = make_matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = a[i][j];
            for (std::size_t k = 0; k < j; ++k) acc -= l[i][k] * l[j][k];
            if (i == j) {
                if (acc <= 0.0)
                    throw EvalError("rdc: covariance not positive definite despite ridge "
                                    "(pivot " + std::to_string(acc) + " at " + std::to_string(i) + ")");
                l[i][i] = std::sqrt(acc);
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    return l;
}

/// Solve L y = b (forward) then L^T x = y (backward).
std::vector<double> chol_solve(const Matrix& l, std::vector<double> b) {
    const std::size_t n = l.size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l[i][k] * b[k];
        b[i] = acc / l[i][i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t k = i + 1; k < n; ++k) acc -= l[k][i] * b[k];
        b[i] = acc / l[i][i];
    }
    return b;
}

std::vector<double> forward_solve(const Matrix& l, std::vector<double> b) {
    const std::size_t n = l.size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l[i][k] * b[k];
        b[i] = acc / l[i][i];
    }
    return b;
}

std::vector<double> back_solve_t(const Matrix& l, std::vector<double> b) {
    const std::size_t n = l.size();
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t k = i + 1; k < n; ++k) acc -= l[k][i] * b[k];
        b[i] = acc / l[i][i];
    }
    return b;
}

std::vector<double> mat_vec(const Matrix& a, const std::vector<double>& x) {
    std::vector<double> out(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = std::inner_product(a[i].begin(), a[i].end(), x.begin(), 0.0);
    return out;
}

std::vector<double> mat_t_vec(const Matrix& a, const std::vector<double>& x) {
    std::vector<double> out(a.empty() ? 0 : a[0].size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += a[i][j] * x[i];
    return out;
}

/// sin(w0 * copula + w1) features for one side; n x k, column-centered.
Matrix sine_features(const std::vector<double>& copula, std::size_t k, double scale, Rng rng) {
    const std::size_t n = copula.size();
    Matrix f = make_matrix(n, k);
    for (std::size_t j = 0; j < k; ++j) {
        double w0 = rng.normal(0.0, scale);
        double w1 = rng.normal(0.0, scale);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            f[i][j] = std::sin(w0 * copula[i] + w1);
            mean += f[i][j];
        }
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) f[i][j] -= mean;
    }
    return f;
}

} // namespace

std::vector<double> empirical_copula(std::span<const double> v) {
    if (v.size() < 2) throw ValidationError("empirical_copula: need at least 2 values");
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> out(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) out[order[k]] = avg_rank / static_cast<double>(n);
        i = j + 1;
    }
    return out;
}

double rdc(std::span<const double> u, std::span<const double> v, const RdcConfig& config) {
    if (u.size() != v.size()) throw ValidationError("rdc: length mismatch");
    if (u.size() < 20) throw ValidationError("rdc: need at least 20 samples");
    if (config.k < 1 || !(config.scale > 0.0)) throw ValidationError("rdc: bad configuration");

    std::vector<double> cu = empirical_copula(u);
    std::vector<double> cv = empirical_copula(v);

    // Assign the two projection streams by lexicographic order of the copula
    // vectors, not argument position: rdc(u, v) == rdc(v, u) exactly.
    const bool swap_sides =
        std::lexicographical_compare(cv.begin(), cv.end(), cu.begin(), cu.end());
    const std::vector<double>& first = swap_sides ? cv : cu;
    const std::vector<double>& second = swap_sides ? cu : cv;

    Rng base(config.seed);
    Matrix fx = sine_features(first, config.k, config.scale, base.fork(1));
    Matrix fy = sine_features(second, config.k, config.scale, base.fork(2));

    const std::size_t n = u.size();
    const std::size_t k = config.k;
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix sxx = make_matrix(k, k), syy = make_matrix(k, k), sxy = make_matrix(k, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a; b < k; ++b) {
                sxx[a][b] += fx[i][a] * fx[i][b] * inv_n;
                syy[a][b] += fy[i][a] * fy[i][b] * inv_n;
            }
            for (std::size_t b = 0; b < k; ++b) sxy[a][b] += fx[i][a] * fy[i][b] * inv_n;
        }
    }
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            sxx[a][b] = sxx[b][a];
            syy[a][b] = syy[b][a];
        }
        sxx[a][a] += config.ridge;
        syy[a][a] += config.ridge;
    }

    Matrix lx = cholesky(sxx);
    Matrix ly = cholesky(syy);

    // Top eigenvalue of B = Lx^-1 Sxy Syy^-1 Syx Lx^-T (symmetric PSD) by
    // power iteration; rho^2 is that eigenvalue.
    auto apply_b = [&](const std::vector<double>& z) {
        std::vector<double> t = back_solve_t(lx, z);           // Lx^-T z
        t = mat_t_vec(sxy, t);                                 // Syx ·
        t = chol_solve(ly, std::move(t));                      // Syy^-1 ·
        t = mat_vec(sxy, t);                                   // Sxy ·
        return forward_solve(lx, std::move(t));                // Lx^-1 ·
    };

    std::vector<double> z(k, 1.0 / std::sqrt(static_cast<double>(k)));
    double eig = 0.0;
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<double> bz = apply_b(z);
        double norm = std::sqrt(std::inner_product(bz.begin(), bz.end(), bz.begin(), 0.0));
        if (norm < 1e-300) return 0.0;
        for (double& e : bz) e /= norm;
        double new_eig = 0.0;
        std::vector<double> bz2 = apply_b(bz);
        new_eig = std::inner_product(bz.begin(), bz.end(), bz2.begin(), 0.0);
        z.swap(bz);
        if (std::abs(new_eig - eig) < 1e-13) {
            eig = new_eig;
            break;
        }
        eig = new_eig;
    }

    if (eig < -1e-6 || eig > 1.0 + 1e-6)
        std::fprintf(stderr, "rdc: eigenvalue %.9g outside [0,1] before clipping\n", eig);
    double clipped = std::clamp(eig, 0.0, 1.0);
    return std::sqrt(clipped);
}

double abs_pearson(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size() || u.size() < 2)
        throw ValidationError("pearson: need two equal-length vectors");
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        mu += u[i];
        mv += v[i];
    }
    mu /= static_cast<double>(u.size());
    mv /= static_cast<double>(v.size());
    double cuv = 0.0, cu = 0.0, cv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cuv += (u[i] - mu) * (v[i] - mv);
        cu += (u[i] - mu) * (u[i] - mu);
        cv += (v[i] - mv) * (v[i] - mv);
    }
    if (cu <= 0.0 || cv <= 0.0) return 0.0;
    return std::abs(cuv / std::sqrt(cu * cv));
}

} // namespace ratekit::rdc
