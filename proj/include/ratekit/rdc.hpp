#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ratekit::rdc {

struct RdcConfig {
    std::size_t k = 20;          // random projection count per side
    double scale = 1.0 / 6.0;    // projection coefficient stddev
    std::uint64_t seed = 0;
    double ridge = 1e-8;         // regularization for the CCA solve
};

/// Empirical copula transform: rank(v_i)/n with average ranks for ties.
/// Invariant under strictly increasing transforms of v.
std::vector<double> empirical_copula(std::span<const double> v);

/// Randomized Dependence Coefficient: copula-transform each variable, append
/// a constant-1 column, push through k random affine maps with Normal(0,
/// scale^2) coefficients, apply sine, and return the largest canonical
/// correlation between the two projected sets (ridge-regularized solve),
/// clipped to [0, 1].
///
/// The two projection streams are assigned by the lexicographic order of the
/// copula vectors rather than by argument position, which makes
/// rdc(u, v) == rdc(v, u) exact for a fixed seed.
double rdc(std::span<const double> u, std::span<const double> v, const RdcConfig& config);

/// Absolute Pearson correlation (comparison utility; 0 for a degenerate
/// side).
double abs_pearson(std::span<const double> u, std::span<const double> v);

} // namespace ratekit::rdc
