#include "ratekit/hgr.hpp"

#include <algorithm>
#include <cmath>

#include "ratekit/errors.hpp"

namespace ratekit::hgr {

AdversaryPair AdversaryPair::init(std::size_t sensitive_dim, std::size_t hidden,
                                  std::uint64_t seed) {
    AdversaryPair pair;
    pair.phi = models::MlpModel::init({1, hidden, 1}, seed * 2 + 1);
    pair.psi = models::MlpModel::init({sensitive_dim, hidden, 1}, seed * 2 + 2);
    pair.psi_in_mean.assign(sensitive_dim, 0.0);
    pair.psi_in_scale.assign(sensitive_dim, 1.0);
    return pair;
}

void AdversaryPair::set_input_scale(std::span<const double> prices,
                                    std::span<const std::vector<double>> sensitive) {
    auto moments = [](auto&& get, std::size_t n) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += get(i);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = get(i) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        return std::pair<double, double>(mean, var > 1e-24 ? std::sqrt(var) : 1.0);
    };
    if (!prices.empty()) {
        auto [m, s] = moments([&](std::size_t i) { return prices[i]; }, prices.size());
        phi_in_mean = m;
        phi_in_scale = s;
    }
    if (!sensitive.empty()) {
        const std::size_t k = sensitive.front().size();
        psi_in_mean.assign(k, 0.0);
        psi_in_scale.assign(k, 1.0);
        for (std::size_t j = 0; j < k; ++j) {
            auto [m, s] = moments([&](std::size_t i) { return sensitive[i][j]; }, sensitive.size());
            psi_in_mean[j] = m;
            psi_in_scale[j] = s;
        }
    }
}

double AdversaryPair::phi_raw(double price) const {
    double in = (price - phi_in_mean) / phi_in_scale;
    return phi.forward(std::span<const double>(&in, 1));
}

double AdversaryPair::psi_raw(std::span<const double> s) const {
    std::vector<double> in(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) in[j] = (s[j] - psi_in_mean[j]) / psi_in_scale[j];
    return psi.forward(in);
}

std::vector<double> standardize_batch(std::span<const double> outputs, bool* degenerate) {
    if (outputs.size() < 2) throw ValidationError("standardize: batch size must be >= 2");
    double mean = 0.0;
    for (double v : outputs) mean += v;
    mean /= static_cast<double>(outputs.size());
    double var = 0.0;
    for (double v : outputs) {
        double c = v - mean;
        var += c * c;
    }
    var /= static_cast<double>(outputs.size());
    if (degenerate) *degenerate = var < 1e-12;
    double std_f = std::sqrt(var + kStdFloor * kStdFloor);
    std::vector<double> out(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) out[i] = (outputs[i] - mean) / std_f;
    return out;
}

std::vector<ad::Var> standardize_batch(ad::Tape& tape, std::span<const ad::Var> outputs,
                                       bool* degenerate) {
    if (outputs.size() < 2) throw ValidationError("standardize: batch size must be >= 2");
    ad::Var mean = tape.mean(outputs);
    std::vector<ad::Var> centered;
    centered.reserve(outputs.size());
    for (ad::Var v : outputs) centered.push_back(v - mean);
    std::vector<ad::Var> squares;
    squares.reserve(outputs.size());
    for (ad::Var c : centered) squares.push_back(c * c);
    ad::Var var = tape.mean(squares);
    if (degenerate) *degenerate = var.value() < 1e-12;
    ad::Var std_f = tape.sqrt(var + kStdFloor * kStdFloor);
    std::vector<ad::Var> out;
    out.reserve(outputs.size());
    for (ad::Var c : centered) out.push_back(c / std_f);
    return out;
}

namespace {

struct PairGraph {
    std::vector<ad::Var> phi_params;
    std::vector<ad::Var> psi_params;
    ad::Var objective;
};

/// Shared builder for the ascent objective: both networks on the tape, both
/// outputs standardized, objective = mean(phi_hat * psi_hat).
PairGraph build_ascent_graph(ad::Tape& tape, const AdversaryPair& pair,
                             std::span<const double> prices,
                             std::span<const std::vector<double>> sensitive) {
    PairGraph g;
    g.phi_params = tape.leaves(pair.phi.params);
    g.psi_params = tape.leaves(pair.psi.params);

    std::vector<ad::Var> phi_out, psi_out;
    phi_out.reserve(prices.size());
    psi_out.reserve(prices.size());
    std::vector<double> in(1);
    for (std::size_t i = 0; i < prices.size(); ++i) {
        in[0] = (prices[i] - pair.phi_in_mean) / pair.phi_in_scale;
        phi_out.push_back(pair.phi.forward_var(tape, in, g.phi_params));
    }
    std::vector<double> s_in(pair.psi_in_mean.size());
    for (std::size_t i = 0; i < sensitive.size(); ++i) {
        for (std::size_t j = 0; j < s_in.size(); ++j)
            s_in[j] = (sensitive[i][j] - pair.psi_in_mean[j]) / pair.psi_in_scale[j];
        psi_out.push_back(pair.psi.forward_var(tape, s_in, g.psi_params));
    }

    std::vector<ad::Var> phi_hat = standardize_batch(tape, phi_out);
    std::vector<ad::Var> psi_hat = standardize_batch(tape, psi_out);
    std::vector<ad::Var> products;
    products.reserve(phi_hat.size());
    for (std::size_t i = 0; i < phi_hat.size(); ++i) products.push_back(phi_hat[i] * psi_hat[i]);
    g.objective = tape.mean(products);
    return g;
}

} // namespace

double ascent_step(AdversaryPair& pair, std::span<const double> prices,
                   std::span<const std::vector<double>> sensitive, double lr_phi, double lr_psi) {
    if (prices.size() != sensitive.size())
        throw ValidationError("ascent_step: batch size mismatch");
    if (prices.size() < 2) throw ValidationError("ascent_step: batch size must be >= 2");

    ad::Tape tape;
    PairGraph g = build_ascent_graph(tape, pair, prices, sensitive);
    ad::Gradients grads = tape.backward(g.objective);

    for (std::size_t i = 0; i < pair.phi.params.size(); ++i) {
        double gv = grads.at(g.phi_params[i]);
        if (!std::isfinite(gv)) throw TrainingError("ascent_step: non-finite phi gradient");
        pair.phi.params[i] += lr_phi * gv;
    }
    for (std::size_t i = 0; i < pair.psi.params.size(); ++i) {
        double gv = grads.at(g.psi_params[i]);
        if (!std::isfinite(gv)) throw TrainingError("ascent_step: non-finite psi gradient");
        pair.psi.params[i] += lr_psi * gv;
    }
    return g.objective.value();
}

ad::Var fairness_penalty(ad::Tape& tape, const AdversaryPair& pair,
                         std::span<const ad::Var> prices,
                         std::span<const std::vector<double>> sensitive) {
    if (prices.size() != sensitive.size())
        throw ValidationError("fairness_penalty: batch size mismatch");
    if (prices.size() < 2) throw ValidationError("fairness_penalty: batch size must be >= 2");

    // phi side: differentiable in the prices, constant in the adversary.
    std::vector<ad::Var> phi_out;
    phi_out.reserve(prices.size());
    std::vector<ad::Var> in(1);
    for (ad::Var p : prices) {
        in[0] = (p - pair.phi_in_mean) / pair.phi_in_scale;
        phi_out.push_back(pair.phi.forward_input_var(tape, in));
    }
    std::vector<ad::Var> phi_hat = standardize_batch(tape, std::span<const ad::Var>(phi_out));

    // psi side: plain numbers, standardized with the identical arithmetic.
    std::vector<double> psi_out;
    psi_out.reserve(sensitive.size());
    for (const auto& s : sensitive) psi_out.push_back(pair.psi_raw(s));
    std::vector<double> psi_hat = standardize_batch(psi_out);

    std::vector<ad::Var> products;
    products.reserve(phi_hat.size());
    for (std::size_t i = 0; i < phi_hat.size(); ++i) products.push_back(phi_hat[i] * psi_hat[i]);
    return tape.mean(products);
}

HgrEstimate hgr_metric(std::span<const double> u, std::span<const double> v,
                       const HgrConfig& config) {
    if (u.size() != v.size()) throw ValidationError("hgr_metric: length mismatch");
    if (u.size() < 50) throw ValidationError("hgr_metric: need at least 50 samples");

    std::vector<std::vector<double>> v_rows(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) v_rows[i] = {v[i]};

    AdversaryPair pair = AdversaryPair::init(1, config.hidden, config.seed);
    pair.set_input_scale(u, v_rows);

    HgrEstimate est;
    est.n_used = u.size();
    std::vector<double> history;
    history.reserve(config.max_steps);
    double best = 0.0;
    for (std::size_t step = 0; step < config.max_steps; ++step) {
        double obj = ascent_step(pair, u, v_rows, config.learning_rate, config.learning_rate);
        best = std::max(best, std::abs(obj));
        history.push_back(obj);
        if (step >= config.plateau_window) {
            double then = history[step - config.plateau_window];
            if (std::abs(obj - then) < config.plateau_tol) {
                est.converged = true;
                break;
            }
        }
    }
    // Unit-variance Cauchy-Schwarz bounds the mean product by 1; tolerate
    // float slop, fail on anything structural.
    if (best > 1.0 + 1e-9) throw EvalError("hgr_metric: estimate above 1: " + std::to_string(best));
    est.value = std::min(best, 1.0);
    return est;
}

} // namespace ratekit::hgr
