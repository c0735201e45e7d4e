#include "ratekit/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ratekit/errors.hpp"
#include "ratekit/rng.hpp"

using nlohmann::json;

namespace ratekit::models {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double clamped_log(double p) { return std::log(std::min(std::max(p, 1e-12), 1.0 - 1e-12)); }

/// Solve A x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-14)
            throw EvalError("solve: singular normal equations (column " + std::to_string(col) + ")");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

} // namespace

std::size_t MlpModel::param_count(std::span<const std::size_t> sizes) {
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) count += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return count;
}

MlpModel MlpModel::init(std::vector<std::size_t> sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw ValidationError("mlp: need at least input and output sizes");
    MlpModel m;
    m.layer_sizes = std::move(sizes);
    m.params.reserve(param_count(m.layer_sizes));
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        double bound = 1.0 / std::sqrt(static_cast<double>(m.layer_sizes[l]));
        std::size_t block = m.layer_sizes[l] * m.layer_sizes[l + 1] + m.layer_sizes[l + 1];
        for (std::size_t i = 0; i < block; ++i) m.params.push_back(rng.uniform(-bound, bound));
    }
    return m;
}

double MlpModel::forward(std::span<const double> x) const {
    if (x.size() != layer_sizes.front())
        throw ValidationError("mlp: input size mismatch");
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
        next.assign(out, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = 0.0;
            const double* w = params.data() + off + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * cur[i];
            acc += params[off + in * out + o];
            next[o] = (l + 2 < layer_sizes.size()) ? std::tanh(acc) : acc;
        }
        off += in * out + out;
        cur.swap(next);
    }
    return cur[0];
}

ad::Var MlpModel::forward_var(ad::Tape& tape, std::span<const double> x,
                              std::span<const ad::Var> param_vars) const {
    if (param_vars.size() != params.size())
        throw ValidationError("mlp: parameter leaf count mismatch");
    std::size_t off = 0;
    std::vector<ad::Var> cur, next;
    bool first = true;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
        next.clear();
        for (std::size_t o = 0; o < out; ++o) {
            std::span<const ad::Var> w = param_vars.subspan(off + o * in, in);
            ad::Var acc = first ? tape.dot(w, x) : tape.dot(w, std::span<const ad::Var>(cur));
            acc = acc + param_vars[off + in * out + o];
            next.push_back((l + 2 < layer_sizes.size()) ? tape.tanh(acc) : acc);
        }
        off += in * out + out;
        cur.swap(next);
        first = false;
    }
    return cur[0];
}

ad::Var MlpModel::forward_input_var(ad::Tape& tape, std::span<const ad::Var> input) const {
    if (input.size() != layer_sizes.front())
        throw ValidationError("mlp: input size mismatch");
    std::size_t off = 0;
    std::vector<ad::Var> cur(input.begin(), input.end()), next;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
        next.clear();
        for (std::size_t o = 0; o < out; ++o) {
            std::span<const double> w(params.data() + off + o * in, in);
            ad::Var acc = tape.dot(std::span<const ad::Var>(cur), w);
            acc = acc + params[off + in * out + o];
            next.push_back((l + 2 < layer_sizes.size()) ? tape.tanh(acc) : acc);
        }
        off += in * out + out;
        cur.swap(next);
    }
    return cur[0];
}

// -- conversion model -------------------------------------------------------

double ConversionModel::feature_logit(std::span<const double> x) const {
    if (x.size() != w_x.size()) throw ValidationError("conversion: feature size mismatch");
    double acc = bias;
    for (std::size_t i = 0; i < x.size(); ++i) acc += w_x[i] * x[i];
    return acc;
}

double ConversionModel::predict_logit(double feature_logit_value, double price) const {
    return feature_logit_value + w_p * data::log_price(price);
}

double ConversionModel::predict(std::span<const double> x, double price) const {
    return stable_sigmoid(predict_logit(feature_logit(x), price));
}

ad::Var ConversionModel::predict_var(ad::Tape& tape, double feature_logit_value,
                                     ad::Var price) const {
    return tape.sigmoid(tape.ln(price) * w_p + feature_logit_value);
}

ConversionModel fit_conversion(std::span<const data::PortfolioRecord> records,
                               std::span<const std::size_t> train_idx,
                               std::span<const std::size_t> dev_idx,
                               const ConversionFitConfig& config) {
    if (train_idx.empty()) throw ValidationError("fit_conversion: empty training set");
    const std::size_t d = records[train_idx[0]].x.size();

    // Standardize ln(price) on the training split for conditioning; the
    // affine map is folded back into (w_p, bias) afterwards so the model
    // stays in terms of raw ln(price).
    double lnp_mean = 0.0;
    for (std::size_t i : train_idx) lnp_mean += data::log_price(records[i].price_hist);
    lnp_mean /= static_cast<double>(train_idx.size());
    double lnp_var = 0.0;
    for (std::size_t i : train_idx) {
        double d0 = data::log_price(records[i].price_hist) - lnp_mean;
        lnp_var += d0 * d0;
    }
    lnp_var /= static_cast<double>(train_idx.size());
    const double lnp_scale = lnp_var > 1e-24 ? std::sqrt(lnp_var) : 1.0;

    std::vector<double> w(d, 0.0);
    double wp = 0.0, bias = 0.0;
    std::vector<double> vw(d, 0.0);
    double vwp = 0.0, vbias = 0.0;

    auto logit_of = [&](const data::PortfolioRecord& r) {
        double acc = bias + wp * ((data::log_price(r.price_hist) - lnp_mean) / lnp_scale);
        for (std::size_t j = 0; j < d; ++j) acc += w[j] * r.x[j];
        return acc;
    };
    auto mean_logloss = [&](std::span<const std::size_t> idx) {
        double acc = 0.0;
        for (std::size_t i : idx) {
            double p = stable_sigmoid(logit_of(records[i]));
            acc -= records[i].y ? clamped_log(p) : clamped_log(1.0 - p);
        }
        return idx.empty() ? 0.0 : acc / static_cast<double>(idx.size());
    };

    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    Rng shuffle_rng(config.seed);

    // Convex objective: run to a train-loss plateau, with dev log-loss as an
    // overfit guard. Patience counts epochs without train improvement and
    // epochs where dev sits clearly above its best, whichever trips first.
    double best_train = std::numeric_limits<double>::infinity();
    double best_dev = std::numeric_limits<double>::infinity();
    std::size_t train_stall = 0, dev_worsening = 0;

    std::vector<double> gw(d);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            std::size_t stop = std::min(order.size(), start + config.batch);
            std::fill(gw.begin(), gw.end(), 0.0);
            double gwp = 0.0, gbias = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const auto& r = records[order[k]];
                double err = stable_sigmoid(logit_of(r)) - static_cast<double>(r.y);
                for (std::size_t j = 0; j < d; ++j) gw[j] += err * r.x[j];
                gwp += err * ((data::log_price(r.price_hist) - lnp_mean) / lnp_scale);
                gbias += err;
            }
            double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t j = 0; j < d; ++j) {
                vw[j] = config.momentum * vw[j] - config.learning_rate * gw[j] * inv;
                w[j] += vw[j];
            }
            vwp = config.momentum * vwp - config.learning_rate * gwp * inv;
            wp += vwp;
            vbias = config.momentum * vbias - config.learning_rate * gbias * inv;
            bias += vbias;
        }
        double train_ll = mean_logloss(train_idx);
        if (!std::isfinite(train_ll))
            throw TrainingError("fit_conversion: loss diverged at epoch " + std::to_string(epoch) +
                                "; try a smaller learning rate");
        if (train_ll < best_train - 1e-7) {
            best_train = train_ll;
            train_stall = 0;
        } else {
            ++train_stall;
        }
        if (!dev_idx.empty()) {
            double dev_ll = mean_logloss(dev_idx);
            best_dev = std::min(best_dev, dev_ll);
            if (dev_ll > best_dev + 0.01)
                ++dev_worsening;
            else
                dev_worsening = 0;
        }
        if (train_stall > config.patience || dev_worsening > config.patience) break;
    }

    ConversionModel m;
    m.w_x = w;
    m.w_p = wp / lnp_scale;
    m.bias = bias - (wp / lnp_scale) * lnp_mean;
    m.train_logloss = mean_logloss(train_idx);
    m.dev_logloss = dev_idx.empty() ? m.train_logloss : mean_logloss(dev_idx);
    m.price_slope_negative = m.w_p < 0.0;
    return m;
}

// -- premium model ------------------------------------------------------------

double PremiumModel::premium_from_features(std::span<const double> x) const {
    if (column_backed) throw ValidationError("premium: column-backed model needs a record");
    double acc = bias;
    for (std::size_t i = 0; i < x.size() && i < w.size(); ++i) acc += w[i] * x[i];
    return std::exp(acc);
}

double PremiumModel::premium(const data::PortfolioRecord& rec) const {
    if (column_backed) {
        if (!(rec.h > 0.0))
            throw ValidationError("premium: record has no positive premium value");
        return rec.h;
    }
    return premium_from_features(rec.x);
}

PremiumModel premium_from_column() {
    PremiumModel m;
    m.column_backed = true;
    return m;
}

PremiumModel fit_premium(std::span<const data::PortfolioRecord> records,
                         std::span<const std::size_t> train_idx, double ridge) {
    if (train_idx.empty()) throw ValidationError("fit_premium: empty training set");
    const std::size_t d = records[train_idx[0]].x.size();
    const std::size_t n = d + 1;   // bias last, unregularized

    std::vector<std::vector<double>> ata(n, std::vector<double>(n, 0.0));
    std::vector<double> atz(n, 0.0);
    for (std::size_t i : train_idx) {
        const auto& r = records[i];
        double z = data::log_price(r.price_hist);
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = a; b < d; ++b) ata[a][b] += r.x[a] * r.x[b];
            ata[a][d] += r.x[a];
            atz[a] += r.x[a] * z;
        }
        ata[d][d] += 1.0;
        atz[d] += z;
    }
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < a; ++b) ata[a][b] = ata[b][a];
        ata[a][a] += ridge;
    }
    for (std::size_t b = 0; b < d; ++b) ata[d][b] = ata[b][d];

    std::vector<double> beta = solve_dense(std::move(ata), std::move(atz));
    PremiumModel m;
    m.column_backed = false;
    m.w.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(d));
    m.bias = beta[d];
    return m;
}

// -- coefficient model --------------------------------------------------------

CoefficientModel CoefficientModel::make_linear(std::size_t dim, double a, double b,
                                               std::uint64_t seed) {
    if (a > b) throw ValidationError("coefficient: lower bound above upper bound");
    CoefficientModel m;
    m.inner = MlpModel::init({dim, 1}, seed);
    m.lower = a;
    m.upper = b;
    return m;
}

CoefficientModel CoefficientModel::make_mlp(std::size_t dim, std::span<const std::size_t> hidden,
                                            double a, double b, std::uint64_t seed) {
    if (a > b) throw ValidationError("coefficient: lower bound above upper bound");
    std::vector<std::size_t> sizes;
    sizes.push_back(dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    CoefficientModel m;
    m.inner = MlpModel::init(std::move(sizes), seed);
    m.lower = a;
    m.upper = b;
    return m;
}

double CoefficientModel::raw(std::span<const double> x) const { return inner.forward(x); }

// Saturated sigmoids are clamped into the open unit interval so the mapped
// coefficient stays strictly inside (a, b) at double precision even when
// the raw score runs to +-700.
constexpr double kSigmoidClamp = 1e-12;

double CoefficientModel::coefficient(std::span<const double> x) const {
    double s = stable_sigmoid(raw(x));
    s = std::min(std::max(s, kSigmoidClamp), 1.0 - kSigmoidClamp);
    return s * (upper - lower) + lower;
}

double CoefficientModel::price(const data::PortfolioRecord& rec, const PremiumModel& hmodel) const {
    return coefficient(rec.x) * hmodel.premium(rec);
}

ad::Var CoefficientModel::coefficient_var(ad::Tape& tape, std::span<const double> x,
                                          std::span<const ad::Var> param_vars) const {
    ad::Var raw_v = inner.forward_var(tape, x, param_vars);
    ad::Var s = tape.sigmoid(raw_v);
    // Clamped region: pin the value, keep the node connected with a zero
    // partial (the true gradient there is below double resolution anyway).
    if (s.value() < kSigmoidClamp) s = s * 0.0 + kSigmoidClamp;
    if (s.value() > 1.0 - kSigmoidClamp) s = s * 0.0 + (1.0 - kSigmoidClamp);
    return s * (upper - lower) + lower;
}

// -- serialization -------------------------------------------------------------

std::string to_json(const ConversionModel& m, const std::string& mapping_fingerprint) {
    json j;
    j["kind"] = "conversion";
    j["w_x"] = m.w_x;
    j["w_p"] = m.w_p;
    j["bias"] = m.bias;
    j["train_logloss"] = m.train_logloss;
    j["dev_logloss"] = m.dev_logloss;
    j["price_slope_negative"] = m.price_slope_negative;
    j["mapping_fingerprint"] = mapping_fingerprint;
    return j.dump(2);
}

std::string to_json(const PremiumModel& m, const std::string& mapping_fingerprint) {
    json j;
    j["kind"] = "premium";
    j["column_backed"] = m.column_backed;
    j["w"] = m.w;
    j["bias"] = m.bias;
    j["mapping_fingerprint"] = mapping_fingerprint;
    return j.dump(2);
}

std::string to_json(const CoefficientModel& m, const std::string& mapping_fingerprint) {
    json j;
    j["kind"] = "coefficient";
    j["layer_sizes"] = m.inner.layer_sizes;
    j["params"] = m.inner.params;
    j["lower"] = m.lower;
    j["upper"] = m.upper;
    j["mapping_fingerprint"] = mapping_fingerprint;
    return j.dump(2);
}

namespace {
json parse_kind(const std::string& text, const char* expected) {
    json j = json::parse(text);
    if (j.value("kind", "") != expected)
        throw ConfigError(std::string("model file is not a ") + expected + " model");
    return j;
}
} // namespace

ConversionModel conversion_from_json(const std::string& text) {
    json j = parse_kind(text, "conversion");
    ConversionModel m;
    m.w_x = j.at("w_x").get<std::vector<double>>();
    m.w_p = j.at("w_p").get<double>();
    m.bias = j.at("bias").get<double>();
    m.train_logloss = j.value("train_logloss", 0.0);
    m.dev_logloss = j.value("dev_logloss", 0.0);
    m.price_slope_negative = j.value("price_slope_negative", m.w_p < 0.0);
    return m;
}

PremiumModel premium_from_json(const std::string& text) {
    json j = parse_kind(text, "premium");
    PremiumModel m;
    m.column_backed = j.at("column_backed").get<bool>();
    m.w = j.at("w").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    return m;
}

CoefficientModel coefficient_from_json(const std::string& text) {
    json j = parse_kind(text, "coefficient");
    CoefficientModel m;
    m.inner.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    m.inner.params = j.at("params").get<std::vector<double>>();
    m.lower = j.at("lower").get<double>();
    m.upper = j.at("upper").get<double>();
    return m;
}

std::string fingerprint_of_model_json(const std::string& text) {
    return json::parse(text).value("mapping_fingerprint", "");
}

double rank_correlation(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size() || u.size() < 2)
        throw ValidationError("rank_correlation: need two equal-length vectors");
    auto ranks = [](std::span<const double> x) {
        std::vector<std::size_t> order(x.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
        std::vector<double> r(x.size());
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
            double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> ru = ranks(u), rv = ranks(v);
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < ru.size(); ++i) {
        mu += ru[i];
        mv += rv[i];
    }
    mu /= static_cast<double>(ru.size());
    mv /= static_cast<double>(rv.size());
    double cuv = 0.0, cu = 0.0, cv = 0.0;
    for (std::size_t i = 0; i < ru.size(); ++i) {
        cuv += (ru[i] - mu) * (rv[i] - mv);
        cu += (ru[i] - mu) * (ru[i] - mu);
        cv += (rv[i] - mv) * (rv[i] - mv);
    }
    if (cu <= 0.0 || cv <= 0.0) return 0.0;
    return cuv / std::sqrt(cu * cv);
}

} // namespace ratekit::models
