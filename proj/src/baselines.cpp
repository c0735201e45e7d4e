#include "ratekit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ratekit/errors.hpp"

using nlohmann::json;

namespace ratekit::baselines {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// g(c) for one record given its premium and feature logit.
double record_objective(double c, double h, double feature_logit, double w_p, double lambda) {
    double price = c * h;
    double f = stable_sigmoid(feature_logit + w_p * std::log(price));
    return (c - 1.0) * h * f + lambda * f;
}

constexpr double kInvPhi = 0.6180339887498949;   // golden ratio conjugate

/// Golden-section maximization of g on [lo, hi]; returns the interior
/// estimate (never the bracket ends themselves).
double golden_section_max(double lo, double hi, const std::function<double(double)>& g) {
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double g1 = g(x1), g2 = g(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
        if (g1 >= g2) {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - kInvPhi * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + kInvPhi * (hi - lo);
            g2 = g(x2);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

IndividualSolution individual_optimize(std::span<const data::PortfolioRecord> records,
                                       std::span<const std::size_t> idx,
                                       const models::ConversionModel& fmodel,
                                       const models::PremiumModel& hmodel, double lambda,
                                       double lower, double upper, double grid_step, bool refine) {
    if (!(grid_step > 0.0)) throw ValidationError("individual: grid step must be positive");
    if (!(lower < upper)) throw ValidationError("individual: bounds must satisfy a < b");

    const auto n_pts = static_cast<std::size_t>(std::llround((upper - lower) / grid_step)) + 1;

    IndividualSolution sol;
    sol.record_idx.assign(idx.begin(), idx.end());
    sol.coefficients.resize(idx.size());
    sol.lambda = lambda;
    sol.method = refine ? "grid+refine" : "grid";

    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rec = records[idx[k]];
        const double h = hmodel.premium(rec);
        const double logit = fmodel.feature_logit(rec.x);
        auto g = [&](double c) { return record_objective(c, h, logit, fmodel.w_p, lambda); };

        double best_c = lower;
        double best_g = g(lower);
        for (std::size_t j = 1; j < n_pts; ++j) {
            double c = std::min(lower + static_cast<double>(j) * grid_step, upper);
            double gc = g(c);
            if (gc > best_g) {
                best_g = gc;
                best_c = c;
            }
        }
        if (refine) {
            double lo = std::max(lower, best_c - grid_step);
            double hi = std::min(upper, best_c + grid_step);
            double c_ref = golden_section_max(lo, hi, g);
            double g_ref = g(c_ref);
            if (g_ref > best_g) {
                best_g = g_ref;
                best_c = c_ref;
            }
        }
        sol.coefficients[k] = best_c;
        total += best_g;
    }
    sol.objective = total;
    return sol;
}

IndividualSolution discrete_individual_optimize(std::span<const data::PortfolioRecord> records,
                                                std::span<const std::size_t> idx,
                                                const models::ConversionModel& fmodel,
                                                const models::PremiumModel& hmodel, double lambda,
                                                std::span<const double> rate_set) {
    if (rate_set.empty()) throw ValidationError("discrete: rate set is empty");
    std::vector<double> rates(rate_set.begin(), rate_set.end());
    std::sort(rates.begin(), rates.end());

    IndividualSolution sol;
    sol.record_idx.assign(idx.begin(), idx.end());
    sol.coefficients.resize(idx.size());
    sol.lambda = lambda;
    sol.method = "discrete";

    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rec = records[idx[k]];
        const double h = hmodel.premium(rec);
        const double logit = fmodel.feature_logit(rec.x);
        double best_c = rates.front();
        double best_g = record_objective(best_c, h, logit, fmodel.w_p, lambda);
        for (std::size_t j = 1; j < rates.size(); ++j) {
            double gc = record_objective(rates[j], h, logit, fmodel.w_p, lambda);
            if (gc > best_g) {
                best_g = gc;
                best_c = rates[j];
            }
        }
        sol.coefficients[k] = best_c;
        total += best_g;
    }
    sol.objective = total;
    return sol;
}

std::string IndividualSolution::to_csv(std::span<const data::PortfolioRecord> records,
                                       const models::ConversionModel& fmodel,
                                       const models::PremiumModel& hmodel) const {
    std::ostringstream out;
    out.precision(17);
    out << "record,coefficient,margin,conversion\n";
    for (std::size_t k = 0; k < record_idx.size(); ++k) {
        const auto& rec = records[record_idx[k]];
        double h = hmodel.premium(rec);
        double c = coefficients[k];
        double f = fmodel.predict(rec.x, c * h);
        out << record_idx[k] << ',' << c << ',' << (c - 1.0) * h * f << ',' << f << '\n';
    }
    return out.str();
}

// -- boosted trees ------------------------------------------------------------

namespace {

struct SplitResult {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

SplitResult best_split(const std::vector<const data::PortfolioRecord*>& recs,
                       const std::vector<double>& residual, std::vector<std::size_t>& members,
                       std::size_t min_leaf) {
    SplitResult best;
    const std::size_t n = members.size();
    if (n < 2 * min_leaf || n < 2) return best;

    double sum = 0.0;
    for (std::size_t m : members) sum += residual[m];
    const double parent_score = sum * sum / static_cast<double>(n);
    const std::size_t dim = recs[members[0]]->x.size();

    std::vector<std::size_t> order(members);
    for (std::size_t f = 0; f < dim; ++f) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return recs[a]->x[f] < recs[b]->x[f];
        });
        double left_sum = 0.0;
        for (std::size_t pos = 0; pos + 1 < n; ++pos) {
            left_sum += residual[order[pos]];
            double lo = recs[order[pos]]->x[f];
            double hi = recs[order[pos + 1]]->x[f];
            if (lo == hi) continue;
            std::size_t n_left = pos + 1;
            std::size_t n_right = n - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            double right_sum = sum - left_sum;
            double score = left_sum * left_sum / static_cast<double>(n_left) +
                           right_sum * right_sum / static_cast<double>(n_right);
            double gain = score - parent_score;
            if (gain > best.gain + 1e-12) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (lo + hi);
                best.gain = gain;
            }
        }
    }
    return best;
}

void grow(std::vector<TreeNode>& tree, int node, const std::vector<const data::PortfolioRecord*>& recs,
          const std::vector<double>& residual, std::vector<std::size_t> members, std::size_t depth,
          const BoostConfig& config) {
    double sum = 0.0;
    for (std::size_t m : members) sum += residual[m];
    double mean = members.empty() ? 0.0 : sum / static_cast<double>(members.size());

    SplitResult split;
    if (depth < config.max_depth) split = best_split(recs, residual, members, config.min_leaf);
    if (!split.found) {
        tree[static_cast<std::size_t>(node)].value = mean;
        return;
    }

    std::vector<std::size_t> left_members, right_members;
    for (std::size_t m : members) {
        if (recs[m]->x[split.feature] <= split.threshold)
            left_members.push_back(m);
        else
            right_members.push_back(m);
    }
    if (left_members.empty() || right_members.empty()) {
        tree[static_cast<std::size_t>(node)].value = mean;
        return;
    }

    const int left = static_cast<int>(tree.size());
    tree.push_back({});
    const int right = static_cast<int>(tree.size());
    tree.push_back({});
    tree[static_cast<std::size_t>(node)].feature = static_cast<int>(split.feature);
    tree[static_cast<std::size_t>(node)].threshold = split.threshold;
    tree[static_cast<std::size_t>(node)].left = left;
    tree[static_cast<std::size_t>(node)].right = right;
    grow(tree, left, recs, residual, std::move(left_members), depth + 1, config);
    grow(tree, right, recs, residual, std::move(right_members), depth + 1, config);
}

double tree_predict(const std::vector<TreeNode>& tree, std::span<const double> x) {
    int node = 0;
    while (tree[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = tree[static_cast<std::size_t>(node)];
        node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return tree[static_cast<std::size_t>(node)].value;
}

} // namespace

double BoostedTreeModel::predict_raw(std::span<const double> x) const {
    double acc = base;
    for (const auto& tree : trees) acc += shrinkage * tree_predict(tree, x);
    return acc;
}

double BoostedTreeModel::predict(std::span<const double> x) const {
    return std::clamp(predict_raw(x), lower, upper);
}

BoostedTreeModel fit_indirect_ratebook(std::span<const data::PortfolioRecord> records,
                                       std::span<const std::size_t> idx,
                                       std::span<const double> targets, double lower, double upper,
                                       const BoostConfig& config) {
    if (idx.size() != targets.size())
        throw ValidationError("indirect: index/target length mismatch");
    if (idx.empty()) throw ValidationError("indirect: empty training set");
    for (double t : targets)
        if (t < lower - 1e-9 || t > upper + 1e-9)
            throw ValidationError("indirect: target outside coefficient bounds");

    BoostedTreeModel model;
    model.shrinkage = config.shrinkage;
    model.max_depth = config.max_depth;
    model.lower = lower;
    model.upper = upper;
    model.base = std::accumulate(targets.begin(), targets.end(), 0.0) /
                 static_cast<double>(targets.size());

    std::vector<const data::PortfolioRecord*> recs(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) recs[k] = &records[idx[k]];

    std::vector<double> pred(idx.size(), model.base);
    std::vector<double> residual(idx.size());
    std::vector<std::size_t> all(idx.size());
    std::iota(all.begin(), all.end(), std::size_t{0});

    for (std::size_t t = 0; t < config.n_trees; ++t) {
        double max_abs = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            residual[k] = targets[k] - pred[k];
            max_abs = std::max(max_abs, std::abs(residual[k]));
        }
        if (max_abs < 1e-12) break;   // constant target: nothing left to fit

        std::vector<TreeNode> tree;
        tree.push_back({});
        grow(tree, 0, recs, residual, all, 0, config);
        for (std::size_t k = 0; k < idx.size(); ++k)
            pred[k] += config.shrinkage * tree_predict(tree, recs[k]->x);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double predict_indirect(const BoostedTreeModel& model, std::span<const double> x) {
    return model.predict(x);
}

std::string to_json(const BoostedTreeModel& m, const std::string& mapping_fingerprint) {
    json j;
    j["kind"] = "indirect";
    j["base"] = m.base;
    j["shrinkage"] = m.shrinkage;
    j["max_depth"] = m.max_depth;
    j["lower"] = m.lower;
    j["upper"] = m.upper;
    j["mapping_fingerprint"] = mapping_fingerprint;
    json trees = json::array();
    for (const auto& tree : m.trees) {
        json nodes = json::array();
        for (const auto& nd : tree)
            nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

BoostedTreeModel boosted_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.value("kind", "") != "indirect") throw ConfigError("model file is not an indirect model");
    BoostedTreeModel m;
    m.base = j.at("base").get<double>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.max_depth = j.at("max_depth").get<std::size_t>();
    m.lower = j.at("lower").get<double>();
    m.upper = j.at("upper").get<double>();
    for (const auto& tree : j.at("trees")) {
        std::vector<TreeNode> nodes;
        for (const auto& nd : tree) {
            TreeNode n;
            n.feature = nd.at(0).get<int>();
            n.threshold = nd.at(1).get<double>();
            n.left = nd.at(2).get<int>();
            n.right = nd.at(3).get<int>();
            n.value = nd.at(4).get<double>();
            nodes.push_back(n);
        }
        m.trees.push_back(std::move(nodes));
    }
    return m;
}

} // namespace ratekit::baselines
