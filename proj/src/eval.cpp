#include "ratekit/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ratekit/rng.hpp"

using nlohmann::json;

namespace ratekit::eval {

namespace {

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_coefficients(std::span<const double> coefficients, std::size_t n, double lower,
                        double upper) {
    if (coefficients.size() != n)
        throw ValidationError("metrics: need one coefficient per record");
    for (double c : coefficients)
        if (!(c >= lower && c <= upper))
            throw ValidationError("metrics: coefficient " + std::to_string(c) +
                                  " outside [" + std::to_string(lower) + ", " +
                                  std::to_string(upper) + "]");
}

std::uint64_t fnv1a_str(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

double gwm(std::span<const data::PortfolioRecord> records, std::span<const std::size_t> idx,
           std::span<const double> coefficients, const models::ConversionModel& fmodel,
           const models::PremiumModel& hmodel, double lower, double upper) {
    check_coefficients(coefficients, idx.size(), lower, upper);
    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rec = records[idx[k]];
        double h = hmodel.premium(rec);
        double price = coefficients[k] * h;
        total += (price - h) * fmodel.predict(rec.x, price);
    }
    return total;
}

double gwm(std::span<const data::PortfolioRecord> records, std::span<const std::size_t> idx,
           const models::CoefficientModel& cmodel, const models::ConversionModel& fmodel,
           const models::PremiumModel& hmodel) {
    double total = 0.0;
    for (std::size_t i : idx) {
        const auto& rec = records[i];
        double h = hmodel.premium(rec);
        double price = cmodel.coefficient(rec.x) * h;
        total += (price - h) * fmodel.predict(rec.x, price);
    }
    return total;
}

double conversion_rate(std::span<const data::PortfolioRecord> records,
                       std::span<const std::size_t> idx, std::span<const double> coefficients,
                       const models::ConversionModel& fmodel, const models::PremiumModel& hmodel,
                       double lower, double upper) {
    check_coefficients(coefficients, idx.size(), lower, upper);
    if (idx.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& rec = records[idx[k]];
        total += fmodel.predict(rec.x, coefficients[k] * hmodel.premium(rec));
    }
    return total / static_cast<double>(idx.size());
}

double conversion_rate(std::span<const data::PortfolioRecord> records,
                       std::span<const std::size_t> idx, const models::CoefficientModel& cmodel,
                       const models::ConversionModel& fmodel, const models::PremiumModel& hmodel) {
    if (idx.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i : idx) {
        const auto& rec = records[i];
        total += fmodel.predict(rec.x, cmodel.coefficient(rec.x) * hmodel.premium(rec));
    }
    return total / static_cast<double>(idx.size());
}

FairnessScores fairness_report(std::span<const double> prices, std::span<const double> sensitive,
                               const FairnessConfig& config) {
    if (prices.size() != sensitive.size())
        throw ValidationError("fairness_report: length mismatch");
    if (prices.size() < 50) throw ValidationError("fairness_report: need at least 50 samples");

    FairnessScores scores;
    double mean = 0.0;
    for (double p : prices) mean += p;
    mean /= static_cast<double>(prices.size());
    double var = 0.0;
    for (double p : prices) var += (p - mean) * (p - mean);
    var /= static_cast<double>(prices.size());
    if (var < 1e-12) {
        scores.degenerate = true;
        return scores;   // constant offer: all dependence scores are zero
    }

    scores.pearson = rdc::abs_pearson(prices, sensitive);

    std::vector<double> rdc_values;
    rdc_values.reserve(config.rdc_seeds);
    for (std::size_t s = 0; s < std::max<std::size_t>(config.rdc_seeds, 1); ++s) {
        rdc::RdcConfig rc = config.rdc_config;
        rc.seed = config.rdc_config.seed + s;
        rdc_values.push_back(rdc::rdc(prices, sensitive, rc));
    }
    std::sort(rdc_values.begin(), rdc_values.end());
    scores.rdc = rdc_values[rdc_values.size() / 2];

    // Deterministic subsample for the HGR fit when the split is large.
    std::vector<double> u(prices.begin(), prices.end());
    std::vector<double> v(sensitive.begin(), sensitive.end());
    if (config.max_samples >= 50 && u.size() > config.max_samples) {
        std::vector<std::size_t> order(u.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(config.subsample_seed);
        rng.shuffle(order);
        std::vector<double> su, sv;
        su.reserve(config.max_samples);
        sv.reserve(config.max_samples);
        for (std::size_t i = 0; i < config.max_samples; ++i) {
            su.push_back(u[order[i]]);
            sv.push_back(v[order[i]]);
        }
        u.swap(su);
        v.swap(sv);
    }
    hgr::HgrEstimate est = hgr::hgr_metric(u, v, config.hgr_config);
    scores.hgr = est.value;
    scores.hgr_converged = est.converged;
    return scores;
}

// -- frontier table -----------------------------------------------------------

std::string FrontierPoint::key() const {
    return method + "|" + fmt_num(lambda_f) + "|" + fmt_num(lambda_s) + "|" + split + "|" +
           std::to_string(seed);
}

bool FrontierTable::has(const std::string& key) const {
    for (const auto& p : points)
        if (p.key() == key) return true;
    return false;
}

void FrontierTable::add(FrontierPoint p) {
    if (has(p.key())) throw ValidationError("frontier: duplicate point " + p.key());
    points.push_back(std::move(p));
}

void FrontierTable::sort_canonical() {
    std::sort(points.begin(), points.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
        return a.key() < b.key();
    });
}

std::string FrontierTable::to_csv() const {
    std::ostringstream out;
    out << "method,lambda_f,lambda_s,split,seed,gwm,conversion_rate,rdc,hgr,pearson\n";
    for (const auto& p : points) {
        out << p.method << ',' << fmt_num(p.lambda_f) << ',' << fmt_num(p.lambda_s) << ','
            << p.split << ',' << p.seed << ',' << fmt_num(p.gwm) << ','
            << fmt_num(p.conversion_rate) << ',' << fmt_num(p.rdc) << ',' << fmt_num(p.hgr) << ','
            << fmt_num(p.pearson) << '\n';
    }
    return out.str();
}

std::string FrontierTable::to_json() const {
    json j;
    j["provenance"] = {{"config_hash", config_hash},
                       {"dataset_fingerprint", dataset_fingerprint},
                       {"timestamp", timestamp}};
    json rows = json::array();
    for (const auto& p : points) {
        rows.push_back({{"method", p.method},
                        {"lambda_f", p.lambda_f},
                        {"lambda_s", p.lambda_s},
                        {"split", p.split},
                        {"seed", p.seed},
                        {"gwm", p.gwm},
                        {"conversion_rate", p.conversion_rate},
                        {"rdc", p.rdc},
                        {"hgr", p.hgr},
                        {"pearson", p.pearson}});
    }
    j["points"] = std::move(rows);
    if (!failures.empty()) j["failures"] = failures;
    return j.dump(2);
}

FrontierTable FrontierTable::from_csv(const std::string& text) {
    FrontierTable table;
    auto rows = data::parse_csv(text);
    if (rows.empty()) return table;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.size() != 10)
            throw ConfigError("frontier: malformed CSV row " + std::to_string(r));
        FrontierPoint p;
        p.method = cells[0];
        p.lambda_f = std::stod(cells[1]);
        p.lambda_s = std::stod(cells[2]);
        p.split = cells[3];
        p.seed = std::stoull(cells[4]);
        p.gwm = std::stod(cells[5]);
        p.conversion_rate = std::stod(cells[6]);
        p.rdc = std::stod(cells[7]);
        p.hgr = std::stod(cells[8]);
        p.pearson = std::stod(cells[9]);
        table.add(std::move(p));
    }
    return table;
}

std::string FrontierTable::content_hash() const {
    FrontierTable copy = *this;
    copy.sort_canonical();
    return hex64(fnv1a_str(copy.to_csv()));
}

// -- sweep ----------------------------------------------------------------------

namespace {

struct SplitSlice {
    const char* name;
    data::Split split;
};

constexpr SplitSlice kSplits[3] = {{"train", data::Split::Train},
                                   {"dev", data::Split::Dev},
                                   {"test", data::Split::Test}};

FrontierPoint measure_point(const SweepContext& ctx, const SweepJob& job, const char* split_name,
                            std::span<const std::size_t> idx, std::span<const double> coeffs) {
    const auto& records = ctx.portfolio->records;
    FrontierPoint p;
    p.method = job.method;
    p.lambda_f = job.lambda_f;
    p.lambda_s = job.lambda_s;
    p.split = split_name;
    p.seed = job.seed;
    p.gwm = gwm(records, idx, coeffs, *ctx.fmodel, *ctx.hmodel, ctx.train.lower, ctx.train.upper);
    p.conversion_rate = conversion_rate(records, idx, coeffs, *ctx.fmodel, *ctx.hmodel,
                                        ctx.train.lower, ctx.train.upper);
    if (ctx.score_fairness && !records.empty() && ctx.sensitive_index < records.front().s.size() &&
        idx.size() >= 50) {
        std::vector<double> prices(idx.size()), sens(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            prices[k] = coeffs[k] * ctx.hmodel->premium(records[idx[k]]);
            sens[k] = records[idx[k]].s[ctx.sensitive_index];
        }
        FairnessScores fs = fairness_report(prices, sens, ctx.fairness);
        p.rdc = fs.rdc;
        p.hgr = fs.hgr;
        p.pearson = fs.pearson;
    }
    return p;
}

std::vector<FrontierPoint> run_job(const SweepContext& ctx, const SweepJob& job) {
    const auto& portfolio = *ctx.portfolio;
    const auto& records = portfolio.records;
    const std::size_t dim = portfolio.dim();

    auto coefficients_from_model = [&](const models::CoefficientModel& m,
                                       std::span<const std::size_t> idx) {
        std::vector<double> out(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) out[k] = m.coefficient(records[idx[k]].x);
        return out;
    };

    std::vector<FrontierPoint> out;
    if (job.method == "optigrad" || job.method == "fair-optigrad") {
        opt::TrainConfig tc = ctx.train;
        tc.lambda_f = job.lambda_f;
        tc.lambda_s = job.method == "fair-optigrad" ? job.lambda_s : 0.0;
        tc.seed = job.seed;
        models::CoefficientModel init =
            ctx.coefficient_hidden.empty()
                ? models::CoefficientModel::make_linear(dim, tc.lower, tc.upper, job.seed)
                : models::CoefficientModel::make_mlp(dim, ctx.coefficient_hidden, tc.lower,
                                                     tc.upper, job.seed);
        opt::TrainResult res;
        if (job.method == "fair-optigrad") {
            hgr::AdversaryPair pair = opt::make_adversary(portfolio, *ctx.hmodel, tc.lower,
                                                          tc.upper, ctx.adversary_hidden,
                                                          job.seed + 1);
            opt::warm_start_adversary(portfolio, *ctx.hmodel, init, pair,
                                      ctx.adversary_warm_start, tc.lr_phi);
            res = opt::train_fair_optigrad(portfolio, *ctx.fmodel, *ctx.hmodel, std::move(init),
                                           std::move(pair), tc);
        } else {
            res = opt::train_optigrad(portfolio, *ctx.fmodel, *ctx.hmodel, std::move(init), tc);
        }
        for (const auto& s : kSplits) {
            auto idx = portfolio.idx(s.split);
            auto coeffs = coefficients_from_model(res.best, idx);
            out.push_back(measure_point(ctx, job, s.name, idx, coeffs));
        }
    } else if (job.method == "individual") {
        for (const auto& s : kSplits) {
            auto idx = portfolio.idx(s.split);
            auto sol = baselines::individual_optimize(records, idx, *ctx.fmodel, *ctx.hmodel,
                                                      job.lambda_f, ctx.train.lower,
                                                      ctx.train.upper, ctx.grid_step);
            out.push_back(measure_point(ctx, job, s.name, idx, sol.coefficients));
        }
    } else if (job.method == "indirect") {
        auto train_idx = portfolio.idx(data::Split::Train);
        auto sol = baselines::individual_optimize(records, train_idx, *ctx.fmodel, *ctx.hmodel,
                                                  job.lambda_f, ctx.train.lower, ctx.train.upper,
                                                  ctx.grid_step);
        auto model = baselines::fit_indirect_ratebook(records, train_idx, sol.coefficients,
                                                      ctx.train.lower, ctx.train.upper, ctx.boost);
        for (const auto& s : kSplits) {
            auto idx = portfolio.idx(s.split);
            std::vector<double> coeffs(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k)
                coeffs[k] = model.predict(records[idx[k]].x);
            out.push_back(measure_point(ctx, job, s.name, idx, coeffs));
        }
    } else {
        throw ConfigError("sweep: unknown method '" + job.method + "'");
    }
    return out;
}

} // namespace

FrontierTable sweep(const SweepContext& context, std::span<const SweepJob> jobs,
                    FrontierTable existing,
                    const std::function<void(const FrontierPoint&)>& on_point) {
    if (context.portfolio == nullptr || context.fmodel == nullptr || context.hmodel == nullptr)
        throw ValidationError("sweep: context is missing the portfolio or the models");

    // A job is pending unless every split point it would produce exists.
    std::vector<SweepJob> pending;
    for (const auto& job : jobs) {
        bool complete = true;
        for (const auto& s : kSplits) {
            FrontierPoint probe;
            probe.method = job.method;
            probe.lambda_f = job.lambda_f;
            probe.lambda_s = job.lambda_s;
            probe.split = s.name;
            probe.seed = job.seed;
            if (!existing.has(probe.key())) {
                complete = false;
                break;
            }
        }
        if (!complete) pending.push_back(job);
    }

    std::mutex mutex;
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= pending.size()) break;
            const SweepJob& job = pending[i];
            try {
                auto points = run_job(context, job);
                std::lock_guard<std::mutex> lock(mutex);
                for (auto& p : points) {
                    if (existing.has(p.key())) continue;   // partial resume
                    if (on_point) on_point(p);
                    existing.add(std::move(p));
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mutex);
                existing.failures.push_back(job.method + " lambda_f=" + fmt_num(job.lambda_f) +
                                            " lambda_s=" + fmt_num(job.lambda_s) + ": " + e.what());
            }
        }
    };

    std::size_t n_threads = std::max<std::size_t>(1, std::min(context.jobs, pending.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    existing.sort_canonical();
    return existing;
}

DominanceReport dominance_check(const FrontierTable& table, const std::string& method_a,
                                const std::string& method_b, const std::string& split,
                                double window) {
    DominanceReport report;
    report.method_a = method_a;
    report.method_b = method_b;
    report.split = split;
    report.window = window;

    std::vector<const FrontierPoint*> a_points, b_points;
    for (const auto& p : table.points) {
        if (p.split != split) continue;
        if (p.method == method_a) a_points.push_back(&p);
        if (p.method == method_b) b_points.push_back(&p);
    }
    report.b_total = b_points.size();
    for (const auto* b : b_points) {
        double best_a = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (const auto* a : a_points) {
            if (std::abs(a->conversion_rate - b->conversion_rate) <= window) {
                any = true;
                best_a = std::max(best_a, a->gwm);
            }
        }
        if (!any) continue;
        report.b_compared++;
        if (best_a >= b->gwm) report.b_dominated++;
    }
    report.fraction = report.b_compared == 0
                          ? 0.0
                          : static_cast<double>(report.b_dominated) /
                                static_cast<double>(report.b_compared);
    return report;
}

std::string DominanceReport::to_string() const {
    std::ostringstream out;
    out << method_a << " vs " << method_b << " on " << split << " (window " << window
        << "): " << b_dominated << "/" << b_compared << " dominated";
    if (b_total != b_compared) out << " (" << (b_total - b_compared) << " uncompared)";
    out << ", fraction " << fraction;
    return out.str();
}

// -- SVG charts -----------------------------------------------------------------

namespace {

struct Series {
    std::string name;
    std::string color;
    std::vector<std::pair<double, double>> pts;
};

std::string render_chart(const std::string& title, const std::string& x_label,
                         const std::string& y_label, std::vector<Series> series) {
    const double width = 760, height = 520;
    const double ml = 80, mr = 160, mt = 48, mb = 56;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.pts) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";

    // axes + ticks
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    char buf[64];
    for (int t = 0; t <= 4; ++t) {
        double fx = xmin + (xmax - xmin) * t / 4.0;
        double fy = ymin + (ymax - ymin) * t / 4.0;
        std::snprintf(buf, sizeof(buf), "%.4g", fx);
        out << "<line x1=\"" << sx(fx) << "\" y1=\"" << height - mb << "\" x2=\"" << sx(fx)
            << "\" y2=\"" << height - mb + 5 << "\" stroke=\"black\"/>"
            << "<text x=\"" << sx(fx) << "\" y=\"" << height - mb + 20
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << buf
            << "</text>\n";
        std::snprintf(buf, sizeof(buf), "%.4g", fy);
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(fy) << "\" x2=\"" << ml << "\" y2=\""
            << sy(fy) << "\" stroke=\"black\"/>"
            << "<text x=\"" << ml - 8 << "\" y=\"" << sy(fy) + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << buf
            << "</text>\n";
    }
    out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 18 " << (mt + height - mb) / 2 << ")\">" << y_label
        << "</text>\n";

    double legend_y = mt + 8;
    for (const auto& s : series) {
        if (s.pts.size() > 1) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            for (auto [x, y] : s.pts) out << sx(x) << ',' << sy(y) << ' ';
            out << "\"/>\n";
        }
        for (auto [x, y] : s.pts)
            out << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3.5\" fill=\""
                << s.color << "\"/>\n";
        out << "<circle cx=\"" << width - mr + 16 << "\" cy=\"" << legend_y << "\" r=\"4\" fill=\""
            << s.color << "\"/><text x=\"" << width - mr + 26 << "\" y=\"" << legend_y + 4
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.name << "</text>\n";
        legend_y += 20;
    }
    out << "</svg>\n";
    return out.str();
}

const char* method_color(const std::string& method, std::size_t i) {
    if (method == "optigrad") return "#1f77b4";
    if (method == "fair-optigrad") return "#9467bd";
    if (method == "individual") return "#2ca02c";
    if (method == "indirect") return "#d62728";
    static const char* extra[] = {"#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    return extra[i % 4];
}

} // namespace

std::string frontier_svg(const FrontierTable& table, const std::string& split) {
    std::vector<std::string> methods;
    for (const auto& p : table.points)
        if (p.split == split && std::find(methods.begin(), methods.end(), p.method) == methods.end())
            methods.push_back(p.method);
    std::vector<Series> series;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        Series s;
        s.name = methods[m];
        s.color = method_color(methods[m], m);
        for (const auto& p : table.points)
            if (p.split == split && p.method == methods[m])
                s.pts.emplace_back(p.conversion_rate, p.gwm);
        std::sort(s.pts.begin(), s.pts.end());
        series.push_back(std::move(s));
    }
    return render_chart("Efficiency frontier (" + split + ")", "conversion rate",
                        "global written margin", std::move(series));
}

std::string fairness_svg(const FrontierTable& table, const std::string& split) {
    Series hgr_series{"HGR", "#d62728", {}};
    Series rdc_series{"RDC", "#1f77b4", {}};
    Series pearson_series{"|Pearson|", "#7f7f7f", {}};
    for (const auto& p : table.points) {
        if (p.split != split || p.method != "fair-optigrad") continue;
        hgr_series.pts.emplace_back(p.lambda_s, p.hgr);
        rdc_series.pts.emplace_back(p.lambda_s, p.rdc);
        pearson_series.pts.emplace_back(p.lambda_s, p.pearson);
    }
    std::sort(hgr_series.pts.begin(), hgr_series.pts.end());
    std::sort(rdc_series.pts.begin(), rdc_series.pts.end());
    std::sort(pearson_series.pts.begin(), pearson_series.pts.end());
    std::vector<Series> series{std::move(hgr_series), std::move(rdc_series),
                               std::move(pearson_series)};
    return render_chart("Fairness vs lambda_s (" + split + ")", "lambda_s", "dependence score",
                        std::move(series));
}

} // namespace ratekit::eval
