// ratekit CLI: synth -> ingest -> fit-conversion / fit-premium -> optimize ->
// sweep -> report. Every command validates its configuration up front,
// writes its artifacts under the output directory, and stamps a manifest
// with the config hash, dataset fingerprint and seeds.
//
// Exit codes: 0 success, 2 configuration or dependency error, 3 numerical
// failure.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ratekit/config.hpp"
#include "ratekit/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ratekit;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

struct Cli {
    std::string config_path;
    std::string method;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::size_t> jobs_override;
    bool resume = false;
};

struct Session {
    cfg::RunConfig config;
    std::string out_dir;

    std::string path(const std::string& name) const { return out_dir + "/" + name; }
};

Session open_session(const Cli& cli) {
    Session s;
    s.config = cfg::load_config(cli.config_path);
    if (!cli.out_override.empty()) s.config.out_dir = cli.out_override;
    if (cli.seed_override) {
        s.config.train.seed = *cli.seed_override;
        s.config.synth.seed = *cli.seed_override;
    }
    if (cli.jobs_override) s.config.jobs = *cli.jobs_override;
    s.out_dir = s.config.out_dir;
    fs::create_directories(s.out_dir);
    return s;
}

void write_manifest(const Session& s, const std::string& command,
                    const std::string& dataset_fingerprint) {
    json j;
    j["command"] = command;
    j["config_hash"] = s.config.hash();
    j["dataset_fingerprint"] = dataset_fingerprint;
    j["version"] = kVersion;
    j["seeds"] = {{"split", s.config.split.seed},
                  {"conversion", s.config.conversion.seed},
                  {"coefficient", s.config.coefficient_seed},
                  {"train", s.config.train.seed},
                  {"adversary", s.config.adversary_seed},
                  {"synth", s.config.synth.seed}};
    write_file(s.path("manifest_" + command + ".json"), j.dump(2) + "\n");
}

data::Portfolio load_cached(const Session& s) {
    std::string cache = s.path("portfolio.rkp");
    if (!fs::exists(cache))
        throw ConfigError("missing portfolio cache '" + cache + "': run `ratekit ingest` first");
    return data::read_cache(cache);
}

models::ConversionModel load_conversion(const Session& s) {
    std::string path = s.path("conversion.json");
    if (!fs::exists(path))
        throw ConfigError("missing conversion model '" + path +
                          "': run `ratekit fit-conversion` first");
    return models::conversion_from_json(read_file(path));
}

models::PremiumModel load_premium(const Session& s) {
    std::string path = s.path("premium.json");
    if (!fs::exists(path))
        throw ConfigError("missing premium model '" + path + "': run `ratekit fit-premium` first");
    return models::premium_from_json(read_file(path));
}

std::size_t sensitive_index(const cfg::RunConfig& config, const data::Portfolio& portfolio) {
    if (config.fairness_sensitive.empty()) return 0;
    for (std::size_t i = 0; i < portfolio.sensitive_names.size(); ++i)
        if (portfolio.sensitive_names[i] == config.fairness_sensitive) return i;
    throw ConfigError("fairness.sensitive column '" + config.fairness_sensitive +
                      "' is not a mapped sensitive column");
}

models::CoefficientModel make_coefficient(const cfg::RunConfig& c, std::size_t dim) {
    if (c.coefficient_kind == "mlp")
        return models::CoefficientModel::make_mlp(dim, c.coefficient_hidden, c.train.lower,
                                                  c.train.upper, c.coefficient_seed);
    return models::CoefficientModel::make_linear(dim, c.train.lower, c.train.upper,
                                                 c.coefficient_seed);
}

json split_metrics(const data::Portfolio& portfolio, const models::CoefficientModel& cmodel,
                   const models::ConversionModel& fmodel, const models::PremiumModel& hmodel) {
    json out;
    const char* names[3] = {"train", "dev", "test"};
    const data::Split splits[3] = {data::Split::Train, data::Split::Dev, data::Split::Test};
    for (int i = 0; i < 3; ++i) {
        auto idx = portfolio.idx(splits[i]);
        if (idx.empty()) continue;
        out[names[i]] = {
            {"gwm", eval::gwm(portfolio.records, idx, cmodel, fmodel, hmodel)},
            {"conversion_rate",
             eval::conversion_rate(portfolio.records, idx, cmodel, fmodel, hmodel)}};
    }
    return out;
}

// -- commands -------------------------------------------------------------

int cmd_synth(const Cli& cli) {
    Session s = open_session(cli);
    std::string csv = synth::generate_csv(s.config.synth);
    std::string path = s.config.csv_path.empty() ? s.path("synthetic.csv") : s.config.csv_path;
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    write_file(path, csv);
    write_manifest(s, "synth", "");
    std::cout << "synth: wrote " << s.config.synth.n << " rows to " << path << "\n";
    return 0;
}

int cmd_ingest(const Cli& cli) {
    Session s = open_session(cli);
    if (s.config.csv_path.empty()) throw ConfigError("data.csv is required for ingest");
    data::Portfolio portfolio =
        data::load_portfolio(s.config.csv_path, s.config.mapping, s.config.split);
    data::write_cache(s.path("portfolio.rkp"), portfolio);

    json report;
    report["rows_read"] = portfolio.report.rows_read;
    report["rows_loaded"] = portfolio.report.rows_loaded;
    report["rows_rejected"] = portfolio.report.rows_rejected;
    report["rejections"] = portfolio.report.rejections;
    report["encoded_dim"] = portfolio.dim();
    report["encoded_features"] = portfolio.report.encoded_feature_names;
    report["premium_from_column"] = portfolio.report.premium_from_column;
    report["split_sizes"] = portfolio.split.counts();
    report["dataset_fingerprint"] = portfolio.fingerprint;
    report["mapping_fingerprint"] = portfolio.mapping_fingerprint;
    write_file(s.path("ingest_report.json"), report.dump(2) + "\n");
    write_manifest(s, "ingest", portfolio.fingerprint);
    std::cout << "ingest: " << portfolio.report.rows_loaded << " records ("
              << portfolio.report.rows_rejected << " rejected), d=" << portfolio.dim() << "\n";
    return 0;
}

int cmd_fit_conversion(const Cli& cli) {
    Session s = open_session(cli);
    data::Portfolio portfolio = load_cached(s);
    auto train_idx = portfolio.idx(data::Split::Train);
    auto dev_idx = portfolio.idx(data::Split::Dev);
    models::ConversionModel m =
        models::fit_conversion(portfolio.records, train_idx, dev_idx, s.config.conversion);
    if (!m.price_slope_negative)
        std::cerr << "warning: fitted price slope w_p = " << m.w_p
                  << " is not negative; demand does not fall with price on this data\n";
    write_file(s.path("conversion.json"), models::to_json(m, portfolio.mapping_fingerprint));
    json metrics = {{"train_logloss", m.train_logloss},
                    {"dev_logloss", m.dev_logloss},
                    {"w_p", m.w_p},
                    {"price_slope_negative", m.price_slope_negative}};
    write_file(s.path("conversion_metrics.json"), metrics.dump(2) + "\n");
    write_manifest(s, "fit-conversion", portfolio.fingerprint);
    std::cout << "fit-conversion: train logloss " << m.train_logloss << ", dev logloss "
              << m.dev_logloss << ", w_p " << m.w_p << "\n";
    return 0;
}

int cmd_fit_premium(const Cli& cli) {
    Session s = open_session(cli);
    data::Portfolio portfolio = load_cached(s);
    models::PremiumModel m;
    if (s.config.premium_mode == "column") {
        if (!portfolio.has_premium())
            throw ConfigError("premium.mode is 'column' but the dataset has no premium column; "
                              "set premium.mode = \"fit\"");
        m = models::premium_from_column();
    } else {
        m = models::fit_premium(portfolio.records, portfolio.idx(data::Split::Train),
                                s.config.premium_ridge);
    }
    write_file(s.path("premium.json"), models::to_json(m, portfolio.mapping_fingerprint));
    write_manifest(s, "fit-premium", portfolio.fingerprint);
    std::cout << "fit-premium: mode " << s.config.premium_mode << "\n";
    return 0;
}

int cmd_optimize(const Cli& cli) {
    Session s = open_session(cli);
    if (cli.method.empty())
        throw ConfigError("optimize requires --method "
                          "{optigrad|fair-optigrad|individual|indirect}");
    data::Portfolio portfolio = load_cached(s);
    models::ConversionModel fmodel = load_conversion(s);
    models::PremiumModel hmodel = load_premium(s);
    auto train_idx = portfolio.idx(data::Split::Train);

    if (cli.method == "optigrad" || cli.method == "fair-optigrad") {
        opt::TrainConfig tc = s.config.train;
        models::CoefficientModel init = make_coefficient(s.config, portfolio.dim());
        opt::TrainResult res;
        try {
            if (cli.method == "fair-optigrad") {
                hgr::AdversaryPair pair =
                    opt::make_adversary(portfolio, hmodel, tc.lower, tc.upper,
                                        s.config.adversary_hidden, s.config.adversary_seed);
                opt::warm_start_adversary(portfolio, hmodel, init, pair,
                                          s.config.adversary_warm_start, tc.lr_phi);
                res = opt::train_fair_optigrad(portfolio, fmodel, hmodel, std::move(init),
                                               std::move(pair), tc);
            } else {
                tc.lambda_s = 0.0;
                res = opt::train_optigrad(portfolio, fmodel, hmodel, std::move(init), tc);
            }
        } catch (const opt::AbortedTraining& e) {
            write_file(s.path("trace_" + cli.method + ".csv"), e.trace.to_csv());
            std::cerr << "error: " << e.what() << " (player: " << e.player
                      << "); partial trace kept\n";
            return 3;
        }
        std::string stem = cli.method == "optigrad" ? "coefficient_optigrad"
                                                    : "coefficient_fair_optigrad";
        write_file(s.path(stem + ".json"),
                   models::to_json(res.best, portfolio.mapping_fingerprint));
        write_file(s.path("trace_" + cli.method + ".csv"), res.trace.to_csv());
        json metrics = split_metrics(portfolio, res.best, fmodel, hmodel);
        metrics["best_epoch"] = res.best_epoch;
        metrics["best_dev_objective"] = res.best_dev_objective;
        write_file(s.path("metrics_" + cli.method + ".json"), metrics.dump(2) + "\n");
        write_manifest(s, "optimize-" + cli.method, portfolio.fingerprint);
        std::cout << "optimize " << cli.method << ": best epoch " << res.best_epoch << ", metrics in "
                  << s.path("metrics_" + cli.method + ".json") << "\n";
        return 0;
    }

    if (cli.method == "individual") {
        // a configured rate set selects the discrete-ratebook variant
        auto sol = s.config.rate_set.empty()
                       ? baselines::individual_optimize(
                             portfolio.records, train_idx, fmodel, hmodel,
                             s.config.train.lambda_f, s.config.train.lower, s.config.train.upper,
                             s.config.grid_step, s.config.grid_refine)
                       : baselines::discrete_individual_optimize(
                             portfolio.records, train_idx, fmodel, hmodel,
                             s.config.train.lambda_f, s.config.rate_set);
        write_file(s.path("individual_solution.csv"),
                   sol.to_csv(portfolio.records, fmodel, hmodel));
        json meta = {{"lambda", sol.lambda},
                     {"method", sol.method},
                     {"objective", sol.objective},
                     {"records", sol.record_idx.size()},
                     {"dataset_fingerprint", portfolio.fingerprint}};
        write_file(s.path("individual_summary.json"), meta.dump(2) + "\n");
        write_manifest(s, "optimize-individual", portfolio.fingerprint);
        std::cout << "optimize individual: " << sol.record_idx.size() << " records, objective "
                  << sol.objective << "\n";
        return 0;
    }

    if (cli.method == "indirect") {
        std::string sol_path = s.path("individual_solution.csv");
        if (!fs::exists(sol_path))
            throw ConfigError("indirect optimization reverse-engineers the individual solution; "
                              "run `ratekit optimize --method individual` first (missing " +
                              sol_path + ")");
        std::string summary_path = s.path("individual_summary.json");
        if (fs::exists(summary_path)) {
            auto meta = json::parse(read_file(summary_path));
            std::string fp = meta.value("dataset_fingerprint", "");
            if (!fp.empty() && fp != portfolio.fingerprint)
                throw ConfigError("individual solution was computed on a different dataset "
                                  "(fingerprint mismatch); re-run `ratekit optimize --method "
                                  "individual`");
        }
        auto rows = data::parse_csv(read_file(sol_path));
        std::vector<std::size_t> idx;
        std::vector<double> targets;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            idx.push_back(std::stoul(rows[r][0]));
            targets.push_back(std::stod(rows[r][1]));
        }
        auto model = baselines::fit_indirect_ratebook(portfolio.records, idx, targets,
                                                      s.config.train.lower, s.config.train.upper,
                                                      s.config.boost);
        write_file(s.path("indirect.json"),
                   baselines::to_json(model, portfolio.mapping_fingerprint));
        // Split metrics with the boosted predictions.
        json metrics;
        const char* names[3] = {"train", "dev", "test"};
        const data::Split splits[3] = {data::Split::Train, data::Split::Dev, data::Split::Test};
        for (int i = 0; i < 3; ++i) {
            auto split_idx = portfolio.idx(splits[i]);
            if (split_idx.empty()) continue;
            std::vector<double> coeffs(split_idx.size());
            for (std::size_t k = 0; k < split_idx.size(); ++k)
                coeffs[k] = model.predict(portfolio.records[split_idx[k]].x);
            metrics[names[i]] = {
                {"gwm", eval::gwm(portfolio.records, split_idx, coeffs, fmodel, hmodel,
                                  s.config.train.lower, s.config.train.upper)},
                {"conversion_rate",
                 eval::conversion_rate(portfolio.records, split_idx, coeffs, fmodel, hmodel,
                                       s.config.train.lower, s.config.train.upper)}};
        }
        write_file(s.path("metrics_indirect.json"), metrics.dump(2) + "\n");
        write_manifest(s, "optimize-indirect", portfolio.fingerprint);
        std::cout << "optimize indirect: " << model.trees.size() << " trees\n";
        return 0;
    }

    throw ConfigError("unknown method '" + cli.method + "'");
}

int cmd_sweep(const Cli& cli) {
    Session s = open_session(cli);
    data::Portfolio portfolio = load_cached(s);
    models::ConversionModel fmodel = load_conversion(s);
    models::PremiumModel hmodel = load_premium(s);

    eval::SweepContext ctx;
    ctx.portfolio = &portfolio;
    ctx.fmodel = &fmodel;
    ctx.hmodel = &hmodel;
    if (s.config.coefficient_kind == "mlp") ctx.coefficient_hidden = s.config.coefficient_hidden;
    ctx.train = s.config.train;
    ctx.adversary_hidden = s.config.adversary_hidden;
    ctx.adversary_warm_start = s.config.adversary_warm_start;
    ctx.boost = s.config.boost;
    ctx.grid_step = s.config.grid_step;
    ctx.fairness = s.config.fairness;
    ctx.sensitive_index = sensitive_index(s.config, portfolio);
    ctx.jobs = s.config.jobs;

    std::vector<eval::SweepJob> jobs;
    for (const auto& method : s.config.sweep_methods) {
        const bool fair = method == "fair-optigrad";
        for (double lf : s.config.sweep_lambda_f)
            for (double ls : fair ? s.config.sweep_lambda_s : std::vector<double>{0.0})
                for (auto seed : s.config.sweep_seeds)
                    jobs.push_back({method, lf, ls, seed});
    }

    eval::FrontierTable existing;
    std::string csv_path = s.path("frontier.csv");
    if (cli.resume && fs::exists(csv_path))
        existing = eval::FrontierTable::from_csv(read_file(csv_path));
    std::string old_timestamp = existing.timestamp;
    if (cli.resume && fs::exists(s.path("frontier.json"))) {
        auto j = json::parse(read_file(s.path("frontier.json")));
        old_timestamp = j.value("provenance", json::object()).value("timestamp", "");
    }

    std::size_t had = existing.points.size();
    eval::FrontierTable table = eval::sweep(ctx, jobs, std::move(existing),
                                            [](const eval::FrontierPoint& p) {
                                                std::cout << "  point " << p.key() << " gwm=" << p.gwm
                                                          << " conv=" << p.conversion_rate << "\n";
                                            });
    table.config_hash = s.config.hash();
    table.dataset_fingerprint = portfolio.fingerprint;
    if (old_timestamp.empty()) {
        char buf[32];
        std::time_t now = std::time(nullptr);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        old_timestamp = buf;
    }
    table.timestamp = old_timestamp;

    write_file(csv_path, table.to_csv());
    write_file(s.path("frontier.json"), table.to_json() + "\n");
    write_manifest(s, "sweep", portfolio.fingerprint);
    for (const auto& f : table.failures) std::cerr << "sweep failure: " << f << "\n";
    std::cout << "sweep: " << table.points.size() << " points (" << table.points.size() - had
              << " new), table hash " << table.content_hash() << "\n";
    return table.points.empty() ? 3 : 0;
}

int cmd_report(const Cli& cli) {
    Session s = open_session(cli);
    std::string csv_path = s.path("frontier.csv");
    if (!fs::exists(csv_path))
        throw ConfigError("missing frontier table '" + csv_path + "': run `ratekit sweep` first");
    eval::FrontierTable table = eval::FrontierTable::from_csv(read_file(csv_path));

    json report;
    for (const char* split : {"train", "dev", "test"}) {
        write_file(s.path(std::string("frontier_") + split + ".svg"),
                   eval::frontier_svg(table, split));
        json dom = json::array();
        for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{
                 {"optigrad", "indirect"},
                 {"optigrad", "individual"},
                 {"individual", "indirect"}}) {
            auto r = eval::dominance_check(table, a, b, split);
            if (r.b_total == 0) continue;
            dom.push_back({{"method_a", a},
                           {"method_b", b},
                           {"window", r.window},
                           {"b_total", r.b_total},
                           {"b_compared", r.b_compared},
                           {"b_dominated", r.b_dominated},
                           {"fraction", r.fraction}});
            std::cout << r.to_string() << "\n";
        }
        report[split] = dom;
    }
    write_file(s.path("fairness_dev.svg"), eval::fairness_svg(table, "dev"));
    write_file(s.path("dominance_report.json"), report.dump(2) + "\n");
    write_manifest(s, "report", table.dataset_fingerprint);
    std::cout << "report: wrote frontier SVGs and dominance report to " << s.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ratekit: commercial-premium coefficient optimization under margin, "
                 "conversion and fairness objectives"};
    app.require_subcommand(1);

    Cli cli;
    app.add_option("--config", cli.config_path, "run configuration file")->required();
    app.add_option("--method", cli.method,
                   "optimization method (optigrad|fair-optigrad|individual|indirect)");
    app.add_option("--out", cli.out_override, "override output directory");
    std::uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override training/synth seed");
    std::size_t jobs_val = 0;
    auto* jobs_opt = app.add_option("--jobs", jobs_val, "sweep worker count");
    app.add_flag("--resume", cli.resume, "resume an interrupted sweep");

    auto* c_synth = app.add_subcommand("synth", "generate the built-in synthetic portfolio CSV");
    auto* c_ingest = app.add_subcommand("ingest", "load, encode and cache the portfolio");
    auto* c_fitc = app.add_subcommand("fit-conversion", "fit the logistic demand model");
    auto* c_fitp = app.add_subcommand("fit-premium", "bind or fit the pure-premium model");
    auto* c_opt = app.add_subcommand("optimize", "run one optimization method");
    auto* c_sweep = app.add_subcommand("sweep", "hyperparameter sweep -> frontier table");
    auto* c_report = app.add_subcommand("report", "dominance report + SVG charts");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) cli.seed_override = seed_val;
    if (*jobs_opt) cli.jobs_override = jobs_val;

    try {
        if (c_synth->parsed()) return cmd_synth(cli);
        if (c_ingest->parsed()) return cmd_ingest(cli);
        if (c_fitc->parsed()) return cmd_fit_conversion(cli);
        if (c_fitp->parsed()) return cmd_fit_premium(cli);
        if (c_opt->parsed()) return cmd_optimize(cli);
        if (c_sweep->parsed()) return cmd_sweep(cli);
        if (c_report->parsed()) return cmd_report(cli);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const EvalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
