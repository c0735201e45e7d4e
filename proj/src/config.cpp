#include "ratekit/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ratekit/errors.hpp"

namespace ratekit::cfg {

namespace {

struct Value {
    enum class Kind { String, Number, Bool, List } kind = Kind::String;
    std::string str;
    double num = 0.0;
    bool boolean = false;
    std::vector<Value> list;
};

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

Value parse_scalar(const std::string& raw, int line_no) {
    Value v;
    std::string t = trim(raw);
    if (t.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
        v.kind = Value::Kind::String;
        v.str = t.substr(1, t.size() - 2);
        return v;
    }
    if (t == "true" || t == "false") {
        v.kind = Value::Kind::Bool;
        v.boolean = t == "true";
        return v;
    }
    double num = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), num);
    if (ec == std::errc() && p == t.data() + t.size()) {
        v.kind = Value::Kind::Number;
        v.num = num;
        return v;
    }
    // bare word: treat as string (lets users skip quotes for simple names)
    v.kind = Value::Kind::String;
    v.str = t;
    return v;
}

Value parse_value(const std::string& raw, int line_no) {
    std::string t = trim(raw);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
        Value v;
        v.kind = Value::Kind::List;
        std::string body = t.substr(1, t.size() - 2);
        std::string cur;
        bool in_str = false;
        for (char c : body) {
            if (c == '"') in_str = !in_str;
            if (c == ',' && !in_str) {
                if (!trim(cur).empty()) v.list.push_back(parse_scalar(cur, line_no));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!trim(cur).empty()) v.list.push_back(parse_scalar(cur, line_no));
        return v;
    }
    return parse_scalar(raw, line_no);
}

/// Flat "section.key" -> Value map.
std::map<std::string, Value> parse_kv(const std::string& text) {
    std::map<std::string, Value> out;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside strings
        std::string stripped;
        bool in_str = false;
        for (char c : line) {
            if (c == '"') in_str = !in_str;
            if (c == '#' && !in_str) break;
            stripped.push_back(c);
        }
        stripped = trim(stripped);
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            continue;
        }
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(stripped.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full))
            throw ConfigError("config: duplicate key '" + full + "'");
        out[full] = parse_value(stripped.substr(eq + 1), line_no);
    }
    return out;
}

class Reader {
public:
    explicit Reader(std::map<std::string, Value> kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) {
        return kv_.count(key) > 0;
    }
    std::string str(const std::string& key, const std::string& fallback) {
        auto* v = get(key);
        if (!v) return fallback;
        if (v->kind != Value::Kind::String) throw ConfigError("config: '" + key + "' must be a string");
        return v->str;
    }
    double num(const std::string& key, double fallback) {
        auto* v = get(key);
        if (!v) return fallback;
        if (v->kind != Value::Kind::Number) throw ConfigError("config: '" + key + "' must be a number");
        return v->num;
    }
    std::size_t index(const std::string& key, std::size_t fallback) {
        double d = num(key, static_cast<double>(fallback));
        if (d < 0 || d != std::floor(d))
            throw ConfigError("config: '" + key + "' must be a non-negative integer");
        return static_cast<std::size_t>(d);
    }
    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        double d = num(key, static_cast<double>(fallback));
        if (d < 0 || d != std::floor(d))
            throw ConfigError("config: '" + key + "' must be a non-negative integer");
        return static_cast<std::uint64_t>(d);
    }
    bool flag(const std::string& key, bool fallback) {
        auto* v = get(key);
        if (!v) return fallback;
        if (v->kind != Value::Kind::Bool) throw ConfigError("config: '" + key + "' must be a boolean");
        return v->boolean;
    }
    std::vector<std::string> str_list(const std::string& key, std::vector<std::string> fallback) {
        auto* v = get(key);
        if (!v) return fallback;
        if (v->kind != Value::Kind::List) throw ConfigError("config: '" + key + "' must be an array");
        std::vector<std::string> out;
        for (const auto& e : v->list) {
            if (e.kind != Value::Kind::String)
                throw ConfigError("config: '" + key + "' must hold strings");
            out.push_back(e.str);
        }
        return out;
    }
    std::vector<double> num_list(const std::string& key, std::vector<double> fallback) {
        auto* v = get(key);
        if (!v) return fallback;
        if (v->kind != Value::Kind::List) throw ConfigError("config: '" + key + "' must be an array");
        std::vector<double> out;
        for (const auto& e : v->list) {
            if (e.kind != Value::Kind::Number)
                throw ConfigError("config: '" + key + "' must hold numbers");
            out.push_back(e.num);
        }
        return out;
    }

    /// Every key in the file must have been consumed by one of the accessors.
    void reject_unknown() const {
        for (const auto& [key, value] : kv_) {
            (void)value;
            if (!used_.count(key)) throw ConfigError("config: unknown key '" + key + "'");
        }
    }

private:
    const Value* get(const std::string& key) {
        used_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? nullptr : &it->second;
    }

    std::map<std::string, Value> kv_;
    std::set<std::string> used_;
};

} // namespace

RunConfig parse_config(const std::string& text) {
    Reader r(parse_kv(text));
    RunConfig c;

    c.csv_path = r.str("data.csv", "");
    c.mapping.feature_columns = r.str_list("data.feature_columns", {});
    c.mapping.sale_column = r.str("data.sale_column", "");
    c.mapping.price_column = r.str("data.price_column", "");
    c.mapping.premium_column = r.str("data.premium_column", "");
    c.mapping.id_column = r.str("data.id_column", "");
    for (const auto& entry : r.str_list("data.sensitive_columns", {})) {
        auto colon = entry.find(':');
        std::string name = colon == std::string::npos ? entry : entry.substr(0, colon);
        std::string kind = colon == std::string::npos ? "continuous" : entry.substr(colon + 1);
        if (kind != "continuous" && kind != "binary")
            throw ConfigError("config: sensitive column kind must be 'continuous' or 'binary'");
        c.mapping.sensitive_columns.emplace_back(
            name, kind == "binary" ? data::SensitiveKind::Binary : data::SensitiveKind::Continuous);
    }

    c.split.train = r.num("split.train", c.split.train);
    c.split.dev = r.num("split.dev", c.split.dev);
    c.split.test = r.num("split.test", c.split.test);
    c.split.seed = r.seed("split.seed", c.split.seed);

    c.conversion.learning_rate = r.num("conversion.lr", c.conversion.learning_rate);
    c.conversion.epochs = r.index("conversion.epochs", c.conversion.epochs);
    c.conversion.batch = r.index("conversion.batch", c.conversion.batch);
    c.conversion.momentum = r.num("conversion.momentum", c.conversion.momentum);
    c.conversion.patience = r.index("conversion.patience", c.conversion.patience);
    c.conversion.seed = r.seed("conversion.seed", c.conversion.seed);

    c.premium_mode = r.str("premium.mode", c.premium_mode);
    if (c.premium_mode != "column" && c.premium_mode != "fit")
        throw ConfigError("config: premium.mode must be 'column' or 'fit'");
    c.premium_ridge = r.num("premium.ridge", c.premium_ridge);

    c.coefficient_kind = r.str("coefficient.kind", c.coefficient_kind);
    if (c.coefficient_kind != "linear" && c.coefficient_kind != "mlp")
        throw ConfigError("config: coefficient.kind must be 'linear' or 'mlp'");
    {
        std::vector<double> hidden_d;
        for (std::size_t h : c.coefficient_hidden) hidden_d.push_back(static_cast<double>(h));
        hidden_d = r.num_list("coefficient.hidden", hidden_d);
        c.coefficient_hidden.clear();
        for (double h : hidden_d) {
            if (h <= 0 || h != std::floor(h))
                throw ConfigError("config: coefficient.hidden must hold positive integers");
            c.coefficient_hidden.push_back(static_cast<std::size_t>(h));
        }
    }
    c.coefficient_seed = r.seed("coefficient.seed", c.coefficient_seed);

    c.train.lower = r.num("bounds.a", c.train.lower);
    c.train.upper = r.num("bounds.b", c.train.upper);
    c.train.lambda_f = r.num("train.lambda_f", c.train.lambda_f);
    c.train.lambda_s = r.num("train.lambda_s", c.train.lambda_s);
    c.train.epochs = r.index("train.epochs", c.train.epochs);
    c.train.batch = r.index("train.batch", c.train.batch);
    c.train.lr_c = r.num("train.lr_c", c.train.lr_c);
    c.train.lr_phi = r.num("train.lr_phi", c.train.lr_phi);
    c.train.lr_psi = r.num("train.lr_psi", c.train.lr_psi);
    c.train.ascent_steps = r.index("train.n_a", c.train.ascent_steps);
    c.train.selection_refresh = r.index("train.selection_refresh", c.train.selection_refresh);
    c.train.seed = r.seed("train.seed", c.train.seed);

    c.adversary_hidden = r.index("adversary.hidden", c.adversary_hidden);
    c.adversary_seed = r.seed("adversary.seed", c.adversary_seed);
    c.adversary_warm_start = r.index("adversary.warm_start", c.adversary_warm_start);

    c.grid_step = r.num("individual.grid_step", c.grid_step);
    c.grid_refine = r.flag("individual.refine", c.grid_refine);
    c.rate_set = r.num_list("individual.rate_set", c.rate_set);

    c.boost.n_trees = r.index("indirect.trees", c.boost.n_trees);
    c.boost.max_depth = r.index("indirect.depth", c.boost.max_depth);
    c.boost.shrinkage = r.num("indirect.shrinkage", c.boost.shrinkage);
    c.boost.min_leaf = r.index("indirect.min_leaf", c.boost.min_leaf);

    c.fairness.rdc_config.k = r.index("rdc.k", c.fairness.rdc_config.k);
    c.fairness.rdc_config.scale = r.num("rdc.scale", c.fairness.rdc_config.scale);
    c.fairness.rdc_config.ridge = r.num("rdc.ridge", c.fairness.rdc_config.ridge);
    c.fairness.rdc_config.seed = r.seed("rdc.seed", c.fairness.rdc_config.seed);
    c.fairness.rdc_seeds = r.index("rdc.seeds", c.fairness.rdc_seeds);
    c.fairness.hgr_config.hidden = r.index("hgr_metric.hidden", c.fairness.hgr_config.hidden);
    c.fairness.hgr_config.learning_rate = r.num("hgr_metric.lr", c.fairness.hgr_config.learning_rate);
    c.fairness.hgr_config.max_steps = r.index("hgr_metric.max_steps", c.fairness.hgr_config.max_steps);
    c.fairness.hgr_config.plateau_window =
        r.index("hgr_metric.plateau_window", c.fairness.hgr_config.plateau_window);
    c.fairness.hgr_config.plateau_tol = r.num("hgr_metric.plateau_tol", c.fairness.hgr_config.plateau_tol);
    c.fairness.hgr_config.seed = r.seed("hgr_metric.seed", c.fairness.hgr_config.seed);
    c.fairness.max_samples = r.index("fairness.max_samples", c.fairness.max_samples);
    c.fairness.subsample_seed = r.seed("fairness.subsample_seed", c.fairness.subsample_seed);
    c.fairness_sensitive = r.str("fairness.sensitive", c.fairness_sensitive);

    c.sweep_methods = r.str_list("sweep.methods", c.sweep_methods);
    c.sweep_lambda_f = r.num_list("sweep.lambda_f", c.sweep_lambda_f);
    c.sweep_lambda_s = r.num_list("sweep.lambda_s", c.sweep_lambda_s);
    {
        std::vector<double> seeds_d;
        for (std::uint64_t s : c.sweep_seeds) seeds_d.push_back(static_cast<double>(s));
        seeds_d = r.num_list("sweep.seeds", seeds_d);
        c.sweep_seeds.clear();
        for (double s : seeds_d) {
            if (s < 0 || s != std::floor(s))
                throw ConfigError("config: sweep.seeds must hold non-negative integers");
            c.sweep_seeds.push_back(static_cast<std::uint64_t>(s));
        }
    }

    c.synth.n = r.index("synth.n", c.synth.n);
    c.synth.dim = r.index("synth.dim", c.synth.dim);
    c.synth.elasticity = r.num("synth.elasticity", c.synth.elasticity);
    c.synth.dependence = r.num("synth.dependence", c.synth.dependence);
    c.synth.premium_base = r.num("synth.premium_base", c.synth.premium_base);
    c.synth.target_conversion = r.num("synth.target_conversion", c.synth.target_conversion);
    c.synth.seed = r.seed("synth.seed", c.synth.seed);

    c.out_dir = r.str("output.dir", c.out_dir);
    c.jobs = r.index("output.jobs", c.jobs);
    if (c.jobs == 0) c.jobs = 1;

    r.reject_unknown();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    out.precision(17);
    out << "csv=" << csv_path << ";features=";
    for (const auto& f : mapping.feature_columns) out << f << ',';
    out << ";sale=" << mapping.sale_column << ";price=" << mapping.price_column
        << ";premium_col=" << mapping.premium_column << ";id=" << mapping.id_column
        << ";sensitive=";
    for (const auto& [n, k] : mapping.sensitive_columns)
        out << n << ':' << (k == data::SensitiveKind::Binary ? "b" : "c") << ',';
    out << ";split=" << split.train << '/' << split.dev << '/' << split.test << '@' << split.seed
        << ";conv=" << conversion.learning_rate << ',' << conversion.epochs << ','
        << conversion.batch << ',' << conversion.momentum << ',' << conversion.patience << ','
        << conversion.seed << ";premium=" << premium_mode << ',' << premium_ridge
        << ";coef=" << coefficient_kind << '[';
    for (auto h : coefficient_hidden) out << h << ',';
    out << "]@" << coefficient_seed << ";bounds=" << train.lower << ',' << train.upper
        << ";train=" << train.lambda_f << ',' << train.lambda_s << ',' << train.epochs << ','
        << train.batch << ',' << train.lr_c << ',' << train.lr_phi << ',' << train.lr_psi << ','
        << train.ascent_steps << ',' << train.selection_refresh << ',' << train.seed << ";adv=" << adversary_hidden << '@'
        << adversary_seed << '+' << adversary_warm_start << ";grid=" << grid_step << ',' << grid_refine << ";rates=";
    for (double rate : rate_set) out << rate << ',';
    out << ";boost=" << boost.n_trees << ',' << boost.max_depth << ',' << boost.shrinkage << ','
        << boost.min_leaf << ";rdc=" << fairness.rdc_config.k << ',' << fairness.rdc_config.scale
        << ',' << fairness.rdc_config.ridge << ',' << fairness.rdc_config.seed << ','
        << fairness.rdc_seeds << ";hgr=" << fairness.hgr_config.hidden << ','
        << fairness.hgr_config.learning_rate << ',' << fairness.hgr_config.max_steps << ','
        << fairness.hgr_config.plateau_window << ',' << fairness.hgr_config.plateau_tol << ','
        << fairness.hgr_config.seed << ";fair=" << fairness.max_samples << ','
        << fairness.subsample_seed << ',' << fairness_sensitive << ";sweep=";
    for (const auto& m : sweep_methods) out << m << ',';
    out << '|';
    for (double v : sweep_lambda_f) out << v << ',';
    out << '|';
    for (double v : sweep_lambda_s) out << v << ',';
    out << '|';
    for (auto s : sweep_seeds) out << s << ',';
    out << ";synth=" << synth.n << ',' << synth.dim << ',' << synth.elasticity << ','
        << synth.dependence << ',' << synth.premium_base << ',' << synth.target_conversion << ','
        << synth.seed << ";out=" << out_dir << ";jobs=" << jobs;
    return out.str();
}

std::string RunConfig::hash() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace ratekit::cfg
