#include "ratekit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "ratekit/errors.hpp"
#include "ratekit/rng.hpp"

namespace ratekit::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<double> parse_double(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    if (begin == end) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

} // namespace

void ColumnMapping::validate() const {
    if (feature_columns.empty()) throw ConfigError("mapping: feature_columns is empty");
    if (sale_column.empty()) throw ConfigError("mapping: sale_column is required");
    if (price_column.empty()) throw ConfigError("mapping: price_column is required");
    std::set<std::string> features(feature_columns.begin(), feature_columns.end());
    if (features.size() != feature_columns.size())
        throw ConfigError("mapping: duplicate feature column");
    for (const auto& [name, kind] : sensitive_columns) {
        (void)kind;
        if (features.count(name))
            throw ConfigError("mapping: sensitive column '" + name +
                              "' overlaps feature_columns; sensitive attributes are never model inputs");
    }
}

std::array<std::size_t, 3> SplitAssignment::counts() const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (Split s : assignment) c[static_cast<std::size_t>(s)]++;
    return c;
}

std::vector<std::size_t> SplitAssignment::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == s) out.push_back(i);
    return out;
}

double log_price(double price) {
    if (!(price > 0.0))
        throw ValidationError("log_price: price must be positive, got " + std::to_string(price));
    return std::log(price);
}

SplitAssignment make_split(std::size_t n, const SplitSpec& spec) {
    if (!(spec.train > 0.0 && spec.dev > 0.0 && spec.test > 0.0))
        throw ConfigError("split: ratios must be positive");
    double sum = spec.train + spec.dev + spec.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split: ratios must sum to 1, got " + std::to_string(sum));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(spec.seed);
    rng.shuffle(order);

    auto n_d = static_cast<double>(n);
    auto b1 = static_cast<std::size_t>(std::llround(n_d * spec.train));
    auto b2 = static_cast<std::size_t>(std::llround(n_d * (spec.train + spec.dev)));
    b1 = std::min(b1, n);
    b2 = std::min(std::max(b2, b1), n);

    SplitAssignment out;
    out.seed = spec.seed;
    out.ratios = {spec.train, spec.dev, spec.test};
    out.assignment.assign(n, Split::Train);
    for (std::size_t pos = 0; pos < n; ++pos) {
        Split s = pos < b1 ? Split::Train : (pos < b2 ? Split::Dev : Split::Test);
        out.assignment[order[pos]] = s;
    }
    return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
                break;
        }
    }
    if (in_quotes) throw ConfigError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::size_t FeatureEncoder::dim() const {
    std::size_t d = 0;
    for (const auto& c : columns) d += c.numeric ? 1 : c.levels.size() + 1;
    return d;
}

std::vector<std::string> FeatureEncoder::encoded_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns) {
        if (c.numeric) {
            names.push_back(c.name);
        } else {
            for (const auto& level : c.levels) names.push_back(c.name + "=" + level);
            names.push_back(c.name + "=<unseen>");
        }
    }
    return names;
}

void FeatureEncoder::encode(std::span<const std::string> raw_cells, std::vector<double>& out) const {
    out.clear();
    out.reserve(dim());
    for (std::size_t ci = 0; ci < columns.size(); ++ci) {
        const Column& col = columns[ci];
        const std::string& cell = raw_cells[ci];
        if (col.numeric) {
            auto v = parse_double(cell);
            if (!v) throw ValidationError("encode: unparseable numeric cell in column " + col.name);
            out.push_back((*v - col.mean) / col.stddev);
        } else {
            auto it = std::lower_bound(col.levels.begin(), col.levels.end(), cell);
            std::size_t hot = (it != col.levels.end() && *it == cell)
                                  ? static_cast<std::size_t>(it - col.levels.begin())
                                  : col.levels.size();   // unseen bucket
            for (std::size_t k = 0; k <= col.levels.size(); ++k)
                out.push_back(k == hot ? 1.0 : 0.0);
        }
    }
}

std::string FeatureEncoder::fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& c : columns) {
        h = fnv1a(h, c.name.data(), c.name.size());
        unsigned char numeric = c.numeric ? 1 : 0;
        h = fnv1a(h, &numeric, 1);
        h = fnv1a(h, &c.mean, sizeof(double));
        h = fnv1a(h, &c.stddev, sizeof(double));
        for (const auto& level : c.levels) h = fnv1a(h, level.data(), level.size());
    }
    return hex64(h);
}

namespace {

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::size_t column_index(const RawTable& table, const std::string& name) {
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == name) return i;
    throw ConfigError("csv: missing column '" + name + "'");
}

} // namespace

Portfolio load_portfolio_text(const std::string& csv_text, const ColumnMapping& mapping,
                              const SplitSpec& split_spec) {
    mapping.validate();
    auto all_rows = parse_csv(csv_text);
    if (all_rows.empty()) throw ConfigError("csv: empty file");

    RawTable table;
    table.header = all_rows.front();
    table.rows.assign(all_rows.begin() + 1, all_rows.end());

    std::vector<std::size_t> feat_ix;
    for (const auto& name : mapping.feature_columns) feat_ix.push_back(column_index(table, name));
    std::size_t sale_ix = column_index(table, mapping.sale_column);
    std::size_t price_ix = column_index(table, mapping.price_column);
    bool has_premium = !mapping.premium_column.empty();
    std::size_t premium_ix = has_premium ? column_index(table, mapping.premium_column) : 0;
    if (!mapping.id_column.empty()) column_index(table, mapping.id_column);   // must exist; dropped
    std::vector<std::size_t> sens_ix;
    for (const auto& [name, kind] : mapping.sensitive_columns) {
        (void)kind;
        sens_ix.push_back(column_index(table, name));
    }

    Portfolio out;
    out.report.rows_read = table.rows.size();
    auto reject = [&](const char* reason) { out.report.rejections[reason]++; };

    // Row screening. Feature-cell parse failures are judged after column
    // types are known, so first pass rejects on the structural fields only.
    struct Kept {
        std::size_t row;
        int y;
        double price;
        double premium;
        std::vector<double> s;
    };
    std::vector<Kept> kept;
    const std::size_t width = table.header.size();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        if (cells.size() != width) {
            reject("wrong field count");
            continue;
        }
        auto sale = parse_double(cells[sale_ix]);
        if (!sale || (*sale != 0.0 && *sale != 1.0)) {
            reject("unparseable or non-binary sale label");
            continue;
        }
        auto price = parse_double(cells[price_ix]);
        if (!price) {
            reject("unparseable price");
            continue;
        }
        if (!(*price > 0.0)) {
            reject("non-positive price");
            continue;
        }
        double premium = kNaN;
        if (has_premium) {
            auto p = parse_double(cells[premium_ix]);
            if (!p) {
                reject("unparseable premium");
                continue;
            }
            if (!(*p > 0.0)) {
                reject("non-positive premium");
                continue;
            }
            premium = *p;
        }
        std::vector<double> s;
        bool s_ok = true;
        for (std::size_t k = 0; k < sens_ix.size(); ++k) {
            auto v = parse_double(cells[sens_ix[k]]);
            if (!v) {
                s_ok = false;
                break;
            }
            if (mapping.sensitive_columns[k].second == SensitiveKind::Binary && *v != 0.0 &&
                *v != 1.0) {
                s_ok = false;
                break;
            }
            s.push_back(*v);
        }
        if (!s_ok) {
            reject("unparseable sensitive value");
            continue;
        }
        bool missing = false;
        for (std::size_t f : feat_ix)
            if (cells[f].empty()) {
                missing = true;
                break;
            }
        if (missing) {
            reject("missing feature value");
            continue;
        }
        kept.push_back({r, static_cast<int>(*sale), *price, premium, std::move(s)});
    }

    // Column types: numeric iff every kept cell parses as a double.
    std::vector<bool> numeric(feat_ix.size(), true);
    for (std::size_t c = 0; c < feat_ix.size(); ++c) {
        for (const auto& k : kept) {
            if (!parse_double(table.rows[k.row][feat_ix[c]])) {
                numeric[c] = false;
                break;
            }
        }
    }

    // Split the kept rows, then freeze encoder statistics on train only.
    out.split = make_split(kept.size(), split_spec);

    out.encoder.columns.resize(feat_ix.size());
    for (std::size_t c = 0; c < feat_ix.size(); ++c) {
        auto& col = out.encoder.columns[c];
        col.name = mapping.feature_columns[c];
        col.numeric = numeric[c];
        if (col.numeric) {
            double sum = 0.0, sum2 = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < kept.size(); ++i) {
                if (out.split.assignment[i] != Split::Train) continue;
                double v = *parse_double(table.rows[kept[i].row][feat_ix[c]]);
                sum += v;
                sum2 += v * v;
                ++n;
            }
            if (n == 0) throw ConfigError("load: empty training split");
            col.mean = sum / static_cast<double>(n);
            double var = sum2 / static_cast<double>(n) - col.mean * col.mean;
            col.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
        } else {
            std::set<std::string> levels;
            for (std::size_t i = 0; i < kept.size(); ++i)
                if (out.split.assignment[i] == Split::Train)
                    levels.insert(table.rows[kept[i].row][feat_ix[c]]);
            col.levels.assign(levels.begin(), levels.end());
        }
    }

    // Encode everything with the frozen statistics.
    std::vector<std::string> raw_cells(feat_ix.size());
    for (const auto& k : kept) {
        PortfolioRecord rec;
        for (std::size_t c = 0; c < feat_ix.size(); ++c) raw_cells[c] = table.rows[k.row][feat_ix[c]];
        out.encoder.encode(raw_cells, rec.x);
        rec.s = k.s;
        rec.y = k.y;
        rec.price_hist = k.price;
        rec.h = k.premium;
        out.records.push_back(std::move(rec));
    }

    out.report.rows_loaded = out.records.size();
    out.report.rows_rejected = out.report.rows_read - out.report.rows_loaded;
    out.report.premium_from_column = has_premium;
    out.report.encoded_feature_names = out.encoder.encoded_names();
    for (const auto& [name, kind] : mapping.sensitive_columns) {
        (void)kind;
        out.sensitive_names.push_back(name);
    }

    // Sensitive exclusion audit: no encoded column may carry a sensitive name.
    for (const auto& enc_name : out.report.encoded_feature_names)
        for (const auto& s_name : out.sensitive_names)
            if (enc_name == s_name || enc_name.rfind(s_name + "=", 0) == 0)
                throw ConfigError("load: encoded feature '" + enc_name +
                                  "' derives from sensitive column '" + s_name + "'");

    // Content fingerprint over the encoded matrices.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& rec : out.records) {
        h = fnv1a(h, rec.x.data(), rec.x.size() * sizeof(double));
        h = fnv1a(h, rec.s.data(), rec.s.size() * sizeof(double));
        h = fnv1a(h, &rec.y, sizeof(int));
        h = fnv1a(h, &rec.price_hist, sizeof(double));
        h = fnv1a(h, &rec.h, sizeof(double));
    }
    out.fingerprint = hex64(h);
    out.mapping_fingerprint = out.encoder.fingerprint();
    return out;
}

Portfolio load_portfolio(const std::string& csv_path, const ColumnMapping& mapping,
                         const SplitSpec& split_spec) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw ConfigError("load: cannot open '" + csv_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_portfolio_text(buf.str(), mapping, split_spec);
}

namespace {

template <typename T>
void put(std::string& out, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ConfigError("cache: truncated file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

void write_cache(const std::string& path, const Portfolio& portfolio) {
    std::string out;
    out.append("RKP");
    out.push_back(static_cast<char>(1));   // version byte
    const auto n = static_cast<std::uint64_t>(portfolio.records.size());
    const auto d = static_cast<std::uint32_t>(portfolio.dim());
    const auto k = static_cast<std::uint32_t>(
        portfolio.records.empty() ? 0 : portfolio.records.front().s.size());
    put(out, d);
    put(out, k);
    put(out, n);
    out.push_back(portfolio.report.premium_from_column ? 1 : 0);
    put(out, static_cast<std::uint32_t>(portfolio.fingerprint.size()));
    out.append(portfolio.fingerprint);
    put(out, static_cast<std::uint32_t>(portfolio.mapping_fingerprint.size()));
    out.append(portfolio.mapping_fingerprint);
    put(out, static_cast<std::uint32_t>(portfolio.sensitive_names.size()));
    for (const auto& s : portfolio.sensitive_names) {
        put(out, static_cast<std::uint32_t>(s.size()));
        out.append(s);
    }
    for (const auto& rec : portfolio.records)
        for (double v : rec.x) put(out, v);
    for (const auto& rec : portfolio.records) put(out, static_cast<double>(rec.y));
    for (const auto& rec : portfolio.records) put(out, rec.price_hist);
    for (const auto& rec : portfolio.records) put(out, rec.h);
    for (const auto& rec : portfolio.records)
        for (double v : rec.s) put(out, v);
    put(out, portfolio.split.seed);
    for (double r : portfolio.split.ratios) put(out, r);
    for (Split s : portfolio.split.assignment) out.push_back(static_cast<char>(s));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cache: cannot write '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Portfolio read_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cache: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string s = buf.str();

    std::size_t pos = 0;
    if (s.size() < 4 || s.compare(0, 3, "RKP") != 0) throw ConfigError("cache: bad magic");
    pos = 3;
    auto version = take<char>(s, pos);
    if (version != 1) throw ConfigError("cache: unsupported version");
    auto d = take<std::uint32_t>(s, pos);
    auto k = take<std::uint32_t>(s, pos);
    auto n = take<std::uint64_t>(s, pos);
    bool premium = take<char>(s, pos) != 0;

    Portfolio out;
    auto fp_len = take<std::uint32_t>(s, pos);
    if (pos + fp_len > s.size()) throw ConfigError("cache: truncated file");
    out.fingerprint = s.substr(pos, fp_len);
    pos += fp_len;
    auto mfp_len = take<std::uint32_t>(s, pos);
    if (pos + mfp_len > s.size()) throw ConfigError("cache: truncated file");
    out.mapping_fingerprint = s.substr(pos, mfp_len);
    pos += mfp_len;
    auto n_sens = take<std::uint32_t>(s, pos);
    for (std::uint32_t i = 0; i < n_sens; ++i) {
        auto len = take<std::uint32_t>(s, pos);
        if (pos + len > s.size()) throw ConfigError("cache: truncated file");
        out.sensitive_names.push_back(s.substr(pos, len));
        pos += len;
    }

    out.records.resize(n);
    for (auto& rec : out.records) {
        rec.x.resize(d);
        for (auto& v : rec.x) v = take<double>(s, pos);
    }
    for (auto& rec : out.records) rec.y = static_cast<int>(take<double>(s, pos));
    for (auto& rec : out.records) rec.price_hist = take<double>(s, pos);
    for (auto& rec : out.records) rec.h = take<double>(s, pos);
    for (auto& rec : out.records) {
        rec.s.resize(k);
        for (auto& v : rec.s) v = take<double>(s, pos);
    }
    out.split.seed = take<std::uint64_t>(s, pos);
    for (double& r : out.split.ratios) r = take<double>(s, pos);
    out.split.assignment.resize(n);
    for (auto& a : out.split.assignment) a = static_cast<Split>(take<char>(s, pos));

    out.report.rows_read = n;
    out.report.rows_loaded = n;
    out.report.premium_from_column = premium;
    return out;
}

} // namespace ratekit::data
