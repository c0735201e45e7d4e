#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ratekit::data {

enum class SensitiveKind { Binary, Continuous };

/// Maps CSV columns onto the roles the pipeline needs. Sensitive columns are
/// observed for fairness measurement only and must never overlap the feature
/// columns.
struct ColumnMapping {
    std::vector<std::string> feature_columns;
    std::string sale_column;
    std::string price_column;
    std::string premium_column;                                      // empty = absent
    std::vector<std::pair<std::string, SensitiveKind>> sensitive_columns;
    std::string id_column;                                           // empty = absent; dropped on load

    void validate() const;
};

enum class Split : std::uint8_t { Train = 0, Dev = 1, Test = 2 };

struct SplitSpec {
    double train = 0.6;
    double dev = 0.2;
    double test = 0.2;
    std::uint64_t seed = 42;
};

/// Deterministic partition of record indices. Sizes land within one record
/// of the exact fractions.
struct SplitAssignment {
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{0.6, 0.2, 0.2};
    std::vector<Split> assignment;

    std::array<std::size_t, 3> counts() const;
    std::vector<std::size_t> indices(Split s) const;
};

/// One quote after encoding: standardized-numeric + one-hot features, the
/// sensitive values, the sale label, the historical price and the pure
/// premium h (NaN until a premium source is bound when the CSV has no
/// premium column).
struct PortfolioRecord {
    std::vector<double> x;
    std::vector<double> s;
    int y = 0;
    double price_hist = 0.0;
    double h = 0.0;
};

struct PreprocessReport {
    std::size_t rows_read = 0;
    std::size_t rows_loaded = 0;
    std::size_t rows_rejected = 0;
    std::map<std::string, std::size_t> rejections;   // reason -> count
    bool premium_from_column = false;
    std::vector<std::string> encoded_feature_names;
};

/// Feature encoder with statistics frozen from the training split. Numeric
/// columns are z-scored; categorical columns are one-hot with a trailing
/// "unseen" bucket for levels absent from training.
class FeatureEncoder {
public:
    struct Column {
        std::string name;
        bool numeric = true;
        double mean = 0.0;
        double stddev = 1.0;
        std::vector<std::string> levels;   // sorted train levels
    };

    std::vector<Column> columns;

    std::size_t dim() const;
    std::vector<std::string> encoded_names() const;
    void encode(std::span<const std::string> raw_cells, std::vector<double>& out) const;
    /// FNV-1a hash of the mapping layout plus frozen statistics; stamped into
    /// model files so mismatched encodings are detectable.
    std::string fingerprint() const;
};

struct Portfolio {
    std::vector<PortfolioRecord> records;
    SplitAssignment split;
    FeatureEncoder encoder;
    PreprocessReport report;
    std::vector<std::string> sensitive_names;
    std::string fingerprint;           // hash of the encoded content
    std::string mapping_fingerprint;   // encoder fingerprint, survives caching

    std::size_t dim() const { return records.empty() ? 0 : records.front().x.size(); }
    std::vector<std::size_t> idx(Split s) const { return split.indices(s); }
    bool has_premium() const { return report.premium_from_column; }
};

/// Natural log of a positive price. Throws ValidationError on price <= 0.
double log_price(double price);

/// Deterministic split of n records. Throws ConfigError unless the ratios are
/// positive and sum to 1.
SplitAssignment make_split(std::size_t n, const SplitSpec& spec);

/// Full ingest: parse CSV, reject bad rows (reason-coded), split the kept
/// rows, freeze encoder statistics on the training split, encode everything.
Portfolio load_portfolio(const std::string& csv_path, const ColumnMapping& mapping,
                         const SplitSpec& split_spec);

/// Same pipeline over in-memory CSV text (used by the synthetic generator
/// and tests so they exercise the identical code path).
Portfolio load_portfolio_text(const std::string& csv_text, const ColumnMapping& mapping,
                              const SplitSpec& split_spec);

/// Binary encoded-portfolio cache. Layout (little-endian, documented in the
/// README): magic "RKP", version byte, u32 d, u32 k, u64 n, premium flag,
/// fingerprint, then row-major 64-bit floats for X, y, price, h, S, one
/// split byte per record, split seed and ratios. Bit-exact across runs.
void write_cache(const std::string& path, const Portfolio& portfolio);
Portfolio read_cache(const std::string& path);

/// RFC-4180 CSV parsing (quoted fields, escaped quotes, newlines inside
/// quotes). Exposed for tests.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

} // namespace ratekit::data
