#pragma once

// Core value types shared by every layer: the seller feature table, the
// buyer's prediction task, and the per-step trace record emitted by the
// market loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace datamarket {

// Raised when a caller violates a documented precondition.
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when a computation cannot produce a meaningful number
// (singular systems, degenerate target ranges, empty samples).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix of seller features. Row m is seller m's feature
// vector across T observation columns; each row carries an opaque seller id
// (auto-named "s<m>" when not supplied). The market itself operates on row
// indices, ids exist for reporting. A 0 x T matrix is a valid empty
// selection (the baseline predictor accepts it); constructed market inputs
// are validated for M >= 1 at the entry points that require it.
class FeatureMatrix {
  public:
    FeatureMatrix() = default;

    FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (cols == 0) throw input_error("FeatureMatrix: need at least one column");
        default_ids();
        check_finite();
    }

    // Builds from nested vectors; every row must have the same length.
    explicit FeatureMatrix(const std::vector<std::vector<double>>& rows,
                           std::vector<std::string> ids = {}) {
        rows_ = rows.size();
        cols_ = rows.empty() ? 0 : rows.front().size();
        if (!rows.empty() && cols_ == 0)
            throw input_error("FeatureMatrix: rows must be non-empty");
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw input_error("FeatureMatrix: ragged rows");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        if (ids.empty()) {
            default_ids();
        } else {
            if (ids.size() != rows_)
                throw input_error("FeatureMatrix: id count must match row count");
            ids_ = std::move(ids);
        }
        check_finite();
    }

    static FeatureMatrix empty(std::size_t cols) {
        FeatureMatrix m;
        m.rows_ = 0;
        m.cols_ = cols;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    const std::vector<std::string>& seller_ids() const { return ids_; }
    void set_seller_ids(std::vector<std::string> ids) {
        if (ids.size() != rows_)
            throw input_error("FeatureMatrix: id count must match row count");
        ids_ = std::move(ids);
    }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    void check_finite() const {
        for (double v : data_)
            if (!std::isfinite(v))
                throw input_error("FeatureMatrix: non-finite entry");
    }

    bool operator==(const FeatureMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

  private:
    void default_ids() {
        ids_.resize(rows_);
        for (std::size_t m = 0; m < rows_; ++m) ids_[m] = "s" + std::to_string(m);
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
    std::vector<std::string> ids_;
};

// Returns the rows of X named by `subset` in ascending index order.
// Indices must be strictly within range and free of duplicates; an empty
// subset yields a 0 x T matrix.
inline FeatureMatrix feature_subset(const FeatureMatrix& X,
                                    std::vector<std::size_t> subset) {
    std::sort(subset.begin(), subset.end());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (subset[i] >= X.rows())
            throw input_error("feature_subset: index out of range");
        if (i > 0 && subset[i] == subset[i - 1])
            throw input_error("feature_subset: duplicate index");
    }
    if (subset.empty()) return FeatureMatrix::empty(X.cols());
    FeatureMatrix out(subset.size(), X.cols());
    std::vector<std::string> ids(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        auto src = X.row(subset[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
        ids[i] = X.seller_ids()[subset[i]];
    }
    out.set_seller_ids(std::move(ids));
    return out;
}

// A buyer's supervised problem: targets over the shared observation columns,
// split into disjoint train and test column index sets that together cover
// every column. The predictor's fitting step only ever sees y_train().
struct PredictionTask {
    std::vector<double> y;
    std::vector<std::size_t> train_columns;
    std::vector<std::size_t> test_columns;

    void validate() const {
        if (y.empty()) throw input_error("PredictionTask: empty target");
        for (double v : y)
            if (!std::isfinite(v))
                throw input_error("PredictionTask: non-finite target");
        if (train_columns.empty() || test_columns.empty())
            throw input_error("PredictionTask: train and test must be non-empty");
        std::vector<char> seen(y.size(), 0);
        for (std::size_t c : train_columns) {
            if (c >= y.size()) throw input_error("PredictionTask: train index out of range");
            if (seen[c]) throw input_error("PredictionTask: repeated train index");
            seen[c] = 1;
        }
        for (std::size_t c : test_columns) {
            if (c >= y.size()) throw input_error("PredictionTask: test index out of range");
            if (seen[c] == 1) throw input_error("PredictionTask: train/test overlap");
            if (seen[c] == 2) throw input_error("PredictionTask: repeated test index");
            seen[c] = 2;
        }
        for (char s : seen)
            if (!s) throw input_error("PredictionTask: column in neither split");
    }

    std::size_t columns() const { return y.size(); }

    std::vector<double> y_train() const {
        std::vector<double> out(train_columns.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[train_columns[i]];
        return out;
    }
    std::vector<double> y_test() const {
        std::vector<double> out(test_columns.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[test_columns[i]];
        return out;
    }
};

// Splits columns 0..T-1 into a leading train block and trailing test block.
// `train_fraction` defaults to 0.8; both sides are kept non-empty.
inline PredictionTask holdout_split(std::vector<double> y,
                                    double train_fraction = 0.8) {
    if (y.size() < 2)
        throw input_error("holdout_split: need at least two columns");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw input_error("holdout_split: fraction must be in (0, 1)");
    auto t = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(y.size())));
    t = std::max<std::size_t>(1, std::min(t, y.size() - 1));
    PredictionTask task;
    task.y = std::move(y);
    for (std::size_t c = 0; c < task.y.size(); ++c)
        (c < t ? task.train_columns : task.test_columns).push_back(c);
    task.validate();
    return task;
}

// One arriving buyer: a prediction task, a private valuation mu per unit of
// gain, and an optional fixed bid. When `bid` is unset the market computes
// the buyer's best response to the posted price.
struct BuyerInstance {
    PredictionTask task;
    double mu = 0.0;
    std::optional<double> bid;

    void validate() const {
        task.validate();
        if (!std::isfinite(mu) || mu < 0.0)
            throw input_error("BuyerInstance: mu must be finite and >= 0");
        if (bid && (!std::isfinite(*bid) || *bid < 0.0))
            throw input_error("BuyerInstance: bid must be finite and >= 0");
    }
};

// One market step in the run trace. Field names are part of the file format.
struct TraceRecord {
    std::uint64_t n = 0;          // 1-based step index
    double price = 0.0;           // posted price at this step
    double bid = 0.0;             // buyer's submitted bid
    double gain = 0.0;            // realized prediction gain in [0, 1]
    double revenue = 0.0;         // payment extracted from the buyer
    std::vector<double> division; // per-seller revenue shares, each >= 0
    std::uint64_t seed = 0;       // per-step derived seed

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["n"] = n;
        j["price"] = price;
        j["bid"] = bid;
        j["gain"] = gain;
        j["revenue"] = revenue;
        j["division"] = division;
        j["seed"] = seed;
        return j;
    }

    static TraceRecord from_json(const nlohmann::json& j) {
        TraceRecord r;
        r.n = j.at("n").get<std::uint64_t>();
        r.price = j.at("price").get<double>();
        r.bid = j.at("bid").get<double>();
        r.gain = j.at("gain").get<double>();
        r.revenue = j.at("revenue").get<double>();
        r.division = j.at("division").get<std::vector<double>>();
        r.seed = j.at("seed").get<std::uint64_t>();
        return r;
    }

    void validate(std::size_t expected_sellers = 0) const {
        if (n == 0) throw input_error("TraceRecord: step index starts at 1");
        if (!std::isfinite(price) || price < 0.0)
            throw input_error("TraceRecord: bad price");
        if (!std::isfinite(bid) || bid < 0.0)
            throw input_error("TraceRecord: bad bid");
        if (!std::isfinite(gain) || gain < 0.0 || gain > 1.0)
            throw input_error("TraceRecord: gain outside [0, 1]");
        if (!std::isfinite(revenue) || revenue < 0.0)
            throw input_error("TraceRecord: bad revenue");
        if (expected_sellers && division.size() != expected_sellers)
            throw input_error("TraceRecord: division size mismatch");
        for (double d : division)
            if (!std::isfinite(d) || d < 0.0)
                throw input_error("TraceRecord: division entries must be >= 0");
    }
};

// Writes one record per line. The stream is flushed so a crashed run keeps
// all fully written steps.
inline void write_jsonl(std::ostream& os, const std::vector<TraceRecord>& recs) {
    for (const auto& r : recs) os << r.to_json().dump() << '\n';
    os.flush();
}

// Reads records until EOF; blank lines are skipped, malformed lines raise.
inline std::vector<TraceRecord> read_jsonl(std::istream& is) {
    std::vector<TraceRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw input_error("read_jsonl: malformed JSON at line " +
                              std::to_string(lineno));
        out.push_back(TraceRecord::from_json(j));
    }
    return out;
}

}  // namespace datamarket
