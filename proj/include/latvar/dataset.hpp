#pragma once

// Named-column numeric table with explicit missingness (NaN), factor-coded
// string columns (cluster ids), and RFC-4180 CSV in/out. Numeric parsing and
// formatting are locale-independent.

#include <string>
#include <vector>

#include "latvar/types.hpp"

namespace latvar {

class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::string> names, Mat values);

    Index n() const { return X_.rows(); }
    Index ncol() const { return X_.cols(); }
    const std::vector<std::string>& names() const { return names_; }
    const Mat& values() const { return X_; }
    Mat& values() { return X_; }

    bool has(const std::string& name) const;
    Index col_index(const std::string& name) const; // throws on unknown
    Vec col(const std::string& name) const;
    void add_col(const std::string& name, Vec values);

    bool is_missing(Index row, Index col) const { return std::isnan(X_(row, col)); }
    bool any_missing() const { return X_.hasNaN(); }

    // factor levels for columns that failed numeric parsing (cluster ids)
    const std::vector<std::string>* factor_levels(const std::string& name) const;

    Dataset select_rows(const std::vector<Index>& rows) const;

    static Dataset read_csv(const std::string& path);
    static Dataset from_csv_text(const std::string& text, const std::string& origin = "<memory>");
    void write_csv(const std::string& path) const;
    std::string to_csv_text() const;

private:
    std::vector<std::string> names_;
    Mat X_;
    std::vector<std::vector<std::string>> levels_; // per column; empty = numeric
};

struct SufficientStats {
    Vec mu;  // empirical mean
    Mat S;   // ML covariance (divisor n)
    double n = 0;
};

// Optionally weighted sufficient statistics over the given columns of Z.
SufficientStats sufficient_stats(const Mat& Z, const Vec* weights = nullptr);

} // namespace latvar
