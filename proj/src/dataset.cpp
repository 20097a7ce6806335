#include "latvar/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace latvar {

Dataset::Dataset(std::vector<std::string> names, Mat values)
    : names_(std::move(names)), X_(std::move(values)), levels_(names_.size()) {
    if (static_cast<Index>(names_.size()) != X_.cols())
        throw Error::data("Dataset: column name count does not match value columns");
}

bool Dataset::has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Index Dataset::col_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw Error::data("unknown data column: " + name);
    return static_cast<Index>(it - names_.begin());
}

Vec Dataset::col(const std::string& name) const { return X_.col(col_index(name)); }

void Dataset::add_col(const std::string& name, Vec values) {
    if (X_.cols() > 0 && values.size() != X_.rows())
        throw Error::data("add_col: row count mismatch for " + name);
    Mat nx(values.size(), X_.cols() + 1);
    if (X_.cols() > 0) nx.leftCols(X_.cols()) = X_;
    nx.col(X_.cols()) = values;
    X_ = nx;
    names_.push_back(name);
    levels_.emplace_back();
}

const std::vector<std::string>* Dataset::factor_levels(const std::string& name) const {
    Index c = col_index(name);
    if (levels_[static_cast<size_t>(c)].empty()) return nullptr;
    return &levels_[static_cast<size_t>(c)];
}

Dataset Dataset::select_rows(const std::vector<Index>& rows) const {
    Mat out(static_cast<Index>(rows.size()), X_.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = X_.row(rows[i]);
    Dataset d(names_, out);
    d.levels_ = levels_;
    return d;
}

namespace {

// RFC-4180 tokenizer. Returns rows of fields; handles quoted fields with
// embedded commas/newlines and doubled quotes.
std::vector<std::vector<std::string>> tokenize_csv(const std::string& text,
                                                   const std::string& origin) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> cur;
    std::string field;
    bool quoted = false;
    size_t i = 0;
    auto endfield = [&]() {
        cur.push_back(field);
        field.clear();
    };
    auto endrow = [&]() {
        endfield();
        rows.push_back(cur);
        cur.clear();
    };
    while (i < text.size()) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty()) throw Error::data(origin + ": stray quote in CSV field");
            quoted = true;
        } else if (c == ',') {
            endfield();
        } else if (c == '\r') {
            // swallow; \r\n handled by \n
        } else if (c == '\n') {
            endrow();
        } else {
            field += c;
        }
        ++i;
    }
    if (quoted) throw Error::data(origin + ": unterminated quoted CSV field");
    if (!field.empty() || !cur.empty()) endrow();
    return rows;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
    if (b == e) return false;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "na";
}

} // namespace

Dataset Dataset::from_csv_text(const std::string& text, const std::string& origin) {
    auto rows = tokenize_csv(text, origin);
    if (rows.empty()) throw Error::data(origin + ": CSV requires a header row");
    std::vector<std::string> names = rows.front();
    size_t ncol = names.size();
    Index n = static_cast<Index>(rows.size()) - 1;
    Mat X(n, static_cast<Index>(ncol));
    std::vector<std::vector<std::string>> levels(ncol);
    std::vector<std::vector<std::string>> raw(ncol, std::vector<std::string>(static_cast<size_t>(n)));
    std::vector<bool> numeric(ncol, true);
    for (Index r = 0; r < n; ++r) {
        const auto& row = rows[static_cast<size_t>(r) + 1];
        if (row.size() != ncol)
            throw Error::data(origin + ": row " + std::to_string(r + 2) + " has " +
                              std::to_string(row.size()) + " fields, expected " +
                              std::to_string(ncol));
        for (size_t c = 0; c < ncol; ++c) {
            raw[c][static_cast<size_t>(r)] = row[c];
            double val;
            if (is_missing_token(row[c])) {
                X(r, static_cast<Index>(c)) = std::numeric_limits<double>::quiet_NaN();
            } else if (parse_double(row[c], val)) {
                X(r, static_cast<Index>(c)) = val;
            } else {
                numeric[c] = false;
            }
        }
    }
    // factor-code non-numeric columns (e.g. cluster ids)
    for (size_t c = 0; c < ncol; ++c) {
        if (numeric[c]) continue;
        auto& lv = levels[c];
        for (Index r = 0; r < n; ++r) {
            const std::string& s = raw[c][static_cast<size_t>(r)];
            if (is_missing_token(s)) {
                X(r, static_cast<Index>(c)) = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            auto it = std::find(lv.begin(), lv.end(), s);
            if (it == lv.end()) {
                lv.push_back(s);
                it = lv.end() - 1;
            }
            X(r, static_cast<Index>(c)) = static_cast<double>(it - lv.begin());
        }
    }
    Dataset d(names, X);
    d.levels_ = levels;
    return d;
}

Dataset Dataset::read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::data("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_csv_text(ss.str(), path);
}

std::string Dataset::to_csv_text() const {
    std::ostringstream out;
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += "\"\"";
            else q += c;
        }
        return q + "\"";
    };
    for (size_t c = 0; c < names_.size(); ++c) out << (c ? "," : "") << quote(names_[c]);
    out << "\n";
    char buf[40];
    for (Index r = 0; r < n(); ++r) {
        for (Index c = 0; c < ncol(); ++c) {
            if (c) out << ",";
            double v = X_(r, c);
            if (std::isnan(v)) continue; // empty field = missing
            if (!levels_[static_cast<size_t>(c)].empty()) {
                out << quote(levels_[static_cast<size_t>(c)][static_cast<size_t>(v)]);
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << buf;
            }
        }
        out << "\n";
    }
    return out.str();
}

void Dataset::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error::data("cannot write " + path);
    out << to_csv_text();
}

SufficientStats sufficient_stats(const Mat& Z, const Vec* weights) {
    SufficientStats st;
    Index n = Z.rows(), k = Z.cols();
    if (n == 0) throw Error::data("sufficient_stats: empty data");
    if (weights) {
        if (weights->size() != n) throw Error::data("sufficient_stats: weight length mismatch");
        double wsum = weights->sum();
        st.n = wsum;
        st.mu = (Z.transpose() * (*weights)) / wsum;
        Mat C = Z.rowwise() - st.mu.transpose();
        st.S = (C.transpose() * weights->asDiagonal() * C) / wsum;
    } else {
        st.n = static_cast<double>(n);
        st.mu = Z.colwise().mean();
        Mat C = Z.rowwise() - st.mu.transpose();
        st.S = (C.transpose() * C) / st.n;
    }
    st.S = 0.5 * (st.S + st.S.transpose()).eval();
    (void)k;
    return st;
}

} // namespace latvar
