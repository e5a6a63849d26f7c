#include "red/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "red/errors.hpp"
#include "red/expression.hpp"

namespace red {

std::string_view dataset_role_name(DatasetRole role) noexcept {
    switch (role) {
    case DatasetRole::Full: return "full";
    case DatasetRole::Train: return "train";
    case DatasetRole::Validation: return "validation";
    case DatasetRole::Test: return "test";
    }
    return "?";
}

Dataset::Dataset(std::vector<std::vector<double>> x_columns, std::vector<double> y,
                 DatasetRole role)
    : x_(std::move(x_columns)), y_(std::move(y)), role_(role) {
    if (y_.empty()) {
        throw TooFewRows("a dataset needs at least one row");
    }
    if (x_.empty()) {
        throw DataError("a dataset needs at least one independent column");
    }
    for (const auto& col : x_) {
        if (col.size() != y_.size()) {
            throw DataError("column lengths differ");
        }
    }
    auto check_finite = [](const std::vector<double>& col) {
        for (double v : col) {
            if (!std::isfinite(v)) {
                throw DataError("datasets must hold finite values only");
            }
        }
    };
    for (const auto& col : x_) check_finite(col);
    check_finite(y_);
}

Dataset Dataset::with_role(DatasetRole role) const {
    Dataset out = *this;
    out.role_ = role;
    return out;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& indices, DatasetRole role) const {
    std::vector<std::vector<double>> xs(x_.size());
    std::vector<double> ys;
    ys.reserve(indices.size());
    for (std::size_t c = 0; c < x_.size(); ++c) {
        xs[c].reserve(indices.size());
    }
    for (std::size_t idx : indices) {
        if (idx >= rows()) {
            throw DataError("row index out of range");
        }
        for (std::size_t c = 0; c < x_.size(); ++c) {
            xs[c].push_back(x_[c][idx]);
        }
        ys.push_back(y_[idx]);
    }
    return Dataset(std::move(xs), std::move(ys), role);
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b, DatasetRole role) {
    if (a.x_count() != b.x_count()) {
        throw DataError("cannot concatenate datasets with different schemas");
    }
    std::vector<std::vector<double>> xs(a.x_count());
    for (std::size_t c = 0; c < a.x_count(); ++c) {
        xs[c] = a.x(c);
        xs[c].insert(xs[c].end(), b.x(c).begin(), b.x(c).end());
    }
    std::vector<double> ys = a.y();
    ys.insert(ys.end(), b.y().begin(), b.y().end());
    return Dataset(std::move(xs), std::move(ys), role);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) {
        return "";
    }
    return s.substr(b, e - b + 1);
}

} // namespace

Dataset Dataset::read_csv(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(origin + ": empty file");
    }
    const std::vector<std::string> header = split_line(line);
    if (header.size() < 2) {
        throw DataError(origin + ": expected columns x0..x{n-2},y");
    }
    for (std::size_t i = 0; i + 1 < header.size(); ++i) {
        if (trimmed(header[i]) != "x" + std::to_string(i)) {
            throw DataError(origin + ": column " + std::to_string(i) + " must be named x" +
                            std::to_string(i));
        }
    }
    if (trimmed(header.back()) != "y") {
        throw DataError(origin + ": last column must be named y");
    }

    const std::size_t x_count = header.size() - 1;
    std::vector<std::vector<double>> xs(x_count);
    std::vector<double> ys;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) {
            continue;
        }
        const std::vector<std::string> fields = split_line(line);
        if (fields.size() != header.size()) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields");
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string f = trimmed(fields[c]);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                throw DataError(origin + ":" + std::to_string(line_no) + ": malformed number '" + f +
                                "'");
            }
            if (c < x_count) {
                xs[c].push_back(v);
            } else {
                ys.push_back(v);
            }
        }
    }
    if (ys.empty()) {
        throw TooFewRows(origin + ": no data rows");
    }
    return Dataset(std::move(xs), std::move(ys));
}

Dataset Dataset::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return read_csv(in, path);
}

void Dataset::write_csv(std::ostream& out) const {
    for (std::size_t c = 0; c < x_.size(); ++c) {
        out << 'x' << c << ',';
    }
    out << "y\n";
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t c = 0; c < x_.size(); ++c) {
            out << format_double(x_[c][r]) << ',';
        }
        out << format_double(y_[r]) << '\n';
    }
}

void Dataset::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path + "'");
    }
    write_csv(out);
}

} // namespace red
