#ifndef RED_DATASET_HPP
#define RED_DATASET_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace red {

enum class DatasetRole : std::uint8_t { Full, Train, Validation, Test };

std::string_view dataset_role_name(DatasetRole role) noexcept;

/// An immutable numeric table with independent columns x0..x(n-2) and a
/// dependent column y. All stored values are finite.
class Dataset {
public:
    Dataset() = default;

    /// Builds a dataset from column vectors. `x_columns[i]` holds column xi.
    Dataset(std::vector<std::vector<double>> x_columns, std::vector<double> y,
            DatasetRole role = DatasetRole::Full);

    std::size_t rows() const noexcept { return y_.size(); }
    std::size_t x_count() const noexcept { return x_.size(); }

    const std::vector<double>& x(std::size_t column) const { return x_.at(column); }
    const std::vector<double>& y() const noexcept { return y_; }
    DatasetRole role() const noexcept { return role_; }

    Dataset with_role(DatasetRole role) const;

    /// Selects a subset of rows (indices need not be sorted or unique).
    Dataset select_rows(const std::vector<std::size_t>& indices, DatasetRole role) const;

    /// Concatenates rows of two datasets with identical schemas.
    static Dataset concat(const Dataset& a, const Dataset& b, DatasetRole role);

    /// Reads a CSV file with header `x0,...,x{n-2},y`. Throws DataError on
    /// malformed content, non-finite values, or an unexpected header.
    static Dataset load_csv(const std::string& path);
    static Dataset read_csv(std::istream& in, const std::string& origin = "<stream>");

    void write_csv(std::ostream& out) const;
    void save_csv(const std::string& path) const;

private:
    std::vector<std::vector<double>> x_;
    std::vector<double> y_;
    DatasetRole role_ = DatasetRole::Full;
};

} // namespace red

#endif
