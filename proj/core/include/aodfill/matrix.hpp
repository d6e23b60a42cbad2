#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace aodfill {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t n_rows, std::size_t n_cols)
        : n_rows_(n_rows), n_cols_(n_cols), data_(n_rows * n_cols, 0.0) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return Matrix();
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.n_cols_)
                throw std::invalid_argument("ragged row list");
            for (std::size_t j = 0; j < m.n_cols_; ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }

    double& operator()(std::size_t r, std::size_t c) {
        return data_[r * n_cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        return data_[r * n_cols_ + c];
    }

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * n_cols_, n_cols_);
    }
    std::span<double> row(std::size_t r) {
        return std::span<double>(data_).subspan(r * n_cols_, n_cols_);
    }

    /// New matrix holding the given rows, in the given order.
    Matrix take_rows(std::span<const std::size_t> indices) const {
        Matrix m(indices.size(), n_cols_);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = row(indices[i]);
            std::copy(src.begin(), src.end(), m.row(i).begin());
        }
        return m;
    }

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<double> data_;
};

} // namespace aodfill
