#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aodfill {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct CellIndex {
    int col = 0;
    int row = 0;
};

/// Single-band georeferenced raster with an explicit validity mask.
/// Row 0 is the northernmost row; (x_origin, y_origin) is the north-west
/// corner of the grid. Cells are square and half-open: a point on a shared
/// vertical edge belongs to the cell on the right, a point on a shared
/// horizontal edge to the cell below.
///
/// The stored value of an invalid cell is never observable through the
/// public interface; nodata sentinels exist only at the file boundary.
class Grid {
public:
    Grid(int n_cols, int n_rows, double x_origin, double y_origin,
         double cell_size, std::string band_tag = {});

    int n_cols() const { return n_cols_; }
    int n_rows() const { return n_rows_; }
    double x_origin() const { return x_origin_; }
    double y_origin() const { return y_origin_; }
    double cell_size() const { return cell_size_; }
    std::size_t cell_count() const { return values_.size(); }

    const std::string& band_tag() const { return band_tag_; }
    void set_band_tag(std::string tag) { band_tag_ = std::move(tag); }

    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(n_cols_) +
               static_cast<std::size_t>(col);
    }

    double value(int col, int row) const { return values_[index(col, row)]; }
    bool valid(int col, int row) const { return validity_[index(col, row)] != 0; }

    void set(int col, int row, double v) {
        values_[index(col, row)] = v;
        validity_[index(col, row)] = 1;
    }
    void set_invalid(int col, int row) { validity_[index(col, row)] = 0; }

    std::span<const double> values() const { return values_; }
    std::span<const char> validity() const { return validity_; }

    double col_center_x(int col) const {
        return x_origin_ + (static_cast<double>(col) + 0.5) * cell_size_;
    }
    double row_center_y(int row) const {
        return y_origin_ - (static_cast<double>(row) + 0.5) * cell_size_;
    }
    Point cell_center(int col, int row) const {
        return {col_center_x(col), row_center_y(row)};
    }

    /// Containing cell under the half-open rule, or nullopt outside the extent.
    std::optional<CellIndex> cell_at(double x, double y) const;

    bool same_geometry(const Grid& other) const {
        return n_cols_ == other.n_cols_ && n_rows_ == other.n_rows_ &&
               x_origin_ == other.x_origin_ && y_origin_ == other.y_origin_ &&
               cell_size_ == other.cell_size_;
    }

    /// New all-invalid grid with this grid's geometry.
    Grid like(std::string band_tag = {}) const {
        return Grid(n_cols_, n_rows_, x_origin_, y_origin_, cell_size_,
                    std::move(band_tag));
    }

private:
    int n_cols_;
    int n_rows_;
    double x_origin_;
    double y_origin_;
    double cell_size_;
    std::string band_tag_;
    std::vector<double> values_;
    std::vector<char> validity_;
};

/// Neighbor-mean filter parameters. `window` is the odd side length of the
/// square neighborhood; `min_valid` is the smallest number of valid
/// neighbors required to emit an output value.
struct FilterConfig {
    int window = 11;
    bool include_center = false;
    int min_valid = 1;

    void validate() const; // throws std::invalid_argument
};

/// Nodata-aware mean filter. For every cell, averages the valid values in
/// the window (truncated at the borders, no padding); the output cell is
/// valid iff at least min_valid valid neighbors exist. Within a window the
/// summation runs row-major, so results are bit-identical for any thread
/// count. The input is not modified.
Grid mean_filter(const Grid& g, const FilterConfig& cfg, int threads = 0);

/// Fraction of valid cells.
double coverage(const Grid& g);

/// Nearest-neighbor resampling of src onto tmpl's geometry. Output cells
/// whose centers fall outside src's extent are invalid.
Grid resample_nearest(const Grid& src, const Grid& tmpl);

/// Per point, the value of the containing valid cell, or nullopt if the
/// point is outside the extent or the cell is invalid.
std::vector<std::optional<double>> sample_at(const Grid& g,
                                             std::span<const Point> points);

/// Per cell, the value/validity of the first layer in which that cell is
/// valid. All layers must share geometry; the list must be non-empty.
Grid combine_first_valid(std::span<const Grid> layers);

} // namespace aodfill
