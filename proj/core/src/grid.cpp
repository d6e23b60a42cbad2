#include "aodfill/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "aodfill/parallel.hpp"

namespace aodfill {

Grid::Grid(int n_cols, int n_rows, double x_origin, double y_origin,
           double cell_size, std::string band_tag)
    : n_cols_(n_cols),
      n_rows_(n_rows),
      x_origin_(x_origin),
      y_origin_(y_origin),
      cell_size_(cell_size),
      band_tag_(std::move(band_tag)) {
    if (n_cols < 1 || n_rows < 1)
        throw std::invalid_argument("grid dimensions must be >= 1");
    if (!(cell_size > 0.0))
        throw std::invalid_argument("cell_size must be positive");
    const auto n = static_cast<std::size_t>(n_cols) * static_cast<std::size_t>(n_rows);
    values_.assign(n, 0.0);
    validity_.assign(n, 0);
}

std::optional<CellIndex> Grid::cell_at(double x, double y) const {
    // Half-open cells: floor() puts an on-edge x in the cell to the right;
    // (y_origin - y)/cell puts an on-edge y in the cell below.
    const double fx = (x - x_origin_) / cell_size_;
    const double fy = (y_origin_ - y) / cell_size_;
    const double col = std::floor(fx);
    const double row = std::floor(fy);
    if (col < 0.0 || col >= static_cast<double>(n_cols_)) return std::nullopt;
    if (row < 0.0 || row >= static_cast<double>(n_rows_)) return std::nullopt;
    return CellIndex{static_cast<int>(col), static_cast<int>(row)};
}

void FilterConfig::validate() const {
    if (window < 3 || window % 2 == 0)
        throw std::invalid_argument("filter window must be an odd integer >= 3, got " +
                                    std::to_string(window));
    if (min_valid < 1)
        throw std::invalid_argument("min_valid must be >= 1");
    const long long cells = static_cast<long long>(window) * window;
    if (min_valid > cells)
        throw std::invalid_argument("min_valid exceeds window cell count");
}

Grid mean_filter(const Grid& g, const FilterConfig& cfg, int threads) {
    cfg.validate();
    if (!cfg.include_center && g.n_cols() == 1 && g.n_rows() == 1)
        throw std::invalid_argument(
            "mean_filter: neighborhood is empty for every cell of a 1x1 grid "
            "with include_center=false");

    Grid out = g.like(g.band_tag());
    const int radius = cfg.window / 2;
    const int n_cols = g.n_cols();
    const int n_rows = g.n_rows();

    parallel_chunks(static_cast<std::size_t>(n_rows), threads,
                    [&](std::size_t row_begin, std::size_t row_end) {
        for (std::size_t r = row_begin; r < row_end; ++r) {
            const int row = static_cast<int>(r);
            const int r0 = std::max(0, row - radius);
            const int r1 = std::min(n_rows - 1, row + radius);
            for (int col = 0; col < n_cols; ++col) {
                const int c0 = std::max(0, col - radius);
                const int c1 = std::min(n_cols - 1, col + radius);
                double sum = 0.0;
                int n = 0;
                for (int wr = r0; wr <= r1; ++wr) {
                    for (int wc = c0; wc <= c1; ++wc) {
                        if (!cfg.include_center && wr == row && wc == col) continue;
                        if (!g.valid(wc, wr)) continue;
                        sum += g.value(wc, wr);
                        ++n;
                    }
                }
                if (n >= cfg.min_valid) out.set(col, row, sum / n);
            }
        }
    });
    return out;
}

double coverage(const Grid& g) {
    std::size_t n_valid = 0;
    for (const char v : g.validity()) n_valid += static_cast<std::size_t>(v != 0);
    return static_cast<double>(n_valid) / static_cast<double>(g.cell_count());
}

Grid resample_nearest(const Grid& src, const Grid& tmpl) {
    Grid out = tmpl.like(src.band_tag());
    for (int row = 0; row < tmpl.n_rows(); ++row) {
        const double cy = tmpl.row_center_y(row);
        for (int col = 0; col < tmpl.n_cols(); ++col) {
            const double cx = tmpl.col_center_x(col);
            const auto cell = src.cell_at(cx, cy);
            if (!cell) continue;
            if (src.valid(cell->col, cell->row))
                out.set(col, row, src.value(cell->col, cell->row));
        }
    }
    return out;
}

std::vector<std::optional<double>> sample_at(const Grid& g,
                                             std::span<const Point> points) {
    std::vector<std::optional<double>> out;
    out.reserve(points.size());
    for (const Point& p : points) {
        const auto cell = g.cell_at(p.x, p.y);
        if (cell && g.valid(cell->col, cell->row))
            out.push_back(g.value(cell->col, cell->row));
        else
            out.push_back(std::nullopt);
    }
    return out;
}

Grid combine_first_valid(std::span<const Grid> layers) {
    if (layers.empty())
        throw std::invalid_argument("combine_first_valid: empty layer list");
    const Grid& first = layers.front();
    for (std::size_t i = 1; i < layers.size(); ++i) {
        if (!layers[i].same_geometry(first))
            throw std::invalid_argument(
                "combine_first_valid: layer " + std::to_string(i) +
                " does not match the geometry of layer 0");
    }
    Grid out = first.like(first.band_tag());
    for (int row = 0; row < first.n_rows(); ++row) {
        for (int col = 0; col < first.n_cols(); ++col) {
            for (const Grid& layer : layers) {
                if (layer.valid(col, row)) {
                    out.set(col, row, layer.value(col, row));
                    break;
                }
            }
        }
    }
    return out;
}

} // namespace aodfill
