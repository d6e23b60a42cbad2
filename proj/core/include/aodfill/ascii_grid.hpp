#pragma once

#include <filesystem>

#include "aodfill/grid.hpp"

namespace aodfill {

/// Reads an ESRI ASCII grid. Header keys (ncols, nrows, xllcorner,
/// yllcorner, cellsize, NODATA_value) are matched case-insensitively; the
/// NODATA_value line may be absent, in which case every cell is valid.
/// Cells exactly equal to the nodata value become invalid. The band tag is
/// taken from the filename, convention `<tag>_<YYYY-MM-DD>.asc` (falls back
/// to the whole stem when no date suffix is present).
Grid read_ascii_grid(const std::filesystem::path& path);

/// Writes an ESRI ASCII grid, top row first; invalid cells emit `nodata`.
void write_ascii_grid(const Grid& g, const std::filesystem::path& path,
                      double nodata = -9999.0);

} // namespace aodfill
