#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepforest/data.hpp"
#include "deepforest/kriging.hpp"

namespace deepforest {

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const CellIndex&) const = default;
};

// North-up georeferenced grid. Row 0 is the northern edge; x is longitude,
// y latitude (degrees). Missing cells are flagged in the mask and excluded
// from every statistic.
class RasterGrid {
 public:
  RasterGrid() = default;
  RasterGrid(std::size_t rows, std::size_t cols, double xll, double yll, double cell_size,
             std::string band = {});

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return rows_ * cols_; }
  double xll() const { return xll_; }
  double yll() const { return yll_; }
  double cell_size() const { return cell_size_; }
  const std::string& band() const { return band_; }
  void set_band(std::string band) { band_ = std::move(band); }

  double value(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  bool missing(std::size_t r, std::size_t c) const { return mask_[r * cols_ + c] != 0; }
  std::optional<double> get(std::size_t r, std::size_t c) const;
  void set(std::size_t r, std::size_t c, double v);
  void set_missing(std::size_t r, std::size_t c);
  std::size_t missing_count() const;

  // Cell centre as (x = longitude, y = latitude).
  Location center(std::size_t r, std::size_t c) const;
  Location upper_left_center() const { return center(0, 0); }
  // Cell containing the point; nullopt outside the grid.
  std::optional<CellIndex> cell_of(double x, double y) const;

  bool aligned_with(const RasterGrid& other) const;

  // Valid cells as kriging samples.
  std::vector<SpatialPoint> valid_points() const;

  bool operator==(const RasterGrid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double xll_ = 0.0;
  double yll_ = 0.0;
  double cell_size_ = 1.0;
  std::string band_;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

inline constexpr double kNoData = -9999.0;

// ESRI ASCII grid. Reads xllcorner/yllcorner or xllcenter/yllcenter;
// NODATA_value defaults to -9999. Writes corner form.
RasterGrid parse_ascii_grid(std::string_view contents, std::string band = {});
RasterGrid read_ascii_grid(const std::string& path, std::string band = {});
std::string ascii_grid_to_string(const RasterGrid& grid);
void write_ascii_grid(const std::string& path, const RasterGrid& grid);

// <dir>/<band>_<YYYY-MM-DD>.asc
std::string raster_path(const std::string& dir, std::string_view band, const Date& date);

}  // namespace deepforest
