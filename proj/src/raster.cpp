#include "deepforest/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "deepforest/error.hpp"
#include "deepforest/text.hpp"

namespace deepforest {

RasterGrid::RasterGrid(std::size_t rows, std::size_t cols, double xll, double yll, double cell_size,
                       std::string band)
    : rows_(rows),
      cols_(cols),
      xll_(xll),
      yll_(yll),
      cell_size_(cell_size),
      band_(std::move(band)),
      values_(rows * cols, 0.0),
      mask_(rows * cols, 1) {
  if (rows == 0 || cols == 0) throw DataError("raster must have at least one cell");
  if (!(cell_size > 0.0)) throw DataError("raster cell size must be > 0");
}

std::optional<double> RasterGrid::get(std::size_t r, std::size_t c) const {
  if (missing(r, c)) return std::nullopt;
  return value(r, c);
}

void RasterGrid::set(std::size_t r, std::size_t c, double v) {
  values_[r * cols_ + c] = v;
  mask_[r * cols_ + c] = std::isfinite(v) ? 0 : 1;
}

void RasterGrid::set_missing(std::size_t r, std::size_t c) {
  values_[r * cols_ + c] = 0.0;
  mask_[r * cols_ + c] = 1;
}

std::size_t RasterGrid::missing_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

Location RasterGrid::center(std::size_t r, std::size_t c) const {
  return {xll_ + (static_cast<double>(c) + 0.5) * cell_size_,
          yll_ + (static_cast<double>(rows_ - r) - 0.5) * cell_size_};
}

std::optional<CellIndex> RasterGrid::cell_of(double x, double y) const {
  const double fc = std::floor((x - xll_) / cell_size_);
  const double fr = std::floor((yll_ + static_cast<double>(rows_) * cell_size_ - y) / cell_size_);
  if (!(fc >= 0.0 && fr >= 0.0 && fc < static_cast<double>(cols_) && fr < static_cast<double>(rows_))) {
    return std::nullopt;
  }
  return CellIndex{static_cast<std::size_t>(fr), static_cast<std::size_t>(fc)};
}

bool RasterGrid::aligned_with(const RasterGrid& o) const {
  return rows_ == o.rows_ && cols_ == o.cols_ && xll_ == o.xll_ && yll_ == o.yll_ && cell_size_ == o.cell_size_;
}

std::vector<SpatialPoint> RasterGrid::valid_points() const {
  std::vector<SpatialPoint> pts;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      if (missing(r, c)) continue;
      const auto loc = center(r, c);
      pts.push_back({loc.x, loc.y, value(r, c)});
    }
  }
  return pts;
}

RasterGrid parse_ascii_grid(std::string_view contents, std::string band) {
  std::istringstream in{std::string(contents)};
  std::optional<double> ncols, nrows, xll, yll, cell;
  bool x_center = false, y_center = false;
  double nodata = kNoData;
  std::string key;
  // Header lines are "key value"; the first token that is a number starts the data.
  std::streampos data_start = in.tellg();
  while (in >> key) {
    std::string lower = key;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (!lower.empty() && (std::isdigit(static_cast<unsigned char>(lower[0])) || lower[0] == '-' ||
                           lower[0] == '+' || lower[0] == '.')) {
      break;
    }
    std::string val;
    if (!(in >> val)) throw DataError("ASCII grid: header key '" + key + "' has no value");
    const double v = text::parse_double(val, key);
    if (lower == "ncols") ncols = v;
    else if (lower == "nrows") nrows = v;
    else if (lower == "xllcorner") xll = v;
    else if (lower == "xllcenter") { xll = v; x_center = true; }
    else if (lower == "yllcorner") yll = v;
    else if (lower == "yllcenter") { yll = v; y_center = true; }
    else if (lower == "cellsize") cell = v;
    else if (lower == "nodata_value") nodata = v;
    else throw DataError("ASCII grid: unknown header key '" + key + "'");
    data_start = in.tellg();
  }
  if (!ncols || !nrows || !xll || !yll || !cell) throw DataError("ASCII grid: incomplete header");
  if (*ncols < 1 || *nrows < 1 || *ncols != std::floor(*ncols) || *nrows != std::floor(*nrows)) {
    throw DataError("ASCII grid: bad dimensions");
  }
  if (x_center) *xll -= 0.5 * *cell;
  if (y_center) *yll -= 0.5 * *cell;

  RasterGrid g(static_cast<std::size_t>(*nrows), static_cast<std::size_t>(*ncols), *xll, *yll, *cell,
               std::move(band));
  in.clear();
  in.seekg(data_start);
  std::string tok;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (!(in >> tok)) throw DataError("ASCII grid: fewer values than nrows * ncols");
      const double v = text::parse_double(tok, "grid value");
      if (v == nodata || !std::isfinite(v)) {
        g.set_missing(r, c);
      } else {
        g.set(r, c, v);
      }
    }
  }
  if (in >> tok) throw DataError("ASCII grid: more values than nrows * ncols");
  return g;
}

RasterGrid read_ascii_grid(const std::string& path, std::string band) {
  return parse_ascii_grid(text::read_file(path), std::move(band));
}

std::string ascii_grid_to_string(const RasterGrid& g) {
  std::string out;
  out += "ncols " + std::to_string(g.cols()) + "\n";
  out += "nrows " + std::to_string(g.rows()) + "\n";
  out += "xllcorner " + text::format_double(g.xll()) + "\n";
  out += "yllcorner " + text::format_double(g.yll()) + "\n";
  out += "cellsize " + text::format_double(g.cell_size()) + "\n";
  out += "NODATA_value " + text::format_double(kNoData) + "\n";
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c) out += ' ';
      out += g.missing(r, c) ? text::format_double(kNoData) : text::format_double(g.value(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_ascii_grid(const std::string& path, const RasterGrid& grid) {
  text::write_file_atomic(path, ascii_grid_to_string(grid));
}

std::string raster_path(const std::string& dir, std::string_view band, const Date& date) {
  return (std::filesystem::path(dir) / (std::string(band) + "_" + date.to_string() + ".asc")).string();
}

}  // namespace deepforest
