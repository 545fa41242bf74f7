#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepforest/matrix.hpp"

namespace deepforest {

// Calendar day. Thin wrapper over std::chrono::year_month_day with ISO-8601
// parsing and day-of-year.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::year_month_day ymd);
  Date(int year, unsigned month, unsigned day);

  // Accepts "YYYY-MM-DD" and also a timestamp "YYYY-MM-DDThh:mm[:ss]" whose
  // time part is ignored.
  static Date parse(std::string_view iso);

  std::string to_string() const;
  int day_of_year() const;
  int year() const;
  Date next() const;
  std::chrono::sys_days sys_days() const { return std::chrono::sys_days{ymd_}; }

  auto operator<=>(const Date& other) const { return sys_days() <=> other.sys_days(); }
  bool operator==(const Date& other) const { return ymd_ == other.ymd_; }

 private:
  std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::month{1},
                                   std::chrono::day{1}};
};

// Ordered, uniquely named model inputs.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<std::string> units;

  // The 14 model inputs in canonical order:
  // AOD, U, Lat, Long, T, DT, PBLH, SP, LAI, WS, WD, UV, RH, DOY.
  static FeatureSchema standard();

  std::size_t size() const { return names.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  void validate() const;

  bool operator==(const FeatureSchema&) const = default;
};

inline constexpr std::string_view kTargetColumn = "PM25";

struct Sample {
  std::vector<double> features;
  std::optional<double> target;
  std::optional<std::string> station_id;
  std::optional<Date> date;

  bool complete() const;  // all features and the target finite
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(FeatureSchema schema);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<Sample>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  // Throws DataError when the feature count disagrees with the schema.
  void add(Sample sample);

  Matrix features() const;
  // Targets; missing targets become NaN.
  std::vector<double> targets() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // Rows whose features and target are all finite.
  Dataset complete_rows() const;

 private:
  FeatureSchema schema_;
  std::vector<Sample> rows_;
};

// CSV: header = schema names, PM25, then optional station_id and date
// columns. Missing values are empty fields.
Dataset read_dataset_csv(const std::string& path);
Dataset parse_dataset_csv(std::string_view contents);
std::string dataset_to_csv(const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);

// Min-max scaling of features (and optionally the target) onto [0, 1].
struct MinMaxScaler {
  FeatureSchema schema;
  std::vector<double> min;
  std::vector<double> max;
  std::vector<bool> degenerate;  // max == min; scales to 0.0
  std::optional<double> target_min;
  std::optional<double> target_max;

  bool has_target() const { return target_min.has_value() && target_max.has_value(); }

  double scale(std::size_t feature, double value) const;
  double scale_target(double value) const;
  double invert_target(double scaled) const;

  Matrix transform(const Matrix& features) const;
  std::vector<double> transform_targets(std::span<const double> targets) const;
  std::vector<double> invert_targets(std::span<const double> scaled) const;

  bool operator==(const MinMaxScaler&) const = default;
};

MinMaxScaler fit_scaler(const Dataset& data, bool include_target);
// Scales features and, when the scaler carries target bounds, targets.
// Values outside the fitted range are not clipped.
Dataset apply_scaler(const MinMaxScaler& scaler, const Dataset& data);
double invert_target(const MinMaxScaler& scaler, double scaled);

// Shuffled split; train receives floor(n * train_fraction) rows.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double train_fraction,
                                             std::uint64_t seed);
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double train_fraction,
                                                                            std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};

// k shuffled folds; validation sets partition [0, n) and differ in size by at
// most one (the first n % k folds get the extra index).
std::vector<Fold> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace deepforest
