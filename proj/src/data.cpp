#include "deepforest/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "deepforest/error.hpp"
#include "deepforest/log.hpp"
#include "deepforest/rng.hpp"
#include "deepforest/text.hpp"

namespace deepforest {

namespace chr = std::chrono;

Date::Date(chr::year_month_day ymd) : ymd_(ymd) {
  if (!ymd_.ok()) throw DataError("invalid calendar date");
}

Date::Date(int year, unsigned month, unsigned day)
    : Date(chr::year_month_day{chr::year{year}, chr::month{month}, chr::day{day}}) {}

Date Date::parse(std::string_view iso) {
  iso = text::trim(iso);
  if (iso.size() < 10 || iso[4] != '-' || iso[7] != '-' ||
      (iso.size() > 10 && iso[10] != 'T' && iso[10] != ' ')) {
    throw DataError("expected ISO-8601 date, got '" + std::string(iso) + "'");
  }
  const auto y = text::parse_int(iso.substr(0, 4), "year");
  const auto m = text::parse_int(iso.substr(5, 2), "month");
  const auto d = text::parse_int(iso.substr(8, 2), "day");
  const chr::year_month_day ymd{chr::year{static_cast<int>(y)}, chr::month{static_cast<unsigned>(m)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(iso) + "'");
  return Date(ymd);
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd_.year()),
                static_cast<unsigned>(ymd_.month()), static_cast<unsigned>(ymd_.day()));
  return buf;
}

int Date::day_of_year() const {
  const chr::sys_days jan1{ymd_.year() / chr::January / 1};
  return static_cast<int>((sys_days() - jan1).count()) + 1;
}

int Date::year() const { return static_cast<int>(ymd_.year()); }

Date Date::next() const { return Date(chr::year_month_day{sys_days() + chr::days{1}}); }

FeatureSchema FeatureSchema::standard() {
  return {{"AOD", "U", "Lat", "Long", "T", "DT", "PBLH", "SP", "LAI", "WS", "WD", "UV", "RH", "DOY"},
          {"1", "1", "deg", "deg", "K", "K", "m", "1", "m2/m2", "m/s", "rad", "J/m2", "1", "day"}};
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

void FeatureSchema::validate() const {
  if (names.empty()) throw DataError("feature schema is empty");
  if (!units.empty() && units.size() != names.size()) {
    throw DataError("feature schema has mismatched unit list");
  }
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw DataError("feature schema has an empty name");
    if (!seen.insert(n).second) throw DataError("duplicate feature name '" + n + "'");
  }
}

bool Sample::complete() const {
  if (!target || !std::isfinite(*target)) return false;
  return std::all_of(features.begin(), features.end(), [](double v) { return std::isfinite(v); });
}

Dataset::Dataset(FeatureSchema schema) : schema_(std::move(schema)) { schema_.validate(); }

void Dataset::add(Sample sample) {
  if (sample.features.size() != schema_.size()) {
    throw DataError("sample has " + std::to_string(sample.features.size()) +
                    " features, schema expects " + std::to_string(schema_.size()));
  }
  rows_.push_back(std::move(sample));
}

Matrix Dataset::features() const {
  Matrix m(rows_.size(), schema_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    std::copy(rows_[r].features.begin(), rows_[r].features.end(), m.row(r).begin());
  }
  return m;
}

std::vector<double> Dataset::targets() const {
  std::vector<double> y;
  y.reserve(rows_.size());
  for (const auto& s : rows_) y.push_back(s.target.value_or(std::numeric_limits<double>::quiet_NaN()));
  return y;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(schema_);
  out.rows_.reserve(indices.size());
  for (auto i : indices) out.rows_.push_back(rows_.at(i));
  return out;
}

Dataset Dataset::complete_rows() const {
  Dataset out(schema_);
  for (const auto& s : rows_) {
    if (s.complete()) out.rows_.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

Dataset parse_dataset_csv(std::string_view contents) {
  std::istringstream in{std::string(contents)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset CSV is empty");
  const auto header = text::split(text::trim(line));

  FeatureSchema schema;
  std::optional<std::size_t> target_col, station_col, date_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = text::trim(header[c]);
    if (name == kTargetColumn) {
      target_col = c;
    } else if (name == "station_id") {
      station_col = c;
    } else if (name == "date") {
      date_col = c;
    } else {
      if (target_col) throw DataError("feature column '" + std::string(name) + "' after PM25");
      schema.names.emplace_back(name);
    }
  }
  if (!target_col) throw DataError("dataset CSV lacks a PM25 column");
  // Recover canonical units when the header matches the standard schema.
  const auto standard = FeatureSchema::standard();
  schema.units = schema.names == standard.names ? standard.units
                                                : std::vector<std::string>(schema.names.size(), "");
  Dataset data(schema);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line);
    if (fields.size() != header.size()) {
      throw DataError("dataset CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    Sample s;
    s.features.reserve(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
      s.features.push_back(text::parse_optional_double(fields[c], schema.names[c])
                               .value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    s.target = text::parse_optional_double(fields[*target_col], kTargetColumn);
    if (station_col) {
      const auto sid = text::trim(fields[*station_col]);
      if (!sid.empty()) s.station_id = std::string(sid);
    }
    if (date_col) {
      const auto d = text::trim(fields[*date_col]);
      if (!d.empty()) s.date = Date::parse(d);
    }
    data.add(std::move(s));
  }
  return data;
}

Dataset read_dataset_csv(const std::string& path) { return parse_dataset_csv(text::read_file(path)); }

std::string dataset_to_csv(const Dataset& data) {
  const auto& rows = data.rows();
  const bool with_station =
      std::any_of(rows.begin(), rows.end(), [](const Sample& s) { return s.station_id.has_value(); });
  const bool with_date =
      std::any_of(rows.begin(), rows.end(), [](const Sample& s) { return s.date.has_value(); });

  std::string out;
  for (const auto& n : data.schema().names) out += n + ",";
  out += kTargetColumn;
  if (with_station) out += ",station_id";
  if (with_date) out += ",date";
  out += '\n';
  for (const auto& s : rows) {
    for (double v : s.features) {
      if (std::isfinite(v)) out += text::format_double(v);
      out += ',';
    }
    if (s.target && std::isfinite(*s.target)) out += text::format_double(*s.target);
    if (with_station) out += "," + s.station_id.value_or("");
    if (with_date) out += "," + (s.date ? s.date->to_string() : std::string{});
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  text::write_file_atomic(path, dataset_to_csv(data));
}

// ---------------------------------------------------------------------------
// Scaling

double MinMaxScaler::scale(std::size_t feature, double value) const {
  if (degenerate[feature]) return 0.0;
  return (value - min[feature]) / (max[feature] - min[feature]);
}

double MinMaxScaler::scale_target(double value) const {
  if (!has_target()) throw DataError("scaler was fitted without target bounds");
  if (*target_max == *target_min) return 0.0;
  return (value - *target_min) / (*target_max - *target_min);
}

double MinMaxScaler::invert_target(double scaled) const {
  if (!has_target()) throw DataError("scaler was fitted without target bounds");
  return *target_min + scaled * (*target_max - *target_min);
}

Matrix MinMaxScaler::transform(const Matrix& features) const {
  if (features.cols() != min.size()) {
    throw DataError("scaler expects " + std::to_string(min.size()) + " features, got " +
                    std::to_string(features.cols()));
  }
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) out(r, c) = scale(c, features(r, c));
  }
  return out;
}

std::vector<double> MinMaxScaler::transform_targets(std::span<const double> targets) const {
  std::vector<double> out;
  out.reserve(targets.size());
  for (double t : targets) out.push_back(scale_target(t));
  return out;
}

std::vector<double> MinMaxScaler::invert_targets(std::span<const double> scaled) const {
  std::vector<double> out;
  out.reserve(scaled.size());
  for (double t : scaled) out.push_back(invert_target(t));
  return out;
}

MinMaxScaler fit_scaler(const Dataset& data, bool include_target) {
  if (data.empty()) throw DataError("cannot fit scaler on an empty dataset");
  const auto d = data.schema().size();
  MinMaxScaler sc;
  sc.schema = data.schema();
  sc.min.assign(d, std::numeric_limits<double>::infinity());
  sc.max.assign(d, -std::numeric_limits<double>::infinity());
  sc.degenerate.assign(d, false);
  for (const auto& s : data.rows()) {
    for (std::size_t c = 0; c < d; ++c) {
      const double v = s.features[c];
      if (!std::isfinite(v)) continue;
      sc.min[c] = std::min(sc.min[c], v);
      sc.max[c] = std::max(sc.max[c], v);
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    if (!std::isfinite(sc.min[c])) {
      throw DataError("feature '" + data.schema().names[c] + "' has no finite values");
    }
    if (sc.max[c] == sc.min[c]) {
      sc.degenerate[c] = true;
      log_warning("feature '" + data.schema().names[c] + "' is constant; it scales to 0");
    }
  }
  if (include_target) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : data.rows()) {
      if (s.target && std::isfinite(*s.target)) {
        lo = std::min(lo, *s.target);
        hi = std::max(hi, *s.target);
      }
    }
    if (!std::isfinite(lo)) throw DataError("target has no finite values");
    sc.target_min = lo;
    sc.target_max = hi;
  }
  return sc;
}

Dataset apply_scaler(const MinMaxScaler& scaler, const Dataset& data) {
  if (!(scaler.schema == data.schema())) throw DataError("dataset schema does not match scaler");
  Dataset out(data.schema());
  for (const auto& s : data.rows()) {
    Sample t = s;
    for (std::size_t c = 0; c < t.features.size(); ++c) t.features[c] = scaler.scale(c, s.features[c]);
    if (scaler.has_target() && t.target) t.target = scaler.scale_target(*t.target);
    out.add(std::move(t));
  }
  return out;
}

double invert_target(const MinMaxScaler& scaler, double scaled) { return scaler.invert_target(scaled); }

// ---------------------------------------------------------------------------
// Splitting

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double train_fraction,
                                                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train fraction must lie in (0, 1)");
  }
  if (n < 2) throw DataError("need at least 2 rows to split");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5u));
  rng.shuffle(perm);
  // The epsilon keeps exact products such as 10 * 0.7 from flooring to 6.
  auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double train_fraction,
                                             std::uint64_t seed) {
  auto [train, test] = split_indices(data.size(), train_fraction, seed);
  return {data.subset(train), data.subset(test)};
}

std::vector<Fold> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("k-fold needs k >= 2");
  if (k > n) {
    throw DataError("k-fold with k = " + std::to_string(k) + " exceeds row count " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xf01du));
  rng.shuffle(perm);

  std::vector<Fold> folds(k);
  std::vector<std::size_t> owner(n);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) owner[perm[pos++]] = f;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (owner[i] == f ? folds[f].valid : folds[f].train).push_back(i);
    }
  }
  return folds;
}

}  // namespace deepforest
