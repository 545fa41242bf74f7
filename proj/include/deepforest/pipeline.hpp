#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepforest/data.hpp"
#include "deepforest/execution.hpp"
#include "deepforest/grid_search.hpp"
#include "deepforest/kriging.hpp"
#include "deepforest/metrics.hpp"
#include "deepforest/model_io.hpp"
#include "deepforest/preprocess.hpp"
#include "deepforest/raster.hpp"

namespace deepforest {

// `key = value` lines; '#' starts a comment. Relative paths resolve against
// the directory of the config file. Keys are listed in the README.
class PipelineConfig {
 public:
  PipelineConfig() = default;
  static PipelineConfig parse(std::string_view contents, std::filesystem::path base_dir = ".");
  static PipelineConfig load(const std::string& path);

  // CLI overrides; the key must be a known one.
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void set_assignment(std::string_view assignment);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Resolved against the base directory; nullopt when unset.
  std::optional<std::string> get_path(const std::string& key) const;
  std::string require_path(const std::string& key) const;

  // Entries under "<prefix>." with the prefix stripped, in key order.
  std::vector<std::pair<std::string, std::string>> with_prefix(const std::string& prefix) const;

  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::filesystem::path base_dir_ = ".";
  std::map<std::string, std::string> entries_;
};

struct MapFillOptions {
  std::vector<VariogramKind> candidates{VariogramKind::spherical, VariogramKind::exponential,
                                        VariogramKind::gaussian};
  std::size_t cv_folds = 5;
  std::size_t cv_sample = 300;     // variogram selection uses at most this many samples
  std::size_t global_limit = 400;  // above this, kriging uses the nearest `neighbours`
  std::size_t neighbours = 48;
  std::uint64_t seed = 0;
};

struct PipelineSettings {
  std::optional<std::string> station_csv;
  std::optional<std::string> satellite_dir;
  std::optional<std::string> meteo_dir;
  std::string output_dir = ".";
  std::optional<std::string> dataset;  // default <output_dir>/dataset.csv
  std::optional<std::string> model;    // default <output_dir>/model.bin
  std::optional<Date> start_date;
  std::optional<Date> end_date;

  bool naod = false;
  bool strict_qa = false;
  bool station_rh_is_fraction = false;
  WindowGates window;

  std::optional<std::uint64_t> seed;
  ModelFamily family = ModelFamily::cascade;
  ParamSet model_params;  // fixed overrides of the family defaults
  GridSpec grid;
  double train_fraction = 0.7;
  bool scale_target = true;

  MapFillOptions fill;
  std::size_t image_scale = 4;

  std::string dataset_path() const;
  std::string model_path() const;
  std::uint64_t require_seed() const;
  std::vector<Date> dates() const;  // inclusive range; UsageError when unset or empty
};

PipelineSettings load_settings(const PipelineConfig& config);

// Line-delimited JSON records.
class EventLog {
 public:
  void add(std::string_view event, const std::map<std::string, std::string>& text_fields = {},
           const std::map<std::string, double>& numeric_fields = {});
  const std::vector<std::string>& lines() const { return lines_; }
  std::string str() const;

 private:
  std::vector<std::string> lines_;
};

// Per band and day: meteorology interpolated from its raster by ordinary
// kriging with the variogram kind chosen by cross-validation.
struct DayInputs {
  Date date;
  RasterGrid aod;  // merged daily AOD (both sensors, regression fill)
  RasterGrid qa;
  SensorRegression regression;
  std::vector<OrdinaryKriging> meteo;  // in synth::kMeteoBands order
};

// nullopt when a required raster for the date is absent (logged).
std::optional<DayInputs> load_day_inputs(const PipelineSettings& settings, const Date& date, EventLog& log);

// Feature vector in schema order at (lat, lon): window statistics around
// `cell`, meteorology already interpolated to the point (kMeteoBands order).
// Without features, `gate` names the rejecting gate.
struct FeatureOutcome {
  std::optional<std::vector<double>> features;
  std::string gate;
};
FeatureOutcome assemble_features(const DayInputs& day, const FeatureSchema& schema, double lat, double lon,
                                 CellIndex cell, std::span<const double, 9> meteo, const WindowGates& gates);

// Standard schema, or the same with AOD replaced by nAOD = AOD / PBLH.
FeatureSchema pipeline_schema(bool naod);

struct GateDrop {
  std::string gate;
  std::size_t dropped = 0;
};

struct PrepareResult {
  Dataset dataset;
  std::size_t rows_in = 0;  // station days in the date range after daily averaging
  std::vector<GateDrop> drops;
  EventLog log;
  std::string variogram_csv;  // date,band,kind,nugget,psill,range
};

// Hourly station CSV columns: station_id, lat, long, timestamp, pm25,
// rh_percent (empty = missing).
std::vector<StationSeries> parse_station_csv(std::string_view contents, bool rh_is_fraction);

// May return an empty dataset; callers decide whether that is an error (the
// CLI writes the log and exits with a data error).
PrepareResult prepare(const PipelineSettings& settings);

struct TrainResult {
  ModelBundle bundle;
  GridSearchResult search;
  std::string cv_table;
  Dataset train;
  Dataset test;
};

TrainResult train(const Dataset& data, const PipelineSettings& settings, Execution exec = Execution::parallel);

struct EvaluationResult {
  MetricsReport overall;
  std::vector<std::pair<std::string, MetricsReport>> per_station;  // stations with >= 2 rows
  std::vector<double> actual;
  std::vector<double> predicted;
};

EvaluationResult evaluate(const ModelBundle& bundle, const Dataset& data, Execution exec = Execution::parallel);
std::string metrics_csv(const EvaluationResult& result);
std::string metrics_text(const EvaluationResult& result);
// station_id,date,actual,predicted
std::string predictions_csv(const Dataset& data, const EvaluationResult& result);

struct FillReport {
  std::string method = "none";  // none | constant | global | local | unavailable
  std::size_t filled = 0;
  std::optional<VariogramModel> model;
  std::vector<std::optional<double>> cv_rmse;
};

// Fills every missing cell from the valid ones; valid cells are untouched.
FillReport fill_missing_by_kriging(RasterGrid& grid, const MapFillOptions& options,
                                   Execution exec = Execution::parallel);

struct MapResult {
  RasterGrid predicted;  // model output only
  RasterGrid filled;
  std::size_t predicted_cells = 0;
  FillReport fill;
  EventLog log;
};

MapResult predict_map(const ModelBundle& bundle, const PipelineSettings& settings, const Date& date,
                      Execution exec = Execution::parallel);

// Per-cell mean over the days on which the cell is valid.
RasterGrid annual_map(std::span<const RasterGrid> daily);

// Binary PPM with the six fixed AQI colours; missing cells grey. Each cell
// becomes a scale x scale block.
std::string render_ppm(const RasterGrid& grid, std::size_t scale);

}  // namespace deepforest
