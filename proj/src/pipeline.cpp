#include "deepforest/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "deepforest/aqi.hpp"
#include "deepforest/error.hpp"
#include "deepforest/log.hpp"
#include "deepforest/rng.hpp"
#include "deepforest/synth.hpp"
#include "deepforest/text.hpp"

namespace deepforest {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kKnownKeys{
    "station_csv", "satellite_dir", "meteo_dir", "output_dir", "dataset", "model",
    "start_date", "end_date", "naod", "strict_qa", "station_rh_is_fraction",
    "window.min_valid", "window.max_std", "seed", "train_fraction", "scale_target",
    "kriging.candidates", "kriging.folds", "kriging.cv_sample", "kriging.global_limit",
    "kriging.neighbours", "image_scale", "threads",
};

bool known_key(const std::string& key) {
  if (kKnownKeys.contains(key)) return true;
  return key.starts_with("model.") || key.starts_with("grid.");
}

}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view contents, fs::path base_dir) {
  PipelineConfig cfg;
  cfg.base_dir_ = std::move(base_dir);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    const auto end = std::min(contents.find('\n', pos), contents.size());
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string value(text::trim(line.substr(eq + 1)));
    if (!known_key(key)) throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    cfg.entries_[key] = value;
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::string contents;
  try {
    contents = text::read_file(path);
  } catch (const DataError& e) {
    throw UsageError(std::string("cannot read config: ") + e.what());
  }
  return parse(contents, fs::path(path).parent_path());
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw UsageError("unknown config key '" + key + "'");
  entries_[key] = value;
}

void PipelineConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw UsageError("override must be key=value: " + std::string(assignment));
  set(std::string(text::trim(assignment.substr(0, eq))), std::string(text::trim(assignment.substr(eq + 1))));
}

std::optional<std::string> PipelineConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string PipelineConfig::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double PipelineConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    return text::parse_double(*v, key);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

long long PipelineConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    return text::parse_int(*v, key);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

bool PipelineConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "on" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "off" || *v == "0" || *v == "no") return false;
  throw UsageError("config key '" + key + "' expects true/false, got '" + *v + "'");
}

std::optional<std::string> PipelineConfig::get_path(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  const fs::path p(*v);
  return (p.is_absolute() ? p : base_dir_ / p).lexically_normal().string();
}

std::string PipelineConfig::require_path(const std::string& key) const {
  auto p = get_path(key);
  if (!p) throw UsageError("config key '" + key + "' is required");
  return *p;
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::with_prefix(const std::string& prefix) const {
  std::vector<std::pair<std::string, std::string>> out;
  const std::string full = prefix + ".";
  for (const auto& [k, v] : entries_) {
    if (k.starts_with(full)) out.emplace_back(k.substr(full.size()), v);
  }
  return out;
}

std::string PipelineSettings::dataset_path() const {
  return dataset.value_or((fs::path(output_dir) / "dataset.csv").string());
}

std::string PipelineSettings::model_path() const {
  return model.value_or((fs::path(output_dir) / "model.bin").string());
}

std::uint64_t PipelineSettings::require_seed() const {
  if (!seed) throw UsageError("a seed is required (--seed or config key 'seed')");
  return *seed;
}

std::vector<Date> PipelineSettings::dates() const {
  if (!start_date || !end_date) throw UsageError("start_date and end_date are required");
  if (*end_date < *start_date) throw UsageError("date range is empty: end_date precedes start_date");
  std::vector<Date> out;
  for (Date d = *start_date; d <= *end_date; d = d.next()) out.push_back(d);
  return out;
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (auto part : text::split(value)) {
    const auto t = text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::size_t positive_size(const PipelineConfig& cfg, const std::string& key, long long fallback) {
  const auto v = cfg.get_int(key, fallback);
  if (v < 1) throw UsageError("config key '" + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

Date parse_date_setting(const std::string& key, const std::string& value) {
  try {
    return Date::parse(value);
  } catch (const DataError& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

PipelineSettings load_settings(const PipelineConfig& cfg) {
  PipelineSettings s;
  s.station_csv = cfg.get_path("station_csv");
  s.satellite_dir = cfg.get_path("satellite_dir");
  s.meteo_dir = cfg.get_path("meteo_dir");
  if (!s.meteo_dir) s.meteo_dir = s.satellite_dir;
  s.output_dir = cfg.get_path("output_dir").value_or(cfg.base_dir().string().empty() ? "." : cfg.base_dir().string());
  s.dataset = cfg.get_path("dataset");
  s.model = cfg.get_path("model");
  if (auto v = cfg.get("start_date")) s.start_date = parse_date_setting("start_date", *v);
  if (auto v = cfg.get("end_date")) s.end_date = parse_date_setting("end_date", *v);

  s.naod = cfg.get_bool("naod", false);
  s.strict_qa = cfg.get_bool("strict_qa", false);
  s.station_rh_is_fraction = cfg.get_bool("station_rh_is_fraction", false);
  s.window.min_valid = static_cast<std::size_t>(std::max(0LL, cfg.get_int("window.min_valid", 3)));
  s.window.max_std = cfg.get_double("window.max_std", 0.5);

  if (auto v = cfg.get("seed")) {
    const auto seed = cfg.get_int("seed", 0);
    if (seed < 0) throw UsageError("seed must be >= 0, got " + *v);
    s.seed = static_cast<std::uint64_t>(seed);
  }
  s.family = parse_model_family(cfg.get_or("model.family", "cascade"));
  for (auto& [k, v] : cfg.with_prefix("model")) {
    if (k != "family") s.model_params.emplace_back(k, v);
  }
  for (auto& [k, v] : cfg.with_prefix("grid")) {
    if (k == "folds" || k == "scoring") continue;
    s.grid.axes.push_back({k, split_list(v)});
  }
  s.grid.folds = positive_size(cfg, "grid.folds", 5);
  const auto scoring = cfg.get_or("grid.scoring", "rmse");
  if (scoring == "rmse") {
    s.grid.scoring = Scoring::rmse;
  } else if (scoring == "mae") {
    s.grid.scoring = Scoring::mae;
  } else {
    throw UsageError("grid.scoring must be rmse or mae");
  }
  s.grid.validate();

  s.train_fraction = cfg.get_double("train_fraction", 0.7);
  if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0)) throw UsageError("train_fraction must be in (0, 1)");
  s.scale_target = cfg.get_bool("scale_target", true);

  if (auto v = cfg.get("kriging.candidates")) {
    s.fill.candidates.clear();
    for (const auto& name : split_list(*v)) s.fill.candidates.push_back(parse_variogram_kind(name));
    if (s.fill.candidates.empty()) throw UsageError("kriging.candidates is empty");
  }
  s.fill.cv_folds = positive_size(cfg, "kriging.folds", 5);
  s.fill.cv_sample = positive_size(cfg, "kriging.cv_sample", 300);
  s.fill.global_limit = positive_size(cfg, "kriging.global_limit", 400);
  s.fill.neighbours = positive_size(cfg, "kriging.neighbours", 48);
  s.fill.seed = s.seed.value_or(0);
  s.image_scale = positive_size(cfg, "image_scale", 4);
  return s;
}

void EventLog::add(std::string_view event, const std::map<std::string, std::string>& text_fields,
                   const std::map<std::string, double>& numeric_fields) {
  nlohmann::ordered_json j;
  j["event"] = event;
  for (const auto& [k, v] : text_fields) j[k] = v;
  for (const auto& [k, v] : numeric_fields) {
    if (std::isfinite(v)) {
      j[k] = v;
    } else {
      j[k] = nullptr;
    }
  }
  lines_.push_back(j.dump());
}

std::string EventLog::str() const {
  std::string out;
  for (const auto& l : lines_) out += l + "\n";
  return out;
}

FeatureSchema pipeline_schema(bool naod) {
  auto schema = FeatureSchema::standard();
  if (naod) {
    schema.names[0] = "nAOD";
    schema.units[0] = "1/m";
  }
  return schema;
}

namespace {

std::optional<RasterGrid> read_band(const std::string& dir, std::string_view band, const Date& date,
                                    EventLog& log) {
  const auto path = raster_path(dir, band, date);
  if (!fs::exists(path)) {
    log.add("raster_missing", {{"band", std::string(band)}, {"date", date.to_string()}, {"path", path}});
    log_warning("missing raster " + path);
    return std::nullopt;
  }
  return read_ascii_grid(path, std::string(band));
}

std::uint64_t date_seed(std::uint64_t seed, const Date& date, std::uint64_t stream) {
  return derive_seed(seed, stream, static_cast<std::uint64_t>(date.sys_days().time_since_epoch().count()));
}

bool is_naod_schema(const FeatureSchema& schema) { return !schema.names.empty() && schema.names[0] == "nAOD"; }

}  // namespace

std::optional<DayInputs> load_day_inputs(const PipelineSettings& s, const Date& date, EventLog& log) {
  if (!s.satellite_dir) throw UsageError("config key 'satellite_dir' is required");
  auto aqua = read_band(*s.satellite_dir, "AOD_A", date, log);
  auto terra = read_band(*s.satellite_dir, "AOD_T", date, log);
  auto qa = read_band(*s.satellite_dir, "QA", date, log);
  if (!aqua || !terra || !qa) return std::nullopt;
  if (!aqua->aligned_with(*terra) || !aqua->aligned_with(*qa)) {
    throw DataError("satellite rasters for " + date.to_string() + " are not aligned");
  }
  if (s.strict_qa) {
    *aqua = mask_non_best(*aqua, *qa);
    *terra = mask_non_best(*terra, *qa);
  }

  DayInputs day;
  day.date = date;
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t r = 0; r < qa->rows(); ++r) {
    for (std::size_t c = 0; c < qa->cols(); ++c) {
      const auto t = terra->get(r, c);
      const auto a = aqua->get(r, c);
      if (t && a) pairs.emplace_back(*t, *a);
    }
  }
  day.regression = fit_sensor_regression(pairs);
  std::map<std::string, double> reg{{"pairs", static_cast<double>(pairs.size())}};
  if (const auto& f = day.regression.aqua_to_terra) {
    reg["a2t_slope"] = f->slope;
    reg["a2t_intercept"] = f->intercept;
    reg["a2t_r2"] = f->r2;
  }
  if (const auto& f = day.regression.terra_to_aqua) {
    reg["t2a_slope"] = f->slope;
    reg["t2a_intercept"] = f->intercept;
    reg["t2a_r2"] = f->r2;
  }
  log.add("sensor_regression", {{"date", date.to_string()}}, reg);

  day.aod = RasterGrid(qa->rows(), qa->cols(), qa->xll(), qa->yll(), qa->cell_size(), "AOD");
  for (std::size_t r = 0; r < qa->rows(); ++r) {
    for (std::size_t c = 0; c < qa->cols(); ++c) {
      if (const auto m = merge_daily_aod(aqua->get(r, c), terra->get(r, c), day.regression)) day.aod.set(r, c, *m);
    }
  }
  day.qa = std::move(*qa);

  const auto& meteo_dir = s.meteo_dir ? *s.meteo_dir : *s.satellite_dir;
  for (std::size_t b = 0; b < synth::kMeteoBands.size(); ++b) {
    const auto band = synth::kMeteoBands[b];
    auto grid = read_band(meteo_dir, band, date, log);
    if (!grid) return std::nullopt;
    const auto points = grid->valid_points();
    if (points.empty()) {
      log.add("raster_empty", {{"band", std::string(band)}, {"date", date.to_string()}});
      return std::nullopt;
    }
    const auto folds = std::min(s.fill.cv_folds, points.size());
    const auto sel =
        folds >= 2 ? kriging_grid_search(points, s.fill.candidates, folds, date_seed(s.seed.value_or(0), date, b))
                   : KrigingSelection{s.fill.candidates[0], {s.fill.candidates[0], 0.0, 0.0, 1.0}, {}};
    std::map<std::string, double> fields{{"nugget", sel.model.nugget},
                                         {"psill", sel.model.psill},
                                         {"range", sel.model.range}};
    for (std::size_t c = 0; c < sel.cv_rmse.size() && c < s.fill.candidates.size(); ++c) {
      if (sel.cv_rmse[c]) fields["cv_rmse_" + to_string(s.fill.candidates[c])] = *sel.cv_rmse[c];
    }
    log.add("meteo_kriging", {{"band", std::string(band)}, {"date", date.to_string()}, {"kind", to_string(sel.kind)}},
            fields);
    day.meteo.emplace_back(points, sel.model);
  }
  return day;
}

FeatureOutcome assemble_features(const DayInputs& day, const FeatureSchema& schema, double lat, double lon,
                                 CellIndex cell, std::span<const double, 9> meteo, const WindowGates& gates) {
  FeatureOutcome out;
  const auto w = extract_window(day.aod, cell, gates);
  if (w.status == WindowStatus::too_few_valid) {
    out.gate = "window_valid";
    return out;
  }
  if (w.status == WindowStatus::too_dispersed) {
    out.gate = "window_std";
    return out;
  }
  double aod = *w.aod;
  if (is_naod_schema(schema)) {
    const auto n = normalize_aod_pblh(aod, meteo[2]);
    if (!n) {
      out.gate = "pblh";
      return out;
    }
    aod = *n;
  }
  const double u = compute_uncertainty(day.qa, cell);
  out.features = std::vector<double>{aod,      u,        lat,      lon,      meteo[0], meteo[1], meteo[2],
                                     meteo[3], meteo[4], meteo[5], meteo[6], meteo[7], meteo[8],
                                     static_cast<double>(day.date.day_of_year())};
  return out;
}

std::vector<StationSeries> parse_station_csv(std::string_view contents, bool rh_is_fraction) {
  std::vector<StationSeries> out;
  std::map<std::string, std::size_t> index;
  std::size_t pos = 0, line_no = 0;
  std::vector<std::string> header;
  std::map<std::string, std::size_t> col;
  while (pos < contents.size()) {
    const auto end = std::min(contents.find('\n', pos), contents.size());
    const auto line = text::trim(contents.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = text::split(line);
    if (header.empty()) {
      for (auto f : fields) header.emplace_back(text::trim(f));
      for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
      for (const char* name : {"station_id", "lat", "long", "timestamp", "pm25", "rh_percent"}) {
        if (!col.contains(name)) throw DataError(std::string("station CSV lacks column '") + name + "'");
      }
      continue;
    }
    if (fields.size() != header.size()) {
      throw DataError("station CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    const std::string id(text::trim(fields[col["station_id"]]));
    if (id.empty()) throw DataError("station CSV line " + std::to_string(line_no) + ": empty station_id");
    const double lat = text::parse_double(fields[col["lat"]], "lat");
    const double lon = text::parse_double(fields[col["long"]], "long");
    auto [it, inserted] = index.emplace(id, out.size());
    if (inserted) {
      out.push_back({id, lat, lon, {}});
    } else if (out[it->second].lat != lat || out[it->second].lon != lon) {
      throw DataError("station '" + id + "' changes location on line " + std::to_string(line_no));
    }
    StationReading r;
    r.timestamp = std::string(text::trim(fields[col["timestamp"]]));
    r.date = Date::parse(r.timestamp);
    r.pm25 = text::parse_optional_double(fields[col["pm25"]], "pm25");
    r.rh_percent = text::parse_optional_double(fields[col["rh_percent"]], "rh_percent");
    if (r.rh_percent && rh_is_fraction) *r.rh_percent *= 100.0;
    out[it->second].readings.push_back(std::move(r));
  }
  if (header.empty()) throw DataError("station CSV is empty");
  return out;
}

PrepareResult prepare(const PipelineSettings& s) {
  if (!s.station_csv) throw UsageError("config key 'station_csv' is required");
  const auto dates = s.dates();
  const std::set<Date> in_range(dates.begin(), dates.end());
  PrepareResult result;
  result.dataset = Dataset(pipeline_schema(s.naod));
  auto& log = result.log;
  if (s.station_rh_is_fraction) log.add("rh_conversion", {{"rule", "fractional RH multiplied by 100"}});

  const auto stations = parse_station_csv(text::read_file(*s.station_csv), s.station_rh_is_fraction);

  const std::vector<std::string> gate_order{"pm_missing", "humidity",     "iqr",          "raster_missing",
                                            "outside_raster", "window_valid", "window_std", "pblh"};
  std::map<std::string, std::size_t> drops;
  for (const auto& g : gate_order) drops[g] = 0;

  struct Candidate {
    std::size_t station;
    Date date;
    double pm;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const auto daily = daily_average(stations[i]);
    for (const auto& r : daily.readings) {
      if (!in_range.contains(r.date)) continue;
      ++result.rows_in;
      if (!r.pm25) {
        ++drops["pm_missing"];
        continue;
      }
      const auto corrected = r.rh_percent ? correct_pm_humidity(*r.pm25, *r.rh_percent) : std::nullopt;
      if (!corrected) {
        ++drops["humidity"];
        log.add("humidity_reject", {{"station_id", stations[i].station_id}, {"date", r.date.to_string()}},
                {{"pm25", *r.pm25}, {"rh_percent", r.rh_percent.value_or(std::nan(""))}});
        continue;
      }
      candidates.push_back({i, r.date, *corrected});
    }
  }

  std::vector<double> values;
  for (const auto& c : candidates) values.push_back(c.pm);
  const auto iqr = iqr_filter(values);
  log.add("iqr", {}, {{"q1", iqr.q1}, {"q3", iqr.q3}, {"outliers", static_cast<double>(iqr.outliers.size())}});
  drops["iqr"] = iqr.outliers.size();
  std::vector<Candidate> kept;
  for (auto i : iqr.inliers) kept.push_back(candidates[i]);
  std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) { return a.date < b.date; });

  std::string variograms = "date,band,kind,nugget,psill,range\n";
  std::size_t k = 0;
  while (k < kept.size()) {
    const Date date = kept[k].date;
    std::size_t end = k;
    while (end < kept.size() && kept[end].date == date) ++end;
    const auto day = load_day_inputs(s, date, log);
    if (!day) {
      drops["raster_missing"] += end - k;
      k = end;
      continue;
    }
    std::vector<Location> sites;
    for (std::size_t i = k; i < end; ++i) sites.push_back({stations[kept[i].station].lon, stations[kept[i].station].lat});
    std::vector<std::vector<KrigingPrediction>> meteo;
    for (const auto& ok : day->meteo) meteo.push_back(ok.predict(sites, Execution::serial));

    for (std::size_t i = k; i < end; ++i) {
      const auto& st = stations[kept[i].station];
      const auto cell = day->aod.cell_of(st.lon, st.lat);
      if (!cell) {
        ++drops["outside_raster"];
        continue;
      }
      std::array<double, 9> m{};
      for (std::size_t b = 0; b < m.size(); ++b) m[b] = meteo[b][i - k].value;
      const auto outcome = assemble_features(*day, result.dataset.schema(), st.lat, st.lon, *cell, m, s.window);
      if (!outcome.features) {
        ++drops[outcome.gate];
        log.add("gate_drop", {{"gate", outcome.gate}, {"station_id", st.station_id}, {"date", date.to_string()}});
        continue;
      }
      Sample sample;
      sample.features = *outcome.features;
      sample.target = kept[i].pm;
      sample.station_id = st.station_id;
      sample.date = date;
      result.dataset.add(std::move(sample));
    }
    k = end;
  }
  for (const auto& line : log.lines()) {
    const auto j = nlohmann::json::parse(line);
    if (j["event"] != "meteo_kriging") continue;
    variograms += j["date"].get<std::string>() + "," + j["band"].get<std::string>() + "," +
                  j["kind"].get<std::string>() + "," + text::format_double(j["nugget"].get<double>()) + "," +
                  text::format_double(j["psill"].get<double>()) + "," +
                  text::format_double(j["range"].get<double>()) + "\n";
  }
  result.variogram_csv = std::move(variograms);

  std::map<std::string, double> summary{{"rows_in", static_cast<double>(result.rows_in)},
                                        {"rows_out", static_cast<double>(result.dataset.size())}};
  for (const auto& g : gate_order) {
    result.drops.push_back({g, drops[g]});
    summary["dropped_" + g] = static_cast<double>(drops[g]);
  }
  log.add("prepare_summary", {}, summary);
  return result;
}

TrainResult train(const Dataset& data, const PipelineSettings& s, Execution exec) {
  const auto seed = s.require_seed();
  const auto complete = data.complete_rows();
  const std::size_t needed = 10 * s.grid.folds;
  if (complete.size() < needed) {
    throw DataError("training needs at least " + std::to_string(needed) + " complete rows, got " +
                    std::to_string(complete.size()));
  }
  TrainResult out;
  std::tie(out.train, out.test) = split_train_test(complete, s.train_fraction, seed);

  const auto scaler = fit_scaler(out.train, s.scale_target);
  const auto scaled = apply_scaler(scaler, out.train);
  const Matrix x = scaled.features();
  const auto y = scaled.targets();

  const auto base = family_fit_predict(s.family, exec);
  const ParamSet fixed = s.model_params;
  FitPredict fit_predict = [&](const Matrix& tx, std::span<const double> ty, const Matrix& vx, const ParamSet& p,
                               std::uint64_t fold_seed) { return base(tx, ty, vx, merge_params(fixed, p), fold_seed); };
  out.search = grid_search(x, y, fit_predict, s.grid, seed);
  out.cv_table = cv_table_csv(s.grid, out.search);

  const auto params = merge_params(fixed, out.search.best);
  out.bundle.family = s.family;
  out.bundle.params = merge_params(default_params(s.family), params);
  out.bundle.seed = seed;
  out.bundle.schema = data.schema();
  out.bundle.scaler = scaler;
  out.bundle.model = fit_model(s.family, params, x, y, seed, exec);
  return out;
}

namespace {

void check_schema(const ModelBundle& bundle, const FeatureSchema& schema) {
  if (bundle.schema.names != schema.names) {
    std::string expected, got;
    for (const auto& n : bundle.schema.names) expected += n + " ";
    for (const auto& n : schema.names) got += n + " ";
    throw DataError("model expects features [" + expected + "] but the dataset has [" + got + "]");
  }
}

}  // namespace

EvaluationResult evaluate(const ModelBundle& bundle, const Dataset& data, Execution exec) {
  check_schema(bundle, data.schema());
  const auto complete = data.complete_rows();
  if (complete.size() < 2) throw DataError("evaluation needs at least 2 complete rows");
  EvaluationResult out;
  out.actual = complete.targets();
  out.predicted = bundle.predict(complete.features(), exec);
  out.overall = compute_metrics(out.actual, out.predicted);

  std::map<std::string, std::vector<std::size_t>> by_station;
  for (std::size_t i = 0; i < complete.size(); ++i) {
    if (const auto& id = complete.rows()[i].station_id) by_station[*id].push_back(i);
  }
  for (const auto& [id, idx] : by_station) {
    if (idx.size() < 2) continue;
    out.per_station.emplace_back(id, compute_metrics(select(out.actual, idx), select(out.predicted, idx)));
  }
  return out;
}

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); }

std::string metrics_row(const std::string& scope, const MetricsReport& m) {
  return scope + "," + std::to_string(m.n) + "," + text::format_double(m.rmse) + "," + text::format_double(m.mae) +
         "," + optional_number(m.r2) + "," + optional_number(m.ape) + "\n";
}

}  // namespace

std::string metrics_csv(const EvaluationResult& r) {
  std::string out = "scope,n,rmse,mae,r2,ape\n" + metrics_row("all", r.overall);
  for (const auto& [id, m] : r.per_station) out += metrics_row("station:" + id, m);
  return out;
}

std::string metrics_text(const EvaluationResult& r) {
  std::string out = "overall\n" + format_metrics_text(r.overall);
  for (const auto& [id, m] : r.per_station) out += "\nstation " + id + "\n" + format_metrics_text(m);
  return out;
}

std::string predictions_csv(const Dataset& data, const EvaluationResult& r) {
  const auto complete = data.complete_rows();
  std::string out = "station_id,date,actual,predicted\n";
  for (std::size_t i = 0; i < complete.size(); ++i) {
    const auto& row = complete.rows()[i];
    out += row.station_id.value_or("") + "," + (row.date ? row.date->to_string() : std::string()) + "," +
           text::format_double(r.actual[i]) + "," + text::format_double(r.predicted[i]) + "\n";
  }
  return out;
}

FillReport fill_missing_by_kriging(RasterGrid& grid, const MapFillOptions& o, Execution exec) {
  FillReport report;
  std::vector<CellIndex> holes;
  std::vector<Location> targets;
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      if (!grid.missing(r, c)) continue;
      holes.push_back({r, c});
      targets.push_back(grid.center(r, c));
    }
  }
  if (holes.empty()) return report;
  const auto samples = grid.valid_points();
  if (samples.empty()) {
    report.method = "unavailable";
    log_warning("map fill: no predicted cells to krige from");
    return report;
  }
  const bool constant = std::all_of(samples.begin(), samples.end(),
                                    [&](const SpatialPoint& p) { return p.value == samples[0].value; });
  if (constant) {
    report.method = "constant";
    for (const auto& h : holes) grid.set(h.row, h.col, samples[0].value);
    report.filled = holes.size();
    return report;
  }

  std::vector<SpatialPoint> subset = samples;
  if (subset.size() > o.cv_sample) {
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(o.seed, 0xf111u));
    rng.shuffle(idx);
    idx.resize(o.cv_sample);
    std::sort(idx.begin(), idx.end());
    subset.clear();
    for (auto i : idx) subset.push_back(samples[i]);
  }
  VariogramModel model;
  try {
    const auto folds = std::min(o.cv_folds, subset.size());
    if (folds < 2) throw DataError("too few samples for variogram selection");
    const auto sel = kriging_grid_search(subset, o.candidates, folds, o.seed);
    model = sel.model;
    report.cv_rmse = sel.cv_rmse;
  } catch (const std::runtime_error& e) {
    double mean = 0.0, var = 0.0, max_d = 0.0;
    for (const auto& p : samples) mean += p.value;
    mean /= static_cast<double>(samples.size());
    for (const auto& p : samples) var += (p.value - mean) * (p.value - mean);
    var /= static_cast<double>(std::max<std::size_t>(samples.size(), 2) - 1);
    for (const auto& p : samples) {
      for (const auto& q : samples) max_d = std::max(max_d, std::hypot(p.x - q.x, p.y - q.y));
    }
    model = {o.candidates.front(), 0.0, var, max_d > 0.0 ? 0.5 * max_d : 1.0};
    log_warning(std::string("map fill: variogram selection failed (") + e.what() + "); using a default model");
  }
  report.model = model;
  std::vector<KrigingPrediction> preds;
  if (samples.size() <= o.global_limit) {
    report.method = "global";
    preds = krige_predict(samples, model, targets, exec);
  } else {
    report.method = "local";
    preds = krige_predict_local(samples, model, targets, o.neighbours, exec);
  }
  for (std::size_t i = 0; i < holes.size(); ++i) grid.set(holes[i].row, holes[i].col, preds[i].value);
  report.filled = holes.size();
  return report;
}

MapResult predict_map(const ModelBundle& bundle, const PipelineSettings& s, const Date& date, Execution exec) {
  MapResult out;
  const bool naod = is_naod_schema(bundle.schema);
  check_schema(bundle, pipeline_schema(naod));
  const auto day = load_day_inputs(s, date, out.log);
  if (!day) throw DataError("missing band raster for " + date.to_string());

  const auto& ref = day->aod;
  std::vector<Location> centres;
  for (std::size_t r = 0; r < ref.rows(); ++r) {
    for (std::size_t c = 0; c < ref.cols(); ++c) centres.push_back(ref.center(r, c));
  }
  std::vector<std::vector<KrigingPrediction>> meteo;
  for (const auto& ok : day->meteo) meteo.push_back(ok.predict(centres, exec));

  std::vector<std::size_t> cells;
  std::vector<double> flat;
  std::map<std::string, double> gate_counts;
  for (std::size_t i = 0; i < centres.size(); ++i) {
    const CellIndex cell{i / ref.cols(), i % ref.cols()};
    std::array<double, 9> m{};
    for (std::size_t b = 0; b < m.size(); ++b) m[b] = meteo[b][i].value;
    const auto f = assemble_features(*day, bundle.schema, centres[i].y, centres[i].x, cell, m, s.window);
    if (!f.features) {
      gate_counts["gate_" + f.gate] += 1.0;
      continue;
    }
    cells.push_back(i);
    flat.insert(flat.end(), f.features->begin(), f.features->end());
  }

  out.predicted = RasterGrid(ref.rows(), ref.cols(), ref.xll(), ref.yll(), ref.cell_size(), "PM25");
  if (!cells.empty()) {
    Matrix x(cells.size(), bundle.schema.size());
    std::copy(flat.begin(), flat.end(), x.values().begin());
    const auto pred = bundle.predict(x, exec);
    for (std::size_t k = 0; k < cells.size(); ++k) {
      out.predicted.set(cells[k] / ref.cols(), cells[k] % ref.cols(), pred[k]);
    }
  }
  out.predicted_cells = cells.size();
  out.filled = out.predicted;
  auto fill = s.fill;
  fill.seed = date_seed(s.seed.value_or(0), date, 0xf1u);
  out.fill = fill_missing_by_kriging(out.filled, fill, exec);

  std::map<std::string, std::string> text_fields{{"date", date.to_string()}, {"fill_method", out.fill.method}};
  if (out.fill.model) text_fields["variogram"] = to_string(out.fill.model->kind);
  gate_counts["cells"] = static_cast<double>(centres.size());
  gate_counts["predicted"] = static_cast<double>(out.predicted_cells);
  gate_counts["filled"] = static_cast<double>(out.fill.filled);
  if (out.fill.model) {
    gate_counts["nugget"] = out.fill.model->nugget;
    gate_counts["psill"] = out.fill.model->psill;
    gate_counts["range"] = out.fill.model->range;
  }
  out.log.add("predict_map", text_fields, gate_counts);
  return out;
}

RasterGrid annual_map(std::span<const RasterGrid> daily) {
  if (daily.empty()) throw DataError("annual map needs at least one daily raster");
  const auto& first = daily.front();
  for (const auto& g : daily) {
    if (!g.aligned_with(first)) throw DataError("daily rasters are not aligned");
  }
  RasterGrid out(first.rows(), first.cols(), first.xll(), first.yll(), first.cell_size(), first.band());
  for (std::size_t r = 0; r < first.rows(); ++r) {
    for (std::size_t c = 0; c < first.cols(); ++c) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& g : daily) {
        if (auto v = g.get(r, c)) {
          sum += *v;
          ++n;
        }
      }
      if (n > 0) out.set(r, c, sum / static_cast<double>(n));
    }
  }
  return out;
}

std::string render_ppm(const RasterGrid& grid, std::size_t scale) {
  static constexpr std::array<std::array<unsigned char, 3>, 6> kColours{{
      {0, 228, 0},
      {255, 255, 0},
      {255, 126, 0},
      {255, 0, 0},
      {143, 63, 151},
      {126, 0, 35},
  }};
  static constexpr std::array<unsigned char, 3> kMissing{128, 128, 128};
  if (scale == 0) throw UsageError("image scale must be >= 1");
  const std::size_t w = grid.cols() * scale, h = grid.rows() * scale;
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      const auto v = grid.get(r, c);
      const auto& rgb = v ? kColours[classify_aqi(std::max(0.0, *v)).category] : kMissing;
      for (std::size_t k = 0; k < scale; ++k) line.append(reinterpret_cast<const char*>(rgb.data()), 3);
    }
    for (std::size_t k = 0; k < scale; ++k) out += line;
  }
  return out;
}

}  // namespace deepforest
