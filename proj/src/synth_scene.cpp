#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "deepforest/error.hpp"
#include "deepforest/rng.hpp"
#include "deepforest/synth.hpp"
#include "deepforest/text.hpp"

namespace deepforest::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Sum of K plane waves with random direction, wavelength and phase; roughly
// unit variance at any fixed point across draws.
class SmoothField {
 public:
  SmoothField(Rng& rng, double min_wavelength, double max_wavelength) {
    for (auto& w : waves_) {
      const double angle = rng.uniform(0.0, kTwoPi);
      const double wavelength = rng.uniform(min_wavelength, max_wavelength);
      w.kx = std::cos(angle) / wavelength;
      w.ky = std::sin(angle) / wavelength;
      w.phase = rng.uniform(0.0, kTwoPi);
    }
  }

  double operator()(double x, double y) const {
    double s = 0.0;
    for (const auto& w : waves_) s += std::cos(kTwoPi * (w.kx * x + w.ky * y) + w.phase);
    return s * std::sqrt(2.0 / static_cast<double>(waves_.size()));
  }

 private:
  struct Wave {
    double kx = 0.0, ky = 0.0, phase = 0.0;
  };
  std::array<Wave, 4> waves_;
};

struct DayFields {
  double doy;
  SmoothField aod, t, rh, pblh, sp, lai, ws, wd, uv;

  DayFields(Rng& rng, double doy_)
      : doy(doy_),
        aod(rng, 0.04, 0.15),
        t(rng, 0.15, 0.5),
        rh(rng, 0.15, 0.5),
        pblh(rng, 0.15, 0.5),
        sp(rng, 0.15, 0.5),
        lai(rng, 0.15, 0.5),
        ws(rng, 0.15, 0.5),
        wd(rng, 0.15, 0.5),
        uv(rng, 0.15, 0.5) {}

  double true_aod(double x, double y) const { return std::clamp(0.15 * std::exp(0.45 * aod(x, y)), 0.01, 0.88); }

  // T, DT, PBLH, SP, LAI, WS, WD, UV, RH (RH as a fraction).
  std::array<double, 9> meteo(double x, double y) const {
    const double season = std::sin(kTwoPi * (doy - 105.0) / 365.0);
    const double tk = 289.56 + 10.5 * season + 3.0 * t(x, y);
    const double r = std::clamp(0.69 + 0.12 * rh(x, y), 0.41, 0.94);
    const double dt = dew_point(tk, r);
    const double p = std::clamp(620.0 * std::exp(0.55 * pblh(x, y) + 0.02 * (tk - 289.56)), 27.75, 1981.97);
    const double s = std::clamp(1.81 + 0.27 * sp(x, y), 1.30, 2.33);
    const double l = std::clamp(0.50 + 0.01 * lai(x, y), 0.47, 0.53);
    const double w = std::clamp(1.75 * std::exp(0.25 * ws(x, y)), 0.70, 4.91);
    const double d = std::clamp(-0.44 + 0.61 * wd(x, y), -2.31, 2.44);
    const double u = std::clamp(
        100547.0 + 35000.0 * std::sin(kTwoPi * (doy - 80.0) / 365.0) + 8000.0 * uv(x, y), 33686.0, 139511.0);
    return {tk, dt, p, s, l, w, d, u, r};
  }
};

std::string key(std::string_view band, const Date& date) { return std::string(band) + "_" + date.to_string(); }

}  // namespace

Scene make_scene(const SceneOptions& o) {
  if (o.rows < 3 || o.cols < 3) throw UsageError("scene needs at least 3x3 cells");
  if (o.days == 0 || o.stations == 0) throw UsageError("scene needs at least one day and one station");
  if (o.meteo_factor == 0) throw UsageError("meteo_factor must be >= 1");
  if (!(o.window_pass_rate > 0.0 && o.window_pass_rate <= 1.0)) {
    throw UsageError("window_pass_rate must be in (0, 1]");
  }

  Scene scene;
  const double spike_p = 1.0 - std::pow(o.window_pass_rate, 1.0 / 9.0);

  Rng site_rng(derive_seed(o.seed, 0x5173u));
  std::vector<double> phases;
  for (std::size_t s = 0; s < o.stations; ++s) {
    StationSite site;
    site.id = "S" + std::string(s + 1 < 10 ? "0" : "") + std::to_string(s + 1);
    const double margin = 1.5 * o.cell_size;
    site.lon = site_rng.uniform(o.xll + margin, o.xll + static_cast<double>(o.cols) * o.cell_size - margin);
    site.lat = site_rng.uniform(o.yll + margin, o.yll + static_cast<double>(o.rows) * o.cell_size - margin);
    scene.sites.push_back(site);
    phases.push_back(site_rng.uniform(0.0, kTwoPi));
  }

  const double meteo_cell = o.cell_size * static_cast<double>(o.meteo_factor);
  const std::size_t meteo_rows = (o.rows + o.meteo_factor - 1) / o.meteo_factor;
  const std::size_t meteo_cols = (o.cols + o.meteo_factor - 1) / o.meteo_factor;

  std::string csv = "station_id,lat,long,timestamp,pm25,rh_percent\n";
  scene.truth = Dataset(FeatureSchema::standard());

  Date date = o.start;
  for (std::size_t day = 0; day < o.days; ++day, date = date.next()) {
    Rng rng(derive_seed(o.seed, 0x5ce0u, day));
    const DayFields fields(rng, static_cast<double>(date.day_of_year()));

    RasterGrid aqua(o.rows, o.cols, o.xll, o.yll, o.cell_size, "AOD_A");
    RasterGrid terra(o.rows, o.cols, o.xll, o.yll, o.cell_size, "AOD_T");
    RasterGrid qa(o.rows, o.cols, o.xll, o.yll, o.cell_size, "QA");
    for (std::size_t r = 0; r < o.rows; ++r) {
      for (std::size_t c = 0; c < o.cols; ++c) {
        const auto p = qa.center(r, c);
        const double truth = fields.true_aod(p.x, p.y);
        double code = 0.0;
        if (rng.uniform() >= o.best_qa_rate) code = static_cast<double>(1 + rng.below(3));
        const double obs_t = std::max(0.0, truth + 0.01 * rng.normal());
        const double obs_a = std::max(0.0, 0.9 * truth + 0.01 + 0.015 * rng.normal());
        auto place = [&](RasterGrid& g, double v) {
          if (rng.uniform() < o.missing_rate) return;
          if (rng.uniform() < spike_p) {
            v += 4.0;
            code = 3.0;
          }
          g.set(r, c, v);
        };
        place(terra, obs_t);
        place(aqua, obs_a);
        qa.set(r, c, code);
      }
    }

    std::array<RasterGrid, 9> meteo;
    for (std::size_t b = 0; b < meteo.size(); ++b) {
      meteo[b] = RasterGrid(meteo_rows, meteo_cols, o.xll, o.yll, meteo_cell, std::string(kMeteoBands[b]));
    }
    for (std::size_t r = 0; r < meteo_rows; ++r) {
      for (std::size_t c = 0; c < meteo_cols; ++c) {
        const auto p = meteo[0].center(r, c);
        const auto m = fields.meteo(p.x, p.y);
        for (std::size_t b = 0; b < meteo.size(); ++b) meteo[b].set(r, c, m[b]);
      }
    }

    for (std::size_t s = 0; s < scene.sites.size(); ++s) {
      const auto& site = scene.sites[s];
      const auto m = fields.meteo(site.lon, site.lat);
      const auto cell = qa.cell_of(site.lon, site.lat);
      std::size_t n_best = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const auto v = qa.get(cell->row + static_cast<std::size_t>(dr), cell->col + static_cast<std::size_t>(dc));
          n_best += v && *v == 0.0 ? 1 : 0;
        }
      }
      Sample sample;
      sample.features = {fields.true_aod(site.lon, site.lat),
                         static_cast<double>(n_best) / 9.0,
                         site.lat,
                         site.lon,
                         m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8],
                         fields.doy};
      const double clean = target_function(sample.features);
      sample.target = clean;
      sample.station_id = site.id;
      sample.date = date;
      scene.truth.add(std::move(sample));

      double pm_c = std::max(1.0, clean + o.noise_sd * rng.normal());
      if (rng.uniform() < o.outlier_rate) pm_c *= 6.0;
      const double rh_pct = 100.0 * m[8];
      for (int h = 0; h < 24; ++h) {
        const bool missing = rng.uniform() < o.hourly_missing_rate;
        const double pm = pm_c * (1.0 - rh_pct / 100.0) * (1.0 + 0.15 * std::sin(kTwoPi * h / 24.0 + phases[s]));
        std::string ts = date.to_string() + "T" + (h < 10 ? "0" : "") + std::to_string(h) + ":00:00";
        csv += site.id + "," + text::format_double(site.lat) + "," + text::format_double(site.lon) + "," + ts +
               "," + (missing ? std::string() : text::format_double(pm)) + "," + text::format_double(rh_pct) +
               "\n";
      }
    }

    scene.satellite.emplace(key("AOD_A", date), std::move(aqua));
    scene.satellite.emplace(key("AOD_T", date), std::move(terra));
    scene.satellite.emplace(key("QA", date), std::move(qa));
    for (std::size_t b = 0; b < meteo.size(); ++b) scene.meteo.emplace(key(kMeteoBands[b], date), std::move(meteo[b]));
  }
  scene.stations_csv = std::move(csv);
  return scene;
}

void write_scene(const std::string& dir, const Scene& scene, const SceneOptions& o) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  text::write_file_atomic((root / "stations.csv").string(), scene.stations_csv);
  for (const auto& [name, grid] : scene.satellite) {
    write_ascii_grid((root / "satellite" / (name + ".asc")).string(), grid);
  }
  for (const auto& [name, grid] : scene.meteo) {
    write_ascii_grid((root / "meteo" / (name + ".asc")).string(), grid);
  }
  write_dataset_csv((root / "truth.csv").string(), scene.truth);

  Date end = o.start;
  for (std::size_t d = 1; d < o.days; ++d) end = end.next();
  std::string cfg;
  cfg += "# generated scene; paths are relative to this file\n";
  cfg += "station_csv = stations.csv\n";
  cfg += "satellite_dir = satellite\n";
  cfg += "meteo_dir = meteo\n";
  cfg += "output_dir = out\n";
  cfg += "start_date = " + o.start.to_string() + "\n";
  cfg += "end_date = " + end.to_string() + "\n";
  cfg += "seed = " + std::to_string(o.seed) + "\n";
  cfg += "model.family = random_forest\n";
  cfg += "model.n_trees = 100\n";
  cfg += "grid.max_features = sqrt,0.5\n";
  text::write_file_atomic((root / "pipeline.cfg").string(), cfg);
}

}  // namespace deepforest::synth
