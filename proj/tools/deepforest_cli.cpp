#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepforest/error.hpp"
#include "deepforest/execution.hpp"
#include "deepforest/model_io.hpp"
#include "deepforest/pipeline.hpp"
#include "deepforest/synth.hpp"
#include "deepforest/text.hpp"

namespace fs = std::filesystem;
using namespace deepforest;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int threads = 0;
  bool serial = false;

  Execution exec() const { return serial ? Execution::serial : Execution::parallel; }

  PipelineSettings settings(std::optional<std::uint64_t> seed = std::nullopt) const {
    PipelineConfig cfg = config.empty() ? PipelineConfig{} : PipelineConfig::load(config);
    for (const auto& o : overrides) cfg.set_assignment(o);
    if (seed) cfg.set("seed", std::to_string(*seed));
    const auto t = threads > 0 ? threads : cfg.get_int("threads", 0);
    if (t > 0) set_num_threads(static_cast<int>(t));
    return load_settings(cfg);
  }
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("-c,--config", c.config, "pipeline config file");
  if (config_required) opt->required();
  cmd->add_option("--set", c.overrides, "override a config key (key=value)");
  cmd->add_option("--threads", c.threads, "worker threads (0 = runtime default)");
  cmd->add_flag("--serial", c.serial, "use the single-threaded reference kernels");
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_drops(const PrepareResult& r) {
  std::cout << "rows in: " << r.rows_in << "\nrows out: " << r.dataset.size() << "\n";
  for (const auto& d : r.drops) std::cout << "dropped at " << d.gate << ": " << d.dropped << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PM2.5 estimation from satellite AOD with forest ensembles"};
  app.require_subcommand(1);

  Common prep_c;
  auto* prep = app.add_subcommand("prepare", "build the station-day dataset from raw inputs");
  add_common(prep, prep_c, true);

  Common train_c;
  std::uint64_t train_seed = 0;
  std::string train_dataset;
  auto* train_cmd = app.add_subcommand("train", "grid-search, fit and save a model");
  add_common(train_cmd, train_c, true);
  train_cmd->add_option("--seed", train_seed, "random seed")->required();
  train_cmd->add_option("--dataset", train_dataset, "dataset CSV (default from config)");

  Common eval_c;
  std::string eval_model, eval_dataset, eval_out;
  auto* eval = app.add_subcommand("evaluate", "metrics of a saved model on a dataset");
  add_common(eval, eval_c, false);
  eval->add_option("--model", eval_model, "model file (default from config)");
  eval->add_option("--dataset", eval_dataset, "dataset CSV (default <output_dir>/test.csv)");
  eval->add_option("--out", eval_out, "directory for the reports (default output_dir)");

  Common map_c;
  std::vector<std::string> map_dates;
  std::string map_model;
  bool map_all = false;
  auto* map = app.add_subcommand("predict-map", "daily PM2.5 raster and image");
  add_common(map, map_c, true);
  map->add_option("--date", map_dates, "date to map (YYYY-MM-DD); repeatable");
  map->add_flag("--all", map_all, "map every date in the configured range");
  map->add_option("--model", map_model, "model file (default from config)");

  std::vector<std::string> annual_inputs;
  std::string annual_dir, annual_output;
  std::size_t annual_scale = 4;
  auto* annual = app.add_subcommand("annual-map", "per-cell mean of daily rasters");
  annual->add_option("inputs", annual_inputs, "daily ASCII grids");
  annual->add_option("--from", annual_dir, "use every PM25_*.asc in this directory");
  annual->add_option("-o,--output", annual_output, "output ASCII grid")->required();
  annual->add_option("--image-scale", annual_scale, "pixels per cell in the PPM");

  std::uint64_t synth_seed = 0;
  std::string synth_out;
  bool synth_benchmark = false;
  synth::SceneOptions scene;
  synth::BenchmarkOptions bench;
  std::string synth_start = "2019-01-01";
  auto* syn = app.add_subcommand("synth", "generate a synthetic scene or benchmark table");
  syn->add_option("--seed", synth_seed, "random seed")->required();
  syn->add_option("-o,--out", synth_out, "output directory")->required();
  syn->add_flag("--benchmark", synth_benchmark, "write the tabular benchmark (benchmark.csv) instead");
  syn->add_option("--rows", bench.rows, "benchmark rows");
  syn->add_option("--noise", bench.noise_sd, "noise standard deviation (ug/m3)");
  syn->add_option("--days", scene.days, "scene days");
  syn->add_option("--start", synth_start, "first scene day");
  syn->add_option("--stations", scene.stations, "scene stations");
  syn->add_option("--grid-rows", scene.rows, "fine grid rows");
  syn->add_option("--grid-cols", scene.cols, "fine grid columns");
  syn->add_option("--missing-rate", scene.missing_rate, "per-sensor missing cell probability");
  syn->add_option("--window-pass-rate", scene.window_pass_rate, "fraction of spike-free 3x3 windows");
  syn->add_option("--outlier-rate", scene.outlier_rate, "fraction of outlier station days");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*prep) {
      const auto s = prep_c.settings();
      const auto r = prepare(s);
      text::write_file_atomic(in_dir(s.output_dir, "prepare_log.jsonl"), r.log.str());
      text::write_file_atomic(in_dir(s.output_dir, "variograms.csv"), r.variogram_csv);
      write_drops(r);
      if (r.dataset.empty()) throw DataError("prepare produced an empty dataset");
      write_dataset_csv(s.dataset_path(), r.dataset);
    } else if (*train_cmd) {
      auto s = train_c.settings(train_seed);
      const auto data = read_dataset_csv(train_dataset.empty() ? s.dataset_path() : train_dataset);
      const auto r = train(data, s, train_c.exec());
      save_bundle(s.model_path(), r.bundle);
      text::write_file_atomic(in_dir(s.output_dir, "cv_table.csv"), r.cv_table);
      write_dataset_csv(in_dir(s.output_dir, "train.csv"), r.train);
      write_dataset_csv(in_dir(s.output_dir, "test.csv"), r.test);
      EventLog log;
      log.add("train", {{"family", to_string(r.bundle.family)}, {"params", format_params(r.bundle.params)}},
              {{"train_rows", static_cast<double>(r.train.size())},
               {"test_rows", static_cast<double>(r.test.size())},
               {"best_cv_score", r.search.table[r.search.best_index].mean_score}});
      text::write_file_atomic(in_dir(s.output_dir, "train_log.jsonl"), log.str());
      std::cout << "best: " << format_params(r.search.best) << " (cv "
                << r.search.table[r.search.best_index].mean_score << ")\n";
    } else if (*eval) {
      const auto s = eval_c.settings();
      const auto bundle = load_bundle(eval_model.empty() ? s.model_path() : eval_model);
      const auto data = read_dataset_csv(eval_dataset.empty() ? in_dir(s.output_dir, "test.csv") : eval_dataset);
      const auto r = evaluate(bundle, data, eval_c.exec());
      const auto out = eval_out.empty() ? s.output_dir : eval_out;
      text::write_file_atomic(in_dir(out, "metrics.csv"), metrics_csv(r));
      text::write_file_atomic(in_dir(out, "metrics.txt"), metrics_text(r));
      text::write_file_atomic(in_dir(out, "predictions.csv"), predictions_csv(data, r));
      std::cout << format_metrics_text(r.overall) << "\n";
    } else if (*map) {
      const auto s = map_c.settings();
      const auto bundle = load_bundle(map_model.empty() ? s.model_path() : map_model);
      std::vector<Date> dates;
      if (map_all) dates = s.dates();
      for (const auto& d : map_dates) dates.push_back(Date::parse(d));
      if (dates.empty()) throw UsageError("predict-map needs --date or --all");
      std::string log_text;
      const auto maps = in_dir(s.output_dir, "maps");
      for (const auto& d : dates) {
        const auto r = predict_map(bundle, s, d, map_c.exec());
        write_ascii_grid(raster_path(maps, "PM25", d), r.filled);
        text::write_file_atomic(in_dir(maps, "PM25_" + d.to_string() + ".ppm"), render_ppm(r.filled, s.image_scale));
        for (const auto& l : r.log.lines()) log_text += l + "\n";
        std::cout << d.to_string() << ": " << r.predicted_cells << " cells predicted, " << r.fill.filled
                  << " filled (" << r.fill.method << ")\n";
      }
      text::write_file_atomic(in_dir(maps, "predict_log.jsonl"), log_text);
    } else if (*annual) {
      std::vector<std::string> files = annual_inputs;
      if (!annual_dir.empty()) {
        std::vector<std::string> found;
        for (const auto& e : fs::directory_iterator(annual_dir)) {
          const auto name = e.path().filename().string();
          if (name.starts_with("PM25_") && name.ends_with(".asc")) found.push_back(e.path().string());
        }
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
      }
      if (files.empty()) throw UsageError("annual-map needs input rasters");
      std::vector<RasterGrid> grids;
      for (const auto& f : files) grids.push_back(read_ascii_grid(f, "PM25"));
      const auto grid = annual_map(grids);
      write_ascii_grid(annual_output, grid);
      text::write_file_atomic(fs::path(annual_output).replace_extension(".ppm").string(),
                              render_ppm(grid, annual_scale));
      std::cout << "annual map from " << files.size() << " rasters\n";
    } else if (*syn) {
      if (synth_benchmark) {
        bench.seed = synth_seed;
        std::vector<double> truth;
        auto data = synth::make_benchmark(bench, &truth);
        write_dataset_csv(in_dir(synth_out, "benchmark.csv"), data);
        Dataset clean(data.schema());
        for (std::size_t i = 0; i < data.size(); ++i) {
          Sample s = data.rows()[i];
          s.target = truth[i];
          clean.add(std::move(s));
        }
        write_dataset_csv(in_dir(synth_out, "benchmark_truth.csv"), clean);
      } else {
        scene.seed = synth_seed;
        scene.start = Date::parse(synth_start);
        const auto sc = synth::make_scene(scene);
        synth::write_scene(synth_out, sc, scene);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
