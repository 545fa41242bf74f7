#include <algorithm>
#include <cmath>
#include <numbers>

#include "deepforest/rng.hpp"
#include "deepforest/synth.hpp"

namespace deepforest::synth {

double target_function(std::span<const double> f) {
  const double aod = f[0], u = f[1], lat = f[2], lon = f[3], t = f[4], pblh = f[6], ws = f[9],
               rh = f[12], doy = f[13];
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double hotspot =
      std::exp(-((lat - 35.76) * (lat - 35.76) + (lon - 51.45) * (lon - 51.45)) / (2.0 * 0.035 * 0.035));
  return 16.0 + 40.0 * aod / (0.25 + pblh / 1000.0) + 20.0 * aod * rh * rh +
         10.0 * std::cos(two_pi * (doy - 15.0) / 365.0) + 0.8 * std::max(0.0, 283.0 - t) - 2.5 * ws +
         24.0 * hotspot + 3.0 * u;
}

double dew_point(double t_kelvin, double rh) {
  constexpr double a = 17.62, b = 243.12;
  const double tc = t_kelvin - 273.15;
  const double g = std::log(rh) + a * tc / (b + tc);
  return b * g / (a - g) + 273.15;
}

Dataset make_benchmark(const BenchmarkOptions& options, std::vector<double>* truth) {
  Rng rng(derive_seed(options.seed, 0xbe7cu));
  Dataset data(FeatureSchema::standard());
  if (truth) truth->clear();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < options.rows; ++i) {
    const double doy = static_cast<double>(1 + rng.below(365));
    const double season = std::sin(two_pi * (doy - 105.0) / 365.0);
    const double aod = std::clamp(0.15 * std::exp(0.45 * rng.normal()), 0.01, 0.88);
    std::size_t good = 0;
    for (int k = 0; k < 9; ++k) good += rng.uniform() < 0.41 ? 1 : 0;
    const double u = static_cast<double>(good) / 9.0;
    const double lat = rng.uniform(35.60, 35.80);
    const double lon = rng.uniform(51.24, 51.51);
    const double t = 289.56 + 10.5 * season + 3.0 * rng.normal();
    const double rh = std::clamp(0.69 + 0.12 * rng.normal(), 0.41, 0.94);
    const double dt = dew_point(t, rh);
    const double pblh =
        std::clamp(620.0 * std::exp(0.55 * rng.normal() + 0.02 * (t - 289.56)), 27.75, 1981.97);
    const double sp = std::clamp(1.81 + 0.27 * rng.normal(), 1.30, 2.33);
    const double lai = std::clamp(0.50 + 0.01 * rng.normal(), 0.47, 0.53);
    const double ws = std::clamp(1.75 * std::exp(0.25 * rng.normal()), 0.70, 4.91);
    const double wd = std::clamp(-0.44 + 0.61 * rng.normal(), -2.31, 2.44);
    const double uv = std::clamp(
        100547.0 + 35000.0 * std::sin(two_pi * (doy - 80.0) / 365.0) + 8000.0 * rng.normal(), 33686.0,
        139511.0);

    Sample s;
    s.features = {aod, u, lat, lon, t, dt, pblh, sp, lai, ws, wd, uv, rh, doy};
    const double clean = target_function(s.features);
    s.target = clean + options.noise_sd * rng.normal();
    if (truth) truth->push_back(clean);
    data.add(std::move(s));
  }
  return data;
}

}  // namespace deepforest::synth
