#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "deepforest/cascade.hpp"
#include "deepforest/data.hpp"
#include "deepforest/forest.hpp"
#include "deepforest/models.hpp"

namespace deepforest {

// Everything needed to predict on raw (unscaled) features and report on the
// original target scale.
struct ModelBundle {
  ModelFamily family = ModelFamily::linear;
  ParamSet params;
  std::uint64_t seed = 0;
  FeatureSchema schema;
  MinMaxScaler scaler;  // fitted on the training split, features and target
  FittedModel model;

  // Scales features, predicts, and maps predictions back to target units.
  std::vector<double> predict(const Matrix& raw_features, Execution exec = Execution::parallel) const;
};

// Binary container: 8-byte magic "DEEPFRST", u32 format version, then tagged
// blocks (strings are length-prefixed, integers and IEEE doubles are
// little-endian). Doubles are stored by bit pattern, so a round trip
// reproduces predictions exactly.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_forest(const ForestEstimator& forest);
ForestEstimator deserialize_forest(std::string_view bytes);

std::string serialize_cascade(const CascadeModel& model);
CascadeModel deserialize_cascade(std::string_view bytes);

std::string serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(std::string_view bytes);

void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);

}  // namespace deepforest
