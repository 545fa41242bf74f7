#include "deepforest/model_io.hpp"

#include <bit>
#include <cstring>

#include "deepforest/error.hpp"
#include "deepforest/text.hpp"

namespace deepforest {

namespace {

constexpr std::string_view kMagic = "DEEPFRST";

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void header() {
    out_.append(kMagic);
    u32(kModelFormatVersion);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void expect(std::string_view tag) {
    const auto got = str();
    if (got != tag) throw DataError("model file: expected block '" + std::string(tag) + "', found '" + got + "'");
  }
  void header() {
    need(kMagic.size());
    if (in_.substr(0, kMagic.size()) != kMagic) throw DataError("not a model file (bad magic)");
    pos_ = kMagic.size();
    const auto version = u32();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version));
    }
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("model file is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_tree_config(Writer& w, const TreeConfig& t) {
  w.i32(t.max_depth);
  w.u64(t.min_samples_leaf);
  w.u8(static_cast<std::uint8_t>(t.max_features.rule));
  w.f64(t.max_features.value);
  w.u8(static_cast<std::uint8_t>(t.split_mode));
}

TreeConfig read_tree_config(Reader& r) {
  TreeConfig t;
  t.max_depth = r.i32();
  t.min_samples_leaf = r.u64();
  const auto rule = r.u8();
  if (rule > 3) throw DataError("model file: bad max_features rule");
  t.max_features.rule = static_cast<MaxFeatures::Rule>(rule);
  t.max_features.value = r.f64();
  const auto mode = r.u8();
  if (mode > 1) throw DataError("model file: bad split mode");
  t.split_mode = static_cast<SplitMode>(mode);
  return t;
}

void write_forest(Writer& w, const ForestEstimator& f) {
  w.str("forest");
  w.str(to_string(f.config.kind));
  w.u64(f.config.n_trees);
  write_tree_config(w, f.config.tree);
  w.u8(f.config.bootstrap ? 1 : 0);
  w.u64(f.seed);
  w.u64(f.trees.size());
  for (const auto& t : f.trees) {
    w.str("tree");
    w.u64(t.n_features());
    w.u64(t.nodes().size());
    for (const auto& n : t.nodes()) {
      w.f64(n.value);
      w.i32(n.feature);
      w.i32(n.left);
      w.i32(n.right);
      w.u32(n.n_samples);
    }
  }
}

ForestEstimator read_forest(Reader& r) {
  r.expect("forest");
  ForestEstimator f;
  f.config.kind = parse_forest_kind(r.str());
  f.config.n_trees = r.u64();
  f.config.tree = read_tree_config(r);
  f.config.bootstrap = r.u8() != 0;
  f.seed = r.u64();
  const auto n_trees = r.u64();
  if (n_trees != f.config.n_trees) throw DataError("model file: tree count disagrees with config");
  f.trees.reserve(n_trees);
  for (std::uint64_t i = 0; i < n_trees; ++i) {
    r.expect("tree");
    const auto n_features = r.u64();
    const auto n_nodes = r.u64();
    std::vector<DecisionTree::Node> nodes(n_nodes);
    for (auto& n : nodes) {
      n.value = r.f64();
      n.feature = r.i32();
      n.left = r.i32();
      n.right = r.i32();
      n.n_samples = r.u32();
    }
    DecisionTree tree(n_features, std::move(nodes));
    tree.validate();
    f.trees.push_back(std::move(tree));
  }
  return f;
}

void write_cascade(Writer& w, const CascadeModel& m) {
  const auto& c = m.config;
  w.str("cascade");
  w.u8(c.n_layers ? 1 : 0);
  w.u64(c.n_layers.value_or(0));
  w.u64(c.max_auto_layers);
  w.f64(c.auto_tolerance);
  w.u64(c.n_random_forests);
  w.u64(c.n_extra_trees);
  w.u64(c.trees_per_estimator);
  write_tree_config(w, c.tree);
  w.u8(static_cast<std::uint8_t>(c.augmentation));
  w.u64(c.augmentation_folds);
  w.u64(c.seed);
  w.u64(m.n_inputs);
  w.u64(m.layers.size());
  for (const auto& layer : m.layers) {
    w.u64(layer.size());
    for (const auto& f : layer) write_forest(w, f);
  }
  w.u64(m.head.size());
  for (const auto& f : m.head) write_forest(w, f);
  w.u64(m.layer_validation_rmse.size());
  for (double v : m.layer_validation_rmse) w.f64(v);
}

CascadeModel read_cascade(Reader& r) {
  r.expect("cascade");
  CascadeModel m;
  auto& c = m.config;
  const bool fixed = r.u8() != 0;
  const auto n_layers = r.u64();
  c.n_layers = fixed ? std::optional<std::size_t>(n_layers) : std::nullopt;
  c.max_auto_layers = r.u64();
  c.auto_tolerance = r.f64();
  c.n_random_forests = r.u64();
  c.n_extra_trees = r.u64();
  c.trees_per_estimator = r.u64();
  c.tree = read_tree_config(r);
  const auto aug = r.u8();
  if (aug > 1) throw DataError("model file: bad augmentation mode");
  c.augmentation = static_cast<AugmentationMode>(aug);
  c.augmentation_folds = r.u64();
  c.seed = r.u64();
  m.n_inputs = r.u64();
  const auto layers = r.u64();
  for (std::uint64_t j = 0; j < layers; ++j) {
    const auto n = r.u64();
    if (n != c.estimators_per_layer()) throw DataError("model file: layer size disagrees with config");
    std::vector<ForestEstimator> layer;
    for (std::uint64_t e = 0; e < n; ++e) layer.push_back(read_forest(r));
    m.layers.push_back(std::move(layer));
  }
  const auto heads = r.u64();
  for (std::uint64_t e = 0; e < heads; ++e) m.head.push_back(read_forest(r));
  const auto n_rmse = r.u64();
  for (std::uint64_t i = 0; i < n_rmse; ++i) m.layer_validation_rmse.push_back(r.f64());
  return m;
}

void write_linear(Writer& w, const LinearModel& m) {
  w.str("linear");
  w.u64(m.coefficients.size());
  for (double c : m.coefficients) w.f64(c);
  w.f64(m.intercept);
}

LinearModel read_linear(Reader& r) {
  r.expect("linear");
  LinearModel m;
  m.coefficients.resize(r.u64());
  for (auto& c : m.coefficients) c = r.f64();
  m.intercept = r.f64();
  return m;
}

void write_strings(Writer& w, const std::vector<std::string>& v) {
  w.u64(v.size());
  for (const auto& s : v) w.str(s);
}

std::vector<std::string> read_strings(Reader& r) {
  std::vector<std::string> v(r.u64());
  for (auto& s : v) s = r.str();
  return v;
}

void write_doubles(Writer& w, const std::vector<double>& v) {
  w.u64(v.size());
  for (double d : v) w.f64(d);
}

std::vector<double> read_doubles(Reader& r) {
  std::vector<double> v(r.u64());
  for (auto& d : v) d = r.f64();
  return v;
}

void finish(Reader& r) {
  r.expect("end");
  if (!r.at_end()) throw DataError("model file has trailing bytes");
}

}  // namespace

std::vector<double> ModelBundle::predict(const Matrix& raw_features, Execution exec) const {
  const auto scaled = predict_model(model, scaler.transform(raw_features), exec);
  return scaler.invert_targets(scaled);
}

std::string serialize_forest(const ForestEstimator& forest) {
  Writer w;
  w.header();
  write_forest(w, forest);
  w.str("end");
  return w.take();
}

ForestEstimator deserialize_forest(std::string_view bytes) {
  Reader r(bytes);
  r.header();
  auto f = read_forest(r);
  finish(r);
  return f;
}

std::string serialize_cascade(const CascadeModel& model) {
  Writer w;
  w.header();
  write_cascade(w, model);
  w.str("end");
  return w.take();
}

CascadeModel deserialize_cascade(std::string_view bytes) {
  Reader r(bytes);
  r.header();
  auto m = read_cascade(r);
  finish(r);
  return m;
}

std::string serialize_bundle(const ModelBundle& b) {
  Writer w;
  w.header();
  w.str("bundle");
  w.str(to_string(b.family));
  w.u64(b.params.size());
  for (const auto& [k, v] : b.params) {
    w.str(k);
    w.str(v);
  }
  w.u64(b.seed);
  w.str("schema");
  write_strings(w, b.schema.names);
  write_strings(w, b.schema.units);
  w.str("scaler");
  write_doubles(w, b.scaler.min);
  write_doubles(w, b.scaler.max);
  w.u64(b.scaler.degenerate.size());
  for (bool d : b.scaler.degenerate) w.u8(d ? 1 : 0);
  w.u8(b.scaler.has_target() ? 1 : 0);
  w.f64(b.scaler.target_min.value_or(0.0));
  w.f64(b.scaler.target_max.value_or(0.0));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          write_linear(w, m);
        } else if constexpr (std::is_same_v<T, ForestEstimator>) {
          write_forest(w, m);
        } else {
          write_cascade(w, m);
        }
      },
      b.model);
  w.str("end");
  return w.take();
}

ModelBundle deserialize_bundle(std::string_view bytes) {
  Reader r(bytes);
  r.header();
  r.expect("bundle");
  ModelBundle b;
  b.family = parse_model_family(r.str());
  const auto n_params = r.u64();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    auto k = r.str();
    auto v = r.str();
    b.params.emplace_back(std::move(k), std::move(v));
  }
  b.seed = r.u64();
  r.expect("schema");
  b.schema.names = read_strings(r);
  b.schema.units = read_strings(r);
  b.schema.validate();
  r.expect("scaler");
  b.scaler.schema = b.schema;
  b.scaler.min = read_doubles(r);
  b.scaler.max = read_doubles(r);
  b.scaler.degenerate.resize(r.u64());
  for (std::size_t i = 0; i < b.scaler.degenerate.size(); ++i) b.scaler.degenerate[i] = r.u8() != 0;
  const bool has_target = r.u8() != 0;
  const double tmin = r.f64();
  const double tmax = r.f64();
  if (has_target) {
    b.scaler.target_min = tmin;
    b.scaler.target_max = tmax;
  }
  if (b.scaler.min.size() != b.schema.size() || b.scaler.max.size() != b.schema.size() ||
      b.scaler.degenerate.size() != b.schema.size()) {
    throw DataError("model file: scaler width disagrees with schema");
  }
  switch (b.family) {
    case ModelFamily::linear:
      b.model = read_linear(r);
      break;
    case ModelFamily::random_forest:
    case ModelFamily::extra_trees:
      b.model = read_forest(r);
      break;
    case ModelFamily::cascade:
      b.model = read_cascade(r);
      break;
  }
  finish(r);
  return b;
}

void save_bundle(const std::string& path, const ModelBundle& bundle) {
  text::write_file_atomic(path, serialize_bundle(bundle));
}

ModelBundle load_bundle(const std::string& path) { return deserialize_bundle(text::read_file(path)); }

}  // namespace deepforest
