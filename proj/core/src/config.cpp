#include "dcfair/config.hpp"

#include "json_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace dcfair::config {

namespace fs = std::filesystem;
using detail::get_or;
using detail::get_required;
using detail::Json;

namespace {

void reject_unknown(const Json& j, const char* where, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown field '") + key + "' in " + where);
  }
}

const Json& object_at(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_object()) throw ConfigError(std::string("'") + key + "' must be an object");
  return v;
}

template <typename T>
std::vector<T> list_or(const Json& j, const char* key, std::vector<T> fallback) {
  return get_or<std::vector<T>>(j, key, std::move(fallback));
}

// Wraps library validation errors so every config problem surfaces as a
// ConfigError naming the section.
template <typename F>
void check(const char* section, F&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.path.empty()) throw ConfigError("dataset.path is required");
  if (!fs::exists(dataset.path)) throw ConfigError("dataset file does not exist: " + dataset.path);
  check("dataset.schema", [&] { dataset.schema.validate(); });
  check("split", [&] { split.validate(); });
  check("mlp", [&] { mlp.validate(); });
  check("train", [&] { train.validate(); });
  check("sinkhorn", [&] { sinkhorn.validate(); });
  check("metrics", [&] { grid.validate(); });
  check("sweep", [&] { sweep.validate(); });
  if (calibrate_k && train.mode.variant != losses::FairnessVariant::DecisionCentric) {
    throw ConfigError("k_pct calibration only applies to the decision-centric mode");
  }
  if (bias) {
    if (bias->group > 1) throw ConfigError("bias.group must be 0 or 1");
    if (bias->rates.empty()) throw ConfigError("bias.rates must not be empty");
    for (double r : bias->rates)
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("bias rates must lie in [0, 1]");
    if (bias->scorer) check("bias.scorer", [&] { bias->scorer->validate(); });
  }
  if (tune) {
    if (tune->hidden_layers.empty() || tune->hidden_size.empty() || tune->dropout_prob.empty() ||
        tune->l2_weight.empty()) {
      throw ConfigError("tune: every search dimension needs at least one value");
    }
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

ExperimentConfig parse(const std::string& json_text, const std::string& base_dir) {
  Json root;
  try {
    root = Json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(root, "config",
                 {"dataset", "bias", "split", "mlp", "tune", "train", "sinkhorn", "metrics", "sweep", "tau", "out_dir"});

  ExperimentConfig c;
  try {
    const Json& ds = object_at(root, "dataset");
    reject_unknown(ds, "dataset", {"name", "path", "schema"});
    c.dataset.name = get_or<std::string>(ds, "name", "dataset");
    const fs::path path = get_required<std::string>(ds, "path");
    c.dataset.path = (path.is_absolute() ? path : fs::path(base_dir) / path).lexically_normal().string();
    c.dataset.schema = detail::schema_from(object_at(ds, "schema"));

    const double tau = get_or(root, "tau", 0.7);
    c.train.tau = tau;
    c.sweep.tau = tau;

    if (root.contains("bias")) {
      const Json& b = object_at(root, "bias");
      reject_unknown(b, "bias", {"group", "rates", "seed", "scorer"});
      BiasConfig bc;
      bc.group = static_cast<std::uint8_t>(get_or(b, "group", 0));
      bc.rates = get_required<std::vector<double>>(b, "rates");
      bc.seed = get_or<std::uint64_t>(b, "seed", 0);
      if (b.contains("scorer")) bc.scorer = detail::mlp_from(object_at(b, "scorer"));
      c.bias = bc;
    }
    if (root.contains("split")) {
      const Json& s = object_at(root, "split");
      reject_unknown(s, "split", {"ratios", "seed"});
      const auto ratios = list_or<double>(s, "ratios", {0.34, 0.33, 0.33});
      if (ratios.size() != 3) throw ConfigError("split.ratios needs three values (train, validation, test)");
      c.split.ratios = {ratios[0], ratios[1], ratios[2]};
      c.split.seed = get_or<std::uint64_t>(s, "seed", 0);
    }
    if (root.contains("mlp")) {
      const Json& m = object_at(root, "mlp");
      reject_unknown(m, "mlp", {"hidden_layers", "hidden_size", "dropout_prob", "l2_weight", "learning_rate", "init_seed"});
      c.mlp = detail::mlp_from(m);
    }
    if (root.contains("tune")) {
      const Json& t = object_at(root, "tune");
      reject_unknown(t, "tune", {"hidden_layers", "hidden_size", "dropout_prob", "l2_weight"});
      experiment::SearchSpace space;
      space.hidden_layers = list_or(t, "hidden_layers", space.hidden_layers);
      space.hidden_size = list_or(t, "hidden_size", space.hidden_size);
      space.dropout_prob = list_or(t, "dropout_prob", space.dropout_prob);
      space.l2_weight = list_or(t, "l2_weight", space.l2_weight);
      c.tune = space;
    }
    if (root.contains("train")) {
      const Json& t = object_at(root, "train");
      reject_unknown(t, "train",
                     {"batch_size", "warmup_epochs", "patience", "max_epochs", "lambda", "mode", "k_pct", "k_min",
                      "shuffle_seed"});
      c.train.batch_size = get_or<std::size_t>(t, "batch_size", c.train.batch_size);
      c.train.warmup_epochs = get_or(t, "warmup_epochs", c.train.warmup_epochs);
      c.train.patience = get_or(t, "patience", c.train.patience);
      c.train.max_epochs = get_or(t, "max_epochs", c.train.max_epochs);
      c.train.lambda = get_or(t, "lambda", c.train.lambda);
      c.train.k_min = get_or(t, "k_min", c.train.k_min);
      c.train.shuffle_seed = get_or<std::uint64_t>(t, "shuffle_seed", c.train.shuffle_seed);
      const auto variant = losses::parse_variant(get_or<std::string>(t, "mode", "none"));
      c.train.mode.variant = variant;
      if (variant == losses::FairnessVariant::DecisionCentric) {
        if (t.contains("k_pct")) {
          c.train.mode.k_pct = get_required<double>(t, "k_pct");
        } else {
          c.calibrate_k = true;
        }
      }
    }
    if (root.contains("sinkhorn")) {
      const Json& s = object_at(root, "sinkhorn");
      reject_unknown(s, "sinkhorn", {"epsilon", "max_iters", "tol"});
      c.sinkhorn.epsilon = get_or(s, "epsilon", c.sinkhorn.epsilon);
      c.sinkhorn.max_iters = get_or(s, "max_iters", c.sinkhorn.max_iters);
      c.sinkhorn.tol = get_or(s, "tol", c.sinkhorn.tol);
    }
    if (root.contains("metrics")) {
      const Json& m = object_at(root, "metrics");
      reject_unknown(m, "metrics", {"grid_points", "bandwidth"});
      c.grid.points = get_or<std::size_t>(m, "grid_points", c.grid.points);
      if (m.contains("bandwidth") && !m.at("bandwidth").is_null()) c.grid.fixed_bandwidth = get_required<double>(m, "bandwidth");
    }
    c.sweep.lambdas = experiment::SweepSpec::default_lambdas();
    if (root.contains("sweep")) {
      const Json& s = object_at(root, "sweep");
      reject_unknown(s, "sweep", {"lambdas", "modes", "seeds"});
      c.sweep.lambdas = list_or(s, "lambdas", c.sweep.lambdas);
      if (s.contains("modes")) {
        c.sweep.modes.clear();
        for (const auto& m : get_required<std::vector<std::string>>(s, "modes")) {
          c.sweep.modes.push_back(losses::parse_variant(m));
        }
      }
      c.sweep.seeds = list_or(s, "seeds", c.sweep.seeds);
    }
    c.sweep.dataset = c.dataset.name;
    if (c.bias && c.bias->rates.size() == 1) c.sweep.bias_rate = c.bias->rates.front();
    c.out_dir = get_or<std::string>(root, "out_dir", c.out_dir);
    if (!fs::path(c.out_dir).is_absolute()) c.out_dir = (fs::path(base_dir) / c.out_dir).lexically_normal().string();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const SpecError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  ExperimentConfig c = parse(buf.str(), parent.empty() ? "." : parent.string());
  c.source_path = path;
  return c;
}

std::string mlp_to_json(const model::MlpConfig& config) { return detail::to_json(config).dump(2) + "\n"; }

model::MlpConfig mlp_from_json(const std::string& json_text) {
  try {
    return detail::mlp_from(Json::parse(json_text));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("mlp config: ") + e.what());
  }
}

data::BiasSpec bias_spec(const ExperimentConfig& config, double rate) {
  if (!config.bias) throw ConfigError("config has no bias section");
  data::BiasSpec spec;
  spec.group = config.bias->group;
  spec.rate = rate;
  spec.scorer_config = config.bias->scorer.value_or(config.mlp);
  spec.seed = config.bias->seed;
  spec.batch_size = config.train.batch_size;
  spec.max_epochs = config.train.max_epochs;
  spec.patience = config.train.patience;
  return spec;
}

Prepared prepare(const ExperimentConfig& config) {
  config.validate();
  Prepared p;
  p.loaded = data::load_csv(config.dataset.path, config.dataset.schema);
  p.dataset = p.loaded.dataset;
  if (config.bias) {
    if (config.bias->rates.size() != 1) {
      throw ConfigError("training commands need exactly one bias rate (inject-bias accepts several)");
    }
    const double rate = config.bias->rates.front();
    p.bias_rate = rate;
    if (rate > 0.0) {
      const data::BiasSpec spec = bias_spec(config, rate);
      const auto ranking = data::rank_flip_candidates(p.dataset, spec);
      p.flipped = data::flip_count(ranking.ordered_candidates.size(), rate);
      p.dataset = data::apply_flips(p.dataset, ranking, rate);
    }
  }
  p.splits = data::split(p.dataset, config.split);
  return p;
}

}  // namespace dcfair::config
