#include "dcfair/checkpoint.hpp"

#include "json_io.hpp"

#include <fstream>
#include <sstream>

namespace dcfair::checkpoint {

using detail::Json;

std::string to_json_text(const Checkpoint& checkpoint) {
  const auto& params = checkpoint.model.params;
  Json layers = Json::array();
  for (const auto& layer : params.layers) {
    std::vector<double> weight;
    weight.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) weight.push_back(layer.weight(r, c));
    layers.push_back({{"rows", layer.weight.rows()},
                      {"cols", layer.weight.cols()},
                      {"weight", weight},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  const Json doc{{"format", "dcfair-mlp"},
                 {"version", kFormatVersion},
                 {"input_dim", params.input_dim()},
                 {"config", detail::to_json(checkpoint.model.config)},
                 {"layers", layers},
                 {"encoder", detail::to_json(checkpoint.encoder)}};
  // nlohmann writes doubles with max_digits10, which round-trips exactly.
  return doc.dump(1) + "\n";
}

Checkpoint from_json_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "dcfair-mlp") throw IoError("not a dcfair checkpoint");
    if (doc.at("version").get<int>() != kFormatVersion) throw IoError("unsupported checkpoint version");
    Checkpoint out;
    out.model.config = detail::mlp_from(doc.at("config"));
    std::size_t expected_rows = doc.at("input_dim").get<std::size_t>();
    for (const auto& l : doc.at("layers")) {
      const auto rows = l.at("rows").get<Eigen::Index>();
      const auto cols = l.at("cols").get<Eigen::Index>();
      const auto weight = l.at("weight").get<std::vector<double>>();
      const auto bias = l.at("bias").get<std::vector<double>>();
      if (static_cast<std::size_t>(rows) != expected_rows || weight.size() != static_cast<std::size_t>(rows * cols) ||
          bias.size() != static_cast<std::size_t>(cols)) {
        throw IoError("checkpoint layer shapes are inconsistent");
      }
      model::DenseLayer layer;
      layer.weight.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = weight[static_cast<std::size_t>(r * cols + c)];
      layer.bias = Eigen::Map<const Vector>(bias.data(), cols);
      out.model.params.layers.push_back(std::move(layer));
      expected_rows = static_cast<std::size_t>(cols);
    }
    if (out.model.params.layers.empty() || expected_rows != 1) throw IoError("checkpoint must end in a single output unit");
    out.model.params.refresh_stamp();
    out.encoder = detail::encoder_from(doc.at("encoder"));
    return out;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << to_json_text(checkpoint);
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

}  // namespace dcfair::checkpoint
