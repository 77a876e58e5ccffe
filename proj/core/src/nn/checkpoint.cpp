#include "divrec/nn/checkpoint.hpp"

#include <fstream>

#include "divrec/errors.hpp"

namespace divrec::nn {

nlohmann::json params_to_json(const ParamList& params, const Adam* optimizer) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  auto& arr = j["params"] = nlohmann::json::array();
  for (const auto& p : params) {
    auto v = p.tensor.values();
    arr.push_back({{"name", p.name},
                   {"shape", p.tensor.shape()},
                   {"values", std::vector<double>(v.begin(), v.end())}});
  }
  if (optimizer != nullptr) {
    j["optimizer"] = {{"steps", optimizer->steps()},
                      {"m", optimizer->first_moments()},
                      {"v", optimizer->second_moments()}};
  }
  return j;
}

void params_from_json(const nlohmann::json& j, const ParamList& params, Adam* optimizer) {
  if (j.value("version", 0) != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + j.value("version", nlohmann::json(0)).dump());
  }
  const auto& arr = j.at("params");
  if (arr.size() != params.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(arr.size()) + " parameters, model has " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = arr[i];
    if (e.at("name").get<std::string>() != params[i].name) {
      throw ShapeError("checkpoint parameter " + e.at("name").get<std::string>() +
                       " where model expects " + params[i].name);
    }
    auto shape = e.at("shape").get<Shape>();
    if (shape != params[i].tensor.shape()) {
      throw ShapeError("checkpoint shape " + shape_str(shape) + " vs model shape " +
                       shape_str(params[i].tensor.shape()) + " for " + params[i].name);
    }
    auto values = e.at("values").get<std::vector<double>>();
    Tensor t = params[i].tensor;
    std::copy(values.begin(), values.end(), t.mutable_values().begin());
  }
  if (optimizer != nullptr && j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    optimizer->set_steps(o.at("steps").get<std::size_t>());
    optimizer->first_moments() = o.at("m").get<std::vector<std::vector<double>>>();
    optimizer->second_moments() = o.at("v").get<std::vector<std::vector<double>>>();
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamList& params, const Adam* optimizer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << params_to_json(params, optimizer).dump();
}

void load_checkpoint(const std::filesystem::path& path, const ParamList& params, Adam* optimizer) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  params_from_json(j, params, optimizer);
}

}  // namespace divrec::nn
