#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "divrec/nn/layers.hpp"
#include "divrec/nn/optim.hpp"

namespace divrec::nn {

inline constexpr int kCheckpointVersion = 1;

// JSON layout: {"version", "params": [{"name","shape","values"}], "optimizer"?}.
// Doubles are written in shortest round-trip form, so values reload bit-exactly.
nlohmann::json params_to_json(const ParamList& params, const Adam* optimizer = nullptr);
void params_from_json(const nlohmann::json& j, const ParamList& params, Adam* optimizer = nullptr);

void save_checkpoint(const std::filesystem::path& path, const ParamList& params,
                     const Adam* optimizer = nullptr);
void load_checkpoint(const std::filesystem::path& path, const ParamList& params,
                     Adam* optimizer = nullptr);

}  // namespace divrec::nn
