#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdfnet/model.hpp"

namespace pdfnet {

// In-memory form of a parameter archive; `params` preserves file order.
struct Checkpoint {
    NetworkConfig config;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, Tensor<float>>> params;
};

nlohmann::json config_to_json(const NetworkConfig& cfg);
NetworkConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
void save_checkpoint(const Model<float>& model, std::int64_t step, std::uint64_t seed,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into the model; requires an identical
// NetworkConfig and an exact parameter name/shape match.
void apply_checkpoint(const Checkpoint& ckpt, Model<float>& model);

}  // namespace pdfnet
