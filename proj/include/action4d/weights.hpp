#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "action4d/nn.hpp"
#include "action4d/tensor.hpp"

namespace action4d {

/// Named inference tensors plus the architecture descriptor that says how to
/// wire them. Descriptor schema (JSON):
///   {"network": "people_net" | "action_net",
///    "input": [1, 31, 31, 43],
///    "trunk": [{"kind": "conv3d", "name": "conv1", "in": 1, "out": 8},
///              {"kind": "relu"}, {"kind": "maxpool3d"}, ...],
///    "global": {"name": "global", "in": 32, "out": 32},            action_net
///    "attention": {"name": "attention", "features": 32, "hidden": 64},  action_net
///    "lstm": {"name": "lstm", "input": 64, "hidden": 64},           action_net
///    "head": [{"name": "fc1", "in": 32, "out": 16}, ...],
///    "classes": 2}
/// Convolutions are always 3x3x3 with padding 1; pooling is 2x2x2 stride 2.
struct WeightBundle {
  std::vector<std::pair<std::string, Tensor>> tensors;
  nlohmann::json descriptor = nlohmann::json::object();

  const Tensor* find(const std::string& name) const;
  /// Throws ConfigError when missing or shaped differently.
  const Tensor& require(const std::string& name, const std::vector<int>& dims) const;
  /// Throws ConfigError on a duplicate name.
  void add(std::string name, Tensor tensor);
  /// Names are unique, values finite, and every tensor a network descriptor
  /// implies is present with the right shape.
  void validate() const;
};

/// Names and shapes implied by a descriptor, in a fixed order.
std::vector<std::pair<std::string, std::vector<int>>> expected_tensors(const nlohmann::json& descriptor);

/// Bundle for `descriptor` with every value drawn uniformly from
/// [-scale, scale] (all zeros when scale is 0).
WeightBundle make_bundle(const nlohmann::json& descriptor, std::uint64_t seed = 0, float scale = 0.0f);

std::vector<std::uint8_t> encode_bundle(const WeightBundle& bundle);
WeightBundle decode_bundle(std::span<const std::uint8_t> bytes);
void save_bundle(const std::filesystem::path& path, const WeightBundle& bundle);
WeightBundle load_bundle(const std::filesystem::path& path);

std::vector<TrunkLayer> load_trunk(const WeightBundle& bundle);
Conv3dParams load_conv(const WeightBundle& bundle, const nlohmann::json& layer);
std::vector<DenseParams> load_head(const WeightBundle& bundle);
LstmParams load_lstm(const WeightBundle& bundle);

/// Standard descriptors; channel counts are parameters, not constants of the code.
nlohmann::json trunk_descriptor(std::span<const int> channels);
nlohmann::json head_descriptor(int in, std::span<const int> widths);

}  // namespace action4d
