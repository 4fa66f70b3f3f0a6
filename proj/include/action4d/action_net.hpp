#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "action4d/carving.hpp"
#include "action4d/nn.hpp"
#include "action4d/weights.hpp"

namespace action4d {

struct ActionNetShape {
  std::vector<int> channels{8, 16, 32};
  int global = 32;
  int hidden = 64;
  std::vector<int> head{32, 16};
};

nlohmann::json action_net_descriptor(const ActionNetShape& shape = {});

struct AttentionResult {
  std::vector<float> v;  // F
  Tensor alpha;          // L x W x H, sums to 1
};

/// beta_ijk = h^T U v_ijk over every cell of the F x L x W x H volume,
/// alpha = softmax(beta), v = sum alpha_ijk v_ijk.
AttentionResult attention_pool(const Tensor& features, std::span<const float> h_prev, const Tensor& u);

struct ActionStep {
  std::vector<float> probabilities;
  LstmState state;
  Tensor alpha;
};

/// Conv trunk -> (attention-pooled local feature, globally pooled branch
/// feature) -> LSTM -> MLP -> softmax, one frame at a time.
class ActionNet {
 public:
  explicit ActionNet(const WeightBundle& bundle);

  LstmState initial_state() const;
  ActionStep step(const PersonVolume& crop, const LstmState& state) const;
  int classes() const { return classes_; }

 private:
  std::vector<TrunkLayer> trunk_;
  Conv3dParams global_;
  Tensor u_;
  LstmParams lstm_;
  std::vector<DenseParams> head_;
  int classes_ = 0;
};

ActionStep action_step(const PersonVolume& crop, const LstmState& state, const WeightBundle& weights);

/// Index of the largest value; the lowest index wins ties.
int argmax(std::span<const float> values);

/// Per-frame argmax labels with the state threaded from a zero start.
std::vector<int> classify_sequence(std::span<const PersonVolume> crops, const WeightBundle& weights);

/// Writes an attention map as a one-tensor weights file named "alpha".
void save_alpha_map(const std::filesystem::path& path, const Tensor& alpha);

}  // namespace action4d
