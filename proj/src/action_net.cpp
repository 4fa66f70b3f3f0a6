#include "action4d/action_net.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "action4d/error.hpp"
#include "action4d/people_net.hpp"

namespace action4d {

nlohmann::json action_net_descriptor(const ActionNetShape& shape) {
  if (shape.channels.empty() || shape.head.empty()) throw ConfigError("action_net: empty architecture");
  const int f = shape.channels.back();
  return {{"network", "action_net"},
          {"input", {1, PersonVolume::kSizeX, PersonVolume::kSizeY, PersonVolume::kSizeZ}},
          {"trunk", trunk_descriptor(shape.channels)},
          {"global", {{"name", "global"}, {"in", f}, {"out", shape.global}}},
          {"attention", {{"name", "attention"}, {"features", f}, {"hidden", shape.hidden}}},
          {"lstm", {{"name", "lstm"}, {"input", f + shape.global}, {"hidden", shape.hidden}}},
          {"head", head_descriptor(shape.hidden, shape.head)},
          {"classes", shape.head.back()}};
}

AttentionResult attention_pool(const Tensor& features, std::span<const float> h_prev, const Tensor& u) {
  if (features.rank() != 4) throw ContractViolation("attention_pool: features must be F x L x W x H");
  const int f_n = features.dims[0];
  const int d = static_cast<int>(h_prev.size());
  if (u.dims != std::vector<int>{d, f_n}) throw ContractViolation("attention_pool: U must be D x F");
  const std::size_t cells = features.size() / static_cast<std::size_t>(f_n);

  // h^T U, so each logit is a single dot product with v_ijk.
  std::vector<double> query(static_cast<std::size_t>(f_n), 0.0);
  for (int r = 0; r < d; ++r) {
    for (int f = 0; f < f_n; ++f) {
      query[static_cast<std::size_t>(f)] +=
          static_cast<double>(h_prev[static_cast<std::size_t>(r)]) * u.data[static_cast<std::size_t>(r) * f_n + f];
    }
  }
  std::vector<double> beta(cells, 0.0);
  for (int f = 0; f < f_n; ++f) {
    const float* plane = features.data.data() + static_cast<std::size_t>(f) * cells;
    const double q = query[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < cells; ++i) beta[i] += q * plane[i];
  }
  const double top = *std::max_element(beta.begin(), beta.end());
  double total = 0.0;
  for (double& b : beta) {
    b = std::exp(b - top);
    total += b;
  }
  for (double& b : beta) b /= total;

  AttentionResult out;
  out.alpha = Tensor(std::vector<int>(features.dims.begin() + 1, features.dims.end()));
  for (std::size_t i = 0; i < cells; ++i) out.alpha.data[i] = std::max(static_cast<float>(beta[i]), FLT_MIN);
  out.v.resize(static_cast<std::size_t>(f_n));
  for (int f = 0; f < f_n; ++f) {
    const float* plane = features.data.data() + static_cast<std::size_t>(f) * cells;
    double s = 0.0;
    for (std::size_t i = 0; i < cells; ++i) s += beta[i] * plane[i];
    out.v[static_cast<std::size_t>(f)] = static_cast<float>(s);
  }
  return out;
}

ActionNet::ActionNet(const WeightBundle& bundle) {
  bundle.validate();
  const auto& d = bundle.descriptor;
  if (!d.contains("global") || !d.contains("attention") || !d.contains("lstm")) {
    throw ConfigError("action_net: descriptor lacks global, attention or lstm blocks");
  }
  trunk_ = load_trunk(bundle);
  global_ = load_conv(bundle, d["global"]);
  const auto& a = d["attention"];
  u_ = bundle.require(a["name"].get<std::string>() + ".U", {a["hidden"].get<int>(), a["features"].get<int>()});
  lstm_ = load_lstm(bundle);
  head_ = load_head(bundle);
  classes_ = head_.back().bias.dims[0];
}

LstmState ActionNet::initial_state() const {
  const auto d = static_cast<std::size_t>(lstm_.hidden());
  return {std::vector<float>(d, 0.0f), std::vector<float>(d, 0.0f)};
}

ActionStep ActionNet::step(const PersonVolume& crop, const LstmState& state) const {
  const Tensor features = run_trunk(volume_tensor(crop), trunk_);
  const std::vector<float> global = global_maxpool(relu(conv3d(features, global_)));
  AttentionResult att = attention_pool(features, state.h, u_);
  std::vector<float> x = std::move(att.v);
  x.insert(x.end(), global.begin(), global.end());
  ActionStep out;
  out.state = lstm_step(x, state, lstm_);
  out.probabilities = softmax(mlp_forward(out.state.h, head_));
  out.alpha = std::move(att.alpha);
  return out;
}

ActionStep action_step(const PersonVolume& crop, const LstmState& state, const WeightBundle& weights) {
  return ActionNet(weights).step(crop, state);
}

int argmax(std::span<const float> values) {
  if (values.empty()) throw ContractViolation("argmax: empty input");
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::vector<int> classify_sequence(std::span<const PersonVolume> crops, const WeightBundle& weights) {
  if (crops.empty()) throw ContractViolation("classify_sequence: empty sequence");
  const ActionNet net(weights);
  LstmState state = net.initial_state();
  std::vector<int> labels;
  labels.reserve(crops.size());
  for (const auto& crop : crops) {
    ActionStep s = net.step(crop, state);
    labels.push_back(argmax(s.probabilities));
    state = std::move(s.state);
  }
  return labels;
}

void save_alpha_map(const std::filesystem::path& path, const Tensor& alpha) {
  WeightBundle b;
  b.descriptor = {{"kind", "alpha_map"}};
  b.add("alpha", alpha);
  save_bundle(path, b);
}

}  // namespace action4d
