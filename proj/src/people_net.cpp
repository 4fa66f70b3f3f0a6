#include "action4d/people_net.hpp"

#include <cmath>

#include "action4d/error.hpp"

namespace action4d {

nlohmann::json people_net_descriptor(const PeopleNetShape& shape) {
  if (shape.channels.empty() || shape.head.empty()) throw ConfigError("people_net: empty architecture");
  return {{"network", "people_net"},
          {"input", {1, PersonVolume::kSizeX, PersonVolume::kSizeY, PersonVolume::kSizeZ}},
          {"trunk", trunk_descriptor(shape.channels)},
          {"head", head_descriptor(shape.channels.back(), shape.head)},
          {"classes", shape.head.back()}};
}

Tensor volume_tensor(const PersonVolume& vol) {
  Tensor t({1, PersonVolume::kSizeX, PersonVolume::kSizeY, PersonVolume::kSizeZ});
  for (std::size_t i = 0; i < PersonVolume::kVoxels; ++i) t.data[i] = vol.voxels[i] ? 1.0f : 0.0f;
  return t;
}

PeopleNet::PeopleNet(const WeightBundle& bundle) {
  bundle.validate();
  trunk_ = load_trunk(bundle);
  head_ = load_head(bundle);
  if (head_.back().bias.dims[0] != 2) throw ConfigError("people_net: classifier head must have 2 outputs");
}

double PeopleNet::probability(const PersonVolume& vol) const {
  const Tensor features = run_trunk(volume_tensor(vol), trunk_);
  const std::vector<float> pooled = global_maxpool(features);
  return softmax(mlp_forward(pooled, head_))[1];
}

double classify_person(const PersonVolume& vol, const WeightBundle& weights) {
  return PeopleNet(weights).probability(vol);
}

double heuristic_person_probability(const PersonVolume& vol) {
  constexpr int kBodyRadius = 5;
  std::size_t inside = 0;
  std::size_t total = 0;
  for (int a = 0; a < PersonVolume::kSizeX; ++a) {
    for (int b = 0; b < PersonVolume::kSizeY; ++b) {
      const int da = a - PersonVolume::kHalfX;
      const int db = b - PersonVolume::kHalfY;
      const bool central = da * da + db * db <= kBodyRadius * kBodyRadius;
      for (int c = 1; c < PersonVolume::kSizeZ; ++c) {
        if (!vol.at(a, b, c)) continue;
        ++total;
        if (central) ++inside;
      }
    }
  }
  if (total == 0) return 0.0;
  const double share = static_cast<double>(inside) / static_cast<double>(total);
  return 1.0 / (1.0 + std::exp(-10.0 * (share - 0.6)));
}

}  // namespace action4d
