#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "action4d/carving.hpp"
#include "action4d/nn.hpp"
#include "action4d/weights.hpp"

namespace action4d {

struct PeopleNetShape {
  std::vector<int> channels{8, 16, 32};
  std::vector<int> head{16, 2};
};

nlohmann::json people_net_descriptor(const PeopleNetShape& shape = {});

/// Occupancy crop as a 1 x 31 x 31 x 43 tensor of zeros and ones.
Tensor volume_tensor(const PersonVolume& vol);

/// Conv trunk, global max pooling and an MLP with two logits; index 1 is "person".
class PeopleNet {
 public:
  /// Throws ConfigError if the bundle is incomplete or the head is not 2 wide.
  explicit PeopleNet(const WeightBundle& bundle);
  double probability(const PersonVolume& vol) const;

 private:
  std::vector<TrunkLayer> trunk_;
  std::vector<DenseParams> head_;
};

double classify_person(const PersonVolume& vol, const WeightBundle& weights);

/// Weight-free fallback: share of occupied voxels inside a body-sized central
/// column, passed through a logistic curve.
double heuristic_person_probability(const PersonVolume& vol);

/// Either a network or the heuristic fallback.
class PersonScorer {
 public:
  static PersonScorer network(const WeightBundle& bundle) { return PersonScorer(PeopleNet(bundle)); }
  static PersonScorer heuristic() { return PersonScorer(std::nullopt); }

  double score(const PersonVolume& vol) const {
    return net_ ? net_->probability(vol) : heuristic_person_probability(vol);
  }
  bool is_heuristic() const { return !net_.has_value(); }

 private:
  explicit PersonScorer(std::optional<PeopleNet> net) : net_(std::move(net)) {}
  std::optional<PeopleNet> net_;
};

}  // namespace action4d
