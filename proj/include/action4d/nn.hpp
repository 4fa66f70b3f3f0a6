#pragma once

#include <span>
#include <utility>
#include <vector>

#include "action4d/tensor.hpp"

namespace action4d {

struct Conv3dParams {
  Tensor weight;  // F x C x 3 x 3 x 3
  Tensor bias;    // F
};

struct DenseParams {
  Tensor weight;  // out x in
  Tensor bias;    // out
};

/// Gate blocks stacked in the order input, forget, candidate, output.
struct LstmParams {
  Tensor weight_ih;  // 4D x X
  Tensor weight_hh;  // 4D x D
  Tensor bias;       // 4D
  int hidden() const { return bias.dims.empty() ? 0 : bias.dims[0] / 4; }
};

/// Same-size 3x3x3 cross-correlation with zero padding on a C x L x W x H input.
Tensor conv3d(const Tensor& input, const Tensor& kernels, const Tensor& bias);
inline Tensor conv3d(const Tensor& input, const Conv3dParams& p) { return conv3d(input, p.weight, p.bias); }

Tensor relu(Tensor t);
/// 2x2x2 window, stride 2; a trailing odd slice is dropped.
Tensor maxpool3d(const Tensor& t);
/// Per-channel maximum of a C x L x W x H tensor.
std::vector<float> global_maxpool(const Tensor& t);

std::vector<float> softmax(std::span<const float> logits);

struct LstmState {
  std::vector<float> h;
  std::vector<float> c;
};

LstmState lstm_step(std::span<const float> x, const LstmState& prev, const LstmParams& params);

std::vector<float> dense_forward(std::span<const float> x, const DenseParams& layer);
/// Affine layers with ReLU between them; the last layer stays affine.
std::vector<float> mlp_forward(std::span<const float> x, std::span<const DenseParams> layers);

enum class LayerKind { kConv3d, kRelu, kMaxPool3d };

struct TrunkLayer {
  LayerKind kind = LayerKind::kRelu;
  Conv3dParams conv;  // kConv3d only
};

Tensor run_trunk(Tensor input, std::span<const TrunkLayer> layers);

}  // namespace action4d
