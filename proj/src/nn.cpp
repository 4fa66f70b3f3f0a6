#include "action4d/nn.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "action4d/error.hpp"

namespace action4d {
namespace {

constexpr int kLanes = 8;

void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require(input.rank() == 4, "conv3d: input must be C x L x W x H");
  require(kernels.rank() == 5 && kernels.dims[2] == 3 && kernels.dims[3] == 3 && kernels.dims[4] == 3,
          "conv3d: kernels must be F x C x 3 x 3 x 3");
  require(kernels.dims[1] == input.dims[0], "conv3d: channel mismatch");
  require(bias.rank() == 1 && bias.dims[0] == kernels.dims[0], "conv3d: bias length != F");

  const int c_in = input.dims[0];
  const int l_in = input.dims[1];
  const int w_in = input.dims[2];
  const int h_in = input.dims[3];
  const int f_out = kernels.dims[0];
  const int f_pad = (f_out + kLanes - 1) / kLanes * kLanes;

  // Weights as [tap][c][f] so the innermost loop runs over output channels.
  std::vector<float> packed(static_cast<std::size_t>(27) * c_in * f_pad, 0.0f);
  for (int f = 0; f < f_out; ++f) {
    for (int c = 0; c < c_in; ++c) {
      for (int tap = 0; tap < 27; ++tap) {
        packed[(static_cast<std::size_t>(tap) * c_in + c) * f_pad + f] =
            kernels.data[(static_cast<std::size_t>(f) * c_in + c) * 27 + tap];
      }
    }
  }

  // Zero-padded, channels-last copy of the input.
  const int wp = w_in + 2;
  const int hp = h_in + 2;
  std::vector<float> padded(static_cast<std::size_t>(l_in + 2) * wp * hp * c_in, 0.0f);
  for (int c = 0; c < c_in; ++c) {
    const float* src = input.data.data() + static_cast<std::size_t>(c) * l_in * w_in * h_in;
    for (int l = 0; l < l_in; ++l) {
      for (int w = 0; w < w_in; ++w) {
        float* dst = padded.data() + ((static_cast<std::size_t>(l + 1) * wp + (w + 1)) * hp + 1) * c_in + c;
        for (int h = 0; h < h_in; ++h) dst[static_cast<std::size_t>(h) * c_in] = *src++;
      }
    }
  }

  Tensor out({f_out, l_in, w_in, h_in});
  const std::size_t plane = static_cast<std::size_t>(l_in) * w_in * h_in;
  // Four consecutive h outputs share every weight row load.
  constexpr int kBlock = 4;
  std::vector<float> acc(static_cast<std::size_t>(kBlock) * f_pad);
  for (int l = 0; l < l_in; ++l) {
    for (int w = 0; w < w_in; ++w) {
      for (int h0 = 0; h0 < h_in; h0 += kBlock) {
        const int nb = std::min(kBlock, h_in - h0);
        for (int k = 0; k < kBlock; ++k) {
          float* ak = acc.data() + static_cast<std::size_t>(k) * f_pad;
          std::fill(ak, ak + f_pad, 0.0f);
          std::copy(bias.data.begin(), bias.data.end(), ak);
        }
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            const std::size_t row = (static_cast<std::size_t>(l + a) * wp + (w + b)) * hp + h0;
            for (int d = 0; d < 3; ++d) {
              const float* x = padded.data() + (row + d) * c_in;
              const float* wt = packed.data() + static_cast<std::size_t>(a * 9 + b * 3 + d) * c_in * f_pad;
              for (int c = 0; c < c_in; ++c) {
                float xv[kBlock] = {};
                bool any = false;
                for (int k = 0; k < nb; ++k) {
                  xv[k] = x[static_cast<std::size_t>(k) * c_in + c];
                  any = any || xv[k] != 0.0f;
                }
                if (!any) continue;
                const float* wr = wt + static_cast<std::size_t>(c) * f_pad;
                float* a0 = acc.data();
                float* a1 = a0 + f_pad;
                float* a2 = a1 + f_pad;
                float* a3 = a2 + f_pad;
                for (int f = 0; f < f_pad; ++f) {
                  const float wv = wr[f];
                  a0[f] += xv[0] * wv;
                  a1[f] += xv[1] * wv;
                  a2[f] += xv[2] * wv;
                  a3[f] += xv[3] * wv;
                }
              }
            }
          }
        }
        for (int k = 0; k < nb; ++k) {
          const std::size_t cell = (static_cast<std::size_t>(l) * w_in + w) * h_in + h0 + k;
          const float* ak = acc.data() + static_cast<std::size_t>(k) * f_pad;
          for (int f = 0; f < f_out; ++f) out.data[f * plane + cell] = ak[f];
        }
      }
    }
  }
  return out;
}

Tensor relu(Tensor t) {
  for (float& v : t.data) v = std::max(v, 0.0f);
  return t;
}

Tensor maxpool3d(const Tensor& t) {
  require(t.rank() == 4, "maxpool3d: input must be C x L x W x H");
  const int c_n = t.dims[0];
  const int l_in = t.dims[1];
  const int w_in = t.dims[2];
  const int h_in = t.dims[3];
  const int lo = l_in / 2;
  const int wo = w_in / 2;
  const int ho = h_in / 2;
  require(lo >= 1 && wo >= 1 && ho >= 1, "maxpool3d: pooled extents must be >= 1");
  Tensor out({c_n, lo, wo, ho});
  std::size_t k = 0;
  for (int c = 0; c < c_n; ++c) {
    const float* base = t.data.data() + static_cast<std::size_t>(c) * l_in * w_in * h_in;
    for (int l = 0; l < lo; ++l) {
      for (int w = 0; w < wo; ++w) {
        for (int h = 0; h < ho; ++h) {
          float m = -std::numeric_limits<float>::infinity();
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int d = 0; d < 2; ++d)
                m = std::max(m, base[(static_cast<std::size_t>(2 * l + a) * w_in + (2 * w + b)) * h_in + 2 * h + d]);
          out.data[k++] = m;
        }
      }
    }
  }
  return out;
}

std::vector<float> global_maxpool(const Tensor& t) {
  require(t.rank() == 4, "global_maxpool: input must be C x L x W x H");
  const std::size_t cells = t.size() / static_cast<std::size_t>(t.dims[0]);
  std::vector<float> out(static_cast<std::size_t>(t.dims[0]));
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto first = t.data.begin() + static_cast<std::ptrdiff_t>(c * cells);
    out[c] = *std::max_element(first, first + static_cast<std::ptrdiff_t>(cells));
  }
  return out;
}

std::vector<float> softmax(std::span<const float> logits) {
  require(!logits.empty(), "softmax: empty input");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(static_cast<double>(logits[i]) - top);
    total += e[i];
  }
  std::vector<float> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(static_cast<float>(e[i] / total), FLT_MIN);
  return out;
}

LstmState lstm_step(std::span<const float> x, const LstmState& prev, const LstmParams& params) {
  const int d = params.hidden();
  const int xn = static_cast<int>(x.size());
  require(d > 0 && params.bias.rank() == 1 && params.bias.dims[0] == 4 * d, "lstm_step: bias must be 4D");
  require(params.weight_ih.dims == std::vector<int>{4 * d, xn}, "lstm_step: weight_ih must be 4D x X");
  require(params.weight_hh.dims == std::vector<int>{4 * d, d}, "lstm_step: weight_hh must be 4D x D");
  require(prev.h.size() == static_cast<std::size_t>(d) && prev.c.size() == static_cast<std::size_t>(d),
          "lstm_step: state size != D");

  std::vector<double> z(static_cast<std::size_t>(4 * d));
  for (int r = 0; r < 4 * d; ++r) {
    double s = params.bias.data[static_cast<std::size_t>(r)];
    const float* wi = params.weight_ih.data.data() + static_cast<std::size_t>(r) * xn;
    for (int j = 0; j < xn; ++j) s += static_cast<double>(wi[j]) * x[static_cast<std::size_t>(j)];
    const float* wh = params.weight_hh.data.data() + static_cast<std::size_t>(r) * d;
    for (int j = 0; j < d; ++j) s += static_cast<double>(wh[j]) * prev.h[static_cast<std::size_t>(j)];
    z[static_cast<std::size_t>(r)] = s;
  }
  const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  constexpr float kOpen = 0x1.fffffep-1f;  // largest float below 1
  LstmState next{std::vector<float>(static_cast<std::size_t>(d)), std::vector<float>(static_cast<std::size_t>(d))};
  for (int k = 0; k < d; ++k) {
    const std::size_t u = static_cast<std::size_t>(k);
    const double i = sigmoid(z[u]);
    const double f = sigmoid(z[u + d]);
    const double g = std::tanh(z[u + 2 * static_cast<std::size_t>(d)]);
    const double o = sigmoid(z[u + 3 * static_cast<std::size_t>(d)]);
    const double c = f * prev.c[u] + i * g;
    next.c[u] = static_cast<float>(c);
    next.h[u] = std::clamp(static_cast<float>(o * std::tanh(c)), -kOpen, kOpen);
  }
  return next;
}

std::vector<float> dense_forward(std::span<const float> x, const DenseParams& layer) {
  require(layer.weight.rank() == 2 && layer.weight.dims[1] == static_cast<int>(x.size()),
          "dense: weight must be out x in");
  const int out_n = layer.weight.dims[0];
  require(layer.bias.rank() == 1 && layer.bias.dims[0] == out_n, "dense: bias length != out");
  std::vector<float> y(static_cast<std::size_t>(out_n));
  for (int r = 0; r < out_n; ++r) {
    double s = layer.bias.data[static_cast<std::size_t>(r)];
    const float* w = layer.weight.data.data() + static_cast<std::size_t>(r) * x.size();
    for (std::size_t j = 0; j < x.size(); ++j) s += static_cast<double>(w[j]) * x[j];
    y[static_cast<std::size_t>(r)] = static_cast<float>(s);
  }
  return y;
}

std::vector<float> mlp_forward(std::span<const float> x, std::span<const DenseParams> layers) {
  require(!layers.empty(), "mlp: no layers");
  std::vector<float> v(x.begin(), x.end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    v = dense_forward(v, layers[i]);
    if (i + 1 < layers.size()) {
      for (float& e : v) e = std::max(e, 0.0f);
    }
  }
  return v;
}

Tensor run_trunk(Tensor input, std::span<const TrunkLayer> layers) {
  for (const auto& layer : layers) {
    switch (layer.kind) {
      case LayerKind::kConv3d:
        input = conv3d(input, layer.conv);
        break;
      case LayerKind::kRelu:
        input = relu(std::move(input));
        break;
      case LayerKind::kMaxPool3d:
        input = maxpool3d(input);
        break;
    }
  }
  return input;
}

}  // namespace action4d
