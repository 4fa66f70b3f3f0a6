#include "action4d/weights.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include "action4d/error.hpp"

namespace action4d {
namespace {

constexpr char kMagic[4] = {'W', '4', 'D', 'B'};
using json = nlohmann::json;

int int_field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number_integer()) {
    throw ConfigError(std::string("weights descriptor: missing integer '") + key + "'");
  }
  const int v = obj[key].get<int>();
  if (v < 1) throw ConfigError(std::string("weights descriptor: '") + key + "' must be >= 1");
  return v;
}

std::string name_field(const json& obj) {
  if (!obj.contains("name") || !obj["name"].is_string()) throw ConfigError("weights descriptor: layer without name");
  return obj["name"].get<std::string>();
}

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError("weights file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* WeightBundle::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& WeightBundle::require(const std::string& name, const std::vector<int>& dims) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw ConfigError("weights: missing tensor '" + name + "'");
  if (t->dims != dims) throw ConfigError("weights: tensor '" + name + "' has the wrong shape");
  return *t;
}

void WeightBundle::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) throw ConfigError("weights: duplicate tensor '" + name + "'");
  tensors.emplace_back(std::move(name), std::move(tensor));
}

void WeightBundle::validate() const {
  std::set<std::string> names;
  for (const auto& [n, t] : tensors) {
    if (!names.insert(n).second) throw ConfigError("weights: duplicate tensor '" + n + "'");
    for (float v : t.data) {
      if (!std::isfinite(v)) throw ConfigError("weights: tensor '" + n + "' has non-finite values");
    }
  }
  if (!descriptor.contains("trunk")) return;
  for (const auto& [n, dims] : expected_tensors(descriptor)) require(n, dims);
}

std::vector<std::pair<std::string, std::vector<int>>> expected_tensors(const json& d) {
  if (!d.is_object() || !d.contains("trunk") || !d["trunk"].is_array() || !d.contains("head") ||
      !d["head"].is_array()) {
    throw ConfigError("weights descriptor: needs 'trunk' and 'head' arrays");
  }
  std::vector<std::pair<std::string, std::vector<int>>> out;
  int channels = -1;
  for (const auto& layer : d["trunk"]) {
    const std::string kind = layer.value("kind", "");
    if (kind == "conv3d") {
      const int in = int_field(layer, "in");
      const int o = int_field(layer, "out");
      if (channels > 0 && in != channels) throw ConfigError("weights descriptor: trunk channel mismatch");
      channels = o;
      const std::string name = name_field(layer);
      out.push_back({name + ".weight", {o, in, 3, 3, 3}});
      out.push_back({name + ".bias", {o}});
    } else if (kind != "relu" && kind != "maxpool3d") {
      throw ConfigError("weights descriptor: unknown trunk layer '" + kind + "'");
    }
  }
  if (channels < 0) throw ConfigError("weights descriptor: trunk has no convolution");

  int head_in = channels;
  if (d.contains("global")) {
    const auto& g = d["global"];
    if (int_field(g, "in") != channels) throw ConfigError("weights descriptor: global branch input mismatch");
    const int o = int_field(g, "out");
    out.push_back({name_field(g) + ".weight", {o, channels, 3, 3, 3}});
    out.push_back({name_field(g) + ".bias", {o}});
    if (!d.contains("attention") || !d.contains("lstm")) {
      throw ConfigError("weights descriptor: global branch needs attention and lstm");
    }
    const auto& a = d["attention"];
    const auto& l = d["lstm"];
    const int hidden = int_field(l, "hidden");
    if (int_field(a, "features") != channels || int_field(a, "hidden") != hidden) {
      throw ConfigError("weights descriptor: attention shape mismatch");
    }
    if (int_field(l, "input") != channels + o) throw ConfigError("weights descriptor: lstm input mismatch");
    out.push_back({name_field(a) + ".U", {hidden, channels}});
    out.push_back({name_field(l) + ".weight_ih", {4 * hidden, channels + o}});
    out.push_back({name_field(l) + ".weight_hh", {4 * hidden, hidden}});
    out.push_back({name_field(l) + ".bias", {4 * hidden}});
    head_in = hidden;
  }
  if (d["head"].empty()) throw ConfigError("weights descriptor: empty head");
  for (const auto& layer : d["head"]) {
    const int in = int_field(layer, "in");
    const int o = int_field(layer, "out");
    if (in != head_in) throw ConfigError("weights descriptor: head width mismatch");
    out.push_back({name_field(layer) + ".weight", {o, in}});
    out.push_back({name_field(layer) + ".bias", {o}});
    head_in = o;
  }
  if (d.contains("classes") && int_field(d, "classes") != head_in) {
    throw ConfigError("weights descriptor: head output != classes");
  }
  return out;
}

WeightBundle make_bundle(const json& descriptor, std::uint64_t seed, float scale) {
  WeightBundle bundle;
  bundle.descriptor = descriptor;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-scale, scale);
  for (auto& [name, dims] : expected_tensors(descriptor)) {
    Tensor t(dims);
    if (scale != 0.0f) {
      for (float& v : t.data) v = dist(rng);
    }
    bundle.add(name, std::move(t));
  }
  return bundle;
}

std::vector<std::uint8_t> encode_bundle(const WeightBundle& bundle) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(static_cast<std::uint32_t>(bundle.tensors.size()));
  for (const auto& [name, t] : bundle.tensors) {
    if (name.size() > 0xffff) throw ConfigError("weights: tensor name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.dims) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.f32(v);
  }
  const std::string desc = bundle.descriptor.dump();
  w.u32(static_cast<std::uint32_t>(desc.size()));
  w.bytes(desc.data(), desc.size());
  return std::move(w.out);
}

WeightBundle decode_bundle(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw ConfigError("weights: bad magic");
  WeightBundle bundle;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u16());
    const int rank = r.u8();
    if (rank < 1 || rank > 5) throw ConfigError("weights: tensor '" + name + "' has unsupported rank");
    std::vector<int> dims(static_cast<std::size_t>(rank));
    for (int& d : dims) {
      const std::uint32_t v = r.u32();
      if (v < 1 || v > (1u << 24)) throw ConfigError("weights: tensor '" + name + "' has a bad extent");
      d = static_cast<int>(v);
    }
    const std::size_t n = Tensor::element_count(dims);
    r.need(4 * n);
    std::vector<float> data(n);
    for (float& v : data) v = r.f32();
    bundle.add(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  const std::uint32_t len = r.u32();
  try {
    bundle.descriptor = json::parse(r.str(len));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("weights: descriptor is not valid JSON: ") + e.what());
  }
  if (!r.done()) throw ConfigError("weights: trailing bytes");
  bundle.validate();
  return bundle;
}

void save_bundle(const std::filesystem::path& path, const WeightBundle& bundle) {
  const auto bytes = encode_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write weights file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

WeightBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open weights file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_bundle(bytes);
}

Conv3dParams load_conv(const WeightBundle& bundle, const json& layer) {
  const std::string name = name_field(layer);
  const int in = int_field(layer, "in");
  const int o = int_field(layer, "out");
  return {bundle.require(name + ".weight", {o, in, 3, 3, 3}), bundle.require(name + ".bias", {o})};
}

std::vector<TrunkLayer> load_trunk(const WeightBundle& bundle) {
  expected_tensors(bundle.descriptor);
  std::vector<TrunkLayer> layers;
  for (const auto& layer : bundle.descriptor["trunk"]) {
    const std::string kind = layer["kind"].get<std::string>();
    TrunkLayer t;
    if (kind == "conv3d") {
      t.kind = LayerKind::kConv3d;
      t.conv = load_conv(bundle, layer);
    } else if (kind == "relu") {
      t.kind = LayerKind::kRelu;
    } else {
      t.kind = LayerKind::kMaxPool3d;
    }
    layers.push_back(std::move(t));
  }
  return layers;
}

std::vector<DenseParams> load_head(const WeightBundle& bundle) {
  expected_tensors(bundle.descriptor);
  std::vector<DenseParams> layers;
  for (const auto& layer : bundle.descriptor["head"]) {
    const std::string name = name_field(layer);
    const int in = int_field(layer, "in");
    const int o = int_field(layer, "out");
    layers.push_back({bundle.require(name + ".weight", {o, in}), bundle.require(name + ".bias", {o})});
  }
  return layers;
}

LstmParams load_lstm(const WeightBundle& bundle) {
  const auto& d = bundle.descriptor;
  if (!d.contains("lstm")) throw ConfigError("weights descriptor: no lstm block");
  const auto& l = d["lstm"];
  const std::string name = name_field(l);
  const int in = int_field(l, "input");
  const int hidden = int_field(l, "hidden");
  return {bundle.require(name + ".weight_ih", {4 * hidden, in}),
          bundle.require(name + ".weight_hh", {4 * hidden, hidden}),
          bundle.require(name + ".bias", {4 * hidden})};
}

json trunk_descriptor(std::span<const int> channels) {
  json layers = json::array();
  int in = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    layers.push_back({{"kind", "conv3d"}, {"name", "conv" + std::to_string(i + 1)}, {"in", in}, {"out", channels[i]}});
    layers.push_back({{"kind", "relu"}});
    if (i + 1 < channels.size()) layers.push_back({{"kind", "maxpool3d"}});
    in = channels[i];
  }
  return layers;
}

json head_descriptor(int in, std::span<const int> widths) {
  json layers = json::array();
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers.push_back({{"name", "fc" + std::to_string(i + 1)}, {"in", in}, {"out", widths[i]}});
    in = widths[i];
  }
  return layers;
}

}  // namespace action4d
