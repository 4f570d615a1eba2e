#include "aberrex/fringe_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>

#include "aberrex/error.hpp"

namespace aberrex {

std::size_t Tensor::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t d) { return a * d; });
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "FTBW I/O assumes a little-endian host");

template <typename T>
T read_le(std::istream& in, const std::string& name) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw IoError(name, "truncated FTBW file");
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::string dims_string(const std::vector<std::uint32_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(dims[i]);
  }
  return s.empty() ? "scalar" : s;
}

}  // namespace

std::vector<Tensor> read_ftbw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open");
  const std::string name = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw IoError(name, "truncated FTBW file");
  if (std::memcmp(magic, "FTBW", 4) != 0) throw IoError(name, "bad magic, not an FTBW file");
  const auto version = read_le<std::uint32_t>(in, name);
  if (version != kFtbwVersion)
    throw IoError(name, "unsupported FTBW version " + std::to_string(version));
  const auto count = read_le<std::uint32_t>(in, name);
  std::vector<Tensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const auto len = read_le<std::uint16_t>(in, name);
    t.name.resize(len);
    in.read(t.name.data(), len);
    if (in.gcount() != len) throw IoError(name, "truncated FTBW file");
    const auto rank = read_le<std::uint8_t>(in, name);
    for (int d = 0; d < rank; ++d) t.dims.push_back(read_le<std::uint32_t>(in, name));
    const std::size_t n = t.element_count();
    if (n > (std::size_t{1} << 28)) throw IoError(name, "tensor " + t.name + " too large");
    t.values.resize(n);
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * 4));
    if (in.gcount() != static_cast<std::streamsize>(n * 4))
      throw IoError(name, "truncated FTBW file in tensor " + t.name);
    tensors.push_back(std::move(t));
  }
  return tensors;
}

void write_ftbw(const std::filesystem::path& path, const std::vector<Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write("FTBW", 4);
  write_le<std::uint32_t>(out, kFtbwVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.values.size() != t.element_count())
      throw InvalidInput("tensor " + t.name + ": payload does not match dims");
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) write_le<std::uint32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * 4));
  }
  if (!out) throw IoError(path.string(), "write failed");
}

const std::vector<LayerSpec>& fringe_net_layers() {
  using K = LayerSpec::Kind;
  static const std::vector<LayerSpec> layers = {
      {1, K::cbr, 16, 2, 0},   {2, K::cbr, 32, 16, 0}, {3, K::cbr, 64, 32, 0},
      {4, K::cbr, 64, 64, 0},  {5, K::cbr, 64, 64, 0}, {6, K::add, 64, 64, 3},
      {7, K::cbr, 32, 64, 0},  {8, K::add, 32, 32, 2}, {9, K::cbr, 16, 32, 0},
      {10, K::add, 16, 16, 1}, {11, K::conv, 1, 16, 0},
  };
  return layers;
}

std::size_t fringe_net_parameter_count() {
  std::size_t n = 0;
  for (const auto& l : fringe_net_layers()) {
    if (l.kind == LayerSpec::Kind::add) continue;
    n += static_cast<std::size_t>(l.out_channels) * l.in_channels * 9 + l.out_channels;
    if (l.kind == LayerSpec::Kind::cbr) n += 2 * static_cast<std::size_t>(l.out_channels);
  }
  return n;
}

namespace {

struct Expected {
  std::string name;
  std::vector<std::uint32_t> dims;
  bool optional = false;
};

std::vector<Expected> expected_tensors() {
  std::vector<Expected> out;
  for (const auto& l : fringe_net_layers()) {
    if (l.kind == LayerSpec::Kind::add) continue;
    const auto o = static_cast<std::uint32_t>(l.out_channels);
    const auto i = static_cast<std::uint32_t>(l.in_channels);
    const std::string conv = "conv" + std::to_string(l.tag);
    out.push_back({conv + ".w", {o, i, 3, 3}});
    out.push_back({conv + ".b", {o}});
    if (l.kind == LayerSpec::Kind::cbr) {
      const std::string bn = "bn" + std::to_string(l.tag);
      for (const char* field : {".gamma", ".beta", ".mean", ".var"})
        out.push_back({bn + field, {o}});
      out.push_back({bn + ".eps", {1}, true});
    }
  }
  return out;
}

}  // namespace

FringeNetWeights::FringeNetWeights(std::vector<Tensor> tensors) : tensors_(std::move(tensors)) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors_) {
    if (!by_name.emplace(t.name, &t).second)
      throw InvalidInput("tensor " + t.name + ": duplicate name");
    if (t.values.size() != t.element_count())
      throw InvalidInput("tensor " + t.name + ": payload does not match dims");
    for (float v : t.values)
      if (!std::isfinite(v)) throw InvalidInput("tensor " + t.name + ": non-finite value");
  }
  std::size_t matched = 0;
  for (const auto& e : expected_tensors()) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      if (e.optional) continue;
      throw InvalidInput("tensor " + e.name + ": missing");
    }
    ++matched;
    const Tensor& t = *it->second;
    const bool scalar_ok = e.optional && t.element_count() == 1;
    if (t.dims != e.dims && !scalar_ok) {
      const std::string layer = e.name.substr(0, e.name.find('.'));
      throw InvalidInput(layer + ": tensor " + e.name + " has shape " + dims_string(t.dims) +
                         ", expected " + dims_string(e.dims));
    }
    if (e.name.ends_with(".var"))
      for (float v : t.values)
        if (v < 0.0f) throw InvalidInput("tensor " + e.name + ": negative variance");
  }
  if (matched != tensors_.size()) {
    for (const auto& t : tensors_) {
      const auto ex = expected_tensors();
      if (std::none_of(ex.begin(), ex.end(), [&](const Expected& e) { return e.name == t.name; }))
        throw InvalidInput("tensor " + t.name + ": not part of the network");
    }
  }
}

FringeNetWeights FringeNetWeights::load(const std::filesystem::path& path) {
  try {
    return FringeNetWeights(read_ftbw(path));
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

const Tensor& FringeNetWeights::get(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw InvalidInput("tensor " + name + ": missing");
}

std::size_t FringeNetWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    if (t.name.ends_with(".mean") || t.name.ends_with(".var") || t.name.ends_with(".eps"))
      continue;
    n += t.element_count();
  }
  return n;
}

FringeNet::FringeNet(const FringeNetWeights& weights) {
  for (const auto& l : fringe_net_layers()) {
    if (l.kind == LayerSpec::Kind::add) {
      convs_.push_back({});
      continue;
    }
    const std::string conv = "conv" + std::to_string(l.tag);
    FoldedConv f;
    f.out_channels = l.out_channels;
    f.in_channels = l.in_channels;
    f.weights = weights.get(conv + ".w").values;
    const auto& bias = weights.get(conv + ".b").values;
    f.scale.assign(l.out_channels, 1.0f);
    f.shift = bias;
    f.relu = l.kind == LayerSpec::Kind::cbr;
    if (f.relu) {
      const std::string bn = "bn" + std::to_string(l.tag);
      const auto& gamma = weights.get(bn + ".gamma").values;
      const auto& beta = weights.get(bn + ".beta").values;
      const auto& mean = weights.get(bn + ".mean").values;
      const auto& var = weights.get(bn + ".var").values;
      double eps = 1e-5;
      for (const auto& t : weights.tensors())
        if (t.name == bn + ".eps") eps = t.values[0];
      // gamma * (conv + b - mean) / sqrt(var + eps) + beta
      for (int c = 0; c < l.out_channels; ++c) {
        const double s = gamma[c] / std::sqrt(static_cast<double>(var[c]) + eps);
        f.scale[c] = static_cast<float>(s);
        f.shift[c] = static_cast<float>(s * (bias[c] - mean[c]) + beta[c]);
      }
    }
    convs_.push_back(std::move(f));
  }
}

template <typename ConvFn>
Plane FringeNet::run(const Plane& zc, const Plane& zg, ConvFn conv) const {
  if (!zc.same_shape(zg)) throw InvalidInput("fringe net: channel shapes differ");
  if (zc.height() < 8 || zc.width() < 8)
    throw InvalidInput("fringe net: input must be at least 8x8");
  const int H = zc.height();
  const int W = zc.width();
  FeatureMap input(2, H, W);
  std::copy(zc.data().begin(), zc.data().end(), input.data.begin());
  std::copy(zg.data().begin(), zg.data().end(), input.data.begin() + input.plane_size());

  const auto& layers = fringe_net_layers();
  std::vector<FeatureMap> outputs(layers.size());
  const FeatureMap* current = &input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerSpec::Kind::add) {
      FeatureMap sum = *current;
      const auto& skip = outputs[l.source - 1].data;
      for (std::size_t k = 0; k < sum.data.size(); ++k) sum.data[k] += skip[k];
      outputs[i] = std::move(sum);
    } else {
      const auto& f = convs_[i];
      outputs[i] = conv(*current, Conv3x3Params{f.out_channels, f.in_channels, f.weights,
                                                f.scale, f.shift, f.relu});
    }
    current = &outputs[i];
  }
  Plane residual(H, W);
  std::copy(current->data.begin(), current->data.end(), residual.data().begin());
  return residual;
}

Plane FringeNet::forward(const Plane& zc, const Plane& zg) const {
  return run(zc, zg, [](const FeatureMap& in, const Conv3x3Params& p) { return conv3x3(in, p); });
}

Plane FringeNet::forward_reference(const Plane& zc, const Plane& zg) const {
  return run(zc, zg, [](const FeatureMap& in, const Conv3x3Params& p) {
    return conv3x3_reference(in, p);
  });
}

Plane FringeNet::correct_channel(const Plane& zc, const Plane& zg) const {
  const Plane phi = forward(zc, zg);
  Plane out(zc.height(), zc.width());
  auto a = zc.data();
  auto r = phi.data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::clamp(a[i] - r[i], 0.0f, 1.0f);
  return out;
}

PlanarImage FringeNet::correct(const PlanarImage& z) const {
  if (z.channels() != 3) throw InvalidInput("fringe net: image must have 3 channels");
  const Plane green = z.channel(1);
  PlanarImage out = z;
  out.set_channel(0, correct_channel(z.channel(0), green));
  out.set_channel(2, correct_channel(z.channel(2), green));
  return out;
}

FringeNetWeights zero_fringe_weights() {
  std::vector<Tensor> tensors;
  for (const auto& e : expected_tensors()) {
    if (e.optional) continue;
    Tensor t{e.name, e.dims, {}};
    t.values.assign(t.element_count(), e.name.ends_with(".var") ? 1.0f : 0.0f);
    tensors.push_back(std::move(t));
  }
  return FringeNetWeights(std::move(tensors));
}

}  // namespace aberrex
