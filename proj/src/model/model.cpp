#include "pyrexpose/model.hpp"

#include <cmath>
#include <random>

#include "pyrexpose/autodiff/ops.hpp"
#include "pyrexpose/error.hpp"

namespace pyrexpose {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using nlohmann::json;

namespace {

std::string sub_prefix(int i) { return "subnet" + std::to_string(i) + "/"; }

int channels_at(const SubnetConfig& s, int level) { return s.base_channels << level; }

std::int64_t conv_count(std::int64_t cin, std::int64_t cout, std::int64_t k) { return cin * cout * k * k + cout; }

}  // namespace

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.levels = 4;
  c.subnets = {{4, 24}, {3, 24}, {3, 24}, {3, 16}};
  c.scale_defaults = ScaleVector::defaults(4);
  c.discriminator = {256, {16, 32, 64, 128, 256, 256}};
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.levels = 4;
  c.subnets = {{4, 8}, {3, 8}, {3, 8}, {3, 8}};
  c.scale_defaults = ScaleVector::defaults(4);
  c.discriminator = {64, {8, 16, 32, 32, 32, 32}};
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.levels = 4;
  c.subnets = {{4, 2}, {3, 2}, {3, 2}, {3, 2}};
  c.scale_defaults = ScaleVector::defaults(4);
  c.discriminator = {16, {2, 4}};
  return c;
}

void ModelConfig::validate() const {
  if (levels < 1) throw ConfigError("model: levels must be >= 1");
  if (static_cast<int>(subnets.size()) != levels) {
    throw ConfigError("model: " + std::to_string(subnets.size()) + " subnets for " + std::to_string(levels) + " levels");
  }
  for (const auto& s : subnets) {
    if (s.depth < 0 || s.base_channels < 1) throw ConfigError("model: subnet depth must be >= 0 and channels >= 1");
    if (s.in_channels != 3 || s.out_channels != 3 || s.kernel != 3) {
      throw ConfigError("model: subnets take and produce 3 channels with 3x3 kernels");
    }
  }
  if (scale_defaults.size() != levels) throw ConfigError("model: default scale vector length must equal levels");
  scale_defaults.validate();
  if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) throw ConfigError("model: leaky slope must be in [0,1)");
  if (discriminator.input_size < 1 || discriminator.channels.empty()) {
    throw ConfigError("model: discriminator needs a positive input size and at least one conv layer");
  }
  for (int ch : discriminator.channels)
    if (ch < 1) throw ConfigError("model: discriminator channel counts must be positive");
}

json ModelConfig::to_json() const {
  json subs = json::array();
  for (const auto& s : subnets) subs.push_back({{"depth", s.depth}, {"base_channels", s.base_channels}});
  return {{"levels", levels},
          {"subnets", subs},
          {"scale_defaults", scale_defaults.s},
          {"leaky_slope", leaky_slope},
          {"discriminator", {{"input_size", discriminator.input_size}, {"channels", discriminator.channels}}}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.levels = j.at("levels").get<int>();
    for (const auto& s : j.at("subnets")) c.subnets.push_back({s.at("depth").get<int>(), s.at("base_channels").get<int>()});
    c.scale_defaults.s = j.contains("scale_defaults") ? j.at("scale_defaults").get<std::vector<float>>()
                                                      : ScaleVector::defaults(c.levels).s;
    c.leaky_slope = j.value("leaky_slope", 0.2f);
    if (j.contains("discriminator")) {
      const auto& d = j.at("discriminator");
      c.discriminator.input_size = d.at("input_size").get<int>();
      c.discriminator.channels = d.at("channels").get<std::vector<int>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return levels == o.levels && subnets == o.subnets && scale_defaults.s == o.scale_defaults.s &&
         leaky_slope == o.leaky_slope && discriminator == o.discriminator;
}

ParamCounts count_params(const ModelConfig& cfg) {
  cfg.validate();
  ParamCounts pc;
  for (const auto& s : cfg.subnets) {
    std::int64_t n = 0;
    std::int64_t prev = s.in_channels;
    for (int l = 0; l <= s.depth; ++l) {
      const std::int64_t c = channels_at(s, l);
      n += conv_count(prev, c, s.kernel) + conv_count(c, c, s.kernel);
      prev = c;
    }
    for (int l = s.depth - 1; l >= 0; --l) {
      const std::int64_t c = channels_at(s, l);
      n += conv_count(2 * c, c, 2);  // transposed 2x2: (2c)*c*4 + c
      n += conv_count(2 * c, c, s.kernel) + conv_count(c, c, s.kernel);
    }
    n += conv_count(s.base_channels, s.out_channels, 1);
    pc.subnets.push_back(n);
    pc.generator += n;
  }
  for (int i = 0; i + 1 < cfg.levels; ++i) {
    pc.upscalers.push_back(conv_count(3, 3, 2));
    pc.generator += pc.upscalers.back();
  }
  std::int64_t prev = 3;
  for (int c : cfg.discriminator.channels) {
    pc.discriminator += conv_count(prev, c, 3);
    prev = c;
  }
  pc.discriminator += conv_count(prev, 1, 1);
  return pc;
}

namespace {

// He-normal with std sqrt(2 / fan_in).
template <typename T>
void he_normal(Tensor<T>& t, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / fan_in));
  for (T& v : t.values()) v = static_cast<T>(nd(rng));
}

}  // namespace

template <typename T>
CorrectorNet<T>::CorrectorNet(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  for (int i = 0; i < cfg_.levels; ++i) {
    const SubnetConfig& s = cfg_.subnets[static_cast<std::size_t>(i)];
    const std::string p = sub_prefix(i);
    const int k = s.kernel;
    int prev = s.in_channels;
    for (int l = 0; l <= s.depth; ++l) {
      const int c = channels_at(s, l);
      const std::string e = p + "enc" + std::to_string(l) + "/";
      params_.add(e + "conv0/w", Shape{c, prev, k, k});
      params_.add(e + "conv0/b", Shape{c, 1, 1, 1});
      params_.add(e + "conv1/w", Shape{c, c, k, k});
      params_.add(e + "conv1/b", Shape{c, 1, 1, 1});
      prev = c;
    }
    for (int l = s.depth - 1; l >= 0; --l) {
      const int c = channels_at(s, l);
      const std::string d = p + "dec" + std::to_string(l) + "/";
      params_.add(d + "up/w", Shape{2 * c, c, 2, 2});
      params_.add(d + "up/b", Shape{c, 1, 1, 1});
      params_.add(d + "conv0/w", Shape{c, 2 * c, k, k});
      params_.add(d + "conv0/b", Shape{c, 1, 1, 1});
      params_.add(d + "conv1/w", Shape{c, c, k, k});
      params_.add(d + "conv1/b", Shape{c, 1, 1, 1});
    }
    params_.add(p + "out/w", Shape{s.out_channels, s.base_channels, 1, 1});
    params_.add(p + "out/b", Shape{s.out_channels, 1, 1, 1});
  }
  for (int i = 0; i + 1 < cfg_.levels; ++i) {
    params_.add("upscale" + std::to_string(i) + "/w", Shape{3, 3, 2, 2});
    params_.add("upscale" + std::to_string(i) + "/b", Shape{3, 1, 1, 1});
  }
}

template <typename T>
void CorrectorNet<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : params_) {
    const Shape s = t.shape();
    const bool bias = name.ends_with("/b");
    if (bias) {
      std::fill(t.values().begin(), t.values().end(), T(0));
    } else if (name.starts_with("upscale")) {
      std::fill(t.values().begin(), t.values().end(), T(0));
      for (int c = 0; c < 3; ++c)
        for (int q = 0; q < 4; ++q) t.values()[(static_cast<std::size_t>(c) * 3 + c) * 4 + q] = T(1);
    } else if (name.ends_with("up/w")) {
      // Transposed 2x2 stride 2: each output sees every input channel once.
      he_normal(t, s.n, rng);
    } else {
      he_normal(t, s.c * s.h * s.w, rng);
    }
  }
}

template <typename T>
Tensor<T> CorrectorNet<T>::subnet(Graph<T>& g, int index, const Tensor<T>& x) const {
  const SubnetConfig& s = cfg_.subnets[static_cast<std::size_t>(index)];
  const std::string p = sub_prefix(index);
  const T slope = static_cast<T>(cfg_.leaky_slope);
  auto P = [&](const std::string& n) -> const Tensor<T>& { return params_.get(p + n); };
  auto block = [&](const std::string& pre, Tensor<T> h) {
    h = ad::leaky_relu(g, ad::conv2d(g, h, P(pre + "conv0/w"), P(pre + "conv0/b"), 1, 1), slope);
    return ad::leaky_relu(g, ad::conv2d(g, h, P(pre + "conv1/w"), P(pre + "conv1/b"), 1, 1), slope);
  };

  std::vector<Tensor<T>> skips;
  Tensor<T> h = x;
  for (int l = 0; l <= s.depth; ++l) {
    if (l > 0) {
      const Shape hs = h.shape();
      if (hs.h % 2 != 0 || hs.w % 2 != 0) h = ad::pad_replicate(g, h, hs.h % 2, hs.w % 2);
      h = ad::maxpool2x(g, h);
    }
    h = block("enc" + std::to_string(l) + "/", h);
    skips.push_back(h);
  }
  for (int l = s.depth - 1; l >= 0; --l) {
    const std::string pre = "dec" + std::to_string(l) + "/";
    const Tensor<T>& skip = skips[static_cast<std::size_t>(l)];
    Tensor<T> up = ad::conv_transpose2d(g, h, P(pre + "up/w"), P(pre + "up/b"), 2);
    if (up.shape().h != skip.shape().h || up.shape().w != skip.shape().w) {
      up = ad::crop(g, up, skip.shape().h, skip.shape().w);
    }
    h = block(pre, ad::concat_channels(g, skip, up));
  }
  return ad::conv2d(g, h, P("out/w"), P("out/b"), 1, 0);
}

template <typename T>
typename CorrectorNet<T>::Output CorrectorNet<T>::forward(Graph<T>& g, const std::vector<Tensor<T>>& levels,
                                                          const ScaleVector& s) const {
  const int n = cfg_.levels;
  if (static_cast<int>(levels.size()) != n) {
    throw InvalidInput("forward: pyramid has " + std::to_string(levels.size()) + " levels, model expects " +
                       std::to_string(n));
  }
  if (s.size() != n) throw InvalidInput("forward: scale vector length does not match level count");
  for (int l = 0; l + 1 < n; ++l) {
    const Shape a = levels[static_cast<std::size_t>(l)].shape(), b = levels[static_cast<std::size_t>(l + 1)].shape();
    if (a.c != 3 || a.h != 2 * b.h || a.w != 2 * b.w || a.n != b.n) {
      throw InvalidInput("forward: level " + std::to_string(l + 1) + " shape " + a.str() + " is not twice level " +
                         std::to_string(l + 2) + " shape " + b.str());
    }
  }
  auto scaled = [&](int l) {
    const Tensor<T>& x = levels[static_cast<std::size_t>(l)];
    return s[l] == 1.0f ? x : ad::scale(g, x, static_cast<T>(s[l]));
  };
  auto upscale = [&](int i, const Tensor<T>& x) {
    const std::string p = "upscale" + std::to_string(i) + "/";
    return ad::conv_transpose2d(g, x, params_.get(p + "w"), params_.get(p + "b"), 2);
  };

  Output out;
  out.intermediates.resize(static_cast<std::size_t>(std::max(0, n - 1)));
  Tensor<T> r = subnet(g, 0, scaled(n - 1));
  if (n == 1) {
    out.y = r;
    return out;
  }
  Tensor<T> y = upscale(0, r);
  out.intermediates[static_cast<std::size_t>(n - 2)] = y;  // Y(n)
  for (int j = 1; j < n; ++j) {
    const int lvl = n - 1 - j;  // 0-based pyramid level handled by subnet j
    Tensor<T> in = ad::add(g, y, scaled(lvl));
    r = ad::add(g, in, subnet(g, j, in));
    if (lvl > 0) {
      y = upscale(j, r);
      out.intermediates[static_cast<std::size_t>(lvl - 1)] = y;  // Y(lvl + 1)
    } else {
      out.y = r;
    }
  }
  return out;
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& cfg, float leaky_slope)
    : cfg_(cfg), slope_(static_cast<T>(leaky_slope)) {
  int prev = 3;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    const int c = cfg_.channels[i];
    params_.add("disc/conv" + std::to_string(i) + "/w", Shape{c, prev, 3, 3});
    params_.add("disc/conv" + std::to_string(i) + "/b", Shape{c, 1, 1, 1});
    prev = c;
  }
  params_.add("disc/fc/w", Shape{1, prev, 1, 1});
  params_.add("disc/fc/b", Shape{1, 1, 1, 1});
}

template <typename T>
void Discriminator<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : params_) {
    if (name.ends_with("/b")) {
      std::fill(t.values().begin(), t.values().end(), T(0));
    } else {
      const Shape s = t.shape();
      he_normal(t, s.c * s.h * s.w, rng);
    }
  }
}

template <typename T>
Tensor<T> Discriminator<T>::forward(Graph<T>& g, const Tensor<T>& x) const {
  const Shape s = x.shape();
  if (s.c != 3 || s.h != cfg_.input_size || s.w != cfg_.input_size) {
    throw InvalidInput("discriminator: expected (N,3," + std::to_string(cfg_.input_size) + "," +
                       std::to_string(cfg_.input_size) + ") input, got " + s.str());
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    const std::string p = "disc/conv" + std::to_string(i) + "/";
    h = ad::leaky_relu(g, ad::conv2d(g, h, params_.get(p + "w"), params_.get(p + "b"), 2, 1), slope_);
  }
  h = ad::global_avg_pool(g, h);
  return ad::conv2d(g, h, params_.get("disc/fc/w"), params_.get("disc/fc/b"), 1, 0);
}

template <typename Dst, typename Src>
void copy_parameters(ad::ParameterSet<Dst>& dst, const ad::ParameterSet<Src>& src) {
  if (dst.size() != src.size()) throw InvalidInput("copy_parameters: parameter counts differ");
  for (auto& [name, t] : dst) {
    const auto& s = src.get(name);
    if (!(s.shape() == t.shape())) throw InvalidInput("copy_parameters: shape mismatch for " + name);
    auto dv = t.values();
    auto sv = s.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = static_cast<Dst>(sv[i]);
  }
}

template class CorrectorNet<float>;
template class CorrectorNet<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template void copy_parameters(ad::ParameterSet<float>&, const ad::ParameterSet<float>&);
template void copy_parameters(ad::ParameterSet<double>&, const ad::ParameterSet<float>&);
template void copy_parameters(ad::ParameterSet<float>&, const ad::ParameterSet<double>&);
template void copy_parameters(ad::ParameterSet<double>&, const ad::ParameterSet<double>&);

}  // namespace pyrexpose
