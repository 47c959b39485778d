#include "pyrexpose/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <vector>

#include "pyrexpose/border.hpp"
#include "pyrexpose/error.hpp"

namespace pyrexpose {

using nlohmann::json;

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b) || a.empty()) {
    throw InvalidInput(std::string(what) + ": images must be non-empty and share dimensions");
  }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    k[static_cast<std::size_t>(i)] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    s += k[static_cast<std::size_t>(i)];
  }
  for (double& v : k) v /= s;
  return k;
}

// Row-major single-channel plane in double precision.
struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane luma_plane(const Image& img, double scale) {
  Plane p(img.height(), img.width());
  const auto l = img.luma();
  for (std::size_t i = 0; i < l.size(); ++i) p.v[i] = scale * l[i];
  return p;
}

// Separable filter keeping only positions where the kernel fits.
Plane filter_valid(const Plane& in, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  Plane tmp(in.h, in.w - n + 1);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < tmp.w; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * in.at(y, x + i);
      tmp.at(y, x) = s;
    }
  Plane out(in.h - n + 1, tmp.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp.at(y + i, x);
      out.at(y, x) = s;
    }
  return out;
}

// Same-size separable filter with replicated borders.
Plane filter_same(const Plane& in, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size()), r = n / 2;
  Plane tmp(in.h, in.w), out(in.h, in.w);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * in.at(y, clamp_index(x + i - r, in.w));
      tmp.at(y, x) = s;
    }
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp.at(clamp_index(y + i - r, in.h), x);
      out.at(y, x) = s;
    }
  return out;
}

Plane multiply(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(a.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  constexpr int kWindow = 11;
  if (a.height() < kWindow || a.width() < kWindow) throw InvalidInput("ssim: images must be at least 11x11");
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  static const std::vector<double> k = gaussian_kernel(kWindow, 1.5);

  const Plane x = luma_plane(a, 1.0), y = luma_plane(b, 1.0);
  const Plane mx = filter_valid(x, k), my = filter_valid(y, k);
  const Plane sxx = filter_valid(multiply(x, x), k), syy = filter_valid(multiply(y, y), k);
  const Plane sxy = filter_valid(multiply(x, y), k);

  double total = 0.0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    const double ux = mx.v[i], uy = my.v[i];
    const double vx = sxx.v[i] - ux * ux, vy = syy.v[i] - uy * uy, cxy = sxy.v[i] - ux * uy;
    total += ((2.0 * ux * uy + C1) * (2.0 * cxy + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2));
  }
  return total / static_cast<double>(mx.v.size());
}

// ---------------------------------------------------------------------------
// NIQE

namespace {

struct AggdFit {
  double alpha = 2.0;
  double left = 0.0;   // scale of the negative side
  double right = 0.0;  // scale of the positive side
};

// Moment-matching fit of an asymmetric generalized Gaussian over a shape
// grid 0.2:0.001:10.
AggdFit fit_aggd(const std::vector<double>& x) {
  static const std::vector<std::pair<double, double>> table = [] {
    std::vector<std::pair<double, double>> t;
    for (int i = 0; i <= 9800; ++i) {
      const double g = 0.2 + 0.001 * i;
      t.emplace_back(g, std::exp(2.0 * std::lgamma(2.0 / g) - std::lgamma(1.0 / g) - std::lgamma(3.0 / g)));
    }
    return t;
  }();
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double v : x) {
    if (v < 0) {
      left_sq += v * v;
      ++left_n;
    } else if (v > 0) {
      right_sq += v * v;
      ++right_n;
    }
    abs_sum += std::abs(v);
    sq_sum += v * v;
  }
  constexpr double kTiny = 1e-12;
  const double left_std = std::sqrt(left_sq / std::max<std::size_t>(left_n, 1));
  const double right_std = std::sqrt(right_sq / std::max<std::size_t>(right_n, 1));
  const double n = static_cast<double>(std::max<std::size_t>(x.size(), 1));
  const double gamma_hat = (left_std + kTiny) / (right_std + kTiny);
  const double r_hat = (abs_sum / n) * (abs_sum / n) / std::max(sq_sum / n, kTiny);
  const double g2 = gamma_hat * gamma_hat;
  const double r_norm = r_hat * (g2 * gamma_hat + 1.0) * (gamma_hat + 1.0) / ((g2 + 1.0) * (g2 + 1.0));

  AggdFit fit;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [g, r] : table) {
    const double e = (r - r_norm) * (r - r_norm);
    if (e < best) {
      best = e;
      fit.alpha = g;
    }
  }
  const double ratio = std::sqrt(std::exp(std::lgamma(1.0 / fit.alpha) - std::lgamma(3.0 / fit.alpha)));
  fit.left = left_std * ratio;
  fit.right = right_std * ratio;
  return fit;
}

// MSCN coefficients and local deviation map on a 0-255 luma plane.
void mscn(const Plane& img, Plane& coeffs, Plane& sigma) {
  static const std::vector<double> k = gaussian_kernel(7, 7.0 / 6.0);
  const Plane mu = filter_same(img, k);
  const Plane sq = filter_same(multiply(img, img), k);
  coeffs = Plane(img.h, img.w);
  sigma = Plane(img.h, img.w);
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    sigma.v[i] = std::sqrt(std::abs(sq.v[i] - mu.v[i] * mu.v[i]));
    coeffs.v[i] = (img.v[i] - mu.v[i]) / (sigma.v[i] + 1.0);
  }
}

// 18 features of one patch of MSCN coefficients.
std::array<double, 18> patch_features(const Plane& c, int y0, int x0, int size) {
  std::array<double, 18> f{};
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) vals.push_back(c.at(y0 + y, x0 + x));
  const AggdFit base = fit_aggd(vals);
  f[0] = base.alpha;
  f[1] = (base.left * base.left + base.right * base.right) / 2.0;

  // Products with the circularly shifted patch: horizontal, vertical and
  // both diagonals.
  constexpr int kShifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  std::vector<double> prod(vals.size());
  for (int s = 0; s < 4; ++s) {
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int sy = ((y - kShifts[s][0]) % size + size) % size;
        const int sx = ((x - kShifts[s][1]) % size + size) % size;
        prod[static_cast<std::size_t>(y) * size + x] = c.at(y0 + y, x0 + x) * c.at(y0 + sy, x0 + sx);
      }
    const AggdFit p = fit_aggd(prod);
    const double mean =
        (p.right - p.left) * std::exp(std::lgamma(2.0 / p.alpha) - std::lgamma(1.0 / p.alpha));
    f[static_cast<std::size_t>(2 + 4 * s)] = p.alpha;
    f[static_cast<std::size_t>(3 + 4 * s)] = mean;
    f[static_cast<std::size_t>(4 + 4 * s)] = p.left * p.left;
    f[static_cast<std::size_t>(5 + 4 * s)] = p.right * p.right;
  }
  return f;
}

// 2x2 box decimation (odd trailing row/column dropped).
Plane half(const Plane& p) {
  Plane out(p.h / 2, p.w / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      out.at(y, x) = 0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                             p.at(2 * y + 1, 2 * x + 1));
    }
  return out;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& rows, const Eigen::VectorXd& mean) {
  const Eigen::Index n = rows.rows();
  if (n < 2) return Eigen::MatrixXd::Zero(rows.cols(), rows.cols());
  const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

}  // namespace

Eigen::MatrixXd niqe_patch_features(const Image& img, int patch_size, bool select_sharp, double sharpness_threshold) {
  if (patch_size < 8 || patch_size % 2 != 0) throw InvalidInput("niqe: patch size must be even and >= 8");
  const int ny = img.height() / patch_size, nx = img.width() / patch_size;
  if (ny < 1 || nx < 1) {
    throw InvalidInput("niqe: image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                       " is smaller than one " + std::to_string(patch_size) + "-pixel patch");
  }
  const Plane l1 = luma_plane(img, 255.0);
  Plane c1, s1, c2, s2;
  mscn(l1, c1, s1);
  mscn(half(l1), c2, s2);
  const int half_size = patch_size / 2;

  std::vector<double> sharpness;
  for (int py = 0; py < ny; ++py)
    for (int px = 0; px < nx; ++px) {
      double s = 0.0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x) s += s1.at(py * patch_size + y, px * patch_size + x);
      sharpness.push_back(s / (static_cast<double>(patch_size) * patch_size));
    }
  const double max_sharp = *std::max_element(sharpness.begin(), sharpness.end());

  std::vector<std::array<double, kNiqeFeatureCount>> rows;
  for (int py = 0; py < ny; ++py)
    for (int px = 0; px < nx; ++px) {
      const double sharp = sharpness[static_cast<std::size_t>(py) * nx + px];
      if (select_sharp && !(sharp > sharpness_threshold * max_sharp)) continue;
      const auto a = patch_features(c1, py * patch_size, px * patch_size, patch_size);
      const auto b = patch_features(c2, py * half_size, px * half_size, half_size);
      std::array<double, kNiqeFeatureCount> row{};
      std::copy(a.begin(), a.end(), row.begin());
      std::copy(b.begin(), b.end(), row.begin() + 18);
      rows.push_back(row);
    }
  // A perfectly flat image has max_sharp == 0 and no patch strictly above
  // the threshold; keep all patches then.
  if (rows.empty()) return niqe_patch_features(img, patch_size, false);

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), kNiqeFeatureCount);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < kNiqeFeatureCount; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  return m;
}

NiqeModel niqe_fit(std::span<const Image> pristine, int patch_size, double sharpness_threshold) {
  if (static_cast<int>(pristine.size()) < kNiqeMinPristine) {
    throw InvalidInput("niqe_fit: need at least " + std::to_string(kNiqeMinPristine) + " pristine images, got " +
                       std::to_string(pristine.size()));
  }
  if (!(sharpness_threshold >= 0.0 && sharpness_threshold < 1.0)) {
    throw InvalidInput("niqe_fit: sharpness threshold must be in [0,1)");
  }
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index total = 0;
  for (const Image& img : pristine) {
    parts.push_back(niqe_patch_features(img, patch_size, true, sharpness_threshold));
    total += parts.back().rows();
  }
  Eigen::MatrixXd all(total, kNiqeFeatureCount);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    all.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  NiqeModel m;
  m.patch_size = patch_size;
  m.sharpness_threshold = sharpness_threshold;
  m.mean = all.colwise().mean().transpose();
  m.covariance = covariance(all, m.mean);
  return m;
}

double niqe_score(const Image& img, const NiqeModel& model) {
  if (model.mean.size() != kNiqeFeatureCount || model.covariance.rows() != kNiqeFeatureCount ||
      model.covariance.cols() != kNiqeFeatureCount) {
    throw InvalidInput("niqe_score: model is not a fitted 36-feature model");
  }
  const Eigen::MatrixXd feats = niqe_patch_features(img, model.patch_size, false);
  const Eigen::VectorXd mu = feats.colwise().mean().transpose();
  const Eigen::MatrixXd cov = 0.5 * (model.covariance + covariance(feats, mu));
  const Eigen::MatrixXd pinv = cov.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::VectorXd d = model.mean - mu;
  return std::sqrt(std::max(0.0, d.dot(pinv * d)));
}

json NiqeModel::to_json() const {
  std::vector<double> mu(mean.data(), mean.data() + mean.size());
  std::vector<double> cov;
  for (Eigen::Index r = 0; r < covariance.rows(); ++r)
    for (Eigen::Index c = 0; c < covariance.cols(); ++c) cov.push_back(covariance(r, c));
  return {{"patch_size", patch_size}, {"sharpness_threshold", sharpness_threshold}, {"mean", mu}, {"covariance", cov}};
}

NiqeModel NiqeModel::from_json(const json& j) {
  NiqeModel m;
  try {
    m.patch_size = j.at("patch_size").get<int>();
    m.sharpness_threshold = j.at("sharpness_threshold").get<double>();
    const auto mu = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<double>>();
    if (mu.size() != kNiqeFeatureCount || cov.size() != mu.size() * mu.size()) {
      throw InvalidInput("niqe model: expected 36 means and a 36x36 covariance");
    }
    m.mean = Eigen::Map<const Eigen::VectorXd>(mu.data(), kNiqeFeatureCount);
    m.covariance = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cov.data(), kNiqeFeatureCount, kNiqeFeatureCount);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("niqe model: ") + e.what());
  }
  return m;
}

void NiqeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump();
}

NiqeModel NiqeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InvalidInput("niqe model " + path.string() + ": " + e.what());
  }
}

json MetricsReport::to_json() const {
  json j = {{"psnr", std::isinf(psnr) ? json("inf") : json(psnr)}, {"ssim", ssim}};
  j["niqe"] = niqe ? json(*niqe) : json(nullptr);
  j["pi"] = pi ? json(*pi) : json(nullptr);
  return j;
}

MetricsReport evaluate(const Image& output, const Image& reference, const NiqeModel* niqe, std::optional<double> ma) {
  MetricsReport r;
  r.psnr = psnr(output, reference);
  r.ssim = ssim(output, reference);
  if (niqe) {
    r.niqe = niqe_score(output, *niqe);
    if (ma) r.pi = perceptual_index(*ma, *r.niqe);
  }
  return r;
}

}  // namespace pyrexpose
