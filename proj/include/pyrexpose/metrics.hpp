#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "json.hpp"
#include "pyrexpose/image.hpp"

namespace pyrexpose {

/// Returned by psnr() for identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// Peak 1.0, mean squared error over all pixels and channels.
double psnr(const Image& a, const Image& b);

// Single-scale SSIM on Rec.709 luma: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over the window positions
// that fit entirely inside the image. Both sides must be at least 11.
double ssim(const Image& a, const Image& b);

inline constexpr int kNiqeFeatureCount = 36;

// Multivariate Gaussian over natural-scene-statistic features, fitted
// locally. Scores are not comparable with published reference models.
struct NiqeModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  int patch_size = 96;
  double sharpness_threshold = 0.75;

  nlohmann::json to_json() const;
  static NiqeModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static NiqeModel load(const std::filesystem::path& path);
};

/// Per-patch features (rows) of one image, 18 per scale over two scales.
/// With `select_sharp`, only patches whose mean local deviation exceeds
/// `sharpness_threshold` times the image maximum are kept.
Eigen::MatrixXd niqe_patch_features(const Image& img, int patch_size, bool select_sharp,
                                    double sharpness_threshold = 0.75);

inline constexpr int kNiqeMinPristine = 20;

NiqeModel niqe_fit(std::span<const Image> pristine, int patch_size = 96, double sharpness_threshold = 0.75);
double niqe_score(const Image& img, const NiqeModel& model);

/// 0.5 * (10 - ma + niqe); Ma is computed elsewhere.
inline double perceptual_index(double ma, double niqe) { return 0.5 * (10.0 - ma + niqe); }

struct MetricsReport {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> niqe;
  std::optional<double> pi;

  nlohmann::json to_json() const;
};

/// PI is filled only when both a NIQE model and an Ma value are given.
MetricsReport evaluate(const Image& output, const Image& reference, const NiqeModel* niqe = nullptr,
                       std::optional<double> ma = std::nullopt);

}  // namespace pyrexpose
