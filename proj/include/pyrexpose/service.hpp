#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pyrexpose/infer.hpp"
#include "pyrexpose/model.hpp"
#include "pyrexpose/pyramid.hpp"

namespace httplib {
class Server;
}

namespace pyrexpose {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path checkpoint;
  std::size_t max_upload_bytes = 32u << 20;
  /// Falls back to the checkpoint's default scale vector.
  std::optional<ScaleVector> default_scales;
  int max_dim = kDefaultMaxDim;
  int threads = 4;

  void validate() const;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws InvalidInput on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

// Request handling without a socket. The model is loaded once and never
// modified, so one instance serves concurrent requests.
class CorrectionService {
 public:
  /// Loads the checkpoint; throws if it is missing or corrupt.
  explicit CorrectionService(ServiceConfig config);

  HttpReply correct(std::string_view request_body) const;
  HttpReply model_info() const;
  HttpReply health() const;

  const std::string& model_id() const { return model_id_; }
  const ServiceConfig& config() const { return config_; }
  const ScaleVector& default_scales() const { return default_scales_; }

  /// Registers the /v1 routes, the upload limit and JSON error pages.
  void mount(httplib::Server& server) const;

 private:
  ServiceConfig config_;
  Model<float> model_;
  ScaleVector default_scales_;
  std::string model_id_;
};

/// Binds and blocks until the process is stopped.
void serve(const ServiceConfig& config);

}  // namespace pyrexpose
