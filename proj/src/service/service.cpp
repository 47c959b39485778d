#include "pyrexpose/service.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/beast/core/detail/base64.hpp>
#include <chrono>
#include <fstream>
#include <iterator>
#include <random>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image_io.hpp"

namespace pyrexpose {

namespace fs = std::filesystem;
using nlohmann::json;
namespace b64 = boost::beast::detail::base64;

namespace {

constexpr std::int64_t kMaxPixels = 64ll << 20;

HttpReply error_reply(int status, std::string code, std::string message) {
  return {status, {{"error", {{"code", std::move(code)}, {"message", std::move(message)}}}}};
}

std::string opaque_id() {
  static thread_local std::mt19937_64 rng(std::random_device{}());
  return fmt::format("{:016x}", rng());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_base64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' || c == '/';
}

}  // namespace

void ServiceConfig::validate() const {
  if (host.empty()) throw ConfigError("serve: host must not be empty");
  if (port < 0 || port > 65535) throw ConfigError("serve: port must be in [0, 65535]");
  if (checkpoint.empty()) throw ConfigError("serve: a checkpoint path is required");
  if (max_upload_bytes < 1024) throw ConfigError("serve: max upload size must be at least 1024 bytes");
  if (max_dim < 1) throw ConfigError("serve: max_dim must be >= 1");
  if (threads < 1) throw ConfigError("serve: threads must be >= 1");
  if (default_scales) {
    try {
      default_scales->validate();
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("serve: ") + e.what());
    }
  }
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  // The decoder stops silently at the first invalid character, so the
  // alphabet and padding are checked up front.
  if (text.size() % 4 != 0) throw InvalidInput("base64 length is not a multiple of 4");
  std::size_t pad = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '=') {
      if (i + 2 < text.size()) throw InvalidInput("base64 padding inside the data");
      ++pad;
    } else if (pad > 0 || !is_base64_char(c)) {
      throw InvalidInput("invalid base64 character at offset " + std::to_string(i));
    }
  }
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
  const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  if (read + pad != text.size()) throw InvalidInput("malformed base64");
  out.resize(written);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

CorrectionService::CorrectionService(ServiceConfig config) : config_(std::move(config)), model_(ModelConfig::tiny()) {
  config_.validate();
  const std::vector<std::uint8_t> bytes = read_bytes(config_.checkpoint);
  model_id_ = "sha256:" + sha256_hex(bytes);
  const Checkpoint ck = load_checkpoint(config_.checkpoint);
  model_ = model_from_checkpoint<float>(ck);
  default_scales_ = config_.default_scales.value_or(ck.config.scale_defaults);
  if (default_scales_.size() != ck.config.levels) {
    throw ConfigError("serve: default scales have " + std::to_string(default_scales_.size()) + " entries, model has " +
                      std::to_string(ck.config.levels) + " levels");
  }
  spdlog::info("loaded {} ({} generator parameters)", config_.checkpoint.string(),
               model_.generator.params().total_elements());
}

HttpReply CorrectionService::health() const { return {200, {{"status", "ok"}}}; }

HttpReply CorrectionService::model_info() const {
  return {200,
          {{"model_id", model_id_},
           {"config", model_.config.to_json()},
           {"levels", model_.config.levels},
           {"default_scales", default_scales_.s},
           {"max_dim", config_.max_dim},
           {"max_upload_bytes", config_.max_upload_bytes}}};
}

HttpReply CorrectionService::correct(std::string_view request_body) const {
  if (request_body.size() > config_.max_upload_bytes) {
    return error_reply(413, "payload_too_large",
                       fmt::format("request is {} bytes, limit is {}", request_body.size(), config_.max_upload_bytes));
  }
  const json req = json::parse(request_body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return error_reply(400, "invalid_json", "request body is not a JSON object");
  if (!req.contains("image") || !req.at("image").is_string()) {
    return error_reply(400, "missing_image", "'image' must be a base64-encoded PNG string");
  }

  ScaleVector scales = default_scales_;
  if (req.contains("scales") && !req.at("scales").is_null()) {
    const json& s = req.at("scales");
    if (!s.is_array() || !std::all_of(s.begin(), s.end(), [](const json& v) { return v.is_number(); })) {
      return error_reply(400, "invalid_scales", "'scales' must be an array of numbers");
    }
    scales.s = s.get<std::vector<float>>();
    if (scales.size() != model_.config.levels) {
      return error_reply(400, "invalid_scales", fmt::format("expected {} scales, got {}", model_.config.levels, scales.size()));
    }
    try {
      scales.validate();
    } catch (const InvalidInput& e) {
      return error_reply(400, "invalid_scales", e.what());
    }
  }

  int max_dim = config_.max_dim;
  if (req.contains("max_dim") && !req.at("max_dim").is_null()) {
    const json& m = req.at("max_dim");
    if (!m.is_number_integer() || m.get<std::int64_t>() < 1 || m.get<std::int64_t>() > 1 << 16) {
      return error_reply(400, "invalid_max_dim", "'max_dim' must be a positive integer");
    }
    max_dim = m.get<int>();
  }

  std::vector<std::uint8_t> png;
  try {
    png = base64_decode(req.at("image").get_ref<const std::string&>());
  } catch (const InvalidInput& e) {
    return error_reply(400, "invalid_base64", e.what());
  }
  Image input;
  try {
    input = decode_png(png);
  } catch (const std::exception& e) {
    return error_reply(400, "invalid_png", e.what());
  }
  if (static_cast<std::int64_t>(input.height()) * input.width() > kMaxPixels) {
    return error_reply(413, "image_too_large", "decoded image exceeds the pixel limit");
  }

  try {
    CorrectTimings t;
    const Image out = pyrexpose::correct(input, model_, scales, max_dim, &t);
    const std::vector<std::uint8_t> encoded = encode_png(out);
    return {200,
            {{"image", base64_encode(encoded)},
             {"timings_ms", {{"network", t.network_ms}, {"bgu", t.bgu_ms}, {"total", t.total_ms}}},
             {"used_bgu", t.used_bgu},
             {"model_id", model_id_}}};
  } catch (const std::exception& e) {
    const std::string id = opaque_id();
    spdlog::error("request {} failed: {}", id, e.what());
    return {500, {{"error", {{"code", "internal_error"}, {"message", "internal error"}, {"id", id}}}}};
  }
}

void CorrectionService::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.set_payload_max_length(config_.max_upload_bytes);
  server.Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Get("/v1/model", [this, send](const httplib::Request&, httplib::Response& res) { send(res, model_info()); });
  server.Post("/v1/correct", [this, send](const httplib::Request& req, httplib::Response& res) {
    const auto start = std::chrono::steady_clock::now();
    const HttpReply r = correct(req.body);
    send(res, r);
    spdlog::info("POST /v1/correct {} {} bytes {:.1f} ms", r.status, req.body.size(),
                 std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  });
  // Fills in bodies for statuses produced by the server itself, such as
  // 413 from the payload limit and 404 for unknown routes.
  server.set_error_handler([send](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) {
      send(res, error_reply(413, "payload_too_large", "request body exceeds the upload limit"));
    } else if (res.status == 404) {
      send(res, error_reply(404, "not_found", "no route for " + req.method + " " + req.path));
    } else {
      send(res, error_reply(res.status, "http_error", httplib::status_message(res.status)));
    }
  });
  server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    const std::string id = opaque_id();
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      spdlog::error("request {} failed: {}", id, e.what());
    } catch (...) {
      spdlog::error("request {} failed with an unknown exception", id);
    }
    send(res, {500, {{"error", {{"code", "internal_error"}, {"message", "internal error"}, {"id", id}}}}});
  });
}

void serve(const ServiceConfig& config) {
  const CorrectionService service(config);
  httplib::Server server;
  server.new_task_queue = [n = config.threads] { return new httplib::ThreadPool(static_cast<std::size_t>(n)); };
  service.mount(server);
  int port = config.port;
  if (port == 0) {
    port = server.bind_to_any_port(config.host);
    if (port < 0) throw IoError("cannot bind " + config.host);
  } else if (!server.bind_to_port(config.host, port)) {
    throw IoError(fmt::format("cannot bind {}:{}", config.host, port));
  }
  spdlog::info("serving model {} on http://{}:{}/v1", service.model_id(), config.host, port);
  server.listen_after_bind();
}

}  // namespace pyrexpose
