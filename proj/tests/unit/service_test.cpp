#include <fstream>
#include <thread>

#include "doctest.h"
#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/commands.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image_io.hpp"
#include "pyrexpose/imaging.hpp"
#include "pyrexpose/service.hpp"
#include "support/testing.hpp"

// After Eigen: <resolv.h>, pulled in here, defines a macro named _res.
#include "httplib.h"

using namespace pyrexpose;
using nlohmann::json;
using pyrexpose::testing::TempDir;

namespace {

std::filesystem::path write_model(const std::filesystem::path& dir, std::uint64_t seed = 1) {
  Model<float> m(ModelConfig::desk());
  m.initialize(seed);
  const auto path = dir / "m.ckpt";
  save_checkpoint(to_checkpoint(m), path);
  return path;
}

std::string png_b64(const Image& img) { return base64_encode(encode_png(img)); }

// Serves one CorrectionService on an ephemeral port for the test's lifetime.
class LiveServer {
 public:
  explicit LiveServer(const CorrectionService& service) {
    service.mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("file names") {
    CHECK(ev_file_name("a", -1.5f) == "a_ev-1.5.png");
    CHECK(ev_file_name("a", 1.0f) == "a_ev+1.0.png");
    CHECK(ev_file_name("a", 0.0f) == "a_ev+0.0.png");
    CHECK(ev_file_name("a", -0.0f) == "a_ev+0.0.png");
  }

  TEST_CASE("five renderings per source") {
    TempDir dir("synth");
    std::filesystem::create_directories(dir.path() / "src");
    for (int i = 0; i < 10; ++i) {
      save_image(synthetic_scene(24, 24, static_cast<std::uint64_t>(i)), dir.path() / "src" / ("s" + std::to_string(i) + ".png"));
    }
    SynthOptions opt;
    opt.test_fraction = 0.2;
    opt.seed = 4;
    const DatasetManifest m = synthesize_dataset(dir.path() / "src", dir.path() / "out", dir.path() / "m.json", opt);
    CHECK(m.entries.size() == 50);
    CHECK(m.select(Split::kTest).size() == 10);
    const DatasetManifest back = load_manifest(dir.path() / "m.json");
    REQUIRE(back.entries.size() == 50);
    for (const auto& e : back.entries) {
      if (e.relative_ev == 0.0f) CHECK(load_image(e.input_path).data() == load_image(e.target_path).data());
    }
    CHECK(std::filesystem::exists(dir.path() / "out" / "s3_ev+1.5.png"));
    // Every rendering of one scene shares its split.
    for (std::size_t i = 0; i < 50; i += 5)
      for (std::size_t k = 1; k < 5; ++k) CHECK(back.entries[i + k].split == back.entries[i].split);
  }

  TEST_CASE("errors") {
    TempDir dir("synth");
    std::filesystem::create_directories(dir.path() / "empty");
    CHECK_THROWS_AS(synthesize_dataset(dir.path() / "empty", dir.path() / "o", dir.path() / "m.json"), InvalidInput);
    SynthOptions dup;
    dup.evs = {1.0f, 1.02f};
    CHECK_THROWS_AS(dup.validate(), ConfigError);
    SynthOptions frac;
    frac.val_fraction = 0.7;
    frac.test_fraction = 0.5;
    CHECK_THROWS_AS(frac.validate(), ConfigError);
  }

  TEST_CASE("pyramid dumps") {
    TempDir dir("pyr");
    const auto files = dump_pyramid(synthetic_scene(32, 32, 1), 4, dir.path());
    REQUIRE(files.size() == 4);
    CHECK(load_image(files[0]).height() == 32);
    CHECK(load_image(files[3]).height() == 4);
  }
}

TEST_SUITE("eval") {
  TEST_CASE("manifest evaluation report") {
    TempDir dir("eval");
    std::filesystem::create_directories(dir.path() / "src");
    for (int i = 0; i < 2; ++i) {
      save_image(synthetic_scene(32, 32, static_cast<std::uint64_t>(i)), dir.path() / "src" / ("s" + std::to_string(i) + ".png"));
    }
    SynthOptions opt;
    opt.evs = {-1.0f, 1.0f};
    opt.test_fraction = 1.0;
    const DatasetManifest m = synthesize_dataset(dir.path() / "src", dir.path() / "out", dir.path() / "m.json", opt);
    const json report = evaluate_manifest(load_manifest(dir.path() / "m.json"), write_model(dir.path()));
    CHECK(report.at("images").size() == 4);
    CHECK(report.at("aggregate").at("count") == 4);
    CHECK(report.at("aggregate").at("psnr").is_number());
    CHECK(report.at("aggregate").at("psnr_by_ev").contains("-1.0"));

    EvalOptions val;
    val.split = Split::kVal;
    CHECK_THROWS_AS(evaluate_manifest(m, dir.path() / "m.ckpt", val), InvalidInput);
  }
}

TEST_SUITE("service") {
  TEST_CASE("base64 and hashing") {
    const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 251, 252, 253};
    CHECK(base64_encode(bytes) == "AAEC+vv8/Q==");
    CHECK(base64_decode("AAEC+vv8/Q==") == bytes);
    CHECK(base64_decode("").empty());
    CHECK_THROWS_AS(base64_decode("AAE"), InvalidInput);
    CHECK_THROWS_AS(base64_decode("AA*C"), InvalidInput);
    CHECK_THROWS_AS(base64_decode("A=BC"), InvalidInput);
    const std::string abc = "abc";
    CHECK(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("startup requires a loadable checkpoint") {
    TempDir dir("svc");
    ServiceConfig cfg;
    cfg.checkpoint = dir.path() / "missing.ckpt";
    CHECK_THROWS(CorrectionService{cfg});
    {
      std::ofstream(dir.path() / "junk.ckpt") << "not a checkpoint";
    }
    cfg.checkpoint = dir.path() / "junk.ckpt";
    CHECK_THROWS_AS(CorrectionService{cfg}, CheckpointError);
    cfg.checkpoint.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("request handling") {
    TempDir dir("svc");
    ServiceConfig cfg;
    cfg.checkpoint = write_model(dir.path());
    const CorrectionService svc(cfg);
    CHECK(svc.health().body == json{{"status", "ok"}});
    const HttpReply info = svc.model_info();
    CHECK(info.body.at("model_id") == svc.model_id());
    CHECK(info.body.at("default_scales").get<std::vector<float>>() == ScaleVector::defaults(4).s);
    CHECK(svc.model_id().starts_with("sha256:"));

    const Image img = synthetic_scene(40, 56, 3);
    const HttpReply ok = svc.correct(json{{"image", png_b64(img)}}.dump());
    REQUIRE(ok.status == 200);
    const Image out = decode_png(base64_decode(ok.body.at("image").get<std::string>()));
    CHECK(out.height() == 40);
    CHECK(out.width() == 56);
    CHECK(ok.body.at("model_id") == svc.model_id());
    CHECK(ok.body.at("timings_ms").contains("total"));

    // Omitted scales mean the defaults.
    const HttpReply explicit_defaults =
        svc.correct(json{{"image", png_b64(img)}, {"scales", {1.8, 1.8, 1.8, 1.12}}}.dump());
    CHECK(explicit_defaults.body.at("image") == ok.body.at("image"));
    const HttpReply again = svc.correct(json{{"image", png_b64(img)}}.dump());
    CHECK(again.body.at("image") == ok.body.at("image"));

    auto code = [&](const std::string& body) {
      const HttpReply r = svc.correct(body);
      return std::make_pair(r.status, r.body.at("error").at("code").get<std::string>());
    };
    CHECK(code("{") == std::make_pair(400, std::string("invalid_json")));
    CHECK(code(R"({"scales": [1,1,1,1]})") == std::make_pair(400, std::string("missing_image")));
    CHECK(code(R"({"image": "@@@@"})") == std::make_pair(400, std::string("invalid_base64")));
    CHECK(code(R"({"image": "aGVsbG8="})") == std::make_pair(400, std::string("invalid_png")));
    CHECK(code(json{{"image", png_b64(img)}, {"scales", {1, 1}}}.dump()) == std::make_pair(400, std::string("invalid_scales")));
    CHECK(code(json{{"image", png_b64(img)}, {"scales", {1, 1, -1, 1}}}.dump()) ==
          std::make_pair(400, std::string("invalid_scales")));
    CHECK(code(json{{"image", png_b64(img)}, {"max_dim", 0}}.dump()) == std::make_pair(400, std::string("invalid_max_dim")));
  }

  TEST_CASE("over HTTP") {
    TempDir dir("svc");
    ServiceConfig cfg;
    cfg.checkpoint = write_model(dir.path());
    cfg.max_upload_bytes = 64 * 1024;
    const auto ckpt_before = std::filesystem::last_write_time(cfg.checkpoint);
    const CorrectionService svc(cfg);
    LiveServer live(svc);
    auto cli = live.client();

    auto health = cli.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body) == json{{"status", "ok"}});

    auto model1 = cli.Get("/v1/model");
    auto model2 = cli.Get("/v1/model");
    REQUIRE(model1);
    REQUIRE(model2);
    CHECK(json::parse(model1->body).at("model_id") == json::parse(model2->body).at("model_id"));

    const std::string body = json{{"image", png_b64(synthetic_scene(32, 48, 5))}}.dump();
    auto r1 = cli.Post("/v1/correct", body, "application/json");
    auto r2 = cli.Post("/v1/correct", body, "application/json");
    REQUIRE(r1);
    REQUIRE(r2);
    CHECK(r1->status == 200);
    CHECK(json::parse(r1->body).at("image") == json::parse(r2->body).at("image"));

    auto bad = cli.Post("/v1/correct", R"({"image": "!!"})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body).at("error").at("code") == "invalid_base64");

    auto huge = cli.Post("/v1/correct", std::string(100 * 1024, 'x'), "application/json");
    REQUIRE(huge);
    CHECK(huge->status == 413);
    CHECK(json::parse(huge->body).at("error").at("code") == "payload_too_large");

    auto missing = cli.Get("/v2/health");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    CHECK(std::filesystem::last_write_time(cfg.checkpoint) == ckpt_before);
  }

  TEST_CASE("concurrent requests agree") {
    TempDir dir("svc");
    ServiceConfig cfg;
    cfg.checkpoint = write_model(dir.path(), 5);
    const CorrectionService svc(cfg);
    const std::string body = json{{"image", png_b64(synthetic_scene(48, 48, 9))}, {"max_dim", 32}}.dump();
    const std::string want = svc.correct(body).body.at("image");
    std::vector<std::string> got(4);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < got.size(); ++i) {
      threads.emplace_back([&, i] { got[i] = svc.correct(body).body.at("image"); });
    }
    for (auto& t : threads) t.join();
    for (const auto& g : got) CHECK(g == want);
  }
}
