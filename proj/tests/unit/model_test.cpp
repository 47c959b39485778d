#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pyrexpose/autodiff/ops.hpp"
#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/model.hpp"
#include "pyrexpose/tensor_image.hpp"
#include "support/testing.hpp"

using namespace pyrexpose;
using pyrexpose::testing::random_image;
using pyrexpose::testing::random_tensor;
using pyrexpose::testing::flat_params;
using pyrexpose::testing::TempDir;

namespace {

std::vector<ad::Tensor<float>> pyramid_batch(int size, int n, int batch, std::uint64_t seed) {
  std::vector<Pyramid> p;
  for (int i = 0; i < batch; ++i) p.push_back(laplacian_decompose(random_image(size, size, seed + i), n));
  return pyramid_tensors<float>(std::span<const Pyramid>(p));
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("full-size parameter budgets") {
    const ParamCounts pc = count_params(ModelConfig::full());
    REQUIRE(pc.subnets.size() == 4);
    CHECK(pc.subnets[0] == 4365915);
    CHECK(pc.subnets[1] == 1083675);
    CHECK(pc.subnets[2] == 1083675);
    CHECK(pc.subnets[3] == 482067);
    CHECK(pc.upscalers.size() == 3);
    CHECK(pc.generator == 7015449);
    CHECK(pc.discriminator == 982945);
  }

  TEST_CASE("instantiated networks match the closed-form counts") {
    for (const ModelConfig& cfg : {ModelConfig::desk(), ModelConfig::tiny()}) {
      const ParamCounts pc = count_params(cfg);
      const Model<float> m(cfg);
      CHECK(static_cast<std::int64_t>(m.generator.params().total_elements()) == pc.generator);
      CHECK(static_cast<std::int64_t>(m.discriminator.params().total_elements()) == pc.discriminator);
    }
    CHECK(count_params(ModelConfig::desk()).generator == 848481);
    CHECK(count_params(ModelConfig::tiny()).generator == 53721);
  }

  TEST_CASE("config validation and JSON round trip") {
    const ModelConfig full = ModelConfig::full();
    CHECK(ModelConfig::from_json(full.to_json()) == full);
    CHECK(full.size_multiple() == 8);

    ModelConfig bad = full;
    bad.subnets.pop_back();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = full;
    bad.scale_defaults = ScaleVector::ones(3);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = full;
    bad.leaky_slope = 1.5f;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json(nlohmann::json{{"levels", "four"}}), ConfigError);
  }

  TEST_CASE("forward shapes on the tiny preset") {
    Model<float> m(ModelConfig::tiny());
    m.initialize(1);
    const auto levels = pyramid_batch(8, 4, 2, 10);
    ad::Graph<float> g(false);
    const auto out = m.generator.forward(g, levels, ScaleVector::ones(4));
    CHECK(out.y.shape() == ad::Shape{2, 3, 8, 8});
    REQUIRE(out.intermediates.size() == 3);
    CHECK(out.intermediates[0].shape() == ad::Shape{2, 3, 8, 8});  // Y(2)
    CHECK(out.intermediates[1].shape() == ad::Shape{2, 3, 4, 4});  // Y(3)
    CHECK(out.intermediates[2].shape() == ad::Shape{2, 3, 2, 2});  // Y(4)
  }

  TEST_CASE("forward handles non-square inputs on the desk preset") {
    Model<float> m(ModelConfig::desk());
    m.initialize(2);
    std::vector<Pyramid> p{laplacian_decompose(random_image(24, 40, 3), 4)};
    const auto levels = pyramid_tensors<float>(std::span<const Pyramid>(p));
    ad::Graph<float> g(false);
    const auto out = m.generator.forward(g, levels, ScaleVector::defaults(4));
    CHECK(out.y.shape() == ad::Shape{1, 3, 24, 40});
    for (float v : out.y.values()) CHECK(std::isfinite(v));
  }

  TEST_CASE("forward rejects inconsistent pyramids and scales") {
    Model<float> m(ModelConfig::tiny());
    m.initialize(1);
    auto levels = pyramid_batch(8, 4, 1, 1);
    ad::Graph<float> g(false);
    CHECK_THROWS_AS(m.generator.forward(g, levels, ScaleVector::ones(3)), InvalidInput);
    levels.pop_back();
    CHECK_THROWS_AS(m.generator.forward(g, levels, ScaleVector::ones(4)), InvalidInput);
  }

  TEST_CASE("initialisation is seeded") {
    Model<float> a(ModelConfig::tiny()), b(ModelConfig::tiny()), c(ModelConfig::tiny());
    a.initialize(5);
    b.initialize(5);
    c.initialize(6);
    CHECK(flat_params(a.generator.params()) == flat_params(b.generator.params()));
    CHECK(flat_params(a.discriminator.params()) == flat_params(b.discriminator.params()));
    CHECK(flat_params(a.generator.params()) != flat_params(c.generator.params()));
  }

  TEST_CASE("upscalers start as nearest-neighbour replication") {
    Model<double> m(ModelConfig::tiny());
    m.initialize(3);
    ad::Graph<double> g(false);
    const ad::Tensor<double> x = random_tensor({1, 3, 2, 3}, 4, -1, 1, false);
    const auto& p = m.generator.params();
    const auto y = ad::conv_transpose2d(g, x, p.get("upscale0/w"), p.get("upscale0/b"), 2);
    for (int c = 0; c < 3; ++c)
      for (int yy = 0; yy < 4; ++yy)
        for (int xx = 0; xx < 6; ++xx) {
          const double want = x.values()[static_cast<std::size_t>((c * 2 + yy / 2) * 3 + xx / 2)];
          CHECK(y.values()[static_cast<std::size_t>((c * 4 + yy) * 6 + xx)] == want);
        }
  }

  TEST_CASE("discriminator produces one logit per sample") {
    Model<float> m(ModelConfig::desk());
    m.initialize(1);
    ad::Graph<float> g(false);
    const ad::Tensor<float> x(ad::Shape{3, 3, 64, 64}, 0.5f);
    CHECK(m.discriminator.forward(g, x).shape() == ad::Shape{3, 1, 1, 1});
    CHECK_THROWS_AS(m.discriminator.forward(g, ad::Tensor<float>(ad::Shape{1, 3, 32, 32}, 0.5f)), InvalidInput);
  }

  TEST_CASE("precision copies preserve values") {
    Model<float> f(ModelConfig::tiny());
    f.initialize(9);
    Model<double> d(ModelConfig::tiny());
    copy_parameters(d.generator.params(), f.generator.params());
    const auto a = flat_params(f.generator.params());
    const auto b = flat_params(d.generator.params());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(static_cast<double>(a[i]) == b[i]);
  }

  TEST_CASE("end-to-end gradient check on the tiny preset") {
    Model<double> m(ModelConfig::tiny());
    m.initialize(21);
    std::vector<Pyramid> p{laplacian_decompose(random_image(8, 8, 22), 4)};
    std::vector<ad::Tensor<double>> levels = pyramid_tensors<double>(std::span<const Pyramid>(p));
    const ScaleVector s{{1.3f, 0.9f, 1.1f, 1.2f}};

    // Coarse levels are a few pixels wide, so padding creates pooling ties and
    // a small step keeps the difference quotient on one side of each kink.
    std::vector<ad::Tensor<double>> inputs;
    for (auto& [name, t] : m.generator.params()) {
      if (name.find("enc0/conv0") != std::string::npos || name.starts_with("upscale") ||
          name.find("out/") != std::string::npos) {
        inputs.push_back(t);
      }
    }
    const ad::Tensor<double> r = random_tensor({1, 3, 8, 8}, 23, -1, 1, false);
    const auto res = pyrexpose::testing::gradcheck(inputs, [&](ad::Graph<double>& g) {
      const auto out = m.generator.forward(g, levels, s);
      return ad::sum(g, ad::mul(g, out.y, r));
    }, 1e-6, 1e-3);
    INFO(res.worst);
    CHECK(res.max_rel_error <= 1e-3);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit-exact") {
    TempDir dir("ckpt");
    Model<float> m(ModelConfig::tiny());
    m.initialize(4);
    save_checkpoint(to_checkpoint(m, {{"note", "x"}}), dir.path() / "m.ckpt");
    const Checkpoint ck = load_checkpoint(dir.path() / "m.ckpt", ModelConfig::tiny());
    CHECK(ck.extra.at("note") == "x");
    const Model<float> back = model_from_checkpoint<float>(ck);
    CHECK(flat_params(back.generator.params()) == flat_params(m.generator.params()));
    CHECK(flat_params(back.discriminator.params()) == flat_params(m.discriminator.params()));
    for (const auto& e : std::filesystem::directory_iterator(dir.path())) CHECK(e.path().filename() == "m.ckpt");
  }

  TEST_CASE("corrupted and mismatched files are rejected") {
    TempDir dir("ckpt");
    Model<float> m(ModelConfig::tiny());
    m.initialize(4);
    const auto path = dir.path() / "m.ckpt";
    save_checkpoint(to_checkpoint(m), path);
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& b) {
      std::ofstream out(dir.path() / "bad.ckpt", std::ios::binary | std::ios::trunc);
      out << b;
    };

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    write(bad_magic);
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.ckpt"), CheckpointError);

    write(bytes.substr(0, bytes.size() - 10));
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.ckpt"), CheckpointError);

    std::string bad_json = bytes;
    bad_json[12] = '#';
    write(bad_json);
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.ckpt"), CheckpointError);

    std::string bad_version = bytes;
    bad_version[4] = 9;
    write(bad_version);
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.ckpt"), CheckpointError);

    CHECK_THROWS_AS(load_checkpoint(path, ModelConfig::desk()), CheckpointError);
    CHECK_THROWS(load_checkpoint(dir.path() / "absent.ckpt"));
  }

  TEST_CASE("restore is strict about tensor sets") {
    Model<float> m(ModelConfig::tiny());
    m.initialize(4);
    Checkpoint ck = to_checkpoint(m);
    Model<float> target(ModelConfig::tiny());

    Checkpoint missing = ck;
    missing.tensors.pop_back();
    CHECK_THROWS_AS(restore(target, missing), CheckpointError);

    Checkpoint extra = ck;
    extra.tensors.push_back({"stray", {{1}, {0.0f}}});
    CHECK_THROWS_AS(restore(target, extra), CheckpointError);

    Checkpoint wrong_shape = ck;
    wrong_shape.tensors.front().second.dims = {1, 1, 1, static_cast<std::uint32_t>(wrong_shape.tensors.front().second.data.size())};
    CHECK_THROWS_AS(restore(target, wrong_shape), CheckpointError);

    Checkpoint dup = ck;
    dup.tensors.push_back(dup.tensors.front());
    TempDir dir("ckpt");
    save_checkpoint(dup, dir.path() / "dup.ckpt");
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "dup.ckpt"), CheckpointError);
  }
}
