#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "se/checkpoint.hpp"
#include "testutil.hpp"

using se::Index;
using se::Tensor;

TEST_CASE("checkpoint round trip preserves every parameter bit") {
  const std::string dir = tu::scratch_dir("ckpt");
  const std::string path = dir + "/gen.ckpt";
  const se::GeneratorConfig cfg = se::toy_generator_config();
  se::Rng rng(601);
  se::GeneratorWeights<float> w = se::GeneratorWeights<float>::init(cfg, rng);

  se::save_generator_checkpoint(path, cfg, w);
  auto [cfg2, w2] = se::load_generator_checkpoint<float>(path);

  CHECK(cfg2.n_blocks == cfg.n_blocks);
  CHECK(cfg2.d_model == cfg.d_model);
  CHECK(cfg2.n_heads == cfg.n_heads);
  CHECK(cfg2.d_k == cfg.d_k);
  CHECK(cfg2.d_ff == cfg.d_ff);
  CHECK(cfg2.n_bins == cfg.n_bins);
  CHECK(cfg2.head_mode == cfg.head_mode);
  CHECK(cfg2.sinusoidal_pe == cfg.sinusoidal_pe);
  REQUIRE(cfg2.conv_frontend.size() == cfg.conv_frontend.size());
  for (std::size_t i = 0; i < cfg.conv_frontend.size(); ++i) {
    CHECK(cfg2.conv_frontend[i].out_channels == cfg.conv_frontend[i].out_channels);
    CHECK(cfg2.conv_frontend[i].kernel_size == cfg.conv_frontend[i].kernel_size);
  }

  const auto pa = w.named_params();
  const auto pb = w2.named_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    REQUIRE(pa[i].tensor->shape() == pb[i].tensor->shape());
    // float -> double -> float must be exact
    for (Index j = 0; j < pa[i].tensor->size(); ++j) {
      CHECK(pa[i].tensor->at(j) == pb[i].tensor->at(j));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint loading validates structure") {
  const std::string dir = tu::scratch_dir("ckptval");
  const std::string path = dir + "/gen.ckpt";
  const se::GeneratorConfig cfg = se::toy_generator_config();
  se::Rng rng(607);
  se::GeneratorWeights<float> w = se::GeneratorWeights<float>::init(cfg, rng);
  se::save_generator_checkpoint(path, cfg, w);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(se::load_generator_checkpoint<float>(dir + "/nope.ckpt"), se::Error);
  }

  SUBCASE("bad magic") {
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    bytes[0] = 'X';
    const std::string bad = dir + "/badmagic.ckpt";
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_WITH_AS(se::load_generator_checkpoint<float>(bad),
                         doctest::Contains("magic"), se::Error);
  }

  SUBCASE("truncation") {
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    const std::string cut = dir + "/cut.ckpt";
    std::ofstream(cut, std::ios::binary).write(bytes.data(), bytes.size() / 2);
    CHECK_THROWS_AS(se::load_generator_checkpoint<float>(cut), se::Error);
  }

  SUBCASE("kind mismatch") {
    const std::string other = dir + "/disc.ckpt";
    se::save_checkpoint<float>(other, "discriminator", "", w.named_params());
    CHECK_THROWS_WITH_AS(se::load_generator_checkpoint<float>(other),
                         doctest::Contains("expected a generator"), se::Error);
  }

  SUBCASE("name mismatch") {
    auto params = w.named_params();
    params[0].name = "frontend9.w";
    const std::string renamed = dir + "/renamed.ckpt";
    se::save_checkpoint<float>(renamed, "generator", se::generator_config_to_text(cfg), params);
    CHECK_THROWS_WITH_AS(se::load_generator_checkpoint<float>(renamed),
                         doctest::Contains("missing tensor"), se::Error);
  }

  SUBCASE("shape mismatch") {
    se::GeneratorConfig wide = cfg;
    wide.d_ff = cfg.d_ff * 2;
    se::Rng r2(1);
    se::GeneratorWeights<float> ww = se::GeneratorWeights<float>::init(wide, r2);
    // config text says toy d_ff, tensors carry the wide one
    const std::string lied = dir + "/lied.ckpt";
    se::save_checkpoint<float>(lied, "generator", se::generator_config_to_text(cfg),
                               ww.named_params());
    CHECK_THROWS_WITH_AS(se::load_generator_checkpoint<float>(lied),
                         doctest::Contains("shape"), se::Error);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("generator config text round-trips") {
  se::GeneratorConfig cfg = se::toy_generator_config();
  cfg.head_mode = se::HeadMode::kMap;
  cfg.sinusoidal_pe = true;
  cfg.conv_frontend = {{8, 5, 1}, {16, 3, 1}};
  cfg.d_model = 16;
  const std::string text = se::generator_config_to_text(cfg);
  const se::GeneratorConfig back = se::generator_config_from_text(text);
  CHECK(back.head_mode == se::HeadMode::kMap);
  CHECK(back.sinusoidal_pe);
  REQUIRE(back.conv_frontend.size() == 2);
  CHECK(back.conv_frontend[0].out_channels == 8);
  CHECK(back.conv_frontend[0].kernel_size == 5);
  CHECK(back.conv_frontend[1].out_channels == 16);
  CHECK(back.conv_frontend[1].kernel_size == 3);

  CHECK_THROWS_WITH_AS(se::generator_config_from_text("mystery=1\n"),
                       doctest::Contains("unknown generator config key"), se::Error);
}
