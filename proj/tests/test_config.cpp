#include <gtest/gtest.h>

#include <fstream>

#include "test_util.hpp"
#include "uhred/config.hpp"

using namespace uhred;
using nlohmann::json;

TEST(RunConfig, EmptyObjectGivesDefaults) {
  const auto c = parse_run_config(json::object());
  EXPECT_EQ(c.phantom.height, 64u);
  EXPECT_EQ(c.phantom.phases.size(), 2u);
  EXPECT_EQ(c.train.batch_size, 256u);
  EXPECT_EQ(c.train.max_epochs, 50u);
  EXPECT_EQ(c.train.patience, 5u);
  EXPECT_DOUBLE_EQ(c.train.adam.learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(c.train.split_fraction, 0.8);
  EXPECT_DOUBLE_EQ(c.train.input_scale, 0.9);
  EXPECT_EQ(c.clustering.k_max, 8u);
  EXPECT_EQ(c.metrics.snr_radius, 5u);
  EXPECT_EQ(c.metrics.baseline_kernel, 10u);
  EXPECT_EQ(c.model.for_input_length(92), default_model_config(92));
  EXPECT_EQ(c.model.for_input_length(909).n_l, 32u);
  validate_run_config(c);
}

TEST(RunConfig, OverridesAreApplied) {
  const auto c = parse_run_config(json::parse(R"({
    "phantom": {"width": 40, "seed": 9, "phases": [
      {"name": "a", "background": 0.2},
      {"name": "b", "background": 0.1, "peaks": [{"center": 2800, "hwhm": 6, "amplitude": 0.5}]}]},
    "model": {"n_l": 8, "channels": [2, 4, 8, 16]},
    "train": {"mode": "shred", "learning_rate": 0.01, "batch_size": 32},
    "clustering": {"k_max": 5},
    "metrics": {"snr_radius": 3}
  })"));
  EXPECT_EQ(c.phantom.width, 40u);
  EXPECT_EQ(c.phantom.seed, 9u);
  ASSERT_EQ(c.phantom.phases.size(), 2u);
  EXPECT_EQ(c.phantom.phases[1].peaks[0].center, 2800.0);
  const auto mc = c.model.for_input_length(92);
  EXPECT_EQ(mc.n_l, 8u);
  EXPECT_EQ(mc.bottleneck_channels(), 16u);
  EXPECT_EQ(c.train.mode, TrainMode::shred);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.clustering.k_max, 5u);
  EXPECT_EQ(c.metrics.snr_radius, 3u);
}

TEST(RunConfig, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_run_config(json::parse(R"({"extra": 1})")), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"train": {"lr": 1}})")), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"phantom": {"phases": [{"colour": 1}]}})")), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"train": {"mode": "other"}})")), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse(R"({"train": {"batch_size": "big"}})")), ConfigError);
  EXPECT_THROW(parse_run_config(json::parse("[]")), ConfigError);
}

TEST(RunConfig, RangeChecks) {
  auto c = parse_run_config(json::parse(R"({"clustering": {"k_max": 2}})"));
  EXPECT_THROW(validate_run_config(c), ConfigError);
  c = parse_run_config(json::parse(R"({"train": {"split_fraction": 1.0}})"));
  EXPECT_THROW(validate_run_config(c), ConfigError);
  c = parse_run_config(json::parse(R"({"model": {"kernel_size": 4}})"));
  EXPECT_THROW(validate_run_config(c), ConfigError);
  c = parse_run_config(json::parse(R"({"phantom": {"bands": 0}})"));
  EXPECT_THROW(validate_run_config(c), ConfigError);
}

TEST(RunConfig, LoadFromFile) {
  test::TempDir dir;
  const auto path = dir.path() / "run.json";
  std::ofstream(path) << R"({"metrics": {"baseline_kernel": 4}})";
  EXPECT_EQ(load_run_config(path).metrics.baseline_kernel, 4u);
  std::ofstream(dir.path() / "bad.json") << "{not json";
  EXPECT_THROW(load_run_config(dir.path() / "bad.json"), ConfigError);
  EXPECT_THROW(load_run_config(dir.path() / "missing.json"), ConfigError);
}
