#include <gtest/gtest.h>

#include "psg/config.hpp"

using namespace psg;

namespace {

std::string key_of_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig def;
  const std::string text = to_config_text(def);
  EXPECT_EQ(to_config_text(parse_config(text)), text);
  EXPECT_NE(text.find("[loss]"), std::string::npos);
  EXPECT_NE(text.find("alpha = 1"), std::string::npos);
}

TEST(Config, ParsesEverySection) {
  const RunConfig c = parse_config(R"(
# desk run
[model]
input_size = 32
encoder_channels = 8, 16, 24, 32, 32
msfam_in_encoder = no
msfam_in_decoder = on

[msfam]
feature_dim = 16
dilation_rates = 1,3,5
use_bam = false

[loss]
main = kld
use_psg = 1
alpha = 0.5
psg_kernel = 5
refresh = epoch

[train]
epochs = 7
batch_size = 2
lr = 1e-3
seed = 9
eval_every = 0

[data]
count = 20
test_count = 5
size = 32
hole_fraction = 0.25
shapes = ellipse, annulus

[metrics]
aggregation = mean-f
dataset_name = toy
)");
  EXPECT_EQ(c.train.model.input_size, 32u);
  EXPECT_EQ(c.train.model.encoder_channels, (std::vector<std::size_t>{8, 16, 24, 32, 32}));
  EXPECT_FALSE(c.train.model.msfam_in_encoder);
  EXPECT_TRUE(c.train.model.msfam_in_decoder);
  EXPECT_EQ(c.train.model.msfam.dilation_rates, (std::array<int, 3>{1, 3, 5}));
  EXPECT_FALSE(c.train.model.msfam.use_bam);
  EXPECT_EQ(c.train.loss.main_kind, LossKind::kKld);
  EXPECT_EQ(c.train.loss.alpha, 0.5);
  EXPECT_EQ(c.train.loss.psg_kernel, 5);
  EXPECT_EQ(c.train.loss.refresh, TargetRefresh::kPerEpoch);
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.train.lr, 1e-3);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.data.count, 20u);
  EXPECT_EQ(c.test_count, 5u);
  EXPECT_EQ(c.data.shape_kinds, (std::vector<ShapeKind>{ShapeKind::kEllipse, ShapeKind::kAnnulus}));
  EXPECT_EQ(c.metrics.aggregation, FAggregation::kMeanF);
  EXPECT_EQ(c.dataset_name, "toy");
  EXPECT_EQ(to_config_text(parse_config(to_config_text(c))), to_config_text(c));
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(key_of_error("[loss]\nbogus = 1\n"), "loss.bogus");
  EXPECT_EQ(key_of_error("[train]\nepochs = many\n"), "train.epochs");
  EXPECT_EQ(key_of_error("[msfam]\nuse_bam = maybe\n"), "msfam.use_bam");
  EXPECT_EQ(key_of_error("[loss]\npsg_kernel = 4\n"), "loss.psg_kernel");
  EXPECT_EQ(key_of_error("[nowhere]\nx = 1\n"), "nowhere.x");
  try {
    parse_config("[loss]\nbogus = 1\n");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown config key 'loss.bogus'"), std::string::npos);
  }
}

TEST(Config, SyntaxErrors) {
  EXPECT_THROW(parse_config("epochs = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\nepochs 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[train\n"), ConfigError);
}

TEST(Config, Overrides) {
  RunConfig c;
  apply_override(c, "train.epochs=4");
  apply_override(c, "loss.use_psg = false");
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_FALSE(c.train.loss.use_psg);
  EXPECT_THROW(apply_override(c, "train.epochs"), ConfigError);
  EXPECT_THROW(apply_override(c, "epochs=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "train.lr=-1"), ConfigError);
}
