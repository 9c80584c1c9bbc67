#include "ionreadout/config.hpp"

#include <gtest/gtest.h>

using namespace ionreadout;
using namespace ionreadout::cli;

TEST(Config, DefaultsValidate)
{
    const ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.resolved_ion_channels(), (std::vector<int>{0, 2, 4}));
    EXPECT_EQ(c.geometry().num_channels(), 5);
    EXPECT_EQ(c.training.train_fraction, 0.8);
    EXPECT_EQ(c.training.batch_size, 128u);
}

TEST(Config, RoundTripIsLossless)
{
    ExperimentConfig c;
    c.n_ions = 5;
    c.n_channels = 5;
    c.intermediate_channels = false;
    c.crosstalk_row = {0.1, 0.8, 0.1};
    c.physics.pump_bright_to_dark_rate = 1.0 / 3.0;
    c.physics.bright_rate = 0.0612345678901234;
    c.strategies = {Strategy::FT, Strategy::AT, Strategy::NN, Strategy::TNN};
    c.data_seed = 18446744073709551615ULL;
    c.training.seed = 99;
    c.normalization = features::Normalization::none;
    c.hidden_tnn = {32, 12};
    c.dataset_file = "data/x.jsonl";
    const std::string text = serialize_config(c);
    const auto back = parse_config_string(text);
    EXPECT_EQ(back, c);
    EXPECT_EQ(serialize_config(back), text);
    EXPECT_EQ(parse_config_string(serialize_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, EveryKeySerialized)
{
    const std::string text = serialize_config(ExperimentConfig{});
    for (const auto& key : config_keys()) {
        EXPECT_NE(text.find(key + " = "), std::string::npos) << key;
    }
}

TEST(Config, CommentsAndBlankLines)
{
    const auto c = parse_config_string("# header\n\nsamples_per_label = 10   # inline\n  seed=5\n");
    EXPECT_EQ(c.samples_per_label, 10u);
    EXPECT_EQ(c.data_seed, 5u);
}

TEST(Config, UnknownAndRepeatedKeysAreErrors)
{
    EXPECT_THROW(parse_config_string("bright_rat = 0.06\n"), ConfigError);
    EXPECT_THROW(parse_config_string("seed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW(parse_config_string("seed\n"), ConfigError);
    EXPECT_THROW(parse_config_string("seed = abc\n"), ConfigError);
    EXPECT_THROW(parse_config_string("seed = 12x\n"), ConfigError);
    EXPECT_THROW(parse_config_string("pool_resampling = maybe\n"), ConfigError);
    EXPECT_THROW(parse_config_string("normalization = zscore\n"), ConfigError);
    EXPECT_THROW(parse_config_string("hidden_nn = 8\n"), ConfigError);
}

TEST(Config, InvariantViolations)
{
    EXPECT_THROW(parse_config_string("strategies = \n"), ConfigError);
    EXPECT_THROW(parse_config_string("strategies = FT,XX\n"), ConfigError);
    EXPECT_THROW(parse_config_string("strategies = FT,FT\n"), ConfigError);
    EXPECT_THROW(parse_config_string("intermediate_channels = false\nstrategies = FT,NN+\n"), ConfigError);
    EXPECT_THROW(parse_config_string("n_ions = 5\nn_channels = 5\ncrosstalk_row = 0.1,0.8,0.1\n"
                                     "intermediate_channels = false\nstrategies = TNN+\n"),
                 ConfigError);
    EXPECT_THROW(parse_config_string("hidden_tnn_plus = 48,40\n"), ConfigError);
    EXPECT_THROW(parse_config_string("bright_rate = -1\n"), ConfigError);
    EXPECT_THROW(parse_config_string("crosstalk_row = 0.5,0.4\n"), ConfigError);
    EXPECT_THROW(parse_config_string("train_fraction = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_string("probe_ion = 3\n"), ConfigError);
    EXPECT_THROW(parse_config_string("n_ions = 13\n"), ConfigError);
    EXPECT_NO_THROW(parse_config_string("n_ions = 5\nn_channels = 5\ncrosstalk_row = 0.12,0.76,0.12\n"
                                        "intermediate_channels = false\nstrategies = FT,AT,NN,TNN,RNN\n"));
}

TEST(Strategy, NamesAndTags)
{
    EXPECT_EQ(parse_strategy("TNN+"), Strategy::TNNPlus);
    EXPECT_EQ(strategy_name(Strategy::NNPlus), "NN+");
    EXPECT_EQ(strategy_file_tag(Strategy::TNNPlus), "TNNplus");
    EXPECT_EQ(strategy_file_tag(Strategy::FT), "FT");
    EXPECT_EQ(parse_strategy_list(" FT , AT "), (std::vector<Strategy>{Strategy::FT, Strategy::AT}));
    EXPECT_THROW(parse_strategy("tnn"), ConfigError);
}
