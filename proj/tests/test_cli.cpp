#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "shapedq/config.hpp"
#include "shapedq/experiment.hpp"

using namespace shapedq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test
{
protected:
	void SetUp() override
	{
		root_ = fs::temp_directory_path() / fmt_name();
		fs::remove_all(root_);
		fs::create_directories(root_);
	}
	void TearDown() override { fs::remove_all(root_); }

	static std::string fmt_name()
	{
		const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
		return std::string("shapedq_cli_") + info->name();
	}

	CliOptions write_config(const json& j, const std::string& out = "out")
	{
		const fs::path path = root_ / (out + ".json");
		std::ofstream(path) << j.dump(2);
		CliOptions o;
		o.config_path = path.string();
		o.out_dir = root_ / out;
		return o;
	}

	static std::string slurp(const fs::path& p)
	{
		std::ifstream is(p, std::ios::binary);
		std::stringstream ss;
		ss << is.rdbuf();
		return ss.str();
	}

	static json train_config()
	{
		return json::parse(R"({
		  "seed": 5,
		  "env": {"name": "sparse_chain", "n": 5},
		  "agent": {"variant": "double_dqn", "approximator": "tabular", "gamma": 0.9, "learning_rate": 0.5,
		            "max_episodes": 12, "batch_size": 4, "warmup_steps": 8, "train_every": 1,
		            "target_sync_interval": 10, "epsilon": {"decay_steps": 50}},
		  "shaping": {"sp": true, "p": 1}
		})");
	}

	fs::path root_;
};

} // namespace

TEST_F(CliTest, TrainWritesHistory)
{
	std::ostringstream log;
	const auto o = write_config(train_config());
	ASSERT_EQ(cmd_train(o, log), 0) << log.str();
	std::istringstream csv(slurp(o.out_dir / "history.csv"));
	std::string line;
	std::getline(csv, line);
	EXPECT_EQ(line, "episode,env_return,shaped_return,length,steps,epsilon");
	int rows = 0;
	while (std::getline(csv, line))
		++rows;
	EXPECT_EQ(rows, 12);
	const json summary = json::parse(slurp(o.out_dir / "summary.json"));
	EXPECT_EQ(summary.at("shaping"), "sp_p1");
	EXPECT_EQ(summary.at("seed"), 5);
}

TEST_F(CliTest, TrainMlpSavesModel)
{
	json j = train_config();
	j["env"] = {{"name", "delayed_catch"}, {"width", 3}, {"drop_height", 3}};
	j["agent"]["approximator"] = "mlp";
	j["agent"]["variant"] = "dueling_double_dqn";
	j["agent"]["hidden"] = {8};
	j["agent"]["learning_rate"] = 1e-3;
	std::ostringstream log;
	const auto o = write_config(j);
	ASSERT_EQ(cmd_train(o, log), 0) << log.str();
	EXPECT_TRUE(fs::exists(o.out_dir / "model.bin"));
}

TEST_F(CliTest, MissingFieldNamed)
{
	json j = train_config();
	j["agent"].erase("gamma");
	std::ostringstream log;
	EXPECT_EQ(cmd_train(write_config(j), log), exit_config_error);
	EXPECT_NE(log.str().find("agent.gamma"), std::string::npos) << log.str();
}

TEST_F(CliTest, UnknownKeyRejected)
{
	json j = train_config();
	j["agent"]["gama"] = 0.9;
	std::ostringstream log;
	EXPECT_EQ(cmd_train(write_config(j), log), exit_config_error);
	EXPECT_NE(log.str().find("agent.gama: unknown key"), std::string::npos) << log.str();

	json k = train_config();
	k["agent"]["epsilon"]["strat"] = 1.0;
	std::ostringstream log2;
	EXPECT_EQ(cmd_train(write_config(k), log2), exit_config_error);
	EXPECT_NE(log2.str().find("agent.epsilon.strat"), std::string::npos) << log2.str();
}

TEST_F(CliTest, WrongTypeNamed)
{
	json j = train_config();
	j["agent"]["batch_size"] = "many";
	std::ostringstream log;
	EXPECT_EQ(cmd_train(write_config(j), log), exit_config_error);
	EXPECT_NE(log.str().find("agent.batch_size: wrong type"), std::string::npos) << log.str();
}

TEST_F(CliTest, TrainRerunIsByteIdentical)
{
	std::ostringstream log;
	const auto a = write_config(train_config(), "a");
	const auto b = write_config(train_config(), "b");
	ASSERT_EQ(cmd_train(a, log), 0);
	ASSERT_EQ(cmd_train(b, log), 0);
	EXPECT_EQ(slurp(a.out_dir / "history.csv"), slurp(b.out_dir / "history.csv"));
	EXPECT_EQ(slurp(a.out_dir / "summary.json"), slurp(b.out_dir / "summary.json"));
}

TEST_F(CliTest, SeedOverride)
{
	std::ostringstream log;
	auto o = write_config(train_config());
	o.seed_override = 99;
	ASSERT_EQ(cmd_train(o, log), 0);
	EXPECT_EQ(json::parse(slurp(o.out_dir / "summary.json")).at("seed"), 99);
}

TEST_F(CliTest, NumericalFailureRemovesOutputs)
{
	json j = train_config();
	j["agent"]["learning_rate"] = 1e308;
	j["agent"]["approximator"] = "mlp";
	j["agent"]["hidden"] = {4};
	j["agent"]["max_episodes"] = 200;
	j["env"]["reward_positions"] = {2, 3, 4};
	std::ostringstream log;
	const auto o = write_config(j);
	const int rc = cmd_train(o, log);
	EXPECT_EQ(rc, exit_numerical_failure) << log.str();
	EXPECT_FALSE(fs::exists(o.out_dir / "history.csv"));
	EXPECT_FALSE(fs::exists(o.out_dir / "summary.json"));
}

namespace {

json sweep_config()
{
	return json::parse(R"({
	  "seed": 100,
	  "envs": [{"name": "sparse_chain", "n": 4, "label": "chain4"},
	           {"name": "grid_cliff", "width": 3, "height": 2, "label": "cliff3x2"}],
	  "agent": {"variant": "dqn", "approximator": "tabular", "gamma": 0.9, "learning_rate": 0.5,
	            "max_episodes": 8, "batch_size": 4, "warmup_steps": 8, "train_every": 1,
	            "target_sync_interval": 10, "epsilon": {"decay_steps": 40}},
	  "shapings": [{"label": "original"}, {"sp": true, "p": 1}],
	  "seeds": 2
	})");
}

} // namespace

TEST_F(CliTest, SweepCountsRuns)
{
	std::ostringstream log;
	const auto o = write_config(sweep_config());
	ASSERT_EQ(cmd_sweep(o, log), 0) << log.str();
	const json s = json::parse(slurp(o.out_dir / "summary.json"));
	EXPECT_EQ(s.at("run_count"), 8);
	EXPECT_EQ(s.at("runs").size(), 8u);
	EXPECT_TRUE(fs::exists(o.out_dir / "runs" / "chain4" / "sp_p1" / "seed_1" / "history.csv"));
	std::istringstream csv(slurp(o.out_dir / "comparison.csv"));
	std::string line;
	int rows = 0;
	while (std::getline(csv, line))
		++rows;
	EXPECT_EQ(rows, 3); // header + 2 envs
}

TEST_F(CliTest, SweepPGridRanks)
{
	json j = sweep_config();
	j.erase("shapings");
	j["grid"] = {{"p", {1, 10, 50, 100, 200}}};
	j["seeds"] = 1;
	std::ostringstream log;
	const auto o = write_config(j);
	ASSERT_EQ(cmd_sweep(o, log), 0) << log.str();
	std::istringstream csv(slurp(o.out_dir / "ranks_sp.csv"));
	std::string line;
	std::getline(csv, line);
	std::vector<std::string> labels;
	while (std::getline(csv, line))
		labels.push_back(line.substr(0, line.find(',')));
	EXPECT_EQ(labels, (std::vector<std::string>{"original", "sp_p1", "sp_p10", "sp_p50", "sp_p100", "sp_p200"}));
}

TEST_F(CliTest, SweepParallelMatchesSerial)
{
	std::ostringstream log;
	auto serial = write_config(sweep_config(), "serial");
	auto parallel = write_config(sweep_config(), "parallel");
	parallel.jobs = 3;
	ASSERT_EQ(cmd_sweep(serial, log), 0);
	ASSERT_EQ(cmd_sweep(parallel, log), 0);
	EXPECT_EQ(slurp(serial.out_dir / "comparison.csv"), slurp(parallel.out_dir / "comparison.csv"));
	EXPECT_EQ(slurp(serial.out_dir / "runs/cliff3x2/original/seed_0/history.csv"),
	          slurp(parallel.out_dir / "runs/cliff3x2/original/seed_0/history.csv"));
}

TEST_F(CliTest, SweepEmptyGridRejected)
{
	json j = sweep_config();
	j["shapings"] = json::array();
	std::ostringstream log;
	EXPECT_EQ(cmd_sweep(write_config(j), log), exit_config_error);
	EXPECT_NE(log.str().find("empty"), std::string::npos);
}

TEST_F(CliTest, MetricsRecomputes)
{
	std::ostringstream log;
	const auto sweep = write_config(sweep_config(), "sweep");
	ASSERT_EQ(cmd_sweep(sweep, log), 0);
	const auto m = write_config({{"runs_dir", (sweep.out_dir / "runs").string()}, {"baseline", "original"}}, "metrics");
	ASSERT_EQ(cmd_metrics(m, log), 0) << log.str();
	EXPECT_EQ(slurp(m.out_dir / "comparison.csv"), slurp(sweep.out_dir / "comparison.csv"));
	EXPECT_EQ(slurp(m.out_dir / "ranks.csv"), slurp(sweep.out_dir / "ranks.csv"));
}

TEST_F(CliTest, VerifySpAtGammaOne)
{
	std::ostringstream log;
	const auto o = write_config({{"env", {{"name", "sparse_chain"}, {"n", 6}}}, {"gamma", 1.0}, {"shaping", {{"sp", true}, {"p", 1}}}});
	EXPECT_EQ(cmd_verify(o, log), 0);
	const std::string text = slurp(o.out_dir / "pirf_report.txt");
	EXPECT_NE(text.find("0 inversions"), std::string::npos) << text;
	EXPECT_TRUE(fs::exists(o.out_dir / "pirf_report.json"));
}

TEST_F(CliTest, VerifyBrokenPluginFails)
{
	std::ostringstream log;
	const auto o = write_config({{"env", {{"name", "mixed_reward"}}}, {"gamma", 1.0}, {"plugin", {{"name", "square_plus"}, {"a", 1.0}}}});
	EXPECT_EQ(cmd_verify(o, log), exit_asserted_failure);
	const json rep = json::parse(slurp(o.out_dir / "pirf_report.json"));
	EXPECT_FALSE(rep.at("inversions").empty());
}

TEST_F(CliTest, VerifyDiscountedWarns)
{
	std::ostringstream log;
	const auto o = write_config({{"env", {{"name", "discount_gap"}}}, {"gamma", 0.9}, {"shaping", {{"sp", true}, {"p", 10}}}});
	EXPECT_EQ(cmd_verify(o, log), 0);
	const json rep = json::parse(slurp(o.out_dir / "pirf_report.json"));
	EXPECT_GT(rep.at("inversion_count").get<int>(), 0);
	EXPECT_NE(slurp(o.out_dir / "pirf_report.txt").find("RESULT: WARN"), std::string::npos);
}

TEST_F(CliTest, VerifyCapRefusal)
{
	std::ostringstream log;
	const auto o = write_config({{"env", {{"name", "grid_cliff"}, {"width", 4}, {"height", 3}}}, {"shaping", {{"sp", true}}}});
	EXPECT_NE(cmd_verify(o, log), 0);
	EXPECT_NE(log.str().find("refusing"), std::string::npos) << log.str();
}

TEST_F(CliTest, SparsityChainEveryTen)
{
	std::ostringstream log;
	const auto o = write_config({{"env", {{"name", "sparse_chain"}, {"n", 41}, {"reward_positions", {10, 20, 30, 40}}}},
	                             {"policy", {{"kind", "constant"}, {"action", 1}}},
	                             {"episodes", 5}});
	ASSERT_EQ(cmd_sparsity(o, log), 0) << log.str();
	EXPECT_EQ(json::parse(slurp(o.out_dir / "sparsity.json")).at("mean_sparsity_length"), 10.0);
}

TEST_F(CliTest, SparsityDense)
{
	std::vector<int> all;
	for (int i = 1; i < 8; ++i)
		all.push_back(i);
	std::ostringstream log;
	const auto o = write_config({{"env", {{"name", "sparse_chain"}, {"n", 8}, {"reward_positions", all}}},
	                             {"policy", {{"kind", "constant"}, {"action", 1}}}});
	ASSERT_EQ(cmd_sparsity(o, log), 0) << log.str();
	EXPECT_EQ(json::parse(slurp(o.out_dir / "sparsity.json")).at("mean_sparsity_length"), 1.0);
}

TEST_F(CliTest, SparsityDelayedCatchRandom)
{
	std::ostringstream log;
	const auto o = write_config({{"env", {{"name", "delayed_catch"}, {"width", 3}, {"drop_height", 12}}},
	                             {"policy", {{"kind", "random"}}},
	                             {"episodes", 300},
	                             {"seed", 4}});
	ASSERT_EQ(cmd_sparsity(o, log), 0) << log.str();
	const json s = json::parse(slurp(o.out_dir / "sparsity.json"));
	EXPECT_GT(s.at("gap_count").get<int>(), 0);
	EXPECT_EQ(s.at("mean_sparsity_length"), 12.0);
}

TEST(ShapingLabel, Names)
{
	EXPECT_EQ(shaping_label(ShapingConfig::none()), "original");
	EXPECT_EQ(shaping_label(ShapingConfig::sp(1.0)), "sp_p1");
	EXPECT_EQ(shaping_label(ShapingConfig::rb(0.65, 48)), "rb_l0.65");
	EXPECT_EQ(shaping_label(ShapingConfig::hybrid(1.0, 0.65, 48)), "sp_p1+rb_l0.65");
}
