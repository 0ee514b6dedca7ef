#include <iostream>

#include <CLI11.hpp>

#include "shapedq/experiment.hpp"

int main(int argc, char** argv)
{
	CLI::App app{"Reward-shaped deep Q-learning experiments"};
	app.require_subcommand(1);

	shapedq::CliOptions options;
	std::string out = ".";
	int jobs = 0;
	std::uint64_t seed = 0;

	using Command = int (*)(const shapedq::CliOptions&, std::ostream&);
	const std::pair<const char*, Command> commands[] = {
	    {"train", shapedq::cmd_train},       {"sweep", shapedq::cmd_sweep},       {"verify", shapedq::cmd_verify},
	    {"sparsity", shapedq::cmd_sparsity}, {"metrics", shapedq::cmd_metrics},
	};
	const char* help[] = {
	    "train one (env, method, shaping, seed) cell",
	    "run an envs x methods x shapings x seeds grid and rank the results",
	    "brute-force policy-order check of a reward shaping",
	    "measure gaps between nonzero rewards under a policy",
	    "recompute comparison and rank tables from run summaries",
	};
	std::vector<CLI::App*> subs;
	for (std::size_t i = 0; i < std::size(commands); ++i) {
		auto* sub = app.add_subcommand(commands[i].first, help[i]);
		sub->add_option("--config", options.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
		sub->add_option("--out", out, "output directory");
		sub->add_option("--jobs", jobs, "parallel sweep workers")->check(CLI::PositiveNumber);
		sub->add_option("--seed-override", seed, "replace the config seed");
		subs.push_back(sub);
	}
	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int rc = app.exit(e);
		return rc == 0 ? 0 : int(shapedq::exit_config_error);
	}

	options.out_dir = out;
	for (std::size_t i = 0; i < subs.size(); ++i) {
		if (!subs[i]->parsed())
			continue;
		if (subs[i]->count("--jobs"))
			options.jobs = jobs;
		if (subs[i]->count("--seed-override"))
			options.seed_override = seed;
		return commands[i].second(options, std::cerr);
	}
	return 2;
}
