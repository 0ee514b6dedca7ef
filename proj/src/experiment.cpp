#include "shapedq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "shapedq/approx/serialize.hpp"
#include "shapedq/config.hpp"
#include "shapedq/verify.hpp"

namespace shapedq {

namespace fs = std::filesystem;
using nlohmann::json;

std::string shaping_label(const ShapingConfig& s)
{
	std::string label;
	if (s.sp_enabled)
		label = fmt::format("sp_p{}", s.p);
	if (s.rb_enabled)
		label += fmt::format("{}rb_l{}", label.empty() ? "" : "+", s.lambda);
	return label.empty() ? "original" : label;
}

void write_history_csv(std::ostream& os, const TrainHistory& history)
{
	os << "episode,env_return,shaped_return,length,steps,epsilon\n";
	for (const auto& e : history.episodes)
		os << fmt::format("{},{},{},{},{},{}\n", e.episode, e.env_return, e.shaped_return, e.length, e.steps, e.epsilon);
}

namespace {

json null_if_nan(double v)
{
	return std::isfinite(v) ? json(v) : json(nullptr);
}

void write_text(const fs::path& path, const std::string& text)
{
	std::ofstream os(path, std::ios::binary);
	if (!os)
		throw std::runtime_error("cannot write " + path.string());
	os << text;
	if (!os)
		throw std::runtime_error("failed writing " + path.string());
}

json root_config(const CliOptions& o)
{
	if (o.config_path.empty())
		throw ConfigError("--config is required");
	return load_json_file(o.config_path);
}

std::uint64_t read_seed(ConfigReader& r, const CliOptions& o, bool required)
{
	const auto seed = required ? r.required<std::uint64_t>("seed") : r.optional<std::uint64_t>("seed", 0);
	return o.seed_override.value_or(seed);
}

ShapingConfig read_shaping(ConfigReader& r)
{
	if (auto s = r.optional_child("shaping"))
		return parse_shaping(*s);
	return ShapingConfig::none();
}

// One training run with its outputs; used by train and by every sweep cell.
struct RunSpec
{
	const Environment* env = nullptr;
	std::string env_label;
	std::string method_label;
	AgentConfig agent;
	std::size_t window = 100;
	fs::path dir;
};

struct RunOutcome
{
	bool ok = false;
	bool numerical = false;
	std::string error;
	RunResult result;
};

const char* const kRunFiles[] = {"history.csv", "summary.json", "model.bin"};

RunOutcome execute_run(const RunSpec& spec)
{
	RunOutcome out;
	out.result.env = spec.env_label;
	out.result.method = spec.method_label;
	out.result.seed = spec.agent.seed;
	try {
		fs::create_directories(spec.dir);
		auto env = spec.env->clone();
		TrainResult trained = train(*env, spec.agent);
		const Performance perf = performance(trained.history, spec.window);
		out.result.performance = perf.value;
		out.result.short_run = perf.short_run;
		out.result.episodes_run = static_cast<int>(trained.history.episodes.size());

		std::ostringstream csv;
		write_history_csv(csv, trained.history);
		write_text(spec.dir / "history.csv", csv.str());
		if (const auto* mlp = std::get_if<MlpQ<double>>(&trained.model))
			save_parameters(*mlp, (spec.dir / "model.bin").string());

		json summary;
		summary["env"] = spec.env_label;
		summary["method"] = spec.method_label;
		summary["variant"] = std::string(to_string(spec.agent.variant));
		summary["approximator"] = std::string(to_string(spec.agent.approximator));
		summary["shaping"] = shaping_label(spec.agent.shaping);
		summary["seed"] = spec.agent.seed;
		summary["episodes_run"] = out.result.episodes_run;
		summary["total_steps"] = trained.history.episodes.empty() ? 0 : trained.history.episodes.back().steps;
		summary["performance"] = perf.value;
		summary["performance_window"] = spec.window;
		summary["short_run"] = perf.short_run;
		summary["status"] = "ok";
		write_text(spec.dir / "summary.json", summary.dump(2) + "\n");
		out.ok = true;
	} catch (const NumericalError& e) {
		out.numerical = true;
		out.error = e.what();
	} catch (const std::exception& e) {
		out.error = e.what();
	}
	if (!out.ok) {
		std::error_code ec;
		for (const char* f : kRunFiles)
			fs::remove(spec.dir / f, ec);
	}
	return out;
}

int report_exception(std::ostream& log, const char* cmd, const std::exception& e)
{
	log << cmd << ": " << e.what() << "\n";
	if (dynamic_cast<const ConfigError*>(&e))
		return exit_config_error;
	if (dynamic_cast<const NumericalError*>(&e))
		return exit_numerical_failure;
	return exit_runtime_error;
}

template <class F>
int guarded(std::ostream& log, const char* cmd, F&& body)
{
	try {
		return body();
	} catch (const std::exception& e) {
		return report_exception(log, cmd, e);
	}
}

} // namespace

int cmd_train(const CliOptions& o, std::ostream& log)
{
	return guarded(log, "train", [&] {
		const json root = root_config(o);
		ConfigReader r(root, "");
		std::string env_label;
		auto env = parse_env(r.child("env"), &env_label);
		RunSpec spec;
		spec.env = env.get();
		spec.env_label = env_label;
		spec.agent = parse_agent(r.child("agent"));
		spec.agent.shaping = read_shaping(r);
		spec.agent.seed = read_seed(r, o, true);
		spec.window = r.optional<std::size_t>("performance_window", 100);
		r.finish();
		try {
			spec.agent.validate();
		} catch (const std::invalid_argument& e) {
			throw ConfigError(e.what());
		}
		spec.method_label = std::string(to_string(spec.agent.variant));
		spec.dir = o.out_dir;

		const RunOutcome out = execute_run(spec);
		if (!out.ok) {
			log << "train: " << out.error << "\n";
			return out.numerical ? int(exit_numerical_failure) : int(exit_runtime_error);
		}
		log << fmt::format("train: {} episodes, performance {}\n", out.result.episodes_run, out.result.performance);
		return int(exit_ok);
	});
}

namespace {

struct NamedShaping
{
	std::string label;
	ShapingConfig config;
};

struct NamedMethod
{
	std::string label;
	AgentConfig agent;
};

struct NamedEnv
{
	std::string label;
	std::unique_ptr<Environment> env;
};

std::vector<NamedShaping> parse_shaping_grid(ConfigReader& r)
{
	std::vector<NamedShaping> out;
	if (auto list = r.has("shapings") ? std::optional<json>(r.raw("shapings")) : std::nullopt) {
		if (!list->is_array())
			throw ConfigError("shapings: expected an array");
		for (std::size_t i = 0; i < list->size(); ++i) {
			ConfigReader s((*list)[i], fmt::format("shapings[{}]", i));
			std::optional<std::string> label;
			if (s.has("label"))
				label = s.required<std::string>("label");
			ShapingConfig c = parse_shaping(s);
			out.push_back({label.value_or(shaping_label(c)), c});
		}
	}
	if (auto g = r.optional_child("grid")) {
		if (g->optional<bool>("original", true))
			out.push_back({"original", ShapingConfig::none()});
		for (double p : g->optional<std::vector<double>>("p", {}))
			out.push_back({"", ShapingConfig::sp(p)});
		for (double l : g->optional<std::vector<double>>("lambda", {}))
			out.push_back({"", ShapingConfig::rb(l, default_l_min(l))});
		if (g->has("hybrid")) {
			const json& hybrid = g->raw("hybrid");
			for (std::size_t i = 0; i < hybrid.size(); ++i) {
				ConfigReader h(hybrid[i], fmt::format("grid.hybrid[{}]", i));
				const double p = h.required<double>("p");
				const double l = h.required<double>("lambda");
				out.push_back({"", ShapingConfig::hybrid(p, l, h.optional<std::size_t>("l_min", default_l_min(l)))});
				h.finish();
			}
		}
		g->finish();
		for (auto& s : out)
			if (s.label.empty())
				s.label = shaping_label(s.config);
	}
	std::map<std::string, int> seen;
	for (const auto& s : out)
		if (++seen[s.label] > 1)
			throw ConfigError("shapings: duplicate label '" + s.label + "'");
	return out;
}

std::vector<std::string> labels_matching(const ComparisonTable& t, const std::string& baseline, const std::string& prefix)
{
	std::vector<std::string> keep{baseline};
	for (const auto& l : t.labels) {
		const auto slash = l.find('/');
		const std::string shaping = slash == std::string::npos ? l : l.substr(slash + 1);
		if (l != baseline && shaping.rfind(prefix, 0) == 0 && shaping.find('+') == std::string::npos)
			keep.push_back(l);
	}
	return keep;
}

// Drops environments with a missing cell so ranks stay defined.
ComparisonTable complete_rows(const ComparisonTable& t, std::vector<std::string>& dropped)
{
	ComparisonTable out;
	out.labels = t.labels;
	std::vector<Eigen::Index> keep;
	for (Eigen::Index i = 0; i < t.cells.rows(); ++i) {
		if (t.cells.row(i).allFinite())
			keep.push_back(i);
		else
			dropped.push_back(t.envs[static_cast<std::size_t>(i)]);
	}
	out.cells.resize(static_cast<Eigen::Index>(keep.size()), t.cells.cols());
	for (std::size_t k = 0; k < keep.size(); ++k) {
		out.envs.push_back(t.envs[static_cast<std::size_t>(keep[k])]);
		out.cells.row(static_cast<Eigen::Index>(k)) = t.cells.row(keep[k]);
	}
	return out;
}

// comparison.csv, ranks*.csv; returns the aggregate block of summary.json.
json write_aggregates(const std::vector<RunResult>& runs, const fs::path& dir, std::string baseline)
{
	json agg;
	const ComparisonTable full = ComparisonTable::from_runs(runs);
	{
		std::ostringstream os;
		write_comparison_csv(os, full);
		write_text(dir / "comparison.csv", os.str());
	}
	std::vector<std::string> dropped;
	const ComparisonTable table = complete_rows(full, dropped);
	agg["envs"] = full.envs;
	agg["labels"] = full.labels;
	agg["incomplete_envs"] = dropped;
	if (table.envs.empty() || table.labels.empty()) {
		agg["ranked"] = false;
		return agg;
	}
	if (baseline.empty() || std::find(table.labels.begin(), table.labels.end(), baseline) == table.labels.end())
		baseline = table.labels.front();
	agg["baseline"] = baseline;
	agg["ranked"] = true;

	auto emit = [&](const ComparisonTable& t, const std::string& file) {
		std::ostringstream os;
		write_rank_csv(os, t, baseline);
		write_text(dir / file, os.str());
		const Eigen::VectorXd ranks = average_rank(t);
		const Eigen::VectorXd impr = average_improvement(t, baseline);
		const Eigen::VectorXd pct = percent_improved(t, baseline);
		json rows = json::array();
		for (std::size_t j = 0; j < t.labels.size(); ++j) {
			const auto jj = static_cast<Eigen::Index>(j);
			rows.push_back({{"label", t.labels[j]},
			                {"average_rank", ranks[jj]},
			                {"average_improvement_pct", null_if_nan(impr[jj])},
			                {"percent_improved", pct[jj]}});
		}
		agg[file] = rows;
	};
	emit(table, "ranks.csv");
	const auto sp = labels_matching(table, baseline, "sp_");
	if (sp.size() > 1)
		emit(table.select(sp), "ranks_sp.csv");
	const auto rb = labels_matching(table, baseline, "rb_");
	if (rb.size() > 1)
		emit(table.select(rb), "ranks_rb.csv");
	return agg;
}

json run_to_json(const RunResult& r)
{
	return {{"env", r.env},         {"method", r.method},     {"seed", r.seed},
	        {"performance", r.performance}, {"episodes_run", r.episodes_run}, {"short_run", r.short_run}};
}

} // namespace

int cmd_sweep(const CliOptions& o, std::ostream& log)
{
	return guarded(log, "sweep", [&]() -> int {
		const json root = root_config(o);
		ConfigReader r(root, "");
		const std::uint64_t base_seed = read_seed(r, o, true);

		std::vector<NamedEnv> envs;
		{
			const json& list = r.raw("envs");
			if (!list.is_array())
				throw ConfigError("envs: expected an array");
			for (std::size_t i = 0; i < list.size(); ++i) {
				NamedEnv e;
				e.env = parse_env(ConfigReader(list[i], fmt::format("envs[{}]", i)), &e.label);
				envs.push_back(std::move(e));
			}
		}
		const AgentConfig base_agent = parse_agent(r.child("agent"));
		std::vector<NamedMethod> methods;
		if (r.has("methods")) {
			const json& list = r.raw("methods");
			for (std::size_t i = 0; i < list.size(); ++i) {
				ConfigReader m(list[i], fmt::format("methods[{}]", i));
				const auto label = m.required<std::string>("label");
				methods.push_back({label, parse_agent(m, base_agent, false)});
			}
		} else {
			methods.push_back({std::string(to_string(base_agent.variant)), base_agent});
		}
		const auto shapings = parse_shaping_grid(r);
		const int replicates = r.optional<int>("seeds", 1);
		const int jobs = o.jobs.value_or(r.optional<int>("jobs", 1));
		const std::size_t window = r.optional<std::size_t>("performance_window", 100);
		const std::string baseline = r.optional<std::string>("baseline", "");
		r.finish();

		if (envs.empty() || methods.empty() || shapings.empty() || replicates < 1)
			throw ConfigError("sweep grid is empty (need envs, methods, shapings and seeds >= 1)");
		if (jobs < 1)
			throw ConfigError("jobs: must be positive");

		std::vector<RunSpec> specs;
		for (const auto& e : envs)
			for (const auto& m : methods)
				for (const auto& s : shapings)
					for (int k = 0; k < replicates; ++k) {
						RunSpec spec;
						spec.env = e.env.get();
						spec.env_label = e.label;
						spec.method_label = methods.size() == 1 ? s.label : m.label + "/" + s.label;
						spec.agent = m.agent;
						spec.agent.shaping = s.config;
						spec.agent.seed = base_seed + specs.size();
						spec.window = window;
						spec.dir = o.out_dir / "runs" / e.label / spec.method_label / fmt::format("seed_{}", k);
						try {
							spec.agent.validate();
						} catch (const std::invalid_argument& ex) {
							throw ConfigError(fmt::format("{} / {}: {}", e.label, spec.method_label, ex.what()));
						}
						specs.push_back(std::move(spec));
					}

		std::vector<RunOutcome> outcomes(specs.size());
		std::atomic<std::size_t> next{0};
		std::mutex log_mutex;
		auto worker = [&] {
			for (std::size_t i = next++; i < specs.size(); i = next++) {
				outcomes[i] = execute_run(specs[i]);
				std::lock_guard lock(log_mutex);
				log << fmt::format("[{}/{}] {} {} seed {}: {}\n", i + 1, specs.size(), specs[i].env_label,
				                   specs[i].method_label, specs[i].agent.seed,
				                   outcomes[i].ok ? fmt::format("{}", outcomes[i].result.performance) : "FAILED " + outcomes[i].error);
			}
		};
		const int threads = std::min<int>(jobs, static_cast<int>(specs.size()));
		if (threads <= 1) {
			worker();
		} else {
			std::vector<std::thread> pool;
			for (int t = 0; t < threads; ++t)
				pool.emplace_back(worker);
			for (auto& t : pool)
				t.join();
		}

		std::vector<RunResult> ok_runs;
		json runs = json::array();
		json failures = json::array();
		for (std::size_t i = 0; i < specs.size(); ++i) {
			if (outcomes[i].ok) {
				ok_runs.push_back(outcomes[i].result);
				runs.push_back(run_to_json(outcomes[i].result));
			} else {
				failures.push_back({{"env", specs[i].env_label},
				                    {"method", specs[i].method_label},
				                    {"seed", specs[i].agent.seed},
				                    {"error", outcomes[i].error}});
			}
		}
		// Failed cells still need a row/column so the table shows the gap.
		std::vector<RunResult> placeholders = ok_runs;
		for (std::size_t i = 0; i < specs.size(); ++i)
			if (!outcomes[i].ok)
				placeholders.push_back({specs[i].env_label, specs[i].method_label, std::nan(""), 0, specs[i].agent.seed, true});

		json summary;
		summary["seed"] = base_seed;
		summary["replicates"] = replicates;
		summary["run_count"] = specs.size();
		summary["runs"] = runs;
		summary["failures"] = failures;
		summary["aggregate"] = write_aggregates(placeholders, o.out_dir, baseline);
		write_text(o.out_dir / "summary.json", summary.dump(2) + "\n");
		return failures.empty() ? int(exit_ok) : int(exit_sweep_gaps);
	});
}

int cmd_verify(const CliOptions& o, std::ostream& log)
{
	return guarded(log, "verify", [&]() -> int {
		const json root = root_config(o);
		ConfigReader r(root, "");
		auto env = parse_env(r.child("env"));
		const double gamma = r.optional<double>("gamma", 1.0);
		PirfOptions opts;
		opts.seed = read_seed(r, o, false);
		opts.cap = r.optional<std::uint64_t>("cap", opts.cap);
		opts.tie_tolerance = r.optional<double>("tie_tolerance", opts.tie_tolerance);
		opts.max_witnesses = r.optional<std::size_t>("max_witnesses", opts.max_witnesses);
		std::optional<ShapingConfig> shaping;
		RewardShaper plugin;
		std::string plugin_name;
		if (auto p = r.optional_child("plugin")) {
			const auto name = p->required<std::string>("name");
			if (name != "square_plus")
				throw ConfigError(p->field("name") + ": unknown plugin '" + name + "' (square_plus)");
			const double a = p->required<double>("a");
			p->finish();
			plugin = square_plus_shaper(a);
			plugin_name = fmt::format("square_plus(a={})", a);
		} else {
			shaping = read_shaping(r);
		}
		r.finish();
		if (!(gamma >= 0.0 && gamma <= 1.0))
			throw ConfigError("gamma: must lie in [0, 1]");
		if (!env->enumerable())
			throw ConfigError("env: environment is not enumerable");

		PirfReport report;
		try {
			report = shaping ? check_pirf(*env, *shaping, gamma, opts) : check_pirf(*env, plugin, plugin_name, gamma, opts);
		} catch (const std::length_error& e) {
			log << "verify: refusing to enumerate: " << e.what() << "\n";
			return int(exit_runtime_error);
		}
		fs::create_directories(o.out_dir);
		std::ostringstream text;
		write_report_text(text, report);
		write_text(o.out_dir / "pirf_report.txt", text.str());
		write_text(o.out_dir / "pirf_report.json", report_to_json(report).dump(2) + "\n");
		log << text.str();
		return report.asserted_failure() ? int(exit_asserted_failure) : int(exit_ok);
	});
}

int cmd_sparsity(const CliOptions& o, std::ostream& log)
{
	return guarded(log, "sparsity", [&]() -> int {
		const json root = root_config(o);
		ConfigReader r(root, "");
		std::string env_label;
		auto env = parse_env(r.child("env"), &env_label);
		const std::uint64_t seed = read_seed(r, o, false);
		const int episodes = r.optional<int>("episodes", 100);
		auto pol = r.child("policy");
		const auto kind = pol.required<std::string>("kind");
		int constant_action = 0;
		std::optional<MlpQ<double>> net;
		if (kind == "constant") {
			constant_action = pol.required<int>("action");
			if (constant_action < 0 || constant_action >= env->spec().action_count)
				throw ConfigError(pol.field("action") + ": out of range");
		} else if (kind == "checkpoint") {
			net = load_parameters<double>(pol.required<std::string>("path"));
			if (net->input_dim() != env->spec().feature_dim || net->action_count() != env->spec().action_count)
				throw ConfigError(pol.field("path") + ": checkpoint shape does not match the environment");
		} else if (kind != "random") {
			throw ConfigError(pol.field("kind") + ": unknown policy kind '" + kind + "' (random, constant, checkpoint)");
		}
		pol.finish();
		r.finish();
		if (episodes < 1)
			throw ConfigError("episodes: must be positive");

		Rng rng(seed);
		std::ostringstream csv;
		csv << "episode,length,nonzero_count,gap_count,mean_sparsity_length\n";
		std::vector<std::size_t> all;
		std::size_t nonzero = 0;
		double total_len = 0.0;
		for (int ep = 0; ep < episodes; ++ep) {
			Observation obs = env->reset(rng());
			std::vector<double> rewards;
			while (!env->done()) {
				int a = constant_action;
				if (kind == "random")
					a = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(env->spec().action_count)));
				else if (net)
					a = greedy_action(net->q_values(obs));
				StepResult s = env->step(a);
				rewards.push_back(s.reward);
				obs = std::move(s.next);
			}
			const auto prof = sparsity_lengths(Eigen::Map<const Eigen::VectorXd>(rewards.data(), static_cast<Eigen::Index>(rewards.size())));
			all.insert(all.end(), prof.lengths.begin(), prof.lengths.end());
			nonzero += prof.nonzero_count;
			total_len += static_cast<double>(rewards.size());
			csv << fmt::format("{},{},{},{},{}\n", ep, rewards.size(), prof.nonzero_count, prof.lengths.size(),
			                   prof.lengths.empty() ? std::string("") : fmt::format("{}", prof.mean_length));
		}
		double mean = std::nan("");
		if (!all.empty()) {
			double s = 0.0;
			for (auto l : all)
				s += static_cast<double>(l);
			mean = s / static_cast<double>(all.size());
		}
		json summary;
		summary["env"] = env_label;
		summary["policy"] = kind;
		summary["episodes"] = episodes;
		summary["seed"] = seed;
		summary["gap_count"] = all.size();
		summary["nonzero_count"] = nonzero;
		summary["mean_sparsity_length"] = null_if_nan(mean);
		summary["mean_episode_length"] = total_len / episodes;
		fs::create_directories(o.out_dir);
		write_text(o.out_dir / "sparsity.csv", csv.str());
		write_text(o.out_dir / "sparsity.json", summary.dump(2) + "\n");
		log << fmt::format("sparsity: {} mean length {} over {} gaps\n", env_label, mean, all.size());
		return int(exit_ok);
	});
}

int cmd_metrics(const CliOptions& o, std::ostream& log)
{
	return guarded(log, "metrics", [&]() -> int {
		const json root = root_config(o);
		ConfigReader r(root, "");
		const fs::path runs_dir = r.required<std::string>("runs_dir");
		const std::string baseline = r.optional<std::string>("baseline", "");
		r.finish();
		if (!fs::is_directory(runs_dir))
			throw ConfigError("runs_dir: not a directory: " + runs_dir.string());

		std::vector<fs::path> files;
		for (const auto& entry : fs::recursive_directory_iterator(runs_dir))
			if (entry.is_regular_file() && entry.path().filename() == "summary.json")
				files.push_back(entry.path());
		std::sort(files.begin(), files.end());
		std::vector<RunResult> runs;
		for (const auto& f : files) {
			const json j = load_json_file(f.string());
			if (!j.contains("performance") || j.value("status", "") != "ok")
				continue;
			runs.push_back({j.at("env").get<std::string>(), j.at("method").get<std::string>(), j.at("performance").get<double>(),
			                j.at("episodes_run").get<int>(), j.at("seed").get<std::uint64_t>(), j.at("short_run").get<bool>()});
		}
		if (runs.empty())
			throw ConfigError("runs_dir: no run summaries found under " + runs_dir.string());
		// Sweep seeds are base + run index, so seed order is the sweep's cell order.
		std::stable_sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) { return a.seed < b.seed; });
		fs::create_directories(o.out_dir);
		json summary;
		summary["run_count"] = runs.size();
		summary["aggregate"] = write_aggregates(runs, o.out_dir, baseline);
		write_text(o.out_dir / "metrics.json", summary.dump(2) + "\n");
		log << fmt::format("metrics: aggregated {} runs\n", runs.size());
		return int(exit_ok);
	});
}

} // namespace shapedq
