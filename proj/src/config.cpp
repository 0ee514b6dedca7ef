#include "shapedq/config.hpp"

#include <fstream>
#include <set>

#include "shapedq/catalog.hpp"

namespace shapedq {

ConfigReader::ConfigReader(const nlohmann::json& node, std::string path)
    : node_(node)
    , path_(std::move(path))
{
	if (!node_.is_object())
		throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected an object");
}

bool ConfigReader::has(const std::string& key) const
{
	return node_.contains(key);
}

ConfigReader ConfigReader::child(const std::string& key)
{
	if (!has(key))
		throw ConfigError(field(key) + ": missing required field");
	used_.insert(key);
	return ConfigReader(node_.at(key), field(key));
}

std::optional<ConfigReader> ConfigReader::optional_child(const std::string& key)
{
	if (!has(key))
		return std::nullopt;
	return child(key);
}

const nlohmann::json& ConfigReader::raw(const std::string& key)
{
	if (!has(key))
		throw ConfigError(field(key) + ": missing required field");
	used_.insert(key);
	return node_.at(key);
}

void ConfigReader::finish() const
{
	for (const auto& [key, value] : node_.items())
		if (!used_.count(key))
			throw ConfigError(field(key) + ": unknown key");
}

nlohmann::json load_json_file(const std::string& path)
{
	std::ifstream is(path);
	if (!is)
		throw ConfigError("cannot open config file " + path);
	try {
		return nlohmann::json::parse(is);
	} catch (const nlohmann::json::parse_error& e) {
		throw ConfigError(path + ": " + e.what());
	}
}

std::unique_ptr<Environment> parse_env(ConfigReader r, std::string* label_out)
{
	const auto name = r.required<std::string>("name");
	const auto label = r.optional<std::string>("label", name);
	if (label_out)
		*label_out = label;
	const int horizon = r.optional<int>("max_episode_len", 0);
	std::unique_ptr<Environment> env;
	try {
		if (name == "sparse_chain") {
			const auto positions = r.optional<std::vector<int>>("reward_positions", {});
			env = std::make_unique<SparseChain>(r.required<int>("n"), std::set<int>(positions.begin(), positions.end()), horizon);
		} else if (name == "grid_cliff") {
			env = std::make_unique<GridCliff>(r.required<int>("width"), r.required<int>("height"), horizon);
		} else if (name == "delayed_catch") {
			env = std::make_unique<DelayedCatch>(r.required<int>("width"), r.required<int>("drop_height"), horizon);
		} else if (name == "table") {
			std::vector<TableRow> rows;
			for (const auto& row : r.raw("rows")) {
				if (!row.is_array() || row.size() != 5)
					throw ConfigError(r.field("rows") + ": each row is [s, a, s', r, terminal]");
				rows.push_back({row[0].get<int>(), row[1].get<int>(),
				                {row[2].get<int>(), row[3].get<double>(), row[4].get<int>() != 0}});
			}
			if (horizon <= 0)
				throw ConfigError(r.field("max_episode_len") + ": required for table environments");
			env = std::make_unique<TableEnv>(label, r.required<int>("states"), r.required<int>("actions"),
			                                 r.optional<int>("start", 0), horizon, std::move(rows));
		} else if (name == "discount_gap") {
			env = discount_gap_env(r.optional<double>("short_reward", 0.5), r.optional<int>("short_len", 2),
			                       r.optional<int>("long_len", 3));
		} else if (name == "mixed_reward") {
			env = mixed_reward_env();
		} else if (name == "backfill_window") {
			env = backfill_window_env(r.optional<int>("gap", 3), horizon);
		} else {
			throw ConfigError(r.field("name") + ": unknown environment '" + name + "'");
		}
	} catch (const std::invalid_argument& e) {
		throw ConfigError(r.path() + ": " + e.what());
	} catch (const nlohmann::json::exception&) {
		throw ConfigError(r.field("rows") + ": malformed row");
	}
	r.finish();
	return env;
}

ShapingConfig parse_shaping(ConfigReader r)
{
	ShapingConfig c;
	c.sp_enabled = r.optional<bool>("sp", false);
	c.p = r.optional<double>("p", 1.0);
	c.rb_enabled = r.optional<bool>("rb", false);
	c.lambda = r.optional<double>("lambda", 0.65);
	c.l_min = r.optional<std::size_t>("l_min", default_l_min(c.lambda));
	r.finish();
	try {
		c.validate();
	} catch (const std::invalid_argument& e) {
		throw ConfigError(r.path() + ": " + e.what());
	}
	return c;
}

AgentConfig parse_agent(ConfigReader r, const AgentConfig& base, bool require_core)
{
	AgentConfig c = base;
	try {
		if (require_core || r.has("variant"))
			c.variant = parse_variant(r.required<std::string>("variant"));
		c.approximator = parse_approximator(r.optional<std::string>("approximator", std::string(to_string(c.approximator))));
	} catch (const std::invalid_argument& e) {
		throw ConfigError(r.path() + ": " + e.what());
	}
	if (require_core) {
		c.gamma = r.required<double>("gamma");
		c.learning_rate = r.required<double>("learning_rate");
		c.max_episodes = r.required<int>("max_episodes");
	} else {
		c.gamma = r.optional<double>("gamma", c.gamma);
		c.learning_rate = r.optional<double>("learning_rate", c.learning_rate);
		c.max_episodes = r.optional<int>("max_episodes", c.max_episodes);
	}
	c.hidden = r.optional<std::vector<int>>("hidden", c.hidden);
	c.batch_size = r.optional<int>("batch_size", c.batch_size);
	c.memory_capacity = r.optional<std::size_t>("memory_capacity", c.memory_capacity);
	c.target_sync_interval = r.optional<std::int64_t>("target_sync_interval", c.target_sync_interval);
	c.train_every = r.optional<std::int64_t>("train_every", c.train_every);
	c.warmup_steps = r.optional<std::int64_t>("warmup_steps", c.warmup_steps);
	c.huber_delta = r.optional<double>("huber_delta", c.huber_delta);
	c.epsilon.warmup = c.warmup_steps;
	if (auto e = r.optional_child("epsilon")) {
		c.epsilon.start = e->optional<double>("start", c.epsilon.start);
		c.epsilon.end = e->optional<double>("end", c.epsilon.end);
		c.epsilon.decay_steps = e->optional<std::int64_t>("decay_steps", c.epsilon.decay_steps);
		c.epsilon.warmup = e->optional<std::int64_t>("warmup", c.warmup_steps);
		e->finish();
	}
	if (auto o = r.optional_child("rmsprop")) {
		c.rmsprop_decay = o->optional<double>("decay", c.rmsprop_decay);
		c.rmsprop_epsilon = o->optional<double>("epsilon", c.rmsprop_epsilon);
		o->finish();
	}
	r.finish();
	return c;
}

} // namespace shapedq
