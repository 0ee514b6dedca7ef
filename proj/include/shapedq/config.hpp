// JSON experiment configuration with strict key checking.
//
// Every object is read through ConfigReader, which records the keys it
// consumed; finish() rejects anything left over, so a misspelled
// hyperparameter fails loudly instead of silently taking its default.
// Error messages carry the dotted field path, e.g. "agent.gamma".
#pragma once

#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "shapedq/agent.hpp"
#include "shapedq/env.hpp"
#include "shapedq/shaping.hpp"

namespace shapedq {

class ConfigError : public std::runtime_error
{
public:
	using std::runtime_error::runtime_error;
};

class ConfigReader
{
public:
	ConfigReader(const nlohmann::json& node, std::string path);

	bool has(const std::string& key) const;
	const std::string& path() const { return path_; }
	std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

	template <class T>
	T required(const std::string& key)
	{
		if (!has(key))
			throw ConfigError(field(key) + ": missing required field");
		return convert<T>(key);
	}

	template <class T>
	T optional(const std::string& key, T fallback)
	{
		return has(key) ? convert<T>(key) : fallback;
	}

	ConfigReader child(const std::string& key);
	std::optional<ConfigReader> optional_child(const std::string& key);
	/// Raw access; marks the key consumed.
	const nlohmann::json& raw(const std::string& key);

	/// Throws ConfigError naming the first unconsumed key.
	void finish() const;

private:
	template <class T>
	T convert(const std::string& key)
	{
		used_.insert(key);
		try {
			return node_.at(key).get<T>();
		} catch (const nlohmann::json::exception&) {
			throw ConfigError(field(key) + ": wrong type");
		}
	}

	const nlohmann::json& node_;
	std::string path_;
	std::set<std::string> used_;
};

nlohmann::json load_json_file(const std::string& path);

/// Environment from an `env` object: name is one of sparse_chain,
/// grid_cliff, delayed_catch, table, or a catalog name. A `label` key, when
/// present, is returned through label_out and otherwise defaults to name.
std::unique_ptr<Environment> parse_env(ConfigReader env, std::string* label_out = nullptr);

/// `sp`, `p`, `rb`, `lambda`, `l_min` (defaulted from lambda when absent).
ShapingConfig parse_shaping(ConfigReader reader);

/// Reads the agent block. With defaults_only_missing = false every
/// required field (variant, gamma, learning_rate, max_episodes) must be present.
AgentConfig parse_agent(ConfigReader reader, const AgentConfig& base = {}, bool require_core = true);

} // namespace shapedq
