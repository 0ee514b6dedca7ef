// Flat binary parameter files for MlpQ.
//
// Layout, all little-endian:
//   u64 magic "SHQMLP01"
//   u64 dueling flag (0 or 1)
//   u64 tensor count T
//   T x (u64 rows, u64 cols)           shapes, in parameter order
//   row-major f64 values of every tensor, in the same order
// Each layer contributes two tensors: weight (out x in), then bias (out x 1).
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapedq/approx/mlp.hpp"

namespace shapedq {

namespace detail {

inline constexpr std::uint64_t kMlpMagic = 0x31304d4c50514853ULL; // "SHQMLP01"

template <class T>
void write_le(std::ostream& os, T value)
{
	static_assert(sizeof(T) == 8);
	auto bytes = std::bit_cast<std::array<unsigned char, 8>>(value);
	if constexpr (std::endian::native == std::endian::big)
		std::reverse(bytes.begin(), bytes.end());
	os.write(reinterpret_cast<const char*>(bytes.data()), 8);
}

template <class T>
T read_le(std::istream& is)
{
	std::array<unsigned char, 8> bytes{};
	if (!is.read(reinterpret_cast<char*>(bytes.data()), 8))
		throw std::runtime_error("parameter file truncated");
	if constexpr (std::endian::native == std::endian::big)
		std::reverse(bytes.begin(), bytes.end());
	return std::bit_cast<T>(bytes);
}

} // namespace detail

template <class Scalar>
void save_parameters(const MlpQ<Scalar>& net, const std::string& path)
{
	std::ofstream os(path, std::ios::binary);
	if (!os)
		throw std::runtime_error("cannot open " + path + " for writing");
	const auto& params = net.parameters();
	detail::write_le<std::uint64_t>(os, detail::kMlpMagic);
	detail::write_le<std::uint64_t>(os, net.dueling() ? 1 : 0);
	detail::write_le<std::uint64_t>(os, 2 * params.size());
	for (const auto& l : params) {
		detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(l.weight.rows()));
		detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(l.weight.cols()));
		detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(l.bias.size()));
		detail::write_le<std::uint64_t>(os, 1);
	}
	for (const auto& l : params) {
		for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
			for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
				detail::write_le<double>(os, static_cast<double>(l.weight(r, c)));
		for (Eigen::Index r = 0; r < l.bias.size(); ++r)
			detail::write_le<double>(os, static_cast<double>(l.bias[r]));
	}
	if (!os)
		throw std::runtime_error("failed writing " + path);
}

template <class Scalar = double>
MlpQ<Scalar> load_parameters(const std::string& path)
{
	std::ifstream is(path, std::ios::binary);
	if (!is)
		throw std::runtime_error("cannot open " + path);
	if (detail::read_le<std::uint64_t>(is) != detail::kMlpMagic)
		throw std::runtime_error(path + " is not an MLP parameter file");
	const bool dueling = detail::read_le<std::uint64_t>(is) != 0;
	const auto tensors = detail::read_le<std::uint64_t>(is);
	if (tensors == 0 || tensors % 2 != 0 || tensors > 1024)
		throw std::runtime_error(path + ": bad tensor count");
	std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes(tensors);
	for (auto& s : shapes) {
		s.first = detail::read_le<std::uint64_t>(is);
		s.second = detail::read_le<std::uint64_t>(is);
	}
	Parameters<Scalar> params(tensors / 2);
	for (std::size_t l = 0; l < params.size(); ++l) {
		const auto [wr, wc] = shapes[2 * l];
		const auto [br, bc] = shapes[2 * l + 1];
		if (br != wr || bc != 1)
			throw std::runtime_error(path + ": bias shape does not match weight");
		params[l].weight.resize(static_cast<Eigen::Index>(wr), static_cast<Eigen::Index>(wc));
		params[l].bias.resize(static_cast<Eigen::Index>(br));
		for (Eigen::Index r = 0; r < params[l].weight.rows(); ++r)
			for (Eigen::Index c = 0; c < params[l].weight.cols(); ++c)
				params[l].weight(r, c) = static_cast<Scalar>(detail::read_le<double>(is));
		for (Eigen::Index r = 0; r < params[l].bias.size(); ++r)
			params[l].bias[r] = static_cast<Scalar>(detail::read_le<double>(is));
	}
	// Recover widths: input of layer 0, then each non-value-head output.
	const std::size_t trunk = params.size() - (dueling ? 1 : 0);
	std::vector<int> widths{static_cast<int>(params[0].weight.cols())};
	for (std::size_t l = 0; l < trunk; ++l)
		widths.push_back(static_cast<int>(params[l].weight.rows()));
	return MlpQ<Scalar>(std::move(widths), dueling, std::move(params));
}

} // namespace shapedq
