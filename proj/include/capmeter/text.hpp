#pragma once

// Small helpers shared by the plain-text readers and writers.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capmeter::text {

std::string_view trim(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);

// Whole-token parses; surrounding whitespace is allowed, trailing garbage is not.
std::optional<double> parse_real(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

std::optional<std::vector<double>> parse_real_list(std::string_view s, char sep = ',');

// Shortest decimal form that round-trips exactly.
std::string format_real(double x);

// 64-bit FNV-1a, used for input digests in run manifests.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t x);

}  // namespace capmeter::text
