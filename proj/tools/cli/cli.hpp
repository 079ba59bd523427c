#pragma once

#include "gcnet/dataio/synthetic.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gcnet::cli {

/// Parses `key = value` lines ('#' starts a comment) into a generator config.
/// Unknown keys and malformed values throw std::invalid_argument naming the key.
data::GeneratorConfig parse_generator_config(std::istream& in);

/// Split file names inside data and mask directories.
inline constexpr const char* kSplits[3] = {"train", "val", "test"};
std::filesystem::path dataset_path(const std::filesystem::path& dir, std::string_view split);
std::filesystem::path mask_path(const std::filesystem::path& dir, std::string_view split);

/// Mask seed of a split; `mask` and `ablate` share it so their masks agree.
std::uint64_t mask_seed(std::uint64_t seed, std::size_t split);

/// Comma list of numbers, or `lo..hi` expanded in steps of 0.1.
std::vector<double> parse_eta_list(const std::string& text);

/// Entry point. Returns the process exit code; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace gcnet::cli
