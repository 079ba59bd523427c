#pragma once

#include "gcnet/autodiff/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gcnet::data {

/// Malformed dataset / mask / checkpoint file. Carries the 1-based line number.
class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Raised when a record violates the dataset invariants.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kMaxModalities = 3;

/// Modality keys in file order: acoustic, lexical, visual.
std::string_view modality_name(std::size_t m);

struct Manifest {
    std::vector<std::size_t> dims;  // d_m per modality, size M
    std::size_t classes = 0;        // c
    std::size_t speakers = 0;       // S

    std::size_t modalities() const { return dims.size(); }
    std::size_t input_width() const;
    void validate() const;
    friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct Conversation {
    std::string id;
    std::vector<int> speakers;      // in [0, S)
    std::vector<int> labels;        // in [0, c)
    std::vector<Tensor> features;   // per modality, L x d_m

    std::size_t length() const { return labels.size(); }
    void validate(const Manifest& manifest) const;
    friend bool operator==(const Conversation&, const Conversation&) = default;
};

struct Dataset {
    Manifest manifest;
    std::vector<Conversation> conversations;

    std::size_t utterance_count() const;
    void validate() const;
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// JSON-lines format. Line 1 is the manifest
//   {"M":3,"d_a":16,"d_l":16,"d_v":16,"c":4,"S":2}
// and every following line one conversation
//   {"id":"...","speakers":[...],"labels":[...],
//    "features":{"a":[[...],...],"l":[[...],...],"v":[[...],...]}}
// Floats are written with shortest round-trip precision.
Dataset read_dataset(std::istream& in);
/// The manifest line alone.
void write_manifest(const Manifest& manifest, std::ostream& out);
void write_dataset(const Dataset& dataset, std::ostream& out);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

} // namespace gcnet::data
