#include "gcnet/dataio/dataset.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace gcnet::data {

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kModalityNames[kMaxModalities] = {"a", "l", "v"};

const json& field(const json& obj, std::string_view key, std::size_t line) {
    auto it = obj.find(std::string(key));
    if (it == obj.end()) throw FormatError(line, "missing field '" + std::string(key) + "'");
    return *it;
}

std::size_t positive_size(const json& obj, std::string_view key, std::size_t line) {
    const json& v = field(obj, key, line);
    if (!v.is_number_unsigned() || v.get<std::size_t>() == 0)
        throw FormatError(line, "field '" + std::string(key) + "' must be a positive integer");
    return v.get<std::size_t>();
}

std::vector<int> int_array(const json& obj, std::string_view key, std::size_t line) {
    const json& v = field(obj, key, line);
    if (!v.is_array()) throw FormatError(line, "field '" + std::string(key) + "' must be an array");
    std::vector<int> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer())
            throw FormatError(line, "field '" + std::string(key) + "' entry " + std::to_string(i) + " is not an integer");
        out.push_back(v[i].get<int>());
    }
    return out;
}

Tensor matrix_field(const json& v, std::string_view key, std::size_t cols, std::size_t line) {
    const std::string name = "features." + std::string(key);
    if (!v.is_array() || v.empty()) throw FormatError(line, "field '" + name + "' must be a non-empty array of rows");
    std::vector<double> data;
    data.reserve(v.size() * cols);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const json& row = v[i];
        if (!row.is_array() || row.size() != cols)
            throw FormatError(line, "field '" + name + "' row " + std::to_string(i) + " must have " +
                                        std::to_string(cols) + " numbers (manifest dim)");
        for (const auto& x : row) {
            if (!x.is_number()) throw FormatError(line, "field '" + name + "' row " + std::to_string(i) + " has a non-number");
            data.push_back(x.get<double>());
        }
    }
    return Tensor({v.size(), cols}, std::move(data));
}

Manifest parse_manifest(const json& j, std::size_t line) {
    if (!j.is_object()) throw FormatError(line, "manifest must be an object");
    Manifest m;
    const std::size_t modalities = positive_size(j, "M", line);
    if (modalities > kMaxModalities)
        throw FormatError(line, "field 'M' must be at most " + std::to_string(kMaxModalities));
    for (std::size_t k = 0; k < modalities; ++k)
        m.dims.push_back(positive_size(j, "d_" + std::string(kModalityNames[k]), line));
    m.classes = positive_size(j, "c", line);
    m.speakers = positive_size(j, "S", line);
    return m;
}

Conversation parse_conversation(const json& j, const Manifest& manifest, std::size_t line) {
    if (!j.is_object()) throw FormatError(line, "conversation record must be an object");
    Conversation conv;
    const json& id = field(j, "id", line);
    if (!id.is_string()) throw FormatError(line, "field 'id' must be a string");
    conv.id = id.get<std::string>();
    conv.speakers = int_array(j, "speakers", line);
    conv.labels = int_array(j, "labels", line);
    const json& feats = field(j, "features", line);
    if (!feats.is_object()) throw FormatError(line, "field 'features' must be an object");
    for (std::size_t m = 0; m < manifest.modalities(); ++m) {
        const auto key = kModalityNames[m];
        conv.features.push_back(matrix_field(field(feats, key, line), key, manifest.dims[m], line));
    }
    try {
        conv.validate(manifest);
    } catch (const ValidationError& e) {
        throw FormatError(line, e.what());
    }
    return conv;
}

json manifest_json(const Manifest& m) {
    json j = json::object();
    j["M"] = m.modalities();
    for (std::size_t k = 0; k < m.modalities(); ++k) j["d_" + std::string(kModalityNames[k])] = m.dims[k];
    j["c"] = m.classes;
    j["S"] = m.speakers;
    return j;
}

json matrix_json(const Tensor& t) {
    json rows = json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        auto r = t.row(i);
        rows.push_back(json(std::vector<double>(r.begin(), r.end())));
    }
    return rows;
}

} // namespace

FormatError::FormatError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

std::string_view modality_name(std::size_t m) {
    if (m >= kMaxModalities) throw std::out_of_range("modality index " + std::to_string(m));
    return kModalityNames[m];
}

std::size_t Manifest::input_width() const {
    std::size_t w = 0;
    for (auto d : dims) w += d;
    return w;
}

void Manifest::validate() const {
    if (dims.empty() || dims.size() > kMaxModalities)
        throw ValidationError("manifest: M must be in [1, " + std::to_string(kMaxModalities) + "]");
    for (auto d : dims)
        if (d == 0) throw ValidationError("manifest: modality dims must be positive");
    if (classes == 0) throw ValidationError("manifest: class count c must be positive");
    if (speakers == 0) throw ValidationError("manifest: speaker count S must be positive");
}

void Conversation::validate(const Manifest& manifest) const {
    const std::size_t len = labels.size();
    const std::string where = "conversation '" + id + "'";
    if (len == 0) throw ValidationError(where + ": must contain at least one utterance");
    if (speakers.size() != len)
        throw ValidationError(where + ": " + std::to_string(speakers.size()) + " speakers for " +
                              std::to_string(len) + " labels");
    if (features.size() != manifest.modalities())
        throw ValidationError(where + ": expected " + std::to_string(manifest.modalities()) + " modalities");
    for (std::size_t i = 0; i < len; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= manifest.classes)
            throw ValidationError(where + ", utterance " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                                  " outside [0, " + std::to_string(manifest.classes) + ")");
        if (speakers[i] < 0 || static_cast<std::size_t>(speakers[i]) >= manifest.speakers)
            throw ValidationError(where + ", utterance " + std::to_string(i) + ": speaker " +
                                  std::to_string(speakers[i]) + " outside [0, " + std::to_string(manifest.speakers) +
                                  ")");
    }
    for (std::size_t m = 0; m < features.size(); ++m) {
        const Tensor& f = features[m];
        if (f.rank() != 2 || f.rows() != len || f.cols() != manifest.dims[m])
            throw ValidationError(where + ": modality '" + std::string(modality_name(m)) + "' has shape " +
                                  shape_to_string(f.shape()) + ", expected [" + std::to_string(len) + "x" +
                                  std::to_string(manifest.dims[m]) + "]");
        if (!f.all_finite())
            throw ValidationError(where + ": modality '" + std::string(modality_name(m)) + "' has NaN/Inf");
    }
}

std::size_t Dataset::utterance_count() const {
    std::size_t n = 0;
    for (const auto& c : conversations) n += c.length();
    return n;
}

void Dataset::validate() const {
    manifest.validate();
    for (const auto& c : conversations) c.validate(manifest);
}

Dataset read_dataset(std::istream& in) {
    Dataset ds;
    std::string text;
    std::size_t line = 0;
    bool have_manifest = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw FormatError(line, std::string("invalid JSON: ") + e.what());
        }
        if (!have_manifest) {
            ds.manifest = parse_manifest(j, line);
            have_manifest = true;
        } else {
            ds.conversations.push_back(parse_conversation(j, ds.manifest, line));
        }
    }
    if (!have_manifest) throw FormatError(line + 1, "missing manifest record");
    return ds;
}

void write_manifest(const Manifest& manifest, std::ostream& out) {
    manifest.validate();
    out << manifest_json(manifest).dump() << '\n';
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
    dataset.validate();
    out << manifest_json(dataset.manifest).dump() << '\n';
    for (const auto& conv : dataset.conversations) {
        json j = json::object();
        j["id"] = conv.id;
        j["speakers"] = conv.speakers;
        j["labels"] = conv.labels;
        json feats = json::object();
        for (std::size_t m = 0; m < conv.features.size(); ++m)
            feats[std::string(kModalityNames[m])] = matrix_json(conv.features[m]);
        j["features"] = std::move(feats);
        out << j.dump() << '\n';
    }
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
    return read_dataset(in);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
    write_dataset(dataset, out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace gcnet::data
