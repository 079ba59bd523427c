#include "gcnet/model/checkpoint.hpp"

#include "gcnet/dataio/dataset.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace gcnet::model {

using json = nlohmann::ordered_json;
using data::FormatError;

namespace {

constexpr const char* kFormat = "gcnet-checkpoint";
constexpr int kVersion = 1;

json parse_line(const std::string& text, std::size_t line) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(line, std::string("invalid JSON: ") + e.what());
    }
}

const json& field(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(line, std::string("missing field '") + key + "'");
    return *it;
}

GCNetConfig parse_config(const json& j, std::size_t line) {
    try {
        GCNetConfig c;
        c.latent = field(j, "latent", line).get<std::size_t>();
        c.window = field(j, "window", line).get<std::size_t>();
        c.modality_dims = field(j, "modality_dims", line).get<std::vector<std::size_t>>();
        c.classes = field(j, "classes", line).get<std::size_t>();
        c.speakers = field(j, "speakers", line).get<std::size_t>();
        c.dropout = field(j, "dropout", line).get<double>();
        c.variant = parse_variant(field(j, "variant", line).get<std::string>());
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw FormatError(line, std::string("bad config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(line, std::string("bad config: ") + e.what());
    }
}

} // namespace

void check_params(const GCNetConfig& config, const ad::ParamSet& params) {
    const auto layout = param_layout(config);
    if (layout.size() != params.size())
        throw std::invalid_argument("parameter set has " + std::to_string(params.size()) + " tensors, config expects " +
                                    std::to_string(layout.size()));
    std::size_t k = 0;
    for (const auto& p : params) {
        const auto& [name, shape] = layout[k++];
        if (p.name != name) throw std::invalid_argument("parameter '" + p.name + "' where '" + name + "' expected");
        if (p.value.shape() != shape)
            throw std::invalid_argument("parameter '" + name + "' has shape " + shape_to_string(p.value.shape()) +
                                        ", config expects " + shape_to_string(shape));
    }
}

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out) {
    check_params(checkpoint.config, checkpoint.params);
    const GCNetConfig& c = checkpoint.config;
    json header;
    header["format"] = kFormat;
    header["version"] = kVersion;
    header["config"] = {{"latent", c.latent},     {"window", c.window},   {"modality_dims", c.modality_dims},
                        {"classes", c.classes},   {"speakers", c.speakers}, {"dropout", c.dropout},
                        {"variant", std::string(to_string(c.variant))}};
    json listing = json::array();
    for (const auto& p : checkpoint.params) listing.push_back({{"name", p.name}, {"shape", p.value.shape()}});
    header["params"] = std::move(listing);
    out << header.dump() << '\n';
    for (const auto& p : checkpoint.params) {
        json j;
        j["name"] = p.name;
        j["data"] = p.value.storage();
        out << j.dump() << '\n';
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    std::string text;
    std::size_t line = 0;
    auto next = [&]() -> bool {
        while (std::getline(in, text)) {
            ++line;
            if (!text.empty()) return true;
        }
        return false;
    };
    if (!next()) throw FormatError(1, "empty checkpoint");
    const json header = parse_line(text, line);
    if (!header.is_object() || header.value("format", "") != kFormat)
        throw FormatError(line, "not a gcnet checkpoint");
    if (header.value("version", 0) != kVersion) throw FormatError(line, "unsupported checkpoint version");
    Checkpoint ck{parse_config(field(header, "config", line), line), {}};
    const auto layout = param_layout(ck.config);
    const json& listing = field(header, "params", line);
    if (!listing.is_array() || listing.size() != layout.size())
        throw FormatError(line, "params listing does not match the configured architecture");
    for (std::size_t k = 0; k < layout.size(); ++k) {
        const auto name = listing[k].value("name", "");
        const auto shape = listing[k].value("shape", Shape{});
        if (name != layout[k].first || shape != layout[k].second)
            throw FormatError(line, "params listing entry " + std::to_string(k) + " ('" + name + "' " +
                                        shape_to_string(shape) + ") does not match expected '" + layout[k].first +
                                        "' " + shape_to_string(layout[k].second));
    }
    for (const auto& [name, shape] : layout) {
        if (!next()) throw FormatError(line + 1, "missing payload for parameter '" + name + "'");
        const json j = parse_line(text, line);
        if (!j.is_object() || j.value("name", "") != name)
            throw FormatError(line, "expected payload for parameter '" + name + "'");
        const json& payload = field(j, "data", line);
        if (!payload.is_array()) throw FormatError(line, "field 'data' must be an array");
        std::vector<double> values;
        values.reserve(payload.size());
        for (const auto& v : payload) {
            if (!v.is_number()) throw FormatError(line, "parameter '" + name + "' has a non-number");
            values.push_back(v.get<double>());
        }
        std::size_t expected = 1;
        for (auto s : shape) expected *= s;
        if (values.size() != expected)
            throw FormatError(line, "parameter '" + name + "' has " + std::to_string(values.size()) +
                                        " values, shape " + shape_to_string(shape) + " needs " +
                                        std::to_string(expected));
        Tensor value(shape, std::move(values));
        if (!value.all_finite()) throw FormatError(line, "parameter '" + name + "' has NaN/Inf");
        ck.params.add(name, std::move(value));
    }
    if (next()) throw FormatError(line, "trailing data after the last parameter");
    return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    write_checkpoint(checkpoint, out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

} // namespace gcnet::model
