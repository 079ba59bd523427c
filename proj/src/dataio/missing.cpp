#include "gcnet/dataio/missing.hpp"

#include "gcnet/autodiff/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace gcnet::data {

using json = nlohmann::ordered_json;

namespace {

constexpr double kRateSlack = 1e-12;

const json& field(const json& obj, const std::string& key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(line, "missing field '" + key + "'");
    return *it;
}

double rate_field(const json& obj, std::size_t line) {
    const json& r = field(obj, "requested_rate", line);
    if (!r.is_number()) throw FormatError(line, "field 'requested_rate' must be a number");
    return r.get<double>();
}

} // namespace

std::size_t ConversationMask::available_count(std::size_t utterance) const {
    std::size_t n = 0;
    for (const auto& b : bits) n += b[utterance] != 0;
    return n;
}

unsigned ConversationMask::pattern(std::size_t utterance) const {
    unsigned id = 0;
    for (std::size_t m = 0; m < bits.size(); ++m)
        if (bits[m][utterance]) id |= 1u << (bits.size() - 1 - m);
    return id;
}

void ConversationMask::validate(const Conversation& conv) const {
    const std::string where = "mask '" + id + "'";
    if (id != conv.id) throw ValidationError(where + " paired with conversation '" + conv.id + "'");
    if (bits.size() != conv.features.size())
        throw ValidationError(where + ": " + std::to_string(bits.size()) + " modalities, dataset has " +
                              std::to_string(conv.features.size()));
    for (const auto& b : bits)
        if (b.size() != conv.length())
            throw ValidationError(where + ": " + std::to_string(b.size()) + " bits for " +
                                  std::to_string(conv.length()) + " utterances");
    for (std::size_t i = 0; i < conv.length(); ++i)
        if (available_count(i) == 0)
            throw ValidationError(where + ", utterance " + std::to_string(i) + ": no modality available");
}

void MaskSet::validate(const Dataset& dataset) const {
    if (masks.size() != dataset.conversations.size())
        throw ValidationError(std::to_string(masks.size()) + " masks for " +
                              std::to_string(dataset.conversations.size()) + " conversations");
    if (modalities != dataset.manifest.modalities())
        throw ValidationError("mask set has " + std::to_string(modalities) + " modalities, dataset has " +
                              std::to_string(dataset.manifest.modalities()));
    for (std::size_t k = 0; k < masks.size(); ++k) masks[k].validate(dataset.conversations[k]);
}

ConversationMask full_mask(const Conversation& conv) {
    ConversationMask mask{conv.id, 0.0, {}};
    mask.bits.assign(conv.features.size(), std::vector<std::uint8_t>(conv.length(), 1));
    return mask;
}

MaskSet full_masks(const Dataset& dataset) {
    MaskSet set{dataset.manifest.modalities(), 0.0, 0, {}};
    for (const auto& conv : dataset.conversations) set.masks.push_back(full_mask(conv));
    return set;
}

double max_missing_rate(std::size_t modalities) {
    if (modalities == 3) return 0.7;
    return static_cast<double>(modalities - 1) / static_cast<double>(modalities);
}

double slot_drop_probability(double eta, std::size_t modalities) {
    if (modalities <= 1 || eta <= 0.0) return 0.0;
    const double m = static_cast<double>(modalities);
    if (eta >= (m - 1.0) / m) return 1.0;
    const auto expected_missing = [&](double q) { return m * q - std::pow(q, m); };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (expected_missing(mid) < m * eta ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

MaskSet apply_missing(const Dataset& dataset, double eta, std::uint64_t seed) {
    const std::size_t modalities = dataset.manifest.modalities();
    if (!(eta >= 0.0) || eta > max_missing_rate(modalities) + kRateSlack)
        throw std::invalid_argument("missing rate " + std::to_string(eta) + " outside [0, " +
                                    std::to_string(max_missing_rate(modalities)) + "] for M=" +
                                    std::to_string(modalities));
    const double q = slot_drop_probability(eta, modalities);
    MaskSet set{modalities, eta, seed, {}};
    set.masks.reserve(dataset.conversations.size());
    for (std::size_t k = 0; k < dataset.conversations.size(); ++k) {
        const Conversation& conv = dataset.conversations[k];
        Rng rng(derive_seed(seed, "conversation-mask", k));
        ConversationMask mask = full_mask(conv);
        mask.requested_rate = eta;
        if (q > 0.0) {
            for (std::size_t i = 0; i < conv.length(); ++i) {
                std::size_t kept = 0;
                for (std::size_t m = 0; m < modalities; ++m) {
                    const bool drop = rng.uniform() < q;
                    mask.bits[m][i] = drop ? 0 : 1;
                    kept += !drop;
                }
                if (kept == 0) mask.bits[rng.below(modalities)][i] = 1;
            }
        }
        set.masks.push_back(std::move(mask));
    }
    return set;
}

double realized_missing_rate(std::span<const ConversationMask> masks) {
    if (masks.empty()) throw std::invalid_argument("realized_missing_rate: no masks");
    std::size_t available = 0, slots = 0;
    for (const auto& mask : masks) {
        for (std::size_t i = 0; i < mask.length(); ++i) available += mask.available_count(i);
        slots += mask.length() * mask.modalities();
    }
    if (slots == 0) throw std::invalid_argument("realized_missing_rate: masks cover no utterances");
    return 1.0 - static_cast<double>(available) / static_cast<double>(slots);
}

double realized_missing_rate(const MaskSet& masks) { return realized_missing_rate(masks.masks); }

MaskSet read_masks(std::istream& in) {
    MaskSet set;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw FormatError(line, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw FormatError(line, "record must be an object");
        if (!have_header) {
            const json& m = field(j, "M", line);
            if (!m.is_number_unsigned() || m.get<std::size_t>() == 0 || m.get<std::size_t>() > kMaxModalities)
                throw FormatError(line, "field 'M' must be an integer in [1, 3]");
            set.modalities = m.get<std::size_t>();
            set.requested_rate = rate_field(j, line);
            const json& s = field(j, "seed", line);
            if (!s.is_number_unsigned()) throw FormatError(line, "field 'seed' must be a non-negative integer");
            set.seed = s.get<std::uint64_t>();
            have_header = true;
            continue;
        }
        ConversationMask mask;
        const json& id = field(j, "id", line);
        if (!id.is_string()) throw FormatError(line, "field 'id' must be a string");
        mask.id = id.get<std::string>();
        mask.requested_rate = rate_field(j, line);
        const json& lambda = field(j, "lambda", line);
        if (!lambda.is_object()) throw FormatError(line, "field 'lambda' must be an object");
        for (std::size_t m = 0; m < set.modalities; ++m) {
            const std::string key(modality_name(m));
            const json& arr = field(lambda, key, line);
            if (!arr.is_array()) throw FormatError(line, "field 'lambda." + key + "' must be an array");
            std::vector<std::uint8_t> bits;
            for (const auto& b : arr) {
                if (!b.is_number_unsigned() || b.get<unsigned>() > 1)
                    throw FormatError(line, "field 'lambda." + key + "' entries must be 0 or 1");
                bits.push_back(static_cast<std::uint8_t>(b.get<unsigned>()));
            }
            if (m > 0 && bits.size() != mask.bits.front().size())
                throw FormatError(line, "field 'lambda." + key + "' length differs from 'lambda.a'");
            mask.bits.push_back(std::move(bits));
        }
        for (std::size_t i = 0; i < mask.length(); ++i)
            if (mask.available_count(i) == 0)
                throw FormatError(line, "utterance " + std::to_string(i) + " has no available modality");
        set.masks.push_back(std::move(mask));
    }
    if (!have_header) throw FormatError(line + 1, "missing mask header record");
    return set;
}

void write_masks(const MaskSet& masks, std::ostream& out) {
    json header = json::object();
    header["M"] = masks.modalities;
    header["requested_rate"] = masks.requested_rate;
    header["seed"] = masks.seed;
    out << header.dump() << '\n';
    for (const auto& mask : masks.masks) {
        json j = json::object();
        j["id"] = mask.id;
        j["requested_rate"] = mask.requested_rate;
        json lambda = json::object();
        for (std::size_t m = 0; m < mask.bits.size(); ++m) {
            json arr = json::array();
            for (auto b : mask.bits[m]) arr.push_back(static_cast<unsigned>(b));
            lambda[std::string(modality_name(m))] = std::move(arr);
        }
        j["lambda"] = std::move(lambda);
        out << j.dump() << '\n';
    }
}

MaskSet load_masks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mask file " + path.string());
    return read_masks(in);
}

void save_masks(const MaskSet& masks, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mask file " + path.string());
    write_masks(masks, out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace gcnet::data
