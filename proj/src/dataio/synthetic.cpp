#include "gcnet/dataio/synthetic.hpp"

#include "gcnet/autodiff/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string_view>

namespace gcnet::data {

namespace {

void require(bool ok, std::string_view field, const std::string& why) {
    if (!ok) throw std::invalid_argument("generator config: " + std::string(field) + " " + why);
}

Tensor normal_table(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Tensor t = Tensor::matrix(rows, cols);
    for (auto& v : t.data()) v = scale * rng.normal();
    return t;
}

std::string conversation_id(std::string_view split, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*s_%04zu", static_cast<int>(split.size()), split.data(), k);
    return buf;
}

Conversation sample_conversation(const GeneratorRecord& rec, std::string_view split, std::size_t k) {
    const GeneratorConfig& cfg = rec.config;
    Rng rng(derive_seed(cfg.seed, split, k));
    const std::size_t len = cfg.min_length + rng.below(cfg.max_length - cfg.min_length + 1);

    Conversation conv;
    conv.id = conversation_id(split, k);
    const std::size_t start = rng.below(cfg.speakers);
    for (std::size_t i = 0; i < len; ++i) conv.speakers.push_back(static_cast<int>((start + i) % cfg.speakers));

    std::size_t y = rng.below(cfg.classes);
    conv.labels.push_back(static_cast<int>(y));
    for (std::size_t i = 1; i < len; ++i) {
        if (cfg.classes > 1 && !(rng.uniform() < cfg.p_stay)) {
            const std::size_t other = rng.below(cfg.classes - 1);
            y = other < y ? other : other + 1;
        }
        conv.labels.push_back(static_cast<int>(y));
    }

    for (std::size_t m = 0; m < 3; ++m) conv.features.push_back(Tensor::matrix(len, cfg.dims[m]));
    std::vector<double> latent(kLatentDim);
    for (std::size_t i = 0; i < len; ++i) {
        for (auto& l : latent) l = rng.normal();
        const auto label = static_cast<std::size_t>(conv.labels[i]);
        const auto spk = static_cast<std::size_t>(conv.speakers[i]);
        for (std::size_t m = 0; m < 3; ++m) {
            const Tensor& proj = rec.projections[m];
            auto row = conv.features[m].row(i);
            for (std::size_t d = 0; d < row.size(); ++d) {
                double shared = 0.0;
                for (std::size_t q = 0; q < kLatentDim; ++q) shared += proj(d, q) * latent[q];
                row[d] = rec.class_means[m](label, d) + cfg.speaker_bias * rec.speaker_offsets[m](spk, d) +
                         cfg.shared_weight * shared + cfg.noise * rng.normal();
            }
        }
    }
    return conv;
}

Dataset sample_split(const GeneratorRecord& rec, std::string_view split, std::size_t count) {
    Dataset ds;
    const GeneratorConfig& cfg = rec.config;
    ds.manifest = Manifest{{cfg.dims[0], cfg.dims[1], cfg.dims[2]}, cfg.classes, cfg.speakers};
    for (std::size_t k = 0; k < count; ++k) ds.conversations.push_back(sample_conversation(rec, split, k));
    return ds;
}

nlohmann::ordered_json table_json(const Tensor& t) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        auto r = t.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

} // namespace

void GeneratorConfig::validate() const {
    require(speakers >= 1, "speakers", "must be >= 1");
    require(classes >= 1, "classes", "must be >= 1");
    for (std::size_t m = 0; m < 3; ++m)
        require(dims[m] >= 1, std::string("dim_") + std::string(modality_name(m)), "must be >= 1");
    require(train_conversations >= 1, "train", "must be >= 1");
    require(min_length >= 1, "min_length", "must be >= 1");
    require(max_length >= min_length, "max_length", "must be >= min_length");
    require(p_stay > 0.0 && p_stay <= 1.0, "p_stay", "must be in (0, 1]");
    require(speaker_bias >= 0.0 && std::isfinite(speaker_bias), "speaker_bias", "must be >= 0");
    require(shared_weight >= 0.0 && shared_weight <= 1.0, "shared_weight", "must be in [0, 1]");
    require(noise > 0.0 && std::isfinite(noise), "noise", "must be > 0");
    require(class_scale >= 0.0 && std::isfinite(class_scale), "class_scale", "must be >= 0");
}

SyntheticSplits generate_synthetic(const GeneratorConfig& config) {
    config.validate();
    GeneratorRecord rec{config, {}, {}, {}};
    Rng tables(derive_seed(config.seed, "tables"));
    for (std::size_t m = 0; m < 3; ++m) {
        rec.class_means.push_back(normal_table(tables, config.classes, config.dims[m], config.class_scale));
        rec.speaker_offsets.push_back(normal_table(tables, config.speakers, config.dims[m], 1.0));
        rec.projections.push_back(
            normal_table(tables, config.dims[m], kLatentDim, 1.0 / std::sqrt(static_cast<double>(kLatentDim))));
    }
    SyntheticSplits out;
    out.train = sample_split(rec, "train", config.train_conversations);
    out.val = sample_split(rec, "val", config.val_conversations);
    out.test = sample_split(rec, "test", config.test_conversations);
    out.record = std::move(rec);
    return out;
}

void write_generator_record(const GeneratorRecord& record, std::ostream& out) {
    const GeneratorConfig& c = record.config;
    nlohmann::ordered_json j;
    j["speakers"] = c.speakers;
    j["classes"] = c.classes;
    j["dim_a"] = c.dims[0];
    j["dim_l"] = c.dims[1];
    j["dim_v"] = c.dims[2];
    j["train"] = c.train_conversations;
    j["val"] = c.val_conversations;
    j["test"] = c.test_conversations;
    j["min_length"] = c.min_length;
    j["max_length"] = c.max_length;
    j["p_stay"] = c.p_stay;
    j["speaker_bias"] = c.speaker_bias;
    j["shared_weight"] = c.shared_weight;
    j["noise"] = c.noise;
    j["class_scale"] = c.class_scale;
    j["seed"] = c.seed;
    for (std::size_t m = 0; m < 3; ++m) {
        const std::string key(modality_name(m));
        j["class_means"][key] = table_json(record.class_means[m]);
        j["speaker_offsets"][key] = table_json(record.speaker_offsets[m]);
        j["projections"][key] = table_json(record.projections[m]);
    }
    out << j.dump() << '\n';
}

} // namespace gcnet::data
