#include "cli/cli.hpp"

#include "gcnet/autodiff/grad_check.hpp"
#include "gcnet/dataio/missing.hpp"
#include "gcnet/evaluation/evaluate.hpp"
#include "gcnet/model/checkpoint.hpp"
#include "gcnet/training/losses.hpp"
#include "gcnet/training/trainer.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace gcnet::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw std::invalid_argument("config key '" + key + "': cannot parse '" + text + "'");
    return value;
}

bool verbose() {
    const char* v = std::getenv("GCNET_VERBOSE");
    return v != nullptr && *v != '\0' && std::string_view(v) != "0";
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw std::runtime_error("missing input file " + path.string());
}

// Validated inputs are fully loaded before anything is written.
void prepare_out_dir(const fs::path& dir) {
    if (fs::exists(dir) && !fs::is_directory(dir))
        throw std::runtime_error("output path " + dir.string() + " exists and is not a directory");
    fs::create_directories(dir);
}

std::size_t split_index(const std::string& split) {
    for (std::size_t s = 0; s < 3; ++s)
        if (split == kSplits[s]) return s;
    throw std::invalid_argument("unknown split '" + split + "' (expected train, val or test)");
}

struct RunVariant {
    model::Variant variant = model::Variant::full;
    bool lower_bound = false;
    std::string name;
};

RunVariant parse_run_variant(const std::string& text) {
    if (text == "lower-bound" || text == "lower_bound") return {model::Variant::full, true, "lower-bound"};
    const model::Variant v = model::parse_variant(text);
    std::string name(model::to_string(v));
    for (auto& ch : name)
        if (ch == '_') ch = '-';
    return {v, false, name};
}

/// Model and optimizer flags shared by `train` and `ablate`.
struct TrainOptions {
    std::size_t latent = 50;
    std::size_t window = 2;
    std::size_t epochs = 100;
    std::size_t batch = 8;
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double dropout = 0.5;

    void add_to(CLI::App& app) {
        app.add_option("--D", latent, "latent width (even)")->capture_default_str();
        app.add_option("--w", window, "context window")->capture_default_str();
        app.add_option("--epochs", epochs)->capture_default_str();
        app.add_option("--batch", batch, "conversations per step")->capture_default_str();
        app.add_option("--lr", lr)->capture_default_str();
        app.add_option("--weight-decay", weight_decay)->capture_default_str();
        app.add_option("--dropout", dropout)->capture_default_str();
    }

    training::TrainConfig train_config(std::uint64_t seed, bool lower_bound) const {
        training::TrainConfig tc;
        tc.learning_rate = lr;
        tc.weight_decay = weight_decay;
        tc.dropout = dropout;
        tc.epochs = epochs;
        tc.batch_size = batch;
        tc.seed = seed;
        tc.lower_bound = lower_bound;
        tc.validate();
        return tc;
    }
};

struct Splits {
    data::Dataset sets[3];
};

Splits load_splits(const fs::path& dir) {
    Splits s;
    for (std::size_t k = 0; k < 3; ++k) {
        require_file(dataset_path(dir, kSplits[k]));
        s.sets[k] = data::load_dataset(dataset_path(dir, kSplits[k]));
    }
    for (std::size_t k = 1; k < 3; ++k)
        if (!(s.sets[k].manifest == s.sets[0].manifest))
            throw std::invalid_argument(std::string("split '") + kSplits[k] + "' has a different manifest than 'train'");
    return s;
}

data::MaskSet load_split_masks(const fs::path& dir, std::string_view split, const data::Dataset& dataset) {
    require_file(mask_path(dir, split));
    data::MaskSet masks = data::load_masks(mask_path(dir, split));
    try {
        masks.validate(dataset);
    } catch (const std::exception& e) {
        throw std::invalid_argument("masks for split '" + std::string(split) + "' do not match the data: " + e.what());
    }
    return masks;
}

training::EpochCallback progress(std::ostream& err, const std::string& tag) {
    if (!verbose()) return {};
    return [&err, tag](const training::EpochRecord& r) {
        err << tag << " epoch " << r.epoch << " loss " << eval::format_number(r.loss_total) << " val_waf "
            << eval::format_number(r.val_waf) << '\n';
    };
}

// --- commands -------------------------------------------------------------

struct GenDataArgs {
    std::string config;
    std::string out;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
    data::GeneratorConfig config;
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw std::runtime_error("cannot open config " + a.config);
        config = parse_generator_config(in);
    }
    const data::SyntheticSplits splits = data::generate_synthetic(config);
    const fs::path dir(a.out);
    prepare_out_dir(dir);
    {
        auto f = open_out(dir / "manifest.json");
        data::write_manifest(splits.train.manifest, f);
    }
    {
        auto f = open_out(dir / "generator.json");
        data::write_generator_record(splits.record, f);
    }
    const data::Dataset* sets[3] = {&splits.train, &splits.val, &splits.test};
    for (std::size_t k = 0; k < 3; ++k) {
        data::save_dataset(*sets[k], dataset_path(dir, kSplits[k]));
        out << kSplits[k] << ": " << sets[k]->conversations.size() << " conversations, " << sets[k]->utterance_count()
            << " utterances\n";
    }
    return 0;
}

struct MaskArgs {
    std::string data;
    std::string out;
    double eta = 0.0;
    std::uint64_t seed = 1;
};

int mask(const MaskArgs& a, std::ostream& out) {
    const Splits splits = load_splits(a.data);
    data::MaskSet masks[3];
    for (std::size_t k = 0; k < 3; ++k) masks[k] = data::apply_missing(splits.sets[k], a.eta, mask_seed(a.seed, k));
    prepare_out_dir(a.out);
    for (std::size_t k = 0; k < 3; ++k) {
        data::save_masks(masks[k], mask_path(a.out, kSplits[k]));
        out << kSplits[k] << " realized_eta=" << eval::format_number(data::realized_missing_rate(masks[k])) << '\n';
    }
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string masks;
    std::string variant = "full";
    std::string out;
    std::uint64_t seed = 1;
    TrainOptions options;
};

int train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    const RunVariant rv = parse_run_variant(a.variant);
    const training::TrainConfig tc = a.options.train_config(a.seed, rv.lower_bound);
    const Splits splits = load_splits(a.data);
    const data::MaskSet train_masks = load_split_masks(a.masks, "train", splits.sets[0]);
    const data::MaskSet val_masks = load_split_masks(a.masks, "val", splits.sets[1]);
    const model::GCNetConfig config =
        model::make_config(splits.sets[0].manifest, a.options.latent, a.options.window, a.options.dropout, rv.variant);
    const training::TrainResult result = training::train(config, splits.sets[0], train_masks, splits.sets[1],
                                                         val_masks, tc, progress(err, rv.name));
    prepare_out_dir(a.out);
    model::save_checkpoint(result.best, fs::path(a.out) / "checkpoint.jsonl");
    auto history = open_out(fs::path(a.out) / "history.csv");
    result.history.write_csv(history);
    out << "best epoch " << result.best_epoch << " val_waf "
        << eval::format_number(result.history.epochs[result.best_epoch - 1].val_waf) << '\n';
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string masks;
    std::string split = "test";
    std::string out;
};

struct LoadedEval {
    model::Checkpoint checkpoint;
    Splits splits;
    std::size_t split = 2;
    data::MaskSet masks;
};

LoadedEval load_eval_inputs(const EvalArgs& a) {
    LoadedEval l;
    l.split = split_index(a.split);
    require_file(a.checkpoint);
    l.checkpoint = model::load_checkpoint(a.checkpoint);
    l.splits = load_splits(a.data);
    model::check_manifest(l.checkpoint.config, l.splits.sets[l.split].manifest);
    l.masks = load_split_masks(a.masks, kSplits[l.split], l.splits.sets[l.split]);
    return l;
}

int evaluate(const EvalArgs& a, std::ostream& out) {
    const LoadedEval l = load_eval_inputs(a);
    const data::Dataset& set = l.splits.sets[l.split];
    const eval::EvalResult result = eval::evaluate(l.checkpoint.config, l.checkpoint.params, set, l.masks);
    eval::MetricsRow row;
    row.run_id = a.split;
    row.variant = std::string(model::to_string(l.checkpoint.config.variant));
    row.seed = l.masks.seed;
    row.eta = l.masks.requested_rate;
    row.classification = result.classification;
    row.imputation_mse = result.imputation_mse;
    if (fs::is_regular_file(mask_path(a.masks, "train"))) {
        const data::MaskSet train_masks = load_split_masks(a.masks, "train", l.splits.sets[0]);
        row.baseline_mse = eval::MeanImputer::fit(l.splits.sets[0], train_masks).mse(set, l.masks);
    }
    prepare_out_dir(a.out);
    {
        auto f = open_out(fs::path(a.out) / "metrics.csv");
        eval::write_metrics_csv(std::span(&row, 1), l.checkpoint.config.classes, l.checkpoint.config.modalities(), f);
    }
    {
        auto f = open_out(fs::path(a.out) / "predictions.csv");
        eval::write_predictions_csv(result, f);
    }
    out << "waf " << eval::format_number(result.classification.waf) << " accuracy "
        << eval::format_number(result.classification.accuracy);
    for (std::size_t m = 0; m < result.imputation_mse.size(); ++m)
        if (result.imputation_mse[m])
            out << " mse_" << data::modality_name(m) << ' ' << eval::format_number(*result.imputation_mse[m]);
    out << '\n';
    return 0;
}

int impute(const EvalArgs& a, std::ostream& out) {
    const LoadedEval l = load_eval_inputs(a);
    const data::Dataset& set = l.splits.sets[l.split];
    const eval::EvalResult result = eval::evaluate(l.checkpoint.config, l.checkpoint.params, set, l.masks);
    const data::Dataset filled = eval::impute_dataset(result, set, l.masks);
    prepare_out_dir(a.out);
    const fs::path path = fs::path(a.out) / (a.split + ".imputed.jsonl");
    data::save_dataset(filled, path);
    out << "wrote " << path.string() << '\n';
    return 0;
}

int export_embeddings(const EvalArgs& a, std::ostream& out) {
    const LoadedEval l = load_eval_inputs(a);
    const eval::EvalResult result =
        eval::evaluate(l.checkpoint.config, l.checkpoint.params, l.splits.sets[l.split], l.masks);
    const fs::path path(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto f = open_out(path);
    eval::write_embeddings_csv(result, f);
    out << "wrote " << path.string() << '\n';
    return 0;
}

struct AblateArgs {
    std::string data;
    std::string out;
    std::string etas = "0.0..0.7";
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<std::string> variants{"full", "no-sgnn", "no-tgnn", "coupled", "no-rec", "lower-bound"};
    TrainOptions options;
};

eval::MetricsRow aggregate(const std::vector<eval::MetricsRow>& cell, const std::string& run_id) {
    eval::MetricsRow mean;
    mean.run_id = run_id;
    mean.variant = cell.front().variant;
    mean.eta = cell.front().eta;
    std::size_t ok = 0;
    std::size_t modalities = 0;
    for (const auto& r : cell) modalities = std::max({modalities, r.imputation_mse.size(), r.baseline_mse.size()});
    std::vector<double> mse(modalities, 0.0), base(modalities, 0.0);
    std::vector<std::size_t> mse_n(modalities, 0), base_n(modalities, 0);
    for (const auto& r : cell) {
        if (!r.error.empty()) continue;
        if (ok++ == 0) {
            mean.classification = r.classification;
            mean.classification.waf = mean.classification.accuracy = 0.0;
            std::fill(mean.classification.f1.begin(), mean.classification.f1.end(), 0.0);
        }
        mean.classification.waf += r.classification.waf;
        mean.classification.accuracy += r.classification.accuracy;
        for (std::size_t k = 0; k < r.classification.f1.size(); ++k) mean.classification.f1[k] += r.classification.f1[k];
        for (std::size_t m = 0; m < r.imputation_mse.size(); ++m)
            if (r.imputation_mse[m]) mse[m] += *r.imputation_mse[m], ++mse_n[m];
        for (std::size_t m = 0; m < r.baseline_mse.size(); ++m)
            if (r.baseline_mse[m]) base[m] += *r.baseline_mse[m], ++base_n[m];
    }
    if (ok == 0) {
        mean.error = "every seed failed";
        return mean;
    }
    const auto n = static_cast<double>(ok);
    mean.classification.waf /= n;
    mean.classification.accuracy /= n;
    for (double& f : mean.classification.f1) f /= n;
    for (std::size_t m = 0; m < modalities; ++m) {
        mean.imputation_mse.push_back(mse_n[m] ? std::optional(mse[m] / static_cast<double>(mse_n[m])) : std::nullopt);
        mean.baseline_mse.push_back(base_n[m] ? std::optional(base[m] / static_cast<double>(base_n[m])) : std::nullopt);
    }
    return mean;
}

std::string eta_label(double eta) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << eta;
    return s.str();
}

int ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
    const std::vector<double> etas = parse_eta_list(a.etas);
    if (a.seeds.empty()) throw std::invalid_argument("ablate: empty seed list");
    if (a.variants.empty()) throw std::invalid_argument("ablate: empty variant list");
    std::vector<RunVariant> variants;
    for (const auto& v : a.variants) variants.push_back(parse_run_variant(v));
    for (double eta : etas)
        if (!(eta >= 0.0 && eta <= data::max_missing_rate(3)))
            throw std::invalid_argument("ablate: eta " + eval::format_number(eta) + " outside the missing-rate grid");
    a.options.train_config(0, false);
    const Splits splits = load_splits(a.data);
    const model::GCNetConfig base_config = model::make_config(splits.sets[0].manifest, a.options.latent,
                                                              a.options.window, a.options.dropout, model::Variant::full);
    prepare_out_dir(a.out);

    std::vector<eval::MetricsRow> rows;
    for (const auto& rv : variants) {
        for (double eta : etas) {
            std::vector<eval::MetricsRow> cell;
            for (std::uint64_t seed : a.seeds) {
                eval::MetricsRow row;
                row.run_id = rv.name + "/eta=" + eta_label(eta) + "/seed=" + std::to_string(seed);
                row.variant = rv.name;
                row.eta = eta;
                row.seed = seed;
                try {
                    data::MaskSet masks[3];
                    for (std::size_t k = 0; k < 3; ++k)
                        masks[k] = data::apply_missing(splits.sets[k], eta, mask_seed(seed, k));
                    model::GCNetConfig config = base_config;
                    config.variant = rv.variant;
                    const auto result = training::train(config, splits.sets[0], masks[0], splits.sets[1], masks[1],
                                                        a.options.train_config(seed, rv.lower_bound),
                                                        progress(err, row.run_id));
                    const auto ev = eval::evaluate(result.best.config, result.best.params, splits.sets[2], masks[2]);
                    row.classification = ev.classification;
                    row.imputation_mse = ev.imputation_mse;
                    row.baseline_mse = eval::MeanImputer::fit(splits.sets[0], masks[0]).mse(splits.sets[2], masks[2]);
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                out << row.run_id << ' '
                    << (row.error.empty() ? "waf " + eval::format_number(row.classification.waf) : "error: " + row.error)
                    << '\n';
                cell.push_back(row);
                rows.push_back(std::move(row));
            }
            rows.push_back(aggregate(cell, rv.name + "/eta=" + eta_label(eta) + "/mean"));
        }
    }
    auto f = open_out(fs::path(a.out) / "ablation.csv");
    eval::write_metrics_csv(rows, base_config.classes, base_config.modalities(), f);
    return 0;
}

struct GradcheckArgs {
    std::size_t latent = 8;
    std::size_t window = 1;
    std::size_t length = 4;
    std::size_t speakers = 2;
    std::size_t classes = 3;
    std::size_t dim = 5;
    double eta = 0.5;
    std::uint64_t seed = 1;
    double eps = 1e-5;
    double tol = 1e-4;
    std::string inject_fault;
};

std::optional<ad::OpKind> parse_op_kind(const std::string& text) {
    for (int k = 0; k <= static_cast<int>(ad::OpKind::squared_error); ++k)
        if (ad::to_string(static_cast<ad::OpKind>(k)) == text) return static_cast<ad::OpKind>(k);
    throw std::invalid_argument("unknown operation '" + text + "'");
}

int gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
    const std::optional<ad::OpKind> fault = a.inject_fault.empty() ? std::nullopt : parse_op_kind(a.inject_fault);
    data::GeneratorConfig g;
    g.speakers = a.speakers;
    g.classes = a.classes;
    g.dims[0] = g.dims[1] = g.dims[2] = a.dim;
    g.train_conversations = 1;
    g.val_conversations = 0;
    g.test_conversations = 0;
    g.min_length = g.max_length = a.length;
    g.seed = a.seed;
    const data::SyntheticSplits splits = data::generate_synthetic(g);
    const data::MaskSet masks = data::apply_missing(splits.train, a.eta, mask_seed(a.seed, 0));
    const model::GCNetConfig config =
        model::make_config(splits.train.manifest, a.latent, a.window, 0.0, model::Variant::full);
    ad::ParamSet params = model::init_params(config, derive_seed(a.seed, "init", 0));
    const data::ConversationSlot slot = data::make_slot(splits.train.conversations[0], masks.masks[0]);
    const graph::TypedGraph graph = model::slot_graph(slot, config);
    const ad::LossBuilder loss = [&](ad::Tape& tape, ad::ParamSet& p) {
        Rng unused(0);
        const model::ForwardOutput f = model::forward(tape, slot, graph, config, p, false, unused);
        const ad::Var cls = training::classification_loss(f.logits, slot.labels, slot.validity);
        const ad::Var rec = training::reconstruction_loss(f.reconstructions, slot.features, slot.lambda, slot.validity);
        return training::joint_loss(cls, rec, config.variant);
    };

    struct FaultGuard {
        explicit FaultGuard(std::optional<ad::OpKind> k) { ad::debug::flip_backward_sign(k); }
        ~FaultGuard() { ad::debug::flip_backward_sign(std::nullopt); }
    } guard(fault);
    const ad::GradCheckReport report = ad::grad_check(loss, params, a.eps, a.tol);

    for (const auto& p : report.params)
        out << std::left << std::setw(28) << p.name << " max_rel_error " << eval::format_number(p.max_rel_error)
            << " at " << p.worst_index << " (analytic " << eval::format_number(p.analytic) << ", numeric "
            << eval::format_number(p.numeric) << ")\n";
    if (report.passed) {
        out << "PASS max_rel_error " << eval::format_number(report.max_rel_error) << " <= "
            << eval::format_number(a.tol) << '\n';
        return 0;
    }
    err << "FAIL: parameter '" << report.worst_param << "' index " << report.worst_index << " has relative error "
        << eval::format_number(report.max_rel_error) << " > " << eval::format_number(a.tol) << '\n';
    return 1;
}

} // namespace

data::GeneratorConfig parse_generator_config(std::istream& in) {
    data::GeneratorConfig c;
    const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
        {"speakers", [&](auto& k, auto& v) { c.speakers = parse_value<std::size_t>(k, v); }},
        {"classes", [&](auto& k, auto& v) { c.classes = parse_value<std::size_t>(k, v); }},
        {"dim_a", [&](auto& k, auto& v) { c.dims[0] = parse_value<std::size_t>(k, v); }},
        {"dim_l", [&](auto& k, auto& v) { c.dims[1] = parse_value<std::size_t>(k, v); }},
        {"dim_v", [&](auto& k, auto& v) { c.dims[2] = parse_value<std::size_t>(k, v); }},
        {"train", [&](auto& k, auto& v) { c.train_conversations = parse_value<std::size_t>(k, v); }},
        {"val", [&](auto& k, auto& v) { c.val_conversations = parse_value<std::size_t>(k, v); }},
        {"test", [&](auto& k, auto& v) { c.test_conversations = parse_value<std::size_t>(k, v); }},
        {"min_length", [&](auto& k, auto& v) { c.min_length = parse_value<std::size_t>(k, v); }},
        {"max_length", [&](auto& k, auto& v) { c.max_length = parse_value<std::size_t>(k, v); }},
        {"p_stay", [&](auto& k, auto& v) { c.p_stay = parse_value<double>(k, v); }},
        {"speaker_bias", [&](auto& k, auto& v) { c.speaker_bias = parse_value<double>(k, v); }},
        {"shared_weight", [&](auto& k, auto& v) { c.shared_weight = parse_value<double>(k, v); }},
        {"noise", [&](auto& k, auto& v) { c.noise = parse_value<double>(k, v); }},
        {"class_scale", [&](auto& k, auto& v) { c.class_scale = parse_value<double>(k, v); }},
        {"seed", [&](auto& k, auto& v) { c.seed = parse_value<std::uint64_t>(k, v); }},
    };
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw std::invalid_argument("config key '" + key + "' is not recognized");
        it->second(key, value);
    }
    c.validate();
    return c;
}

fs::path dataset_path(const fs::path& dir, std::string_view split) { return dir / (std::string(split) + ".jsonl"); }

fs::path mask_path(const fs::path& dir, std::string_view split) { return dir / (std::string(split) + ".mask.jsonl"); }

std::uint64_t mask_seed(std::uint64_t seed, std::size_t split) { return derive_seed(seed, "mask", split); }

std::vector<double> parse_eta_list(const std::string& text) {
    auto number = [&](const std::string& s) {
        const std::string t = trim(s);
        double v = 0.0;
        const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
            throw std::invalid_argument("cannot parse missing rate '" + t + "'");
        return v;
    };
    std::vector<double> out;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const double lo = number(text.substr(0, dots));
        const double hi = number(text.substr(dots + 2));
        if (hi < lo) throw std::invalid_argument("missing-rate range " + text + " is empty");
        const auto steps = static_cast<long>(std::floor((hi - lo) * 10.0 + 1e-9));
        for (long k = 0; k <= steps; ++k) out.push_back(std::round((lo + 0.1 * static_cast<double>(k)) * 1e10) / 1e10);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(number(item));
    if (out.empty()) throw std::invalid_argument("empty missing-rate list");
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"GCNet: graph completion network for incomplete multimodal conversations", "gcnet"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic train/val/test splits");
    gen_cmd->add_option("--config", gen.config, "key = value generator config (defaults if omitted)");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();

    MaskArgs mk;
    auto* mask_cmd = app.add_subcommand("mask", "sample availability masks for every split");
    mask_cmd->add_option("--data", mk.data, "dataset directory")->required();
    mask_cmd->add_option("--eta", mk.eta, "missing rate")->required();
    mask_cmd->add_option("--seed", mk.seed)->capture_default_str();
    mask_cmd->add_option("--out", mk.out, "mask directory")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train a model and keep the best validation checkpoint");
    train_cmd->add_option("--data", tr.data, "dataset directory")->required();
    train_cmd->add_option("--masks", tr.masks, "mask directory")->required();
    train_cmd->add_option("--variant", tr.variant, "full, no-sgnn, no-tgnn, coupled, no-rec, lower-bound")
        ->capture_default_str();
    train_cmd->add_option("--seed", tr.seed)->capture_default_str();
    train_cmd->add_option("--out", tr.out, "output directory")->required();
    tr.options.add_to(*train_cmd);

    EvalArgs ev;
    auto add_eval_options = [&ev](CLI::App* cmd, const char* out_help) {
        cmd->add_option("--checkpoint", ev.checkpoint)->required();
        cmd->add_option("--data", ev.data, "dataset directory")->required();
        cmd->add_option("--masks", ev.masks, "mask directory")->required();
        cmd->add_option("--split", ev.split, "train, val or test")->capture_default_str();
        cmd->add_option("--out", ev.out, out_help)->required();
    };
    auto* eval_cmd = app.add_subcommand("eval", "metrics and predictions for one split");
    add_eval_options(eval_cmd, "output directory");
    auto* impute_cmd = app.add_subcommand("impute", "write the split with missing blocks reconstructed");
    add_eval_options(impute_cmd, "output directory");
    auto* embed_cmd = app.add_subcommand("export-embeddings", "write fused utterance states as CSV");
    add_eval_options(embed_cmd, "output CSV file");

    AblateArgs ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate a variant x missing-rate x seed grid");
    ablate_cmd->add_option("--data", ab.data, "dataset directory")->required();
    ablate_cmd->add_option("--etas", ab.etas, "comma list or lo..hi in steps of 0.1")->capture_default_str();
    ablate_cmd->add_option("--seeds", ab.seeds)->delimiter(',')->capture_default_str();
    ablate_cmd->add_option("--variants", ab.variants)->delimiter(',')->capture_default_str();
    ablate_cmd->add_option("--out", ab.out, "output directory")->required();
    ab.options.add_to(*ablate_cmd);

    GradcheckArgs gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the joint loss gradient");
    gc_cmd->add_option("--D", gc.latent)->capture_default_str();
    gc_cmd->add_option("--w", gc.window)->capture_default_str();
    gc_cmd->add_option("--L", gc.length)->capture_default_str();
    gc_cmd->add_option("--S", gc.speakers)->capture_default_str();
    gc_cmd->add_option("--c", gc.classes)->capture_default_str();
    gc_cmd->add_option("--dm", gc.dim, "width of every modality")->capture_default_str();
    gc_cmd->add_option("--eta", gc.eta)->capture_default_str();
    gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
    gc_cmd->add_option("--eps", gc.eps)->capture_default_str();
    gc_cmd->add_option("--tol", gc.tol)->capture_default_str();
    gc_cmd->add_option("--inject-fault", gc.inject_fault)->group("");

    std::vector<const char*> argv{"gcnet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (gen_cmd->parsed()) return gen_data(gen, out);
        if (mask_cmd->parsed()) return mask(mk, out);
        if (train_cmd->parsed()) return train(tr, out, err);
        if (eval_cmd->parsed()) return evaluate(ev, out);
        if (impute_cmd->parsed()) return impute(ev, out);
        if (embed_cmd->parsed()) return export_embeddings(ev, out);
        if (ablate_cmd->parsed()) return ablate(ab, out, err);
        if (gc_cmd->parsed()) return gradcheck(gc, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace gcnet::cli
