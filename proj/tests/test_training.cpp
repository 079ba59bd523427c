#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "gcnet/training/adam.hpp"
#include "gcnet/training/losses.hpp"
#include "gcnet/training/trainer.hpp"

#include <cmath>
#include <sstream>

using namespace gcnet;
using namespace gcnet::training;
using gcnet::test::random_matrix;

namespace {

model::GCNetConfig tiny_config(const data::Manifest& manifest, std::size_t latent = 8, std::size_t window = 1,
                               model::Variant variant = model::Variant::full) {
    return model::make_config(manifest, latent, window, 0.0, variant);
}

// Joint loss of one conversation, the quantity the trainer differentiates.
ad::Var conversation_loss(ad::Tape& tape, const data::ConversationSlot& slot, const graph::TypedGraph& graph,
                          const model::GCNetConfig& config, ad::ParamSet& params) {
    Rng unused(0);
    const auto f = model::forward(tape, slot, graph, config, params, false, unused);
    const ad::Var cls = classification_loss(f.logits, slot.labels, slot.validity);
    const ad::Var rec = reconstruction_loss(f.reconstructions, slot.features, slot.lambda, slot.validity);
    return joint_loss(cls, rec, config.variant);
}

double loss_value(const data::ConversationSlot& slot, const graph::TypedGraph& graph, const model::GCNetConfig& config,
                  ad::ParamSet& params) {
    ad::Tape tape;
    return conversation_loss(tape, slot, graph, config, params).value().item();
}

struct Splits {
    data::Dataset train, val;
    data::MaskSet train_masks, val_masks;
};

Splits make_splits(std::uint64_t seed, double eta, std::size_t n_train = 6, std::size_t n_val = 3) {
    data::GeneratorConfig g;
    g.classes = 3;
    g.dims[0] = g.dims[1] = g.dims[2] = 4;
    g.train_conversations = n_train;
    g.val_conversations = n_val;
    g.test_conversations = 0;
    g.min_length = 3;
    g.max_length = 7;
    g.seed = seed;
    auto s = data::generate_synthetic(g);
    Splits out{s.train, s.val, data::apply_missing(s.train, eta, seed + 1), data::apply_missing(s.val, eta, seed + 2)};
    return out;
}

} // namespace

TEST_SUITE("losses") {
    TEST_CASE("classification examples") {
        const std::vector<int> labels{0, 1};
        const std::vector<double> valid{1.0, 1.0};
        const Tensor probs = Tensor::from_rows({{0.5, 0.5}, {0.75, 0.25}});
        CHECK(std::abs(classification_loss(probs, labels, valid) - (std::log(2.0) + std::log(4.0)) / 2) < 1e-15);
        const Tensor onehot = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
        CHECK(classification_loss(onehot, labels, valid) == 0.0);

        ad::Tape tape;
        const auto uniform = tape.constant(Tensor({3, 4}, 0.7));
        const std::vector<int> l3{0, 3, 2};
        const std::vector<double> v3{1, 1, 1};
        CHECK(std::abs(classification_loss(uniform, l3, v3).value().item() - std::log(4.0)) < 1e-15);

        // The logit path agrees with the probability path.
        const auto logits = tape.constant(Tensor::from_rows({{0.0, 0.0}, {std::log(3.0), 0.0}}));
        CHECK(std::abs(classification_loss(logits, labels, valid).value().item() - (std::log(2.0) + std::log(4.0)) / 2) <
              1e-15);

        const std::vector<double> none{0.0, 0.0};
        CHECK_THROWS_AS(classification_loss(logits, labels, none), std::invalid_argument);
        const std::vector<double> first{1.0, 0.0};
        CHECK(std::abs(classification_loss(logits, labels, first).value().item() - std::log(2.0)) < 1e-15);
    }

    TEST_CASE("reconstruction examples") {
        ad::Tape tape;
        const std::vector<Tensor> targets{Tensor::from_rows({{1.0, 2.0}})};
        const std::vector<ad::Var> recon{tape.constant(Tensor::from_rows({{2.0, 1.0}}))};
        const std::vector<double> valid{1.0};
        CHECK(reconstruction_loss(recon, targets, {{0}}, valid).value().item() == 1.0);
        CHECK(reconstruction_loss(recon, targets, {{1}}, valid).value().item() == 0.0);
        const std::vector<ad::Var> exact{tape.constant(targets[0])};
        CHECK(reconstruction_loss(exact, targets, {{0}}, valid).value().item() == 0.0);
    }

    TEST_CASE("joint examples") {
        CHECK(joint_loss(1.0, 0.5, model::Variant::full) == 1.5);
        CHECK(joint_loss(1.0, 0.5, model::Variant::no_reconstruction) == 1.0);
    }

    TEST_CASE("property: reconstruction loss is exactly zero at eta = 0") {
        Rng rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            const data::Dataset ds =
                test::small_dataset(rng.next_u64(), 1, 1, 1 + rng.below(10), 1 + rng.below(3), 2 + rng.below(3),
                                    1 + rng.below(6));
            const auto config = tiny_config(ds.manifest, 4 + 2 * rng.below(4), 1 + rng.below(3));
            ad::ParamSet params = model::init_params(config, rng.next_u64());
            const auto masks = data::apply_missing(ds, 0.0, rng.next_u64());
            const auto slot = data::make_slot(ds.conversations[0], masks.masks[0]);
            Rng unused(0);
            ad::Tape tape;
            const auto f = model::forward(tape, slot, model::slot_graph(slot, config), config, params, false, unused);
            const auto rec = reconstruction_loss(f.reconstructions, slot.features, slot.lambda, slot.validity);
            CHECK(rec.value().item() == 0.0);
            const auto cls = classification_loss(f.logits, slot.labels, slot.validity);
            CHECK(joint_loss(cls, rec, config.variant).value().item() == cls.value().item());
        }
    }
}

TEST_SUITE("adam") {
    TEST_CASE("zero gradient without decay is a fixed point") {
        ad::ParamSet params;
        params.add("w", Tensor::from_rows({{0.3, -2.0}}));
        const Tensor before = params.at("w").value;
        AdamState state = make_adam_state(params);
        for (int i = 0; i < 5; ++i) adam_step(params, state, AdamConfig{1e-3, 0.0});
        CHECK(params.at("w").value == before);
        CHECK(state.step == 5);
    }

    TEST_CASE("first step moves by about the learning rate") {
        ad::ParamSet params;
        auto& p = params.add("w", Tensor::scalar(0.0));
        p.grad = Tensor::scalar(1.0);
        AdamState state = make_adam_state(params);
        adam_step(params, state, AdamConfig{1e-3, 0.0});
        CHECK(std::abs(p.value.item() - (-1e-3 / (1.0 + 1e-8))) < 1e-18);
    }

    TEST_CASE("weight decay pulls toward zero") {
        ad::ParamSet params;
        auto& p = params.add("w", Tensor::scalar(0.5));
        AdamState state = make_adam_state(params);
        double prev = p.value.item();
        for (int i = 0; i < 3; ++i) {
            adam_step(params, state, AdamConfig{1e-3, 1e-2});
            CHECK(p.value.item() < prev);
            prev = p.value.item();
        }
    }

    // Oracle: the update written out by hand over several steps.
    TEST_CASE("matches a hand-rolled reference over many steps") {
        Rng rng(4);
        ad::ParamSet params;
        auto& p = params.add("w", random_matrix(rng, 2, 3));
        AdamState state = make_adam_state(params);
        const AdamConfig cfg{2e-3, 1e-3};
        Tensor theta = p.value, m = Tensor::matrix(2, 3), v = Tensor::matrix(2, 3);
        for (int t = 1; t <= 10; ++t) {
            p.grad = random_matrix(rng, 2, 3);
            for (std::size_t k = 0; k < 6; ++k) {
                const double g = p.grad[k] + cfg.weight_decay * theta[k];
                m[k] = 0.9 * m[k] + 0.1 * g;
                v[k] = 0.999 * v[k] + 0.001 * g * g;
                const double mh = m[k] / (1 - std::pow(0.9, t)), vh = v[k] / (1 - std::pow(0.999, t));
                theta[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + 1e-8);
            }
            adam_step(params, state, cfg);
            CHECK(max_abs_diff(p.value, theta) < 1e-15);
        }
    }
}

TEST_SUITE("joint loss gradient") {
    struct Deviation {
        double abs = 0.0;  // over every coordinate
        double rel = 0.0;  // over coordinates with |analytic| + |numeric| > 1e-6
    };

    // Central differences at eps=1e-5 lose about 1e-11 to roundoff, which
    // dominates the relative error of coordinates near 1e-9. A fourth-order
    // stencil at h=1e-3 has truncation error far below that, so it serves as
    // the oracle for the analytic gradient.
    Deviation fourth_order_deviation(const data::ConversationSlot& slot, const model::GCNetConfig& config,
                                     ad::ParamSet& params) {
        const auto graph = model::slot_graph(slot, config);
        params.zero_grad();
        {
            ad::Tape tape;
            tape.backward(conversation_loss(tape, slot, graph, config, params));
        }
        const double h = 1e-3;
        const double offsets[4] = {-2 * h, -h, h, 2 * h};
        Deviation dev;
        for (auto& p : params) {
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double x = p.value[k];
                double f[4];
                for (int s = 0; s < 4; ++s) {
                    p.value[k] = x + offsets[s];
                    f[s] = loss_value(slot, graph, config, params);
                }
                p.value[k] = x;
                const double numeric = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h);
                const double analytic = p.grad[k];
                dev.abs = std::max(dev.abs, std::abs(analytic - numeric));
                if (std::abs(analytic) + std::abs(numeric) > 1e-6)
                    dev.rel = std::max(dev.rel, ad::relative_error(analytic, numeric));
            }
        }
        return dev;
    }

    // Same instance family as the gradcheck gate: L=4, M=3, d_m=5, D=8, w=1, S=2, c=3.
    TEST_CASE("analytic gradient matches a fourth-order finite-difference oracle") {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            data::GeneratorConfig g;
            g.classes = 3;
            g.dims[0] = g.dims[1] = g.dims[2] = 5;
            g.train_conversations = 1;
            g.val_conversations = g.test_conversations = 0;
            g.min_length = g.max_length = 4;
            g.seed = seed;
            const auto ds = data::generate_synthetic(g).train;
            const auto masks = data::apply_missing(ds, 0.5, derive_seed(seed, "mask", 0));
            const auto config = tiny_config(ds.manifest);
            ad::ParamSet params = model::init_params(config, derive_seed(seed, "init", 0));
            const auto dev = fourth_order_deviation(data::make_slot(ds.conversations[0], masks.masks[0]), config, params);
            INFO("seed " << seed << " worst abs " << dev.abs << " worst rel " << dev.rel);
            CHECK(dev.abs < 1e-8);
            CHECK(dev.rel < 1e-5);
        }
    }

    TEST_CASE("every variant matches the fourth-order oracle") {
        const data::Dataset ds = test::small_dataset(7, 1, 3, 3);
        const auto masks = data::apply_missing(ds, 0.4, 3);
        const auto slot = data::make_slot(ds.conversations[0], masks.masks[0]);
        for (auto v : {model::Variant::full, model::Variant::no_sgnn, model::Variant::no_tgnn, model::Variant::coupled,
                       model::Variant::no_reconstruction}) {
            const auto config = tiny_config(ds.manifest, 4, 1, v);
            ad::ParamSet params = model::init_params(config, 5);
            const auto dev = fourth_order_deviation(slot, config, params);
            INFO(model::to_string(v) << " worst abs " << dev.abs << " worst rel " << dev.rel);
            CHECK(dev.abs < 1e-8);
            CHECK(dev.rel < 1e-5);
        }
    }

    TEST_CASE("a flipped backward rule is caught by the oracle") {
        const data::Dataset ds = test::small_dataset(8, 1, 3, 3);
        const auto masks = data::apply_missing(ds, 0.4, 3);
        const auto slot = data::make_slot(ds.conversations[0], masks.masks[0]);
        const auto config = tiny_config(ds.manifest, 4, 1);
        ad::ParamSet params = model::init_params(config, 5);
        ad::debug::flip_backward_sign(ad::OpKind::lstm);
        const auto dev = fourth_order_deviation(slot, config, params);
        ad::debug::flip_backward_sign(std::nullopt);
        CHECK(dev.rel > 0.5);
    }
}

TEST_SUITE("trainer") {
    TEST_CASE("loss weights honour validity and lower-bound mode") {
        data::ConversationSlot slot;
        slot.validity = {1, 1, 1, 0};
        slot.lambda = {{1, 0, 1, 0}, {1, 1, 1, 0}, {1, 1, 0, 0}};
        CHECK(loss_weights(slot, false) == std::vector<double>{1, 1, 1, 0});
        CHECK(loss_weights(slot, true) == std::vector<double>{1, 0, 0, 0});
    }

    TEST_CASE("padding changes no loss or gradient") {
        Rng rng(12);
        for (int trial = 0; trial < 5; ++trial) {
            const data::Dataset ds = test::small_dataset(rng.next_u64(), 3, 2, 6);
            const auto masks = data::apply_missing(ds, 0.4, rng.next_u64());
            const auto config = tiny_config(ds.manifest);
            ad::ParamSet a = model::init_params(config, 3), b = a;
            const auto tight = data::pad_batch(ds.conversations, masks.masks);
            const auto loose = data::pad_batch(ds.conversations, masks.masks, tight.max_length + 1 + rng.below(4));
            a.zero_grad();
            b.zero_grad();
            const BatchLoss la = accumulate_gradients(config, a, tight, false, false, 0);
            const BatchLoss lb = accumulate_gradients(config, b, loose, false, false, 0);
            CHECK(std::abs(la.total - lb.total) <= 1e-12);
            CHECK(std::abs(la.cls - lb.cls) <= 1e-12);
            CHECK(std::abs(la.rec - lb.rec) <= 1e-12);
            auto pb = b.begin();
            for (auto pa = a.begin(); pa != a.end(); ++pa, ++pb) CHECK(max_abs_diff(pa->grad, pb->grad) <= 1e-12);
        }
    }

    TEST_CASE("batch loss is the mean of per-conversation losses") {
        const data::Dataset ds = test::small_dataset(9, 3, 2, 6);
        const auto masks = data::apply_missing(ds, 0.3, 4);
        const auto config = tiny_config(ds.manifest);
        ad::ParamSet params = model::init_params(config, 1);
        const auto batch = data::pad_batch(ds.conversations, masks.masks);
        const BatchLoss loss = accumulate_gradients(config, params, batch, false, false, 0);
        double expected = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const auto slot = data::make_slot(ds.conversations[k], masks.masks[k]);
            expected += loss_value(slot, model::slot_graph(slot, config), config, params) / 3.0;
        }
        CHECK(loss.conversations == 3);
        CHECK(std::abs(loss.total - expected) < 1e-12);
    }

    TEST_CASE("history length, determinism and CSV layout") {
        const Splits s = make_splits(3, 0.3);
        const auto config = tiny_config(s.train.manifest);
        TrainConfig tc;
        tc.epochs = 3;
        tc.batch_size = 4;
        tc.seed = 7;
        std::size_t callbacks = 0;
        const TrainResult a =
            train(config, s.train, s.train_masks, s.val, s.val_masks, tc, [&](const EpochRecord&) { ++callbacks; });
        const TrainResult b = train(config, s.train, s.train_masks, s.val, s.val_masks, tc);
        CHECK(callbacks == 3);
        CHECK(a.history.epochs.size() == 3);
        CHECK(a.history == b.history);
        CHECK(a.final_params == b.final_params);
        CHECK(a.best.params == b.best.params);
        CHECK(a.best.config.dropout == tc.dropout);
        for (const auto& r : a.history.epochs) {
            CHECK(std::abs(r.loss_total - (r.loss_cls + r.loss_rec)) < 1e-12);
            CHECK(r.realized_eta == data::realized_missing_rate(s.train_masks));
            CHECK(r.val_mse.has_value());
        }
        double best = -1.0;
        std::size_t best_epoch = 0;
        for (const auto& r : a.history.epochs)
            if (r.val_waf > best) {
                best = r.val_waf;
                best_epoch = r.epoch;
            }
        CHECK(a.best_epoch == best_epoch);

        std::ostringstream csv;
        a.history.write_csv(csv);
        const std::string text = csv.str();
        CHECK(text.rfind("epoch,loss_total,loss_cls,loss_rec,val_waf,val_mse,realized_eta\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 4);

        TrainConfig other = tc;
        other.seed = 8;
        CHECK_FALSE(train(config, s.train, s.train_masks, s.val, s.val_masks, other).history == a.history);
    }

    TEST_CASE("one epoch with one batch") {
        const Splits s = make_splits(4, 0.2, 2, 1);
        TrainConfig tc;
        tc.epochs = 1;
        tc.batch_size = 8;
        const auto r = train(tiny_config(s.train.manifest), s.train, s.train_masks, s.val, s.val_masks, tc);
        CHECK(r.history.epochs.size() == 1);
        CHECK(r.best_epoch == 1);
    }

    TEST_CASE("training lowers the loss") {
        const Splits s = make_splits(5, 0.3, 8, 2);
        TrainConfig tc;
        tc.epochs = 40;
        tc.dropout = 0.0;
        tc.learning_rate = 1e-2;
        const auto r = train(tiny_config(s.train.manifest, 16, 2), s.train, s.train_masks, s.val, s.val_masks, tc);
        CHECK(r.history.epochs.back().loss_total < 0.7 * r.history.epochs.front().loss_total);
    }

    TEST_CASE("lower-bound mode") {
        const Splits s = make_splits(6, 0.3);
        const auto config = tiny_config(s.train.manifest);
        TrainConfig tc;
        tc.epochs = 1;
        tc.lower_bound = true;
        CHECK_NOTHROW(train(config, s.train, s.train_masks, s.val, s.val_masks, tc));

        // At eta = 0.7 no utterance keeps all modalities.
        const auto empty = data::apply_missing(s.train, 0.7, 1);
        try {
            train(config, s.train, empty, s.val, s.val_masks, tc);
            FAIL("expected EmptyTrainingSetError");
        } catch (const EmptyTrainingSetError& e) {
            CHECK(std::string(e.what()).find("lower-bound") != std::string::npos);
        }
        tc.lower_bound = false;
        CHECK_NOTHROW(train(config, s.train, empty, s.val, s.val_masks, tc));
    }

    TEST_CASE("inconsistent inputs are rejected") {
        const Splits s = make_splits(7, 0.3);
        const auto config = tiny_config(s.train.manifest);
        TrainConfig tc;
        tc.epochs = 1;
        CHECK_THROWS_AS(train(config, s.train, s.val_masks, s.val, s.val_masks, tc), std::invalid_argument);
        TrainConfig bad = tc;
        bad.learning_rate = 0.0;
        CHECK_THROWS_AS(train(config, s.train, s.train_masks, s.val, s.val_masks, bad), std::invalid_argument);
        bad = tc;
        bad.epochs = 0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        data::Dataset empty_val{s.val.manifest, {}};
        CHECK_THROWS_AS(train(config, s.train, s.train_masks, empty_val, data::MaskSet{}, tc), std::invalid_argument);
    }
}
