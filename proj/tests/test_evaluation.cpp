#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "support.hpp"

#include "gcnet/evaluation/evaluate.hpp"
#include "gcnet/evaluation/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace gcnet;
using namespace gcnet::eval;

namespace {

struct Trained {
    model::GCNetConfig config;
    ad::ParamSet params;
    data::Dataset train, test;
    data::MaskSet train_masks, test_masks;
};

Trained untrained_setup(double eta) {
    data::GeneratorConfig g;
    g.classes = 3;
    g.dims[0] = g.dims[1] = g.dims[2] = 4;
    g.train_conversations = 6;
    g.val_conversations = 0;
    g.test_conversations = 5;
    g.min_length = 3;
    g.max_length = 8;
    g.seed = 4;
    const auto s = data::generate_synthetic(g);
    Trained t;
    t.config = model::make_config(s.train.manifest, 8, 2, 0.5, model::Variant::full);
    t.params = model::init_params(t.config, 1);
    t.train = s.train;
    t.test = s.test;
    t.train_masks = data::apply_missing(s.train, eta, 1);
    t.test_masks = data::apply_missing(s.test, eta, 2);
    return t;
}

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

std::size_t columns(const std::string& line) { return 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')); }

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

} // namespace

TEST_SUITE("weighted f1") {
    TEST_CASE("twenty-case table") {
        CHECK(test::kWafTable.size() == 20);
        for (const auto& c : test::kWafTable) {
            const auto m = weighted_f1(c.labels, c.predictions, c.classes);
            INFO("expected " << c.expected << " got " << m.waf);
            CHECK(std::abs(m.waf - c.expected) <= 1e-12);
        }
    }

    TEST_CASE("worked example per class") {
        const std::vector<int> y{0, 0, 1, 1}, p{0, 1, 1, 1};
        const auto m = weighted_f1(y, p);
        CHECK(std::abs(m.f1[0] - 2.0 / 3.0) < 1e-15);
        CHECK(std::abs(m.f1[1] - 0.8) < 1e-15);
        CHECK(m.accuracy == 0.75);
        CHECK(m.support == std::vector<std::size_t>{2, 2});
    }

    TEST_CASE("absent class has zero weight") {
        const std::vector<int> y{0, 1, 1}, p{0, 1, 0};
        CHECK(std::abs(weighted_f1(y, p, 2).waf - weighted_f1(y, p, 5).waf) < 1e-15);
        CHECK(weighted_f1(y, p, 5).f1[4] == 0.0);
    }

    TEST_CASE("errors") {
        const std::vector<int> a{0, 1}, b{0}, empty, bad{0, 3};
        CHECK_THROWS_AS(weighted_f1(a, b, 2), std::invalid_argument);
        CHECK_THROWS_AS(weighted_f1(empty, empty, 2), std::invalid_argument);
        CHECK_THROWS_AS(weighted_f1(bad, a, 2), std::invalid_argument);
    }

    TEST_CASE("argmax ties go to the lowest index") {
        const std::vector<double> row{0.2, 0.4, 0.4};
        CHECK(argmax(row) == 1);
        const std::vector<double> flat{0.25, 0.25, 0.25, 0.25};
        CHECK(argmax(flat) == 0);
    }

    TEST_CASE("property: bounds, weighting, permutation invariance, perfect classifier") {
        Rng rng(10);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t c = 1 + rng.below(6), n = 1 + rng.below(40);
            std::vector<int> y(n), p(n);
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = static_cast<int>(rng.below(c));
                p[i] = rng.bernoulli(0.5) ? y[i] : static_cast<int>(rng.below(c));
            }
            const auto m = weighted_f1(y, p, c);
            CHECK_UNARY(m.waf >= 0.0);
            CHECK_UNARY(m.waf <= 1.0);
            double weighted = 0.0;
            for (std::size_t k = 0; k < c; ++k) weighted += static_cast<double>(m.support[k]) / n * m.f1[k];
            CHECK(std::abs(weighted - m.waf) <= 1e-12);

            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
            std::vector<int> ys(n), ps(n);
            for (std::size_t i = 0; i < n; ++i) {
                ys[i] = y[order[i]];
                ps[i] = p[order[i]];
            }
            CHECK(std::abs(weighted_f1(ys, ps, c).waf - m.waf) <= 1e-12);
            CHECK(weighted_f1(y, y, c).waf == 1.0);

        }
    }
}

TEST_SUITE("imputation error") {
    TEST_CASE("examples") {
        ImputationError err(1);
        const Tensor recon = Tensor::from_rows({{2.0, 1.0}, {9.0, 9.0}});
        const Tensor target = Tensor::from_rows({{1.0, 2.0}, {0.0, 0.0}});
        const std::vector<std::uint8_t> lambda{0, 1};
        const std::vector<double> valid{1.0, 1.0};
        err.add(0, recon, target, lambda, valid);
        REQUIRE(err.mse(0).has_value());
        CHECK(*err.mse(0) == 1.0);

        ImputationError none(2);
        const std::vector<std::uint8_t> all{1, 1};
        none.add(0, recon, target, all, valid);
        CHECK_FALSE(none.mse(0).has_value());
        CHECK_FALSE(none.mse(1).has_value());

        ImputationError padded(1);
        const std::vector<double> first{1.0, 0.0};
        const std::vector<std::uint8_t> missing{0, 0};
        padded.add(0, recon, target, missing, first);
        CHECK(*padded.mse(0) == 1.0);
    }

    TEST_CASE("property: observed positions never matter") {
        Rng rng(14);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(5);
            const Tensor recon = test::random_matrix(rng, n, d), target = test::random_matrix(rng, n, d);
            std::vector<std::uint8_t> lambda(n);
            for (auto& b : lambda) b = rng.bernoulli(0.5);
            const std::vector<double> valid(n, 1.0);
            Tensor other = recon;
            for (std::size_t i = 0; i < n; ++i)
                if (lambda[i])
                    for (auto& v : other.row(i)) v = rng.uniform(-100, 100);
            ImputationError a(1), b(1);
            a.add(0, recon, target, lambda, valid);
            b.add(0, other, target, lambda, valid);
            CHECK(a.mse(0) == b.mse(0));
        }
    }
}

TEST_SUITE("mean imputer") {
    TEST_CASE("constant training data fills the constant") {
        data::Dataset ds = test::small_dataset(1, 3, 2, 4);
        for (auto& c : ds.conversations)
            for (auto& f : c.features) f.fill(2.5);
        const auto masks = data::apply_missing(ds, 0.3, 1);
        const MeanImputer imp = MeanImputer::fit(ds, masks);
        for (const auto& mean : imp.means())
            for (double v : mean) CHECK(v == 2.5);

        // Test MSE is the mean squared deviation from the fill at missing positions.
        data::Dataset test_set = test::small_dataset(2, 2, 2, 4);
        const auto test_masks = data::apply_missing(test_set, 0.5, 3);
        const auto mse = imp.mse(test_set, test_masks);
        for (std::size_t m = 0; m < 3; ++m) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t k = 0; k < test_set.conversations.size(); ++k) {
                const auto& c = test_set.conversations[k];
                for (std::size_t i = 0; i < c.length(); ++i) {
                    if (test_masks.masks[k].available(i, m)) continue;
                    for (double v : c.features[m].row(i)) {
                        sum += (v - 2.5) * (v - 2.5);
                        ++count;
                    }
                }
            }
            if (count == 0) {
                CHECK_FALSE(mse[m].has_value());
            } else {
                REQUIRE(mse[m].has_value());
                CHECK(std::abs(*mse[m] - sum / static_cast<double>(count)) < 1e-12);
            }
        }
    }

    TEST_CASE("means are taken over observed rows only") {
        data::Dataset ds = test::small_dataset(3, 1, 2, 2);
        auto& c = ds.conversations[0];
        for (auto& f : c.features) {
            for (auto& v : f.row(0)) v = 1.0;
            for (auto& v : f.row(1)) v = 100.0;
        }
        data::MaskSet masks = data::full_masks(ds);
        masks.masks[0].bits[0][1] = 0;
        const MeanImputer imp = MeanImputer::fit(ds, masks);
        CHECK(imp.means()[0][0] == 1.0);
        CHECK(imp.means()[1][0] == 50.5);
    }

    TEST_CASE("a modality with no observed rows is an error") {
        data::Dataset ds = test::small_dataset(4, 1, 3, 3);
        data::MaskSet masks = data::full_masks(ds);
        for (auto& b : masks.masks[0].bits[2]) b = 0;
        CHECK_THROWS_AS(MeanImputer::fit(ds, masks), std::invalid_argument);
    }

    TEST_CASE("default benchmark at eta 0.3 has positive baseline MSE") {
        const auto s = data::generate_synthetic(data::GeneratorConfig{});
        const auto imp = MeanImputer::fit(s.train, data::apply_missing(s.train, 0.3, 1));
        for (const auto& v : imp.mse(s.test, data::apply_missing(s.test, 0.3, 2))) {
            REQUIRE(v.has_value());
            CHECK(*v > 0.0);
        }
    }
}

TEST_SUITE("evaluate") {
    TEST_CASE("deterministic, batch independent, consistent with metrics") {
        const Trained t = untrained_setup(0.4);
        const EvalResult a = evaluate(t.config, t.params, t.test, t.test_masks);
        const EvalResult b = evaluate(t.config, t.params, t.test, t.test_masks);
        CHECK(a.classification.waf == b.classification.waf);
        CHECK(a.imputation_mse == b.imputation_mse);
        REQUIRE(a.conversations.size() == t.test.conversations.size());

        std::vector<int> labels, preds;
        ConfusionMatrix summed(t.config.classes);
        ImputationError err(3);
        for (std::size_t k = 0; k < a.conversations.size(); ++k) {
            const auto& r = a.conversations[k];
            CHECK(r.embeddings.shape() == Shape{t.test.conversations[k].length(), 8});
            for (std::size_t i = 0; i < r.labels.size(); ++i) {
                CHECK(r.predictions[i] == argmax(r.probs.row(i)));
                summed.add(r.labels[i], r.predictions[i]);
                labels.push_back(r.labels[i]);
                preds.push_back(r.predictions[i]);
            }
            // Evaluating one conversation at a time gives the same pieces.
            data::Dataset single{t.test.manifest, {t.test.conversations[k]}};
            data::MaskSet single_masks = t.test_masks;
            single_masks.masks = {t.test_masks.masks[k]};
            const EvalResult one = evaluate(t.config, t.params, single, single_masks);
            CHECK(one.conversations[0].probs == r.probs);
            const std::vector<double> valid(r.labels.size(), 1.0);
            for (std::size_t m = 0; m < 3; ++m)
                err.add(m, r.reconstructions[m], t.test.conversations[k].features[m], t.test_masks.masks[k].bits[m],
                        valid);
        }
        CHECK(std::abs(weighted_f1(labels, preds, 3).waf - a.classification.waf) < 1e-15);
        CHECK(classification_metrics(summed).waf == a.classification.waf);
        CHECK(err.mse() == a.imputation_mse);
    }

    TEST_CASE("eta = 0 reports no imputation MSE") {
        const Trained t = untrained_setup(0.0);
        for (const auto& v : evaluate(t.config, t.params, t.test, t.test_masks).imputation_mse) CHECK_FALSE(v.has_value());
    }

    TEST_CASE("manifest mismatch is rejected") {
        Trained t = untrained_setup(0.3);
        t.config.classes = 4;
        CHECK_THROWS_AS(evaluate(t.config, model::init_params(t.config, 1), t.test, t.test_masks), std::invalid_argument);
    }

    TEST_CASE("imputed dataset replaces exactly the missing blocks") {
        const Trained t = untrained_setup(0.5);
        const EvalResult r = evaluate(t.config, t.params, t.test, t.test_masks);
        const data::Dataset imputed = impute_dataset(r, t.test, t.test_masks);
        // MSE recomputed from the imputed file agrees with the reported value.
        ImputationError from_file(3);
        for (std::size_t k = 0; k < imputed.conversations.size(); ++k) {
            const auto& mask = t.test_masks.masks[k];
            const std::vector<double> valid(mask.length(), 1.0);
            for (std::size_t m = 0; m < 3; ++m) {
                for (std::size_t i = 0; i < mask.length(); ++i) {
                    const auto got = imputed.conversations[k].features[m].row(i);
                    const auto expected = mask.available(i, m) ? t.test.conversations[k].features[m].row(i)
                                                               : r.conversations[k].reconstructions[m].row(i);
                    CHECK(std::equal(got.begin(), got.end(), expected.begin()));
                }
                from_file.add(m, imputed.conversations[k].features[m], t.test.conversations[k].features[m], mask.bits[m],
                              valid);
            }
        }
        CHECK(from_file.mse() == r.imputation_mse);
    }
}

TEST_SUITE("csv output") {
    TEST_CASE("predictions and embeddings layout") {
        const Trained t = untrained_setup(0.3);
        const EvalResult r = evaluate(t.config, t.params, t.test, t.test_masks);
        std::ostringstream pred, emb, emb2;
        write_predictions_csv(r, pred);
        write_embeddings_csv(r, emb);
        write_embeddings_csv(evaluate(t.config, t.params, t.test, t.test_masks), emb2);
        CHECK(first_line(pred.str()) == "conversation,index,label,predicted,p_0,p_1,p_2");
        CHECK(lines(pred.str()) == 1 + t.test.utterance_count());
        CHECK(first_line(emb.str()).rfind("conversation,index,label,q_0,", 0) == 0);
        CHECK(lines(emb.str()) == 1 + t.test.utterance_count());
        std::istringstream in(emb.str());
        std::string line;
        while (std::getline(in, line)) CHECK(columns(line) == 3 + 8);
        CHECK(emb.str() == emb2.str());
    }

    TEST_CASE("metrics layout with NA markers") {
        ClassificationMetrics cm = weighted_f1(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2);
        MetricsRow ok{"run", "full", 3, 0.3, cm, {0.5, std::nullopt, 1.25}, {0.75, std::nullopt, 2.0}, ""};
        MetricsRow agg{"run/mean", "full", std::nullopt, 0.3, cm, {0.5, 0.25, 1.0}, {}, ""};
        MetricsRow failed{"bad", "lower_bound", 4, 0.7, {}, {}, {}, "lower-bound training set is empty"};
        const MetricsRow rows[] = {ok, agg, failed};
        std::ostringstream out;
        write_metrics_csv(rows, 2, 3, out);
        std::istringstream in(out.str());
        std::string header, a, b, c;
        std::getline(in, header);
        std::getline(in, a);
        std::getline(in, b);
        std::getline(in, c);
        CHECK(header ==
              "run_id,seed,eta,variant,waf,accuracy,f1_0,f1_1,mse_a,mse_l,mse_v,mean_mse_a,mean_mse_l,mean_mse_v,error");
        CHECK(a == "run,3,0.3,full,1,1,1,1,0.5,NA,1.25,0.75,NA,2,");
        CHECK(b.rfind("run/mean,NA,0.3,full,", 0) == 0);
        CHECK(c == "bad,4,0.7,lower_bound,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,lower-bound training set is empty");

        MetricsRow clean{"r", "full", 1, 0.0, cm, {std::nullopt, std::nullopt, std::nullopt}, {}, ""};
        const MetricsRow only[] = {clean};
        std::ostringstream no_mse;
        write_metrics_csv(only, 2, 3, no_mse);
        CHECK(first_line(no_mse.str()) == "run_id,seed,eta,variant,waf,accuracy,f1_0,f1_1,error");
    }

    TEST_CASE("number formatting round trips") {
        for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125}) CHECK(std::stod(format_number(v)) == v);
        CHECK(format_number(0.3) == "0.3");
    }
}
