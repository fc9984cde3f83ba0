#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "kuafu/classifiers.hpp"
#include "kuafu/corpus.hpp"
#include "kuafu/rng.hpp"

using namespace kuafu;

namespace {

LabeledSample sample(const std::string& id, std::vector<int> bits, Label label) {
    LabeledSample s;
    s.sample_id = id;
    s.vector = FeatureVector::from_bits(bits);
    s.label = label;
    return s;
}

// Two clusters separated by bit 0 (benign) and bit 1 (malicious).
Corpus separable_clusters(int per_class) {
    Corpus corpus;
    for (int i = 0; i < per_class; ++i) {
        corpus.push_back(sample("b" + std::to_string(i), {1, 0, i % 2}, Label::Benign));
        corpus.push_back(sample("m" + std::to_string(i), {0, 1, i % 2}, Label::Malicious));
    }
    return corpus;
}

double training_accuracy(const TrainedModel& model, const Corpus& corpus) {
    return evaluate(model, corpus).accuracy();
}

GeneratorSpec default_spec(std::uint64_t seed) {
    GeneratorSpec spec;
    spec.catalog = compact_catalog();
    spec.n_benign = 1000;
    spec.n_malicious = 1000;
    spec.seed = seed;
    return spec;
}

} // namespace

TEST_CASE("svm separates two clusters perfectly") {
    Corpus corpus = separable_clusters(20);
    TrainedModel model = train_linear_svm(corpus, SvmHyper{});
    CHECK(training_accuracy(model, corpus) == doctest::Approx(1.0));
}

TEST_CASE("svm on XOR cannot beat the best linear separator") {
    Corpus corpus{sample("a", {0, 0}, Label::Benign), sample("b", {1, 1}, Label::Benign),
                  sample("c", {0, 1}, Label::Malicious), sample("d", {1, 0}, Label::Malicious)};
    // oracle: exhaustive scan over integer-grid separators (w1, w2, b)
    double best = 0.0;
    for (int w1 = -3; w1 <= 3; ++w1) {
        for (int w2 = -3; w2 <= 3; ++w2) {
            for (int b2 = -6; b2 <= 6; ++b2) {
                double b = 0.5 * b2;
                int correct = 0;
                for (const auto& s : corpus) {
                    double score = w1 * (s.vector.get(0) ? 1 : 0) +
                                   w2 * (s.vector.get(1) ? 1 : 0) + b;
                    Label predicted = score > 0 ? Label::Malicious : Label::Benign;
                    correct += predicted == s.label;
                }
                best = std::max(best, correct / 4.0);
            }
        }
    }
    CHECK(best == doctest::Approx(0.75));
    TrainedModel model = train_linear_svm(corpus, SvmHyper{});
    CHECK(training_accuracy(model, corpus) <= best + 1e-12);
}

TEST_CASE("svm reaches 90% held-out accuracy on the default synthetic corpus") {
    GeneratorSpec spec = default_spec(2024);
    Corpus corpus = generate_corpus(spec);
    auto [train, test] = split_corpus(corpus, 0.2, 7);
    TrainedModel model = train_linear_svm(train, SvmHyper{});
    CHECK(evaluate(model, test).accuracy() >= 0.90);
}

TEST_CASE("svm objective of the averaged iterate is non-increasing over epochs") {
    GeneratorSpec spec = default_spec(31);
    spec.n_benign = 300;
    spec.n_malicious = 300;
    Corpus corpus = generate_corpus(spec);
    SvmHyper hyper;
    hyper.epochs = 60;
    hyper.record_objective = true;
    TrainedModel model = train_linear_svm(corpus, hyper);
    const auto& trace = std::get<LinearSvmModel>(model.data).objective_trace;
    REQUIRE(trace.size() == 60);
    for (std::size_t e = 1; e < trace.size(); ++e) {
        CHECK(trace[e] <= trace[e - 1] + 1e-9);
    }
}

TEST_CASE("svm rejects a single-class corpus") {
    Corpus corpus{sample("a", {1}, Label::Benign), sample("b", {0}, Label::Benign)};
    CHECK_THROWS_WITH_AS(train_linear_svm(corpus, SvmHyper{}),
                         "degenerate training set: needs both labels", ValidationError);
}

TEST_CASE("knn with k=1 memorizes its training set") {
    Corpus corpus = separable_clusters(6);
    TrainedModel model = train_knn(corpus, KnnHyper{1});
    CHECK(training_accuracy(model, corpus) == doctest::Approx(1.0));
}

TEST_CASE("knn rejects even k") {
    Corpus corpus = separable_clusters(4);
    CHECK_THROWS_AS(train_knn(corpus, KnnHyper{4}), ValidationError);
    CHECK_THROWS_AS(train_knn(corpus, KnnHyper{0}), ValidationError);
}

TEST_CASE("knn k=3 matches an exhaustive-distance oracle on hand-placed points") {
    Corpus corpus{sample("p0", {0, 0, 0, 0}, Label::Benign),
                  sample("p1", {1, 0, 0, 0}, Label::Benign),
                  sample("p2", {1, 1, 0, 0}, Label::Malicious),
                  sample("p3", {1, 1, 1, 0}, Label::Malicious),
                  sample("p4", {1, 1, 1, 1}, Label::Malicious)};
    TrainedModel model = train_knn(corpus, KnnHyper{3});

    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        FeatureVector q(4);
        for (int j = 0; j < 4; ++j) {
            if (rng.next_bernoulli(0.5)) q.set(static_cast<std::size_t>(j), true);
        }
        // oracle: full sort over (distance, id)
        std::vector<std::pair<std::size_t, std::string>> all;
        for (const auto& s : corpus) {
            all.emplace_back(hamming_distance(s.vector, q), s.sample_id);
        }
        std::sort(all.begin(), all.end());
        int malicious = 0;
        for (int i = 0; i < 3; ++i) {
            for (const auto& s : corpus) {
                if (s.sample_id == all[static_cast<std::size_t>(i)].second) {
                    malicious += s.label == Label::Malicious;
                }
            }
        }
        Label expected = malicious >= 2 ? Label::Malicious : Label::Benign;
        CHECK(predict(model, q) == expected);
    }
}

TEST_CASE("forest: one depth-1 tree separates the cluster corpus") {
    Corpus corpus = separable_clusters(10);
    ForestHyper hyper;
    hyper.n_trees = 1;
    hyper.max_depth = 1;
    hyper.features_per_split = 3; // all features visible to the single split
    TrainedModel model = train_forest(corpus, hyper);
    CHECK(training_accuracy(model, corpus) == doctest::Approx(1.0));
}

TEST_CASE("forest rejects zero trees") {
    Corpus corpus = separable_clusters(4);
    ForestHyper hyper;
    hyper.n_trees = 0;
    CHECK_THROWS_AS(train_forest(corpus, hyper), ValidationError);
}

TEST_CASE("decision score conventions") {
    SUBCASE("null svm scores zero and ties resolve benign") {
        TrainedModel model;
        model.family = ModelFamily::LinearSvm;
        model.dimension = 3;
        model.data = LinearSvmModel{{0.0, 0.0, 0.0}, 0.0, {}};
        FeatureVector x = FeatureVector::from_bits({1, 1, 1});
        CHECK(decision_score(model, x) == 0.0);
        CHECK(predict(model, x) == Label::Benign);
    }
    SUBCASE("unanimous malicious neighbors score +1") {
        Corpus corpus{sample("m0", {1, 0}, Label::Malicious),
                      sample("m1", {1, 1}, Label::Malicious),
                      sample("m2", {0, 1}, Label::Malicious),
                      sample("b0", {0, 0}, Label::Benign)};
        TrainedModel model = train_knn(corpus, KnnHyper{3});
        FeatureVector q = FeatureVector::from_bits({1, 1});
        CHECK(decision_score(model, q) == doctest::Approx(1.0));
    }
    SUBCASE("two stumps voting 1.0 and 0.0 average to score zero") {
        ForestModel forest;
        ForestTree t1;
        t1.nodes.push_back(ForestNode{-1, -1, -1, 1.0});
        ForestTree t2;
        t2.nodes.push_back(ForestNode{-1, -1, -1, 0.0});
        forest.trees = {t1, t2};
        TrainedModel model;
        model.family = ModelFamily::Forest;
        model.dimension = 2;
        model.data = forest;
        FeatureVector x(2);
        double expected = ((1.0 + 0.0) / 2.0 - 0.5) * 2.0; // hand average of leaf fractions
        CHECK(decision_score(model, x) == doctest::Approx(expected));
        CHECK(predict(model, x) == Label::Benign); // tie rule
    }
    SUBCASE("dimension mismatch is an error") {
        Corpus corpus = separable_clusters(3);
        TrainedModel model = train_knn(corpus, KnnHyper{1});
        FeatureVector wrong(7);
        CHECK_THROWS_AS(decision_score(model, wrong), ValidationError);
    }
}

TEST_CASE("predict is exactly the sign of the decision score for all families") {
    GeneratorSpec spec = default_spec(64);
    spec.n_benign = 120;
    spec.n_malicious = 120;
    Corpus corpus = generate_corpus(spec);
    SvmHyper svm_hyper;
    svm_hyper.epochs = 40;
    ForestHyper forest_hyper;
    forest_hyper.n_trees = 15;
    std::vector<TrainedModel> models;
    models.push_back(train_linear_svm(corpus, svm_hyper));
    models.push_back(train_knn(corpus, KnnHyper{5}));
    models.push_back(train_forest(corpus, forest_hyper));

    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        FeatureVector x(spec.catalog.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (rng.next_bernoulli(0.3)) x.set(j, true);
        }
        for (const auto& model : models) {
            double score = decision_score(model, x);
            Label expected = score > 0 ? Label::Malicious : Label::Benign;
            CHECK(predict(model, x) == expected);
        }
    }
}

TEST_CASE("knn and forest are invariant to training sample order") {
    GeneratorSpec spec = default_spec(11);
    spec.n_benign = 80;
    spec.n_malicious = 80;
    Corpus corpus = generate_corpus(spec);
    Corpus shuffled = corpus;
    Rng rng(3);
    for (std::size_t i = shuffled.size(); i > 1; --i) {
        std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
    }

    ForestHyper forest_hyper;
    forest_hyper.n_trees = 10;
    forest_hyper.seed = 77;
    TrainedModel f1 = train_forest(corpus, forest_hyper);
    TrainedModel f2 = train_forest(shuffled, forest_hyper);
    TrainedModel k1 = train_knn(corpus, KnnHyper{5});
    TrainedModel k2 = train_knn(shuffled, KnnHyper{5});

    Rng qrng(31);
    for (int trial = 0; trial < 60; ++trial) {
        FeatureVector x(spec.catalog.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (qrng.next_bernoulli(0.4)) x.set(j, true);
        }
        CHECK(decision_score(f1, x) == doctest::Approx(decision_score(f2, x)).epsilon(1e-15));
        CHECK(decision_score(k1, x) == doctest::Approx(decision_score(k2, x)).epsilon(1e-15));
    }
}

TEST_CASE("evaluate: perfect model, degenerate model, frozen arithmetic") {
    SUBCASE("perfect model on 10+10") {
        Corpus corpus = separable_clusters(10);
        Corpus test(corpus.begin(), corpus.begin() + 20);
        TrainedModel model = train_knn(corpus, KnnHyper{1});
        EvalReport r = evaluate(model, test);
        CHECK(r.accuracy() == doctest::Approx(1.0));
        CHECK(r.fn_rate() == doctest::Approx(0.0));
    }
    SUBCASE("constant-benign model on 50+50") {
        TrainedModel model;
        model.family = ModelFamily::LinearSvm;
        model.dimension = 2;
        model.data = LinearSvmModel{{0.0, 0.0}, -1.0, {}};
        Corpus test;
        for (int i = 0; i < 50; ++i) {
            test.push_back(sample("b" + std::to_string(i), {1, 0}, Label::Benign));
            test.push_back(sample("m" + std::to_string(i), {0, 1}, Label::Malicious));
        }
        EvalReport r = evaluate(model, test);
        CHECK(r.accuracy() == doctest::Approx(0.5));
        CHECK(r.fn_rate() == doctest::Approx(1.0));
    }
    SUBCASE("frozen counts give accuracy 0.955") {
        EvalReport r;
        r.tp = 96;
        r.tn = 95;
        r.fp = 5;
        r.fn = 4;
        CHECK(r.accuracy() == doctest::Approx(0.955).epsilon(1e-12));
        CHECK(r.tp + r.tn + r.fp + r.fn == 200);
    }
}

TEST_CASE("evaluate counts always sum to the test size") {
    GeneratorSpec spec = default_spec(5);
    spec.n_benign = 60;
    spec.n_malicious = 60;
    Corpus corpus = generate_corpus(spec);
    auto [train, test] = split_corpus(corpus, 0.25, 2);
    TrainedModel model = train_knn(train, KnnHyper{3});
    EvalReport r = evaluate(model, test);
    CHECK(r.tp + r.tn + r.fp + r.fn == test.size());
}

TEST_CASE("model serialization round-trips every family") {
    GeneratorSpec spec = default_spec(17);
    spec.n_benign = 50;
    spec.n_malicious = 50;
    Corpus corpus = generate_corpus(spec);
    SvmHyper svm_hyper;
    svm_hyper.epochs = 20;
    ForestHyper forest_hyper;
    forest_hyper.n_trees = 5;
    std::vector<TrainedModel> models;
    models.push_back(train_linear_svm(corpus, svm_hyper));
    models.push_back(train_knn(corpus, KnnHyper{3}));
    models.push_back(train_forest(corpus, forest_hyper));

    Rng rng(8);
    for (const auto& model : models) {
        TrainedModel copy = deserialize_model(serialize_model(model));
        CHECK(copy.family == model.family);
        CHECK(copy.dimension == model.dimension);
        for (int trial = 0; trial < 40; ++trial) {
            FeatureVector x(model.dimension);
            for (std::size_t j = 0; j < x.size(); ++j) {
                if (rng.next_bernoulli(0.5)) x.set(j, true);
            }
            CHECK(decision_score(copy, x) == doctest::Approx(decision_score(model, x)).epsilon(1e-15));
        }
    }
    CHECK_THROWS_AS(deserialize_model("{\"format\":\"nope\"}"), ValidationError);
    CHECK_THROWS_AS(deserialize_model("not json"), ValidationError);
}
