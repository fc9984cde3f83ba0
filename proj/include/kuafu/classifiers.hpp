#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kuafu/catalog.hpp"

namespace kuafu {

struct LinearSvmModel {
    std::vector<double> weights;
    double bias = 0.0;
    // objective of the averaged iterate after each epoch, when recorded
    std::vector<double> objective_trace;
};

struct KnnModel {
    int k = 5;
    Corpus samples; // sorted by sample_id
};

struct ForestNode {
    int feature = -1; // -1 for leaves
    int left = -1;    // child when bit == 0
    int right = -1;   // child when bit == 1
    double leaf_fraction = 0.0;
};

struct ForestTree {
    std::vector<ForestNode> nodes; // node 0 is the root
};

struct ForestModel {
    std::vector<ForestTree> trees;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
};

enum class ModelFamily { LinearSvm, Knn, Forest, Logistic };

const char* family_code(ModelFamily family);

// One of the three classifier families or the differentiable surrogate.
// All of them expose the same signed decision score: positive means the
// malicious side, and an exact 0 classifies Benign.
struct TrainedModel {
    ModelFamily family = ModelFamily::LinearSvm;
    std::size_t dimension = 0;
    std::variant<LinearSvmModel, KnnModel, ForestModel, LogisticModel> data;
};

struct SvmHyper {
    // L2 coefficient; the step size is 1/(regularization * t). 0.01 keeps the
    // model robust to label-faking noise, which heavier regularization loses.
    double regularization = 0.01;
    int epochs = 200;
    std::uint64_t seed = 1;
    bool record_objective = false;
};

struct KnnHyper {
    int k = 5;
};

struct ForestHyper {
    int n_trees = 100;
    int max_depth = 10;
    int features_per_split = 0; // 0 means floor(sqrt(dimension)), at least 1
    std::uint64_t seed = 1;
};

TrainedModel train_linear_svm(const Corpus& corpus, const SvmHyper& hyper);
TrainedModel train_knn(const Corpus& corpus, const KnnHyper& hyper);
TrainedModel train_forest(const Corpus& corpus, const ForestHyper& hyper);

double decision_score(const TrainedModel& model, const FeatureVector& x);

inline Label predict(const TrainedModel& model, const FeatureVector& x) {
    return decision_score(model, x) > 0.0 ? Label::Malicious : Label::Benign;
}

struct EvalReport {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    double accuracy() const {
        std::size_t total = tp + tn + fp + fn;
        return total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
    }
    double fn_rate() const {
        std::size_t malicious = tp + fn;
        return malicious == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(malicious);
    }
};

EvalReport evaluate(const TrainedModel& model, const Corpus& test);

std::string eval_report_json(const EvalReport& report);
std::string eval_report_csv_header();
std::string eval_report_csv_row(const EvalReport& report);

// Versioned JSON envelope shared by all model families.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(const std::string& text);

// Hinge-loss objective used by the SVM trainer and its monotonicity check.
double svm_objective(const std::vector<double>& weights, double bias, const Corpus& corpus,
                     double regularization);

} // namespace kuafu
