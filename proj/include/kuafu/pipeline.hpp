#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kuafu/adversary.hpp"
#include "kuafu/camouflage.hpp"
#include "kuafu/classifiers.hpp"
#include "kuafu/corpus.hpp"
#include "kuafu/surrogate.hpp"

namespace kuafu {

// Victim family plus every hyperparameter needed to train it (and the
// surrogate) deterministically.
struct ClassifierConfig {
    ModelFamily family = ModelFamily::LinearSvm;
    SvmHyper svm;
    KnnHyper knn;
    ForestHyper forest;
    LogisticHyper surrogate;
};

TrainedModel train_family(const Corpus& corpus, const ClassifierConfig& config);

// Anchors, bands and weights as deployed against a given model/corpus pair.
struct DetectorState {
    AnchorSets anchors;
    SimilarityThresholds thresholds;
    FeatureCatalog weighted_catalog;
};

DetectorState build_detector_state(const TrainedModel& model, const Corpus& train,
                                   const FeatureCatalog& catalog, const DetectorConfig& config);

// Classifier and camouflage filter acting together: a sample counts as
// detected when the model scores it malicious or the filter flags it.
EvalReport evaluate_with_detector(const TrainedModel& model, const Corpus& test,
                                  const DetectorState& detector);

struct SalState {
    Corpus train;
    Corpus test;
    FeatureCatalog catalog;
    ClassifierConfig classifier;
    DetectorConfig detector;
    bool detector_enabled = true;
};

struct RoundReport {
    int round = 0;
    EvalReport pre_filter;
    std::size_t candidates_found = 0;
    std::size_t relabeled_in_train = 0;
    std::size_t appended_from_test = 0;
    EvalReport post_retrain;
    SimilarityThresholds thresholds;
    std::uint64_t seed = 0;
};

std::string round_report_json(const RoundReport& report);

struct RoundArtifacts {
    RoundReport report;
    TrainedModel model; // post-retrain model (pre-filter model when disabled)
    std::optional<DetectorState> detector;
};

// One self-adaptive learning round: train, evaluate, band-filter the
// predicted-benign side, relabel/append, retrain, re-evaluate. The test
// corpus is never modified.
RoundArtifacts run_sal_round(SalState& state);

struct ExperimentGrid {
    GeneratorSpec corpus_spec;
    double test_fraction = 0.2;
    std::vector<ModelFamily> families;
    std::vector<AttackerName> attackers;
    double poison_fraction = 0.5;
    int loop_bound = 20;
    ClassifierConfig classifier; // per-family hypers; family is set per cell
    DetectorConfig detector;
    int rounds = 3;
    std::vector<std::uint64_t> seeds;
    bool include_conventional = true;
    bool include_without_ad = true;
    bool include_within_ad = true;
};

struct CellResult {
    std::string classifier;
    std::string attacker; // "none" for conventional rows
    std::string mode;     // conventional | without_ad | within_ad
    std::size_t n_seeds = 0;
    double fn_mean = 0.0;
    double fn_sd = 0.0;
    double accuracy_mean = 0.0;
    double accuracy_sd = 0.0;
};

struct ExperimentResult {
    std::vector<CellResult> cells;
    std::vector<std::string> round_lines; // rounds.jsonl payload
};

ExperimentResult run_attack_experiment(const ExperimentGrid& grid);

std::string experiment_csv(const std::vector<CellResult>& cells);

struct RatioResult {
    std::string ratio; // "1:50"
    double accuracy = 0.0;
};

// Builds one corpus per malware:benign ratio and scores it with k-fold
// cross-validation on the configured family.
std::vector<RatioResult> run_imbalance_sweep(const std::vector<std::string>& ratios,
                                             const GeneratorSpec& base_spec,
                                             const ClassifierConfig& classifier, int folds,
                                             std::uint64_t seed);

std::string sweep_csv(const std::vector<RatioResult>& rows);

} // namespace kuafu
