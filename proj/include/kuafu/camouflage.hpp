#pragma once

#include <array>
#include <string>
#include <vector>

#include "kuafu/classifiers.hpp"

namespace kuafu {

// Jaccard index over set bits; two empty sets count as identical (1.0).
double jaccard_index(const FeatureVector& a, const FeatureVector& b);

// Doc-frequency-weighted overlap over the syntax features only:
// sum of weights where both bits are set, divided by the sum of all syntax
// weights. The catalog must carry computed doc frequencies.
double jaccard_weight_similarity(const FeatureVector& a, const FeatureVector& b,
                                 const FeatureCatalog& weighted_catalog);

// Cosine over the 0/1 vectors; any all-zero vector has no direction (0.0).
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

enum class SimilarityMetric { Jaccard, JaccardWeight, Cosine };
inline constexpr std::array<SimilarityMetric, 3> kAllMetrics = {
    SimilarityMetric::Jaccard, SimilarityMetric::JaccardWeight, SimilarityMetric::Cosine};
const char* metric_code(SimilarityMetric metric);

// Trusted samples at the extreme ends of the decision score.
struct AnchorSets {
    std::vector<LabeledSample> most_benign;
    std::vector<LabeledSample> most_malicious;
    std::size_t anchor_count = 0;
};

AnchorSets select_anchor_sets(const TrainedModel& model, const Corpus& trusted_pool,
                              std::size_t anchor_count);

enum class Aggregator { Max, Mean };

// Band (t1, t2) per metric; a sample is a camouflage candidate when its
// aggregated similarity to the malicious anchors falls strictly inside the
// band for at least one metric.
struct SimilarityThresholds {
    std::array<std::pair<double, double>, 3> bands{}; // indexed by SimilarityMetric
    Aggregator aggregator = Aggregator::Max;

    std::pair<double, double>& band(SimilarityMetric m) {
        return bands[static_cast<std::size_t>(m)];
    }
    const std::pair<double, double>& band(SimilarityMetric m) const {
        return bands[static_cast<std::size_t>(m)];
    }
    void validate() const;
};

struct DetectorConfig {
    std::size_t anchor_count = 50;
    bool auto_bands = true;          // calibrate from the trusted benign pool
    double benign_quantile = 0.998;  // t1 = this quantile of benign-pool similarities
    double upper_band = 0.999;       // t2; keeps near-duplicates of anchors out
    SimilarityThresholds manual;     // used when auto_bands is false
    Aggregator aggregator = Aggregator::Max;
};

// t1 per metric = `benign_quantile` of the trusted benign samples' aggregated
// similarity to the malicious anchors; t2 = `upper_band`.
SimilarityThresholds calibrate_thresholds(const AnchorSets& anchors, const Corpus& trusted_benign,
                                          const FeatureCatalog& weighted_catalog,
                                          const DetectorConfig& config);

double aggregated_similarity(const FeatureVector& x, const std::vector<LabeledSample>& anchors,
                             SimilarityMetric metric, const FeatureCatalog& weighted_catalog,
                             Aggregator aggregator);

struct CamouflageCandidate {
    std::string sample_id;
    double max_similarity = 0.0;                 // best aggregated similarity over metrics
    std::array<double, 3> similarity{};          // per metric
    std::array<bool, 3> in_band{};               // per metric
};

// Band-filters predicted-benign samples against the malicious anchors;
// output is deduplicated and ordered by descending max similarity.
std::vector<CamouflageCandidate> filter_candidates(const Corpus& predicted_benign,
                                                   const AnchorSets& anchors,
                                                   const SimilarityThresholds& thresholds,
                                                   const FeatureCatalog& weighted_catalog);

// Marks every candidate in `corpus` malicious. Samples with provenance
// Original become Relabeled; Crafted samples keep their provenance (the
// transition rules allow only Original -> Relabeled). Idempotent.
Corpus relabel(const std::vector<CamouflageCandidate>& candidates, const Corpus& corpus);

} // namespace kuafu
