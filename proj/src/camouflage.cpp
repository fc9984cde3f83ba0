#include "kuafu/camouflage.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kuafu/parallel.hpp"

namespace kuafu {

double jaccard_index(const FeatureVector& a, const FeatureVector& b) {
    std::size_t uni = union_count(a, b); // also checks dimensions
    if (uni == 0) return 1.0;            // two empty sets are identical
    return static_cast<double>(intersection_count(a, b)) / static_cast<double>(uni);
}

double jaccard_weight_similarity(const FeatureVector& a, const FeatureVector& b,
                                 const FeatureCatalog& weighted_catalog) {
    if (a.size() != weighted_catalog.size() || b.size() != weighted_catalog.size()) {
        throw ValidationError("weighted similarity inputs must match the catalog dimension");
    }
    double shared = 0.0;
    double total = 0.0;
    for (const FeatureDef& f : weighted_catalog.features()) {
        if (!is_syntax_kind(f.kind)) continue;
        total += f.doc_frequency_weight;
        std::size_t j = static_cast<std::size_t>(f.id);
        if (a.get(j) && b.get(j)) shared += f.doc_frequency_weight;
    }
    if (total <= 0.0) throw ValidationError("weights not computed");
    return shared / total;
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
    std::size_t dot = intersection_count(a, b); // checks dimensions
    std::size_t na = a.popcount();
    std::size_t nb = b.popcount();
    if (na == 0 || nb == 0) return 0.0; // a zero vector has no direction
    return static_cast<double>(dot) /
           (std::sqrt(static_cast<double>(na)) * std::sqrt(static_cast<double>(nb)));
}

const char* metric_code(SimilarityMetric metric) {
    switch (metric) {
        case SimilarityMetric::Jaccard: return "jaccard";
        case SimilarityMetric::JaccardWeight: return "jaccard_weight";
        case SimilarityMetric::Cosine: return "cosine";
    }
    return "?";
}

void SimilarityThresholds::validate() const {
    for (SimilarityMetric m : kAllMetrics) {
        auto [t1, t2] = band(m);
        if (!(0.0 <= t1 && t1 < t2 && t2 <= 1.0)) {
            throw ValidationError(std::string("band for ") + metric_code(m) +
                                  " must satisfy 0 <= t1 < t2 <= 1");
        }
    }
}

AnchorSets select_anchor_sets(const TrainedModel& model, const Corpus& trusted_pool,
                              std::size_t anchor_count) {
    if (anchor_count == 0) throw ValidationError("anchor count must be positive");
    if (trusted_pool.size() < 2 * anchor_count) {
        throw ValidationError("trusted pool too small: need " + std::to_string(2 * anchor_count) +
                              " samples, have " + std::to_string(trusted_pool.size()));
    }
    std::vector<std::size_t> order(trusted_pool.size());
    std::vector<double> scores(trusted_pool.size());
    for (std::size_t i = 0; i < trusted_pool.size(); ++i) {
        order[i] = i;
        scores[i] = decision_score(model, trusted_pool[i].vector);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return trusted_pool[a].sample_id < trusted_pool[b].sample_id;
    });

    AnchorSets anchors;
    anchors.anchor_count = anchor_count;
    for (std::size_t i = 0; i < anchor_count; ++i) {
        anchors.most_benign.push_back(trusted_pool[order[i]]);
        anchors.most_malicious.push_back(trusted_pool[order[order.size() - 1 - i]]);
    }
    return anchors;
}

double aggregated_similarity(const FeatureVector& x, const std::vector<LabeledSample>& anchors,
                             SimilarityMetric metric, const FeatureCatalog& weighted_catalog,
                             Aggregator aggregator) {
    if (anchors.empty()) throw ValidationError("no anchors to compare against");
    double best = 0.0;
    double sum = 0.0;
    for (const auto& anchor : anchors) {
        double s = 0.0;
        switch (metric) {
            case SimilarityMetric::Jaccard: s = jaccard_index(x, anchor.vector); break;
            case SimilarityMetric::JaccardWeight:
                s = jaccard_weight_similarity(x, anchor.vector, weighted_catalog);
                break;
            case SimilarityMetric::Cosine: s = cosine_similarity(x, anchor.vector); break;
        }
        best = std::max(best, s);
        sum += s;
    }
    return aggregator == Aggregator::Max ? best : sum / static_cast<double>(anchors.size());
}

namespace {

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("quantile of an empty set");
    std::sort(values.begin(), values.end());
    double pos = q * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

} // namespace

SimilarityThresholds calibrate_thresholds(const AnchorSets& anchors, const Corpus& trusted_benign,
                                          const FeatureCatalog& weighted_catalog,
                                          const DetectorConfig& config) {
    if (trusted_benign.empty()) throw ValidationError("no trusted benign samples to calibrate on");
    SimilarityThresholds thresholds;
    thresholds.aggregator = config.aggregator;
    for (SimilarityMetric m : kAllMetrics) {
        std::vector<double> sims(trusted_benign.size());
        parallel_for(trusted_benign.size(), [&](std::size_t i) {
            sims[i] = aggregated_similarity(trusted_benign[i].vector, anchors.most_malicious, m,
                                            weighted_catalog, config.aggregator);
        });
        double t2 = config.upper_band;
        double t1 = std::min(quantile(sims, config.benign_quantile), t2 * 0.999);
        thresholds.band(m) = {t1, t2};
    }
    thresholds.validate();
    return thresholds;
}

std::vector<CamouflageCandidate> filter_candidates(const Corpus& predicted_benign,
                                                   const AnchorSets& anchors,
                                                   const SimilarityThresholds& thresholds,
                                                   const FeatureCatalog& weighted_catalog) {
    thresholds.validate();
    std::vector<CamouflageCandidate> all(predicted_benign.size());
    parallel_for(predicted_benign.size(), [&](std::size_t i) {
        CamouflageCandidate c;
        c.sample_id = predicted_benign[i].sample_id;
        for (SimilarityMetric m : kAllMetrics) {
            std::size_t mi = static_cast<std::size_t>(m);
            double s = aggregated_similarity(predicted_benign[i].vector, anchors.most_malicious, m,
                                             weighted_catalog, thresholds.aggregator);
            auto [t1, t2] = thresholds.band(m);
            c.similarity[mi] = s;
            c.in_band[mi] = t1 < s && s < t2;
            c.max_similarity = std::max(c.max_similarity, s);
        }
        all[i] = std::move(c);
    });

    std::vector<CamouflageCandidate> out;
    std::map<std::string, bool> seen;
    for (auto& c : all) {
        bool any = c.in_band[0] || c.in_band[1] || c.in_band[2];
        if (!any) continue;
        if (seen.emplace(c.sample_id, true).second) out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const CamouflageCandidate& a, const CamouflageCandidate& b) {
        if (a.max_similarity != b.max_similarity) return a.max_similarity > b.max_similarity;
        return a.sample_id < b.sample_id;
    });
    return out;
}

Corpus relabel(const std::vector<CamouflageCandidate>& candidates, const Corpus& corpus) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus[i].sample_id, i);

    Corpus out = corpus;
    for (const auto& c : candidates) {
        auto it = index.find(c.sample_id);
        if (it == index.end()) {
            throw ValidationError("relabel candidate not in corpus: " + c.sample_id);
        }
        LabeledSample& s = out[it->second];
        s.label = Label::Malicious;
        if (s.provenance == Provenance::Original) s.provenance = Provenance::Relabeled;
    }
    return out;
}

} // namespace kuafu
