#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kuafu/classifiers.hpp"

namespace kuafu {

enum class AttackerName { Weak, Strong, Sophisticated };

const char* attacker_code(AttackerName name);
AttackerName attacker_from_code(const std::string& code);

// c_f bounds how aggressively features may be perturbed; on binary features
// it acts as a per-(sample, feature) Bernoulli admission gate. The modifiable
// mask covers syntax features only.
struct AttackerProfile {
    AttackerName name = AttackerName::Weak;
    double c_f = 0.33;
    std::vector<int> modifiable; // sorted feature ids, syntax kinds only
    int loop_bound = 20;
    std::uint64_t seed = 1;

    bool is_modifiable(int feature_id) const;
};

// Weak: ceil(0.33 * n_syntax) random syntax features.
// Strong: the first ceil(0.67 * n_syntax) syntax features in catalog order
// (the publicly known part of the vocabulary).
// Sophisticated: every syntax feature.
AttackerProfile make_attacker_profile(AttackerName name, const FeatureCatalog& catalog,
                                      std::uint64_t seed, int loop_bound = 20);

// Perturbation interval for feature j of x: (c_f*(0 - x_j), c_f*(1 - x_j)).
std::pair<double, double> perturbation_bounds(const FeatureVector& x, int feature_id, double c_f);

struct Flip {
    int feature_id = 0;
    int direction = 0; // +1 addition, -1 removal
};

struct CraftResult {
    FeatureVector original;
    FeatureVector crafted;
    std::vector<Flip> flips;
    bool success = false; // victim classifies the crafted vector as benign
};

// Greedy gradient-guided evasion of one malicious sample: repeatedly flip the
// admissible feature with the largest positive gradient toward the benign
// class until the victim misclassifies or the loop bound is spent. Additions
// are restricted to benign-indicative features and removals to
// malicious-indicative ones so the app's behavior survives the edit.
CraftResult craft_adversarial(const LabeledSample& sample, const TrainedModel& surrogate,
                              const TrainedModel& victim, const AttackerProfile& profile,
                              const FeatureCatalog& catalog);

// Per-sample crafting log, sufficient to replay an attack bit-exactly.
struct AttackLog {
    std::string profile;
    double c_f = 0.0;
    double fraction = 0.0;
    int loop_bound = 0;
    std::uint64_t seed = 0;
    struct Entry {
        std::string sample_id;
        std::vector<Flip> flips;
        bool success = false;
    };
    std::vector<Entry> entries;

    std::string to_json() const;
};

// Replaces a `fraction` share of the malicious samples with crafted variants
// (label kept, provenance Crafted). The weak attacker additionally injects
// fraction*|train| random-feature samples labeled Benign.
Corpus poison_corpus(const Corpus& train, const AttackerProfile& profile, double fraction,
                     const TrainedModel& surrogate, const TrainedModel& victim,
                     const FeatureCatalog& catalog, AttackLog* log = nullptr);

// Crafts a `fraction` share of the malicious samples in `test` against the
// deployed victim (test-time evasion); same selection rule as poison_corpus,
// without the weak attacker's label faking.
Corpus craft_test_evasion(const Corpus& test, const AttackerProfile& profile, double fraction,
                          const TrainedModel& surrogate, const TrainedModel& victim,
                          const FeatureCatalog& catalog, AttackLog* log = nullptr);

} // namespace kuafu
