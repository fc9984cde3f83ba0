#include "kuafu/adversary.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "kuafu/parallel.hpp"
#include "kuafu/rng.hpp"
#include "kuafu/surrogate.hpp"

namespace kuafu {

using nlohmann::json;

const char* attacker_code(AttackerName name) {
    switch (name) {
        case AttackerName::Weak: return "weak";
        case AttackerName::Strong: return "strong";
        case AttackerName::Sophisticated: return "sophisticated";
    }
    return "?";
}

AttackerName attacker_from_code(const std::string& code) {
    if (code == "weak") return AttackerName::Weak;
    if (code == "strong") return AttackerName::Strong;
    if (code == "sophisticated") return AttackerName::Sophisticated;
    throw ValidationError("unknown attacker profile: " + code);
}

bool AttackerProfile::is_modifiable(int feature_id) const {
    return std::binary_search(modifiable.begin(), modifiable.end(), feature_id);
}

AttackerProfile make_attacker_profile(AttackerName name, const FeatureCatalog& catalog,
                                      std::uint64_t seed, int loop_bound) {
    if (loop_bound < 0) throw ValidationError("loop bound must be >= 0");
    AttackerProfile profile;
    profile.name = name;
    profile.seed = seed;
    profile.loop_bound = loop_bound;

    std::vector<int> syntax = catalog.syntax_ids();
    std::size_t n_syntax = syntax.size();
    switch (name) {
        case AttackerName::Weak: {
            profile.c_f = 0.33;
            std::size_t take = static_cast<std::size_t>(
                std::ceil(profile.c_f * static_cast<double>(n_syntax)));
            Rng rng(derive_seed(seed, "weak-mask"));
            for (std::size_t i = 0; i < take && i + 1 < n_syntax; ++i) {
                std::size_t j = i + rng.next_below(n_syntax - i);
                std::swap(syntax[i], syntax[j]);
            }
            syntax.resize(std::min(take, n_syntax));
            break;
        }
        case AttackerName::Strong: {
            profile.c_f = 0.67;
            std::size_t take = static_cast<std::size_t>(
                std::ceil(profile.c_f * static_cast<double>(n_syntax)));
            syntax.resize(std::min(take, n_syntax));
            break;
        }
        case AttackerName::Sophisticated: {
            profile.c_f = 1.0;
            break;
        }
    }
    std::sort(syntax.begin(), syntax.end());
    profile.modifiable = std::move(syntax);
    return profile;
}

std::pair<double, double> perturbation_bounds(const FeatureVector& x, int feature_id, double c_f) {
    if (!(c_f >= 0.0 && c_f <= 1.0)) throw ValidationError("c_f must be in [0,1]");
    double xj = x.get(static_cast<std::size_t>(feature_id)) ? 1.0 : 0.0;
    return {c_f * (0.0 - xj), c_f * (1.0 - xj)};
}

namespace {

// The c_f admission gate: drawn once per (sample, feature) from the profile
// seed, so re-running a craft replays the exact same flip sequence.
bool gate_admits(const AttackerProfile& profile, const std::string& sample_id, int feature_id) {
    if (profile.c_f >= 1.0) return true;
    if (profile.c_f <= 0.0) return false;
    std::uint64_t h = derive_seed(profile.seed, sample_id, static_cast<std::uint64_t>(feature_id));
    Rng rng(h);
    return rng.next_unit() < profile.c_f;
}

} // namespace

CraftResult craft_adversarial(const LabeledSample& sample, const TrainedModel& surrogate,
                              const TrainedModel& victim, const AttackerProfile& profile,
                              const FeatureCatalog& catalog) {
    if (sample.label != Label::Malicious) {
        throw ValidationError("crafting starts from a malicious sample");
    }
    if (sample.vector.size() != catalog.size()) {
        throw ValidationError("sample dimension does not match catalog");
    }

    CraftResult result;
    result.original = sample.vector;
    result.crafted = sample.vector;

    if (predict(victim, result.crafted) == Label::Benign) {
        result.success = true; // already misclassified; nothing to do
        return result;
    }

    std::vector<bool> flipped(catalog.size(), false);
    for (int step = 0; step < profile.loop_bound; ++step) {
        std::vector<double> grad = gradient_wrt_input(surrogate, result.crafted, 0);

        int best_feature = -1;
        int best_direction = 0;
        double best_gain = 0.0;
        for (int j : profile.modifiable) {
            std::size_t ju = static_cast<std::size_t>(j);
            if (flipped[ju]) continue;
            const FeatureDef& f = catalog.feature(ju);
            bool present = result.crafted.get(ju);
            int direction;
            if (!present && f.indicativeness == Indicativeness::BenignIndicative) {
                direction = 1;
            } else if (present && f.indicativeness == Indicativeness::MaliciousIndicative) {
                direction = -1;
            } else {
                continue;
            }
            if (!gate_admits(profile, sample.sample_id, j)) continue;
            double gain = grad[ju] * direction;
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = j;
                best_direction = direction;
            }
        }
        if (best_feature < 0) break; // no admissible move improves the benign score

        result.crafted.flip(static_cast<std::size_t>(best_feature));
        flipped[static_cast<std::size_t>(best_feature)] = true;
        result.flips.push_back({best_feature, best_direction});

        if (predict(victim, result.crafted) == Label::Benign) {
            result.success = true;
            break;
        }
    }
    return result;
}

namespace {

// Deterministic choice of which malicious samples get crafted: shuffle the
// id-sorted malicious indices with a seed derived from the profile.
std::vector<std::size_t> select_targets(const Corpus& corpus, double fraction,
                                        std::uint64_t seed, const char* tag) {
    std::vector<std::size_t> malicious;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].label == Label::Malicious) malicious.push_back(i);
    }
    std::sort(malicious.begin(), malicious.end(), [&](std::size_t a, std::size_t b) {
        return corpus[a].sample_id < corpus[b].sample_id;
    });
    std::size_t count = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(malicious.size())));
    if (fraction > 0.0 && count == 0) {
        throw ValidationError("fraction selects no malicious samples");
    }
    Rng rng(derive_seed(seed, tag));
    for (std::size_t i = 0; i < count && i + 1 < malicious.size(); ++i) {
        std::size_t j = i + rng.next_below(malicious.size() - i);
        std::swap(malicious[i], malicious[j]);
    }
    malicious.resize(std::min(count, malicious.size()));
    std::sort(malicious.begin(), malicious.end());
    return malicious;
}

Corpus craft_share(const Corpus& corpus, const AttackerProfile& profile, double fraction,
                   const TrainedModel& surrogate, const TrainedModel& victim,
                   const FeatureCatalog& catalog, const char* tag, AttackLog* log) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ValidationError("fraction must be in [0,1]");
    }
    Corpus out = corpus;
    if (fraction == 0.0) return out;

    std::vector<std::size_t> targets = select_targets(corpus, fraction, profile.seed, tag);
    std::vector<CraftResult> results(targets.size());
    parallel_for(targets.size(), [&](std::size_t i) {
        results[i] = craft_adversarial(corpus[targets[i]], surrogate, victim, profile, catalog);
    });
    for (std::size_t i = 0; i < targets.size(); ++i) {
        LabeledSample& s = out[targets[i]];
        s.vector = results[i].crafted;
        s.provenance = Provenance::Crafted; // label stays Malicious
        if (log) log->entries.push_back({s.sample_id, results[i].flips, results[i].success});
    }
    return out;
}

} // namespace

Corpus poison_corpus(const Corpus& train, const AttackerProfile& profile, double fraction,
                     const TrainedModel& surrogate, const TrainedModel& victim,
                     const FeatureCatalog& catalog, AttackLog* log) {
    if (log) {
        log->profile = attacker_code(profile.name);
        log->c_f = profile.c_f;
        log->fraction = fraction;
        log->loop_bound = profile.loop_bound;
        log->seed = profile.seed;
    }
    Corpus out = craft_share(train, profile, fraction, surrogate, victim, catalog,
                             "poison-select", log);

    if (profile.name == AttackerName::Weak && fraction > 0.0) {
        // label faking: random binary feature vectors injected as benign
        std::size_t count = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(train.size())));
        for (std::size_t i = 0; i < count; ++i) {
            LabeledSample fake;
            char buf[48];
            std::snprintf(buf, sizeof(buf), "fake-benign-%06zu", i);
            fake.sample_id = buf;
            fake.label = Label::Benign;
            fake.provenance = Provenance::Crafted;
            fake.vector = FeatureVector(catalog.size());
            Rng rng(derive_seed(profile.seed, "weak-fake", i));
            for (std::size_t j = 0; j < catalog.size(); ++j) {
                if (rng.next_bernoulli(0.5)) fake.vector.set(j, true);
            }
            out.push_back(std::move(fake));
        }
    }
    return out;
}

Corpus craft_test_evasion(const Corpus& test, const AttackerProfile& profile, double fraction,
                          const TrainedModel& surrogate, const TrainedModel& victim,
                          const FeatureCatalog& catalog, AttackLog* log) {
    if (log) {
        log->profile = attacker_code(profile.name);
        log->c_f = profile.c_f;
        log->fraction = fraction;
        log->loop_bound = profile.loop_bound;
        log->seed = profile.seed;
    }
    return craft_share(test, profile, fraction, surrogate, victim, catalog, "evasion-select", log);
}

std::string AttackLog::to_json() const {
    json entries_json = json::array();
    for (const auto& e : entries) {
        json flips_json = json::array();
        for (const auto& f : e.flips) flips_json.push_back({f.feature_id, f.direction});
        entries_json.push_back(
            {{"sample_id", e.sample_id}, {"flips", std::move(flips_json)}, {"success", e.success}});
    }
    json j{{"profile", profile},   {"c_f", c_f},
           {"fraction", fraction}, {"loop_bound", loop_bound},
           {"seed", seed},         {"entries", std::move(entries_json)}};
    return j.dump();
}

} // namespace kuafu
