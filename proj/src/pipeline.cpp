#include "kuafu/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kuafu/io_util.hpp"
#include "kuafu/parallel.hpp"
#include "kuafu/rng.hpp"

namespace kuafu {

using nlohmann::json;

TrainedModel train_family(const Corpus& corpus, const ClassifierConfig& config) {
    switch (config.family) {
        case ModelFamily::LinearSvm: return train_linear_svm(corpus, config.svm);
        case ModelFamily::Knn: return train_knn(corpus, config.knn);
        case ModelFamily::Forest: return train_forest(corpus, config.forest);
        case ModelFamily::Logistic: return train_surrogate(corpus, config.surrogate);
    }
    throw ValidationError("unknown classifier family");
}

DetectorState build_detector_state(const TrainedModel& model, const Corpus& train,
                                   const FeatureCatalog& catalog, const DetectorConfig& config) {
    Corpus trusted;
    for (const auto& s : train) {
        if (s.provenance == Provenance::Original) trusted.push_back(s);
    }
    if (trusted.empty()) throw ValidationError("no trusted samples for anchor selection");

    DetectorState state;
    state.weighted_catalog = with_doc_frequencies(catalog, train);
    state.anchors = select_anchor_sets(model, trusted, config.anchor_count);
    if (config.auto_bands) {
        Corpus trusted_benign;
        for (const auto& s : trusted) {
            if (s.label == Label::Benign) trusted_benign.push_back(s);
        }
        state.thresholds = calibrate_thresholds(state.anchors, trusted_benign,
                                                state.weighted_catalog, config);
    } else {
        state.thresholds = config.manual;
        state.thresholds.aggregator = config.aggregator;
        state.thresholds.validate();
    }
    return state;
}

namespace {

bool flagged_by_detector(const FeatureVector& x, const DetectorState& det) {
    for (SimilarityMetric m : kAllMetrics) {
        double s = aggregated_similarity(x, det.anchors.most_malicious, m, det.weighted_catalog,
                                         det.thresholds.aggregator);
        auto [t1, t2] = det.thresholds.band(m);
        if (t1 < s && s < t2) return true;
    }
    return false;
}

} // namespace

EvalReport evaluate_with_detector(const TrainedModel& model, const Corpus& test,
                                  const DetectorState& detector) {
    if (test.empty()) throw ValidationError("evaluation on an empty corpus");
    std::vector<int> verdict(test.size());
    parallel_for(test.size(), [&](std::size_t i) {
        bool malicious = predict(model, test[i].vector) == Label::Malicious;
        if (!malicious && flagged_by_detector(test[i].vector, detector)) malicious = true;
        verdict[i] = malicious;
    });
    EvalReport report;
    for (std::size_t i = 0; i < test.size(); ++i) {
        bool actually = test[i].label == Label::Malicious;
        if (verdict[i] && actually) ++report.tp;
        else if (!verdict[i] && !actually) ++report.tn;
        else if (verdict[i]) ++report.fp;
        else ++report.fn;
    }
    return report;
}

std::string round_report_json(const RoundReport& r) {
    json bands = json::object();
    for (SimilarityMetric m : kAllMetrics) {
        auto [t1, t2] = r.thresholds.band(m);
        bands[metric_code(m)] = {t1, t2};
    }
    json j{{"round", r.round},
           {"pre_filter", json::parse(eval_report_json(r.pre_filter))},
           {"candidates_found", r.candidates_found},
           {"relabeled_in_train", r.relabeled_in_train},
           {"appended_from_test", r.appended_from_test},
           {"post_retrain", json::parse(eval_report_json(r.post_retrain))},
           {"thresholds", std::move(bands)},
           {"seed", r.seed}};
    return j.dump();
}

RoundArtifacts run_sal_round(SalState& state) {
    if (state.train.empty() || state.test.empty()) {
        throw ValidationError("SAL round needs nonempty train and test corpora");
    }

    RoundArtifacts artifacts;
    TrainedModel model = train_family(state.train, state.classifier);
    artifacts.report.pre_filter = evaluate(model, state.test);

    if (!state.detector_enabled) {
        // disabled path: no candidates, no state change, reports coincide
        artifacts.report.post_retrain = artifacts.report.pre_filter;
        artifacts.model = std::move(model);
        return artifacts;
    }

    DetectorState det = build_detector_state(model, state.train, state.catalog, state.detector);
    artifacts.report.thresholds = det.thresholds;

    Corpus predicted_benign_test;
    for (const auto& s : state.test) {
        if (predict(model, s.vector) == Label::Benign) predicted_benign_test.push_back(s);
    }
    std::vector<CamouflageCandidate> test_candidates =
        filter_candidates(predicted_benign_test, det.anchors, det.thresholds, det.weighted_catalog);

    Corpus train_benign_labeled;
    for (const auto& s : state.train) {
        if (s.label == Label::Benign) train_benign_labeled.push_back(s);
    }
    std::vector<CamouflageCandidate> train_candidates =
        filter_candidates(train_benign_labeled, det.anchors, det.thresholds, det.weighted_catalog);

    std::set<std::string> unique_ids;
    for (const auto& c : test_candidates) unique_ids.insert(c.sample_id);
    for (const auto& c : train_candidates) unique_ids.insert(c.sample_id);
    artifacts.report.candidates_found = unique_ids.size();

    // relabel camouflage inside the training pool
    std::size_t before_malicious = count_label(state.train, Label::Malicious);
    state.train = relabel(train_candidates, state.train);
    artifacts.report.relabeled_in_train =
        count_label(state.train, Label::Malicious) - before_malicious;

    // append test-time detections as new training samples; duplicates resolve
    // by sample_id
    std::set<std::string> train_ids;
    for (const auto& s : state.train) train_ids.insert(s.sample_id);
    std::map<std::string, const LabeledSample*> test_by_id;
    for (const auto& s : state.test) test_by_id.emplace(s.sample_id, &s);
    for (const auto& c : test_candidates) {
        if (train_ids.count(c.sample_id)) continue;
        const LabeledSample* src = test_by_id.at(c.sample_id);
        LabeledSample added;
        added.sample_id = src->sample_id;
        added.vector = src->vector;
        added.label = Label::Malicious; // the detector's verdict, not ground truth
        added.provenance = Provenance::Relabeled;
        state.train.push_back(std::move(added));
        train_ids.insert(c.sample_id);
        ++artifacts.report.appended_from_test;
    }

    TrainedModel retrained = train_family(state.train, state.classifier);
    artifacts.report.post_retrain = evaluate(retrained, state.test);

    // deployed detector state tracks the retrained model and updated pool
    artifacts.detector =
        build_detector_state(retrained, state.train, state.catalog, state.detector);
    artifacts.model = std::move(retrained);
    return artifacts;
}

namespace {

struct CellAccumulator {
    std::vector<double> fn;
    std::vector<double> accuracy;

    void add(const EvalReport& r) {
        fn.push_back(r.fn_rate());
        accuracy.push_back(r.accuracy());
    }
};

std::pair<double, double> mean_sd(const std::vector<double>& values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size() - 1);
    return {mean, std::sqrt(var)};
}

CellResult finalize_cell(const std::string& classifier, const std::string& attacker,
                         const std::string& mode, const CellAccumulator& acc) {
    CellResult cell;
    cell.classifier = classifier;
    cell.attacker = attacker;
    cell.mode = mode;
    cell.n_seeds = acc.fn.size();
    std::tie(cell.fn_mean, cell.fn_sd) = mean_sd(acc.fn);
    std::tie(cell.accuracy_mean, cell.accuracy_sd) = mean_sd(acc.accuracy);
    return cell;
}

ClassifierConfig config_for(const ExperimentGrid& grid, ModelFamily family, std::uint64_t seed) {
    ClassifierConfig config = grid.classifier;
    config.family = family;
    config.svm.seed = derive_seed(seed, "svm");
    config.forest.seed = derive_seed(seed, "forest");
    config.surrogate.seed = derive_seed(seed, "surrogate");
    return config;
}

struct SeedRunResult {
    EvalReport conventional;
    // indexed by attacker ordinal
    std::vector<EvalReport> without_ad;
    std::vector<EvalReport> within_ad;
    std::vector<std::string> round_lines;
};

SeedRunResult run_seed(const ExperimentGrid& grid, ModelFamily family, std::uint64_t seed) {
    SeedRunResult result;
    GeneratorSpec spec = grid.corpus_spec;
    spec.seed = seed;
    Corpus corpus = generate_corpus(spec);
    auto [train, test] = split_corpus(corpus, grid.test_fraction, derive_seed(seed, "split"));

    ClassifierConfig config = config_for(grid, family, seed);
    TrainedModel clean_model = train_family(train, config);
    result.conventional = evaluate(clean_model, test);

    if (!grid.include_without_ad && !grid.include_within_ad) return result;

    for (std::size_t a = 0; a < grid.attackers.size(); ++a) {
        AttackerName attacker = grid.attackers[a];
        AttackerProfile profile = make_attacker_profile(
            attacker, spec.catalog, derive_seed(seed, "attacker", a), grid.loop_bound);

        TrainedModel clean_surrogate = train_surrogate(train, config.surrogate);
        Corpus poisoned = poison_corpus(train, profile, grid.poison_fraction, clean_surrogate,
                                        clean_model, spec.catalog);
        TrainedModel victim = train_family(poisoned, config);
        TrainedModel surrogate = train_surrogate(poisoned, config.surrogate);
        Corpus attacked_test = craft_test_evasion(test, profile, grid.poison_fraction, surrogate,
                                                  victim, spec.catalog);

        result.without_ad.push_back(evaluate(victim, attacked_test));

        if (grid.include_within_ad) {
            SalState state;
            state.train = poisoned;
            state.test = attacked_test;
            state.catalog = spec.catalog;
            state.classifier = config;
            state.detector = grid.detector;
            state.detector_enabled = true;

            RoundArtifacts last;
            for (int round = 0; round < std::max(1, grid.rounds); ++round) {
                last = run_sal_round(state);
                last.report.round = round;
                last.report.seed = seed;
                json line = json::parse(round_report_json(last.report));
                line["classifier"] = family_code(family);
                line["attacker"] = attacker_code(attacker);
                result.round_lines.push_back(line.dump());
            }
            result.within_ad.push_back(
                evaluate_with_detector(last.model, attacked_test, *last.detector));
        } else {
            result.within_ad.push_back(EvalReport{});
        }
    }
    return result;
}

} // namespace

ExperimentResult run_attack_experiment(const ExperimentGrid& grid) {
    ExperimentResult out;
    if (grid.families.empty() || grid.seeds.empty()) return out;

    struct Task {
        ModelFamily family;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (ModelFamily family : grid.families) {
        for (std::uint64_t seed : grid.seeds) tasks.push_back({family, seed});
    }
    std::vector<SeedRunResult> results(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t i) {
        results[i] = run_seed(grid, tasks[i].family, tasks[i].seed);
    });

    for (std::size_t fi = 0; fi < grid.families.size(); ++fi) {
        ModelFamily family = grid.families[fi];
        const std::string classifier = family_code(family);
        auto result_at = [&](std::size_t si) -> const SeedRunResult& {
            return results[fi * grid.seeds.size() + si];
        };

        if (grid.include_conventional) {
            CellAccumulator acc;
            for (std::size_t si = 0; si < grid.seeds.size(); ++si) {
                acc.add(result_at(si).conventional);
            }
            out.cells.push_back(finalize_cell(classifier, "none", "conventional", acc));
        }
        for (std::size_t a = 0; a < grid.attackers.size(); ++a) {
            const std::string attacker = attacker_code(grid.attackers[a]);
            if (grid.include_without_ad) {
                CellAccumulator acc;
                for (std::size_t si = 0; si < grid.seeds.size(); ++si) {
                    acc.add(result_at(si).without_ad[a]);
                }
                out.cells.push_back(finalize_cell(classifier, attacker, "without_ad", acc));
            }
            if (grid.include_within_ad) {
                CellAccumulator acc;
                for (std::size_t si = 0; si < grid.seeds.size(); ++si) {
                    acc.add(result_at(si).within_ad[a]);
                }
                out.cells.push_back(finalize_cell(classifier, attacker, "within_ad", acc));
            }
        }
        for (std::size_t si = 0; si < grid.seeds.size(); ++si) {
            const auto& lines = result_at(si).round_lines;
            out.round_lines.insert(out.round_lines.end(), lines.begin(), lines.end());
        }
    }
    return out;
}

std::string experiment_csv(const std::vector<CellResult>& cells) {
    std::ostringstream out;
    out << "classifier,attacker,mode,seeds,fn_mean,fn_sd,accuracy_mean,accuracy_sd\n";
    for (const auto& c : cells) {
        out << c.classifier << ',' << c.attacker << ',' << c.mode << ',' << c.n_seeds << ','
            << fixed4(c.fn_mean) << ',' << fixed4(c.fn_sd) << ',' << fixed4(c.accuracy_mean) << ','
            << fixed4(c.accuracy_sd) << '\n';
    }
    return out.str();
}

std::vector<RatioResult> run_imbalance_sweep(const std::vector<std::string>& ratios,
                                             const GeneratorSpec& base_spec,
                                             const ClassifierConfig& classifier, int folds,
                                             std::uint64_t seed) {
    if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
    std::vector<RatioResult> rows;
    for (const auto& ratio_text : ratios) {
        std::vector<std::string> parts = split(ratio_text, ':');
        if (parts.size() != 2) throw ValidationError("ratio must look like 1:50, got " + ratio_text);
        long mal_part = 0;
        long ben_part = 0;
        try {
            mal_part = std::stol(trim(parts[0]));
            ben_part = std::stol(trim(parts[1]));
        } catch (const std::exception&) {
            throw ValidationError("ratio must be numeric, got " + ratio_text);
        }
        if (mal_part <= 0) throw ValidationError("ratio needs a positive malicious part");
        if (ben_part <= 0) throw ValidationError("ratio needs a positive benign part");

        GeneratorSpec spec = base_spec;
        spec.seed = derive_seed(seed, "ratio", stable_hash(ratio_text));
        spec.n_malicious = base_spec.n_malicious;
        spec.n_benign = static_cast<std::size_t>(
            std::llround(static_cast<double>(base_spec.n_malicious) *
                         static_cast<double>(ben_part) / static_cast<double>(mal_part)));
        Corpus corpus = generate_corpus(spec);

        // stratified fold assignment
        std::vector<std::size_t> fold_of(corpus.size());
        for (Label label : {Label::Benign, Label::Malicious}) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                if (corpus[i].label == label) idx.push_back(i);
            }
            Rng rng(derive_seed(spec.seed, label == Label::Benign ? "fold-b" : "fold-m"));
            for (std::size_t i = idx.size(); i > 1; --i) {
                std::size_t j = rng.next_below(i);
                std::swap(idx[i - 1], idx[j]);
            }
            for (std::size_t i = 0; i < idx.size(); ++i) {
                fold_of[idx[i]] = i % static_cast<std::size_t>(folds);
            }
        }

        std::vector<double> fold_accuracy(static_cast<std::size_t>(folds));
        parallel_for(static_cast<std::size_t>(folds), [&](std::size_t f) {
            Corpus train;
            Corpus test;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                (fold_of[i] == f ? test : train).push_back(corpus[i]);
            }
            TrainedModel model = train_family(train, classifier);
            fold_accuracy[f] = evaluate(model, test).accuracy();
        });
        double mean = 0.0;
        for (double a : fold_accuracy) mean += a;
        mean /= static_cast<double>(folds);
        rows.push_back({ratio_text, mean});
    }
    return rows;
}

std::string sweep_csv(const std::vector<RatioResult>& rows) {
    std::ostringstream out;
    out << "ratio,accuracy\n";
    for (const auto& r : rows) out << r.ratio << ',' << fixed4(r.accuracy) << '\n';
    return out.str();
}

} // namespace kuafu
