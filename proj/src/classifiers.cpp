#include "kuafu/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "kuafu/io_util.hpp"
#include "kuafu/rng.hpp"

namespace kuafu {

using nlohmann::json;

namespace {

Corpus sorted_by_id(const Corpus& corpus) {
    Corpus out = corpus;
    std::sort(out.begin(), out.end(), [](const LabeledSample& a, const LabeledSample& b) {
        return a.sample_id < b.sample_id;
    });
    return out;
}

void require_both_labels(const Corpus& corpus) {
    bool benign = false;
    bool malicious = false;
    for (const auto& s : corpus) {
        benign |= s.label == Label::Benign;
        malicious |= s.label == Label::Malicious;
        if (benign && malicious) return;
    }
    throw ValidationError("degenerate training set: needs both labels");
}

std::size_t corpus_dimension(const Corpus& corpus) {
    if (corpus.empty()) throw ValidationError("empty training corpus");
    std::size_t dim = corpus.front().vector.size();
    for (const auto& s : corpus) {
        if (s.vector.size() != dim) {
            throw ValidationError("corpus has inconsistent vector dimensions");
        }
    }
    return dim;
}

double dot_bits(const std::vector<double>& w, const FeatureVector& x) {
    double sum = 0.0;
    const auto& words = x.words();
    for (std::size_t wi = 0; wi < words.size(); ++wi) {
        std::uint64_t word = words[wi];
        while (word) {
            unsigned bit = static_cast<unsigned>(std::countr_zero(word));
            sum += w[wi * 64 + bit];
            word &= word - 1;
        }
    }
    return sum;
}

} // namespace

const char* family_code(ModelFamily family) {
    switch (family) {
        case ModelFamily::LinearSvm: return "linear_svm";
        case ModelFamily::Knn: return "knn";
        case ModelFamily::Forest: return "forest";
        case ModelFamily::Logistic: return "logistic";
    }
    return "?";
}

double svm_objective(const std::vector<double>& weights, double bias, const Corpus& corpus,
                     double regularization) {
    double norm2 = 0.0;
    for (double w : weights) norm2 += w * w;
    double hinge = 0.0;
    for (const auto& s : corpus) {
        double y = s.label == Label::Malicious ? 1.0 : -1.0;
        double margin = y * (dot_bits(weights, s.vector) + bias);
        hinge += std::max(0.0, 1.0 - margin);
    }
    return 0.5 * regularization * norm2 + hinge / static_cast<double>(corpus.size());
}

TrainedModel train_linear_svm(const Corpus& corpus, const SvmHyper& hyper) {
    require_both_labels(corpus);
    if (hyper.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (!(hyper.regularization > 0.0)) throw ValidationError("regularization must be positive");
    std::size_t dim = corpus_dimension(corpus);
    Corpus samples = sorted_by_id(corpus);

    const double lambda = hyper.regularization;
    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    std::vector<double> w_sum(dim, 0.0);
    double b_sum = 0.0;
    std::uint64_t t = 0;

    LinearSvmModel model;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(hyper.seed, "svm-shuffle"));

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = shuffle_rng.next_below(i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t idx : order) {
            ++t;
            double eta = 1.0 / (lambda * static_cast<double>(t));
            const LabeledSample& s = samples[idx];
            double y = s.label == Label::Malicious ? 1.0 : -1.0;
            double margin = y * (dot_bits(w, s.vector) + b);
            double shrink = 1.0 - eta * lambda;
            for (double& wj : w) wj *= shrink;
            if (margin < 1.0) {
                const auto& words = s.vector.words();
                for (std::size_t wi = 0; wi < words.size(); ++wi) {
                    std::uint64_t word = words[wi];
                    while (word) {
                        unsigned bit = static_cast<unsigned>(std::countr_zero(word));
                        w[wi * 64 + bit] += eta * y;
                        word &= word - 1;
                    }
                }
                b += eta * y;
            }
            for (std::size_t j = 0; j < dim; ++j) w_sum[j] += w[j];
            b_sum += b;
        }
        if (hyper.record_objective) {
            std::vector<double> w_avg(dim);
            double inv_t = 1.0 / static_cast<double>(t);
            for (std::size_t j = 0; j < dim; ++j) w_avg[j] = w_sum[j] * inv_t;
            model.objective_trace.push_back(svm_objective(w_avg, b_sum * inv_t, samples, lambda));
        }
    }

    double inv_t = 1.0 / static_cast<double>(t);
    model.weights.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) model.weights[j] = w_sum[j] * inv_t;
    model.bias = b_sum * inv_t;

    TrainedModel out;
    out.family = ModelFamily::LinearSvm;
    out.dimension = dim;
    out.data = std::move(model);
    return out;
}

TrainedModel train_knn(const Corpus& corpus, const KnnHyper& hyper) {
    require_both_labels(corpus);
    if (hyper.k < 1 || hyper.k % 2 == 0) {
        throw ValidationError("k must be odd and positive, got " + std::to_string(hyper.k));
    }
    if (static_cast<std::size_t>(hyper.k) > corpus.size()) {
        throw ValidationError("k exceeds corpus size");
    }
    TrainedModel out;
    out.family = ModelFamily::Knn;
    out.dimension = corpus_dimension(corpus);
    out.data = KnnModel{hyper.k, sorted_by_id(corpus)};
    return out;
}

namespace {

struct TreeBuilder {
    const Corpus& samples;
    int max_depth;
    int features_per_split;
    std::size_t dim;
    Rng rng;
    ForestTree tree;

    double leaf_fraction(const std::vector<std::size_t>& idx) const {
        std::size_t malicious = 0;
        for (std::size_t i : idx) malicious += samples[i].label == Label::Malicious;
        return static_cast<double>(malicious) / static_cast<double>(idx.size());
    }

    static double gini(std::size_t malicious, std::size_t total) {
        if (total == 0) return 0.0;
        double p = static_cast<double>(malicious) / static_cast<double>(total);
        return 2.0 * p * (1.0 - p);
    }

    std::vector<int> candidate_features() {
        std::vector<int> ids(dim);
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(features_per_split) && i + 1 < dim;
             ++i) {
            std::size_t j = i + rng.next_below(dim - i);
            std::swap(ids[i], ids[j]);
        }
        ids.resize(std::min<std::size_t>(static_cast<std::size_t>(features_per_split), dim));
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    int build(std::vector<std::size_t> idx, int depth) {
        std::size_t malicious = 0;
        for (std::size_t i : idx) malicious += samples[i].label == Label::Malicious;

        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].leaf_fraction =
            static_cast<double>(malicious) / static_cast<double>(idx.size());

        bool pure = malicious == 0 || malicious == idx.size();
        if (pure || depth >= max_depth || idx.size() < 2) return node_id;

        double parent = gini(malicious, idx.size());
        double best_gain = 0.0;
        int best_feature = -1;
        for (int f : candidate_features()) {
            std::size_t n1 = 0;
            std::size_t m1 = 0;
            for (std::size_t i : idx) {
                if (samples[i].vector.get(static_cast<std::size_t>(f))) {
                    ++n1;
                    m1 += samples[i].label == Label::Malicious;
                }
            }
            std::size_t n0 = idx.size() - n1;
            if (n0 == 0 || n1 == 0) continue;
            std::size_t m0 = malicious - m1;
            double weighted = (static_cast<double>(n0) * gini(m0, n0) +
                               static_cast<double>(n1) * gini(m1, n1)) /
                              static_cast<double>(idx.size());
            double gain = parent - weighted;
            if (gain > best_gain + 1e-12) {
                best_gain = gain;
                best_feature = f;
            }
        }
        if (best_feature < 0) return node_id;

        std::vector<std::size_t> left_idx;
        std::vector<std::size_t> right_idx;
        for (std::size_t i : idx) {
            (samples[i].vector.get(static_cast<std::size_t>(best_feature)) ? right_idx : left_idx)
                .push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();
        int left = build(std::move(left_idx), depth + 1);
        int right = build(std::move(right_idx), depth + 1);
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].left = left;
        tree.nodes[node_id].right = right;
        return node_id;
    }
};

} // namespace

TrainedModel train_forest(const Corpus& corpus, const ForestHyper& hyper) {
    require_both_labels(corpus);
    if (hyper.n_trees < 1) throw ValidationError("forest needs at least one tree");
    if (hyper.max_depth < 1) throw ValidationError("max_depth must be >= 1");
    std::size_t dim = corpus_dimension(corpus);
    Corpus samples = sorted_by_id(corpus);
    int fps = hyper.features_per_split;
    if (fps <= 0) fps = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(dim))));

    ForestModel model;
    model.trees.resize(static_cast<std::size_t>(hyper.n_trees));
    for (int t = 0; t < hyper.n_trees; ++t) {
        Rng tree_rng(derive_seed(hyper.seed, "tree", static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> bootstrap(samples.size());
        for (auto& b : bootstrap) b = tree_rng.next_below(samples.size());
        // a bootstrap can miss one class entirely; the root leaf fraction still
        // gives a usable vote
        TreeBuilder builder{samples, hyper.max_depth, fps, dim, std::move(tree_rng), {}};
        builder.build(std::move(bootstrap), 0);
        model.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
    }

    TrainedModel out;
    out.family = ModelFamily::Forest;
    out.dimension = dim;
    out.data = std::move(model);
    return out;
}

namespace {

double forest_tree_fraction(const ForestTree& tree, const FeatureVector& x) {
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const ForestNode& n = tree.nodes[static_cast<std::size_t>(node)];
        node = x.get(static_cast<std::size_t>(n.feature)) ? n.right : n.left;
    }
    return tree.nodes[static_cast<std::size_t>(node)].leaf_fraction;
}

} // namespace

double decision_score(const TrainedModel& model, const FeatureVector& x) {
    if (x.size() != model.dimension) {
        throw ValidationError("input dimension " + std::to_string(x.size()) +
                              " does not match model dimension " + std::to_string(model.dimension));
    }
    switch (model.family) {
        case ModelFamily::LinearSvm: {
            const auto& m = std::get<LinearSvmModel>(model.data);
            return dot_bits(m.weights, x) + m.bias;
        }
        case ModelFamily::Logistic: {
            const auto& m = std::get<LogisticModel>(model.data);
            return dot_bits(m.weights, x) + m.bias;
        }
        case ModelFamily::Knn: {
            const auto& m = std::get<KnnModel>(model.data);
            std::vector<std::pair<std::size_t, std::size_t>> dist_idx; // (distance, index)
            dist_idx.reserve(m.samples.size());
            for (std::size_t i = 0; i < m.samples.size(); ++i) {
                dist_idx.emplace_back(hamming_distance(m.samples[i].vector, x), i);
            }
            // samples are id-sorted, so (distance, index) order realizes the
            // "ties by ascending sample_id" rule
            std::size_t k = static_cast<std::size_t>(m.k);
            std::nth_element(dist_idx.begin(), dist_idx.begin() + static_cast<std::ptrdiff_t>(k - 1),
                             dist_idx.end());
            std::sort(dist_idx.begin(), dist_idx.begin() + static_cast<std::ptrdiff_t>(k));
            std::size_t malicious = 0;
            for (std::size_t i = 0; i < k; ++i) {
                malicious += m.samples[dist_idx[i].second].label == Label::Malicious;
            }
            double fraction = static_cast<double>(malicious) / static_cast<double>(k);
            return (fraction - 0.5) * 2.0;
        }
        case ModelFamily::Forest: {
            const auto& m = std::get<ForestModel>(model.data);
            double sum = 0.0;
            for (const auto& tree : m.trees) sum += forest_tree_fraction(tree, x);
            double fraction = sum / static_cast<double>(m.trees.size());
            return (fraction - 0.5) * 2.0;
        }
    }
    throw RuntimeError("unknown model family");
}

EvalReport evaluate(const TrainedModel& model, const Corpus& test) {
    if (test.empty()) throw ValidationError("evaluation on an empty corpus");
    EvalReport report;
    for (const auto& s : test) {
        bool predicted_malicious = predict(model, s.vector) == Label::Malicious;
        bool actually_malicious = s.label == Label::Malicious;
        if (predicted_malicious && actually_malicious) ++report.tp;
        else if (!predicted_malicious && !actually_malicious) ++report.tn;
        else if (predicted_malicious) ++report.fp;
        else ++report.fn;
    }
    return report;
}

std::string eval_report_json(const EvalReport& r) {
    json j{{"tp", r.tp},       {"tn", r.tn},
           {"fp", r.fp},       {"fn", r.fn},
           {"accuracy", r.accuracy()}, {"fn_rate", r.fn_rate()}};
    return j.dump();
}

std::string eval_report_csv_header() { return "tp,tn,fp,fn,accuracy,fn_rate"; }

std::string eval_report_csv_row(const EvalReport& r) {
    return std::to_string(r.tp) + "," + std::to_string(r.tn) + "," + std::to_string(r.fp) + "," +
           std::to_string(r.fn) + "," + fixed4(r.accuracy()) + "," + fixed4(r.fn_rate());
}

namespace {

json vector_to_json(const FeatureVector& v) {
    std::vector<std::uint8_t> bytes((v.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v.get(i)) bytes[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    }
    return base64_encode(bytes);
}

FeatureVector vector_from_json(const json& j, std::size_t size) {
    auto bytes = base64_decode(j.get<std::string>());
    FeatureVector v(size);
    for (std::size_t i = 0; i < size; ++i) {
        if ((i >> 3) < bytes.size() && ((bytes[i >> 3] >> (i & 7)) & 1u)) v.set(i, true);
    }
    return v;
}

json tree_to_json(const ForestTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
        nodes.push_back({n.feature, n.left, n.right, n.leaf_fraction});
    }
    return nodes;
}

ForestTree tree_from_json(const json& j) {
    ForestTree tree;
    for (const auto& n : j) {
        ForestNode node;
        node.feature = n.at(0).get<int>();
        node.left = n.at(1).get<int>();
        node.right = n.at(2).get<int>();
        node.leaf_fraction = n.at(3).get<double>();
        tree.nodes.push_back(node);
    }
    return tree;
}

} // namespace

std::string serialize_model(const TrainedModel& model) {
    json j{{"format", "kuafu-model"}, {"version", 1}, {"family", family_code(model.family)},
           {"dimension", model.dimension}};
    switch (model.family) {
        case ModelFamily::LinearSvm: {
            const auto& m = std::get<LinearSvmModel>(model.data);
            j["weights"] = m.weights;
            j["bias"] = m.bias;
            if (!m.objective_trace.empty()) j["objective_trace"] = m.objective_trace;
            break;
        }
        case ModelFamily::Logistic: {
            const auto& m = std::get<LogisticModel>(model.data);
            j["weights"] = m.weights;
            j["bias"] = m.bias;
            break;
        }
        case ModelFamily::Knn: {
            const auto& m = std::get<KnnModel>(model.data);
            j["k"] = m.k;
            json samples = json::array();
            for (const auto& s : m.samples) {
                samples.push_back({{"id", s.sample_id},
                                   {"label", static_cast<int>(s.label)},
                                   {"bits", vector_to_json(s.vector)},
                                   {"provenance", provenance_code(s.provenance)}});
            }
            j["samples"] = std::move(samples);
            break;
        }
        case ModelFamily::Forest: {
            const auto& m = std::get<ForestModel>(model.data);
            json trees = json::array();
            for (const auto& tree : m.trees) trees.push_back(tree_to_json(tree));
            j["trees"] = std::move(trees);
            break;
        }
    }
    return j.dump();
}

TrainedModel deserialize_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad model file: ") + e.what());
    }
    if (j.value("format", "") != "kuafu-model" || j.value("version", 0) != 1) {
        throw ValidationError("unsupported model format/version");
    }
    TrainedModel model;
    model.dimension = j.at("dimension").get<std::size_t>();
    std::string family = j.at("family").get<std::string>();
    try {
        if (family == "linear_svm" || family == "logistic") {
            std::vector<double> weights = j.at("weights").get<std::vector<double>>();
            double bias = j.at("bias").get<double>();
            if (weights.size() != model.dimension) {
                throw ValidationError("model weight length does not match dimension");
            }
            if (family == "linear_svm") {
                LinearSvmModel m;
                m.weights = std::move(weights);
                m.bias = bias;
                if (j.contains("objective_trace")) {
                    m.objective_trace = j["objective_trace"].get<std::vector<double>>();
                }
                model.family = ModelFamily::LinearSvm;
                model.data = std::move(m);
            } else {
                model.family = ModelFamily::Logistic;
                model.data = LogisticModel{std::move(weights), bias};
            }
        } else if (family == "knn") {
            KnnModel m;
            m.k = j.at("k").get<int>();
            for (const auto& rec : j.at("samples")) {
                LabeledSample s;
                s.sample_id = rec.at("id").get<std::string>();
                s.label = static_cast<Label>(rec.at("label").get<int>());
                auto prov = provenance_from_code(rec.at("provenance").get<std::string>());
                if (!prov) throw ValidationError("unknown provenance in model");
                s.provenance = *prov;
                s.vector = vector_from_json(rec.at("bits"), model.dimension);
                m.samples.push_back(std::move(s));
            }
            model.family = ModelFamily::Knn;
            model.data = std::move(m);
        } else if (family == "forest") {
            ForestModel m;
            for (const auto& tree : j.at("trees")) m.trees.push_back(tree_from_json(tree));
            model.family = ModelFamily::Forest;
            model.data = std::move(m);
        } else {
            throw ValidationError("unknown model family: " + family);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad model file: ") + e.what());
    }
    return model;
}

} // namespace kuafu
