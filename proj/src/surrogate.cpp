#include "kuafu/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "kuafu/error.hpp"

namespace kuafu {

namespace {

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

TrainedModel train_surrogate(const Corpus& corpus, const LogisticHyper& hyper) {
    if (corpus.empty()) throw ValidationError("empty training corpus");
    if (hyper.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (!(hyper.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    bool has_benign = false;
    bool has_malicious = false;
    std::size_t dim = corpus.front().vector.size();
    for (const auto& s : corpus) {
        if (s.vector.size() != dim) throw ValidationError("corpus has inconsistent dimensions");
        has_benign |= s.label == Label::Benign;
        has_malicious |= s.label == Label::Malicious;
    }
    if (!has_benign || !has_malicious) {
        throw ValidationError("degenerate training set: needs both labels");
    }

    // full-batch gradient descent on mean cross-entropy; deterministic by
    // construction, seed is kept for interface parity with the classifiers
    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    std::vector<double> grad(dim, 0.0);
    const double inv_n = 1.0 / static_cast<double>(corpus.size());
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (const auto& s : corpus) {
            double z = b;
            const auto& words = s.vector.words();
            for (std::size_t wi = 0; wi < words.size(); ++wi) {
                std::uint64_t word = words[wi];
                while (word) {
                    unsigned bit = static_cast<unsigned>(std::countr_zero(word));
                    z += w[wi * 64 + bit];
                    word &= word - 1;
                }
            }
            double err = sigmoid(z) - (s.label == Label::Malicious ? 1.0 : 0.0);
            grad_b += err;
            for (std::size_t wi = 0; wi < words.size(); ++wi) {
                std::uint64_t word = words[wi];
                while (word) {
                    unsigned bit = static_cast<unsigned>(std::countr_zero(word));
                    grad[wi * 64 + bit] += err;
                    word &= word - 1;
                }
            }
        }
        for (std::size_t j = 0; j < dim; ++j) w[j] -= hyper.learning_rate * grad[j] * inv_n;
        b -= hyper.learning_rate * grad_b * inv_n;
    }

    TrainedModel model;
    model.family = ModelFamily::Logistic;
    model.dimension = dim;
    model.data = LogisticModel{std::move(w), b};
    return model;
}

double surrogate_f1(const TrainedModel& model, const FeatureVector& x) {
    if (model.family != ModelFamily::Logistic) {
        throw ValidationError("surrogate operations need a logistic model");
    }
    return sigmoid(decision_score(model, x));
}

std::vector<double> gradient_wrt_input(const TrainedModel& model, const FeatureVector& x,
                                       int target_class) {
    if (model.family != ModelFamily::Logistic) {
        throw ValidationError("surrogate operations need a logistic model");
    }
    if (target_class != 0 && target_class != 1) {
        throw ValidationError("target class must be 0 or 1");
    }
    if (x.size() != model.dimension) {
        throw ValidationError("input dimension does not match surrogate dimension");
    }
    const auto& m = std::get<LogisticModel>(model.data);
    double f1 = surrogate_f1(model, x);
    double scale = f1 * (1.0 - f1);
    if (target_class == 0) scale = -scale;
    std::vector<double> grad(model.dimension);
    for (std::size_t j = 0; j < model.dimension; ++j) grad[j] = scale * m.weights[j];
    return grad;
}

} // namespace kuafu
