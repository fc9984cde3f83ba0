#pragma once

#include <cstdint>
#include <vector>

#include "kuafu/classifiers.hpp"

namespace kuafu {

// Differentiable two-class stand-in for the victim classifiers; the crafting
// loop reads its input gradient. Outputs satisfy f0(x) + f1(x) = 1 exactly
// because f0 is defined as 1 - f1.
struct LogisticHyper {
    int epochs = 400;
    double learning_rate = 0.1;
    std::uint64_t seed = 1;
};

TrainedModel train_surrogate(const Corpus& corpus, const LogisticHyper& hyper);

// P(malicious | x) for the logistic surrogate.
double surrogate_f1(const TrainedModel& model, const FeatureVector& x);
inline double surrogate_f0(const TrainedModel& model, const FeatureVector& x) {
    return 1.0 - surrogate_f1(model, x);
}

// d f_target / d x_j for every feature j, treating x as real-valued at the
// binary point. For target 1 this is f1(1-f1) * w; target 0 is its negation.
std::vector<double> gradient_wrt_input(const TrainedModel& model, const FeatureVector& x,
                                       int target_class);

} // namespace kuafu
