#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "kuafu/catalog.hpp"

namespace kuafu {

// Seeded Bernoulli-mixture generator standing in for a real app corpus.
// Indicative features fire at the `p_*` rate on their own class and at the
// `q_*` rate on the other one; every bit is then flipped with `noise_rate`.
struct GeneratorSpec {
    FeatureCatalog catalog;
    std::size_t n_benign = 2000;
    std::size_t n_malicious = 2000;
    double p_benign = 0.6;     // benign-indicative on benign samples
    double q_benign = 0.05;    // benign-indicative on malicious samples
    double p_malicious = 0.6;  // malicious-indicative on malicious samples
    double q_malicious = 0.05; // malicious-indicative on benign samples
    double p_sequence = 0.6;   // sequence features on malicious samples
    double q_sequence = 0.05;  // sequence features on benign samples
    double noise_rate = 0.02;
    std::uint64_t seed = 1;
    // (rate on benign, rate on malicious) overriding the kind defaults; lets
    // raw feature spaces carry deliberately uninformative features.
    std::map<int, std::pair<double, double>> rate_overrides;

    std::string sha256() const;
};

Corpus generate_corpus(const GeneratorSpec& spec);

// corpus.jsonl: line 1 is {"catalog_sha256","spec_sha256","n"}; each further
// line is {"id","label","bits","provenance"} with bits as a base64 packed
// little-endian bitset.
std::string serialize_corpus(const Corpus& corpus, const FeatureCatalog& catalog,
                             const std::string& spec_sha256);
Corpus parse_corpus(const std::string& text, const FeatureCatalog& catalog);

void save_corpus(const Corpus& corpus, const FeatureCatalog& catalog,
                 const std::string& spec_sha256, const std::string& path);
Corpus load_corpus(const std::string& path, const FeatureCatalog& catalog);

// Stratified split; test gets round(fraction * n) of each class.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed);

std::size_t count_label(const Corpus& corpus, Label label);

} // namespace kuafu
