#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kuafu/feature_vector.hpp"

namespace kuafu {

enum class FeatureKind { Permission, Intent, Hardware, ApiCall, Sequence };

// Permission/Intent/Hardware/ApiCall are syntax kinds; Sequence is the sole
// semantic kind and the only one an attacker may never touch.
inline bool is_syntax_kind(FeatureKind kind) { return kind != FeatureKind::Sequence; }

const char* kind_code(FeatureKind kind);                // PERM / INT / HW / API / SEQ
std::optional<FeatureKind> kind_from_code(const std::string& code);

enum class Indicativeness { BenignIndicative, MaliciousIndicative };

struct FeatureDef {
    int id = 0;                       // dense 0-based index within the catalog
    std::string name;
    FeatureKind kind = FeatureKind::Permission;
    Indicativeness indicativeness = Indicativeness::BenignIndicative;
    double doc_frequency_weight = 0.0; // fraction of apps exhibiting the feature; 0 until computed
    std::vector<std::string> sequence_pattern; // ordered key tokens; Sequence features only
};

struct KindCounts {
    int permission = 0;
    int intent = 0;
    int hardware = 0;
    int api_call = 0;
    int sequence = 0;

    int total() const { return permission + intent + hardware + api_call + sequence; }
    int syntax() const { return permission + intent + hardware + api_call; }
    bool operator==(const KindCounts&) const = default;
};

// Ordered, immutable feature vocabulary. Mutating operations return copies.
class FeatureCatalog {
public:
    FeatureCatalog() = default;
    explicit FeatureCatalog(std::vector<FeatureDef> features);

    std::size_t size() const { return features_.size(); }
    const FeatureDef& feature(std::size_t id) const { return features_.at(id); }
    const std::vector<FeatureDef>& features() const { return features_; }

    KindCounts kind_counts() const;
    std::optional<int> find(const std::string& name) const;

    std::vector<int> syntax_ids() const;
    int syntax_count() const;

    // Counts of benign-/malicious-indicative features among the syntax kinds.
    std::pair<int, int> syntax_indicativeness_counts() const;

    // True for the 61/12/5/97/20 vocabulary with the 73/102 syntax split.
    bool is_canonical_shape() const;

    // Canonical text rendering (also the on-disk format); hashed into corpus
    // and model headers to detect catalog drift.
    std::string canonical_text() const;
    std::string sha256() const;

    FeatureCatalog with_sequence_patterns(const std::map<std::string, std::vector<std::string>>& patterns) const;

private:
    std::vector<FeatureDef> features_;
    std::map<std::string, int> index_;
};

enum class Label : int { Benign = 0, Malicious = 1 };
enum class Provenance { Original, Crafted, Relabeled };

const char* provenance_code(Provenance p);
std::optional<Provenance> provenance_from_code(const std::string& code);

struct LabeledSample {
    std::string sample_id;
    FeatureVector vector;
    Label label = Label::Benign;
    Provenance provenance = Provenance::Original;
};

using Corpus = std::vector<LabeledSample>;

// Catalog file: one feature per line, `name<TAB>kind<TAB>indicativeness`,
// kind in {PERM,INT,HW,API,SEQ}, indicativeness in {B,M}; `#` starts a
// comment. A `#counts PERM=a INT=b HW=c API=d SEQ=e` comment line, when
// present, is validated against the parsed totals.
FeatureCatalog load_catalog(const std::string& path);
FeatureCatalog parse_catalog(const std::string& text);

// Sequence-pattern file: `name<TAB>tok1|tok2|...` per line, `#` comments.
std::map<std::string, std::vector<std::string>> load_sequence_patterns(const std::string& path);
std::map<std::string, std::vector<std::string>> parse_sequence_patterns(const std::string& text);

// Shannon information gain of the label given one feature bit, in bits.
double information_gain(const Corpus& corpus, int feature_id);

// Sub-catalog of size k: all pinned names plus the rest by descending
// information gain; ties and final ordering follow catalog order.
FeatureCatalog select_top_features(const Corpus& corpus, const FeatureCatalog& raw_catalog,
                                   std::size_t k, const std::set<std::string>& pinned);

// Per-feature document frequency over `corpus` (syntax features only; other
// entries stay 0). Used by the weighted-similarity metric.
FeatureCatalog with_doc_frequencies(const FeatureCatalog& catalog, const Corpus& corpus);

// Maps feature id in `to` -> feature id in `from`, matched by name.
std::vector<int> catalog_projection(const FeatureCatalog& from, const FeatureCatalog& to);
Corpus project_corpus(const Corpus& corpus, const FeatureCatalog& from, const FeatureCatalog& to);

// Compact 40-feature vocabulary (35 syntax + 5 sequence) used as the default
// corpus for desk-scale attack/defense experiments.
FeatureCatalog compact_catalog();

} // namespace kuafu
