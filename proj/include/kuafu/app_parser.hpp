#pragma once

#include <map>
#include <string>
#include <vector>

#include "kuafu/catalog.hpp"

namespace kuafu {

// Deduplicated, order-preserving name lists from the manifest subset.
struct ManifestDoc {
    std::vector<std::string> permissions;
    std::vector<std::string> intent_actions_categories;
    std::vector<std::string> hardware_features;

    bool operator==(const ManifestDoc&) const = default;
};

struct SmaliMethod {
    std::string method_name;
    std::vector<std::string> tokens; // invokes as Class.method, string literals verbatim
};

struct SmaliClass {
    std::string class_name;
    std::vector<SmaliMethod> methods;
};

struct SmaliUnit {
    std::vector<SmaliClass> classes;
};

struct AppPackage {
    std::string app_id;
    ManifestDoc manifest;
    SmaliUnit smali;
};

// Simplified XML subset: elements uses-permission / action / category /
// uses-feature with a `name` attribute; anything else is parsed for balance
// and ignored.
ManifestDoc parse_manifest(const std::string& text);
std::string serialize_manifest(const ManifestDoc& doc);

// Line-oriented smali-lite: `.class NAME`, `.method NAME`, `.end method`,
// `invoke CLASS->METHOD`, `const-string "LITERAL"`. Unknown lines are
// ignored; structural errors are not.
SmaliUnit parse_smali(const std::string& text);

// True iff `pattern` occurs as an ordered (not necessarily contiguous)
// subsequence of `tokens`, comparing tokens for exact equality.
bool match_sequence(const std::vector<std::string>& tokens,
                    const std::vector<std::string>& pattern);

// Bit j is set iff the catalog feature j has evidence in the app: manifest
// membership for Permission/Intent/Hardware, token presence in any method
// for ApiCall, and a per-method subsequence match for Sequence features.
// Sequence features without a pattern never match.
FeatureVector extract_features(const AppPackage& app, const FeatureCatalog& catalog);

// App package on disk: a directory holding manifest.xml and code.smali.
AppPackage load_app_package(const std::string& dir, const std::string& app_id);

// Directory of app directories plus a labels map (app_id -> label).
Corpus load_app_corpus(const std::string& root, const FeatureCatalog& catalog,
                       const std::map<std::string, Label>& labels);

// labels.tsv: `app_id<TAB>B|M` per line, `#` comments.
std::map<std::string, Label> parse_labels(const std::string& text);

} // namespace kuafu
