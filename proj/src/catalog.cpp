#include "kuafu/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kuafu/io_util.hpp"

namespace kuafu {

namespace {

double entropy2(double p) {
    // binary entropy with the 0*log0 = 0 convention
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

} // namespace

const char* kind_code(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::Permission: return "PERM";
        case FeatureKind::Intent: return "INT";
        case FeatureKind::Hardware: return "HW";
        case FeatureKind::ApiCall: return "API";
        case FeatureKind::Sequence: return "SEQ";
    }
    return "?";
}

std::optional<FeatureKind> kind_from_code(const std::string& code) {
    if (code == "PERM") return FeatureKind::Permission;
    if (code == "INT") return FeatureKind::Intent;
    if (code == "HW") return FeatureKind::Hardware;
    if (code == "API") return FeatureKind::ApiCall;
    if (code == "SEQ") return FeatureKind::Sequence;
    return std::nullopt;
}

const char* provenance_code(Provenance p) {
    switch (p) {
        case Provenance::Original: return "original";
        case Provenance::Crafted: return "crafted";
        case Provenance::Relabeled: return "relabeled";
    }
    return "?";
}

std::optional<Provenance> provenance_from_code(const std::string& code) {
    if (code == "original") return Provenance::Original;
    if (code == "crafted") return Provenance::Crafted;
    if (code == "relabeled") return Provenance::Relabeled;
    return std::nullopt;
}

FeatureCatalog::FeatureCatalog(std::vector<FeatureDef> features) : features_(std::move(features)) {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        features_[i].id = static_cast<int>(i);
        auto [it, inserted] = index_.emplace(features_[i].name, static_cast<int>(i));
        if (!inserted) {
            throw ValidationError("duplicate feature name: " + features_[i].name);
        }
    }
}

KindCounts FeatureCatalog::kind_counts() const {
    KindCounts c;
    for (const auto& f : features_) {
        switch (f.kind) {
            case FeatureKind::Permission: ++c.permission; break;
            case FeatureKind::Intent: ++c.intent; break;
            case FeatureKind::Hardware: ++c.hardware; break;
            case FeatureKind::ApiCall: ++c.api_call; break;
            case FeatureKind::Sequence: ++c.sequence; break;
        }
    }
    return c;
}

std::optional<int> FeatureCatalog::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> FeatureCatalog::syntax_ids() const {
    std::vector<int> ids;
    ids.reserve(features_.size());
    for (const auto& f : features_) {
        if (is_syntax_kind(f.kind)) ids.push_back(f.id);
    }
    return ids;
}

int FeatureCatalog::syntax_count() const {
    return static_cast<int>(syntax_ids().size());
}

std::pair<int, int> FeatureCatalog::syntax_indicativeness_counts() const {
    int benign = 0;
    int malicious = 0;
    for (const auto& f : features_) {
        if (!is_syntax_kind(f.kind)) continue;
        if (f.indicativeness == Indicativeness::BenignIndicative) {
            ++benign;
        } else {
            ++malicious;
        }
    }
    return {benign, malicious};
}

bool FeatureCatalog::is_canonical_shape() const {
    KindCounts c = kind_counts();
    if (!(c.permission == 61 && c.intent == 12 && c.hardware == 5 && c.api_call == 97 &&
          c.sequence == 20)) {
        return false;
    }
    auto [benign, malicious] = syntax_indicativeness_counts();
    return benign == 73 && malicious == 102;
}

std::string FeatureCatalog::canonical_text() const {
    std::ostringstream out;
    for (const auto& f : features_) {
        out << f.name << '\t' << kind_code(f.kind) << '\t'
            << (f.indicativeness == Indicativeness::BenignIndicative ? 'B' : 'M') << '\n';
    }
    return out.str();
}

std::string FeatureCatalog::sha256() const { return sha256_hex(canonical_text()); }

FeatureCatalog FeatureCatalog::with_sequence_patterns(
    const std::map<std::string, std::vector<std::string>>& patterns) const {
    std::vector<FeatureDef> defs = features_;
    for (auto& f : defs) {
        if (f.kind != FeatureKind::Sequence) continue;
        auto it = patterns.find(f.name);
        if (it != patterns.end()) f.sequence_pattern = it->second;
    }
    return FeatureCatalog(std::move(defs));
}

FeatureCatalog parse_catalog(const std::string& text) {
    std::vector<FeatureDef> defs;
    std::optional<KindCounts> declared;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty()) continue;
        if (stripped[0] == '#') {
            if (stripped.rfind("#counts", 0) == 0) {
                KindCounts c;
                std::istringstream cs(stripped.substr(7));
                std::string item;
                while (cs >> item) {
                    auto eq = item.find('=');
                    if (eq == std::string::npos) {
                        throw ParseError("malformed #counts entry '" + item + "'", line_no);
                    }
                    int value = 0;
                    try {
                        value = std::stoi(item.substr(eq + 1));
                    } catch (const std::exception&) {
                        throw ParseError("malformed #counts value '" + item + "'", line_no);
                    }
                    std::string key = item.substr(0, eq);
                    if (key == "PERM") c.permission = value;
                    else if (key == "INT") c.intent = value;
                    else if (key == "HW") c.hardware = value;
                    else if (key == "API") c.api_call = value;
                    else if (key == "SEQ") c.sequence = value;
                    else throw ParseError("unknown kind in #counts: " + key, line_no);
                }
                declared = c;
            }
            continue;
        }
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 3) {
            throw ParseError("expected 3 tab-separated fields, got " + std::to_string(cols.size()),
                             line_no);
        }
        FeatureDef f;
        f.name = trim(cols[0]);
        if (f.name.empty()) throw ParseError("empty feature name", line_no);
        auto kind = kind_from_code(trim(cols[1]));
        if (!kind) throw ParseError("unknown feature kind '" + trim(cols[1]) + "'", line_no);
        f.kind = *kind;
        std::string ind = trim(cols[2]);
        if (ind == "B") f.indicativeness = Indicativeness::BenignIndicative;
        else if (ind == "M") f.indicativeness = Indicativeness::MaliciousIndicative;
        else throw ParseError("indicativeness must be B or M, got '" + ind + "'", line_no);
        for (const auto& existing : defs) {
            if (existing.name == f.name) {
                throw ParseError("duplicate feature name: " + f.name, line_no);
            }
        }
        defs.push_back(std::move(f));
    }
    if (defs.empty()) throw ValidationError("empty catalog");
    FeatureCatalog catalog(std::move(defs));
    if (declared && !(catalog.kind_counts() == *declared)) {
        KindCounts got = catalog.kind_counts();
        throw ValidationError("catalog kind counts do not match declared totals: got PERM=" +
                              std::to_string(got.permission) + " INT=" + std::to_string(got.intent) +
                              " HW=" + std::to_string(got.hardware) + " API=" +
                              std::to_string(got.api_call) + " SEQ=" + std::to_string(got.sequence));
    }
    return catalog;
}

FeatureCatalog load_catalog(const std::string& path) { return parse_catalog(read_file(path)); }

std::map<std::string, std::vector<std::string>> parse_sequence_patterns(const std::string& text) {
    std::map<std::string, std::vector<std::string>> patterns;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 2) {
            throw ParseError("expected `name<TAB>tokens`, got " + std::to_string(cols.size()) +
                             " fields", line_no);
        }
        std::string name = trim(cols[0]);
        std::vector<std::string> tokens;
        for (const auto& tok : split(cols[1], '|')) {
            std::string t = trim(tok);
            if (!t.empty()) tokens.push_back(t);
        }
        if (name.empty() || tokens.empty()) {
            throw ParseError("empty pattern name or token list", line_no);
        }
        if (!patterns.emplace(name, std::move(tokens)).second) {
            throw ParseError("duplicate pattern for sequence: " + name, line_no);
        }
    }
    return patterns;
}

std::map<std::string, std::vector<std::string>> load_sequence_patterns(const std::string& path) {
    return parse_sequence_patterns(read_file(path));
}

double information_gain(const Corpus& corpus, int feature_id) {
    if (corpus.empty()) throw ValidationError("information gain over an empty corpus");
    std::size_t n = corpus.size();
    std::size_t malicious = 0;
    std::size_t bit_set = 0;
    std::size_t bit_set_and_malicious = 0;
    for (const auto& s : corpus) {
        if (feature_id < 0 || static_cast<std::size_t>(feature_id) >= s.vector.size()) {
            throw ValidationError("feature id out of range: " + std::to_string(feature_id));
        }
        bool m = s.label == Label::Malicious;
        bool b = s.vector.get(static_cast<std::size_t>(feature_id));
        malicious += m;
        bit_set += b;
        bit_set_and_malicious += (m && b);
    }
    double h_label = entropy2(static_cast<double>(malicious) / static_cast<double>(n));
    double p1 = static_cast<double>(bit_set) / static_cast<double>(n);
    double h_cond = 0.0;
    if (bit_set > 0) {
        h_cond += p1 * entropy2(static_cast<double>(bit_set_and_malicious) /
                                static_cast<double>(bit_set));
    }
    std::size_t bit_clear = n - bit_set;
    if (bit_clear > 0) {
        h_cond += (1.0 - p1) * entropy2(static_cast<double>(malicious - bit_set_and_malicious) /
                                        static_cast<double>(bit_clear));
    }
    return std::max(0.0, h_label - h_cond);
}

FeatureCatalog select_top_features(const Corpus& corpus, const FeatureCatalog& raw_catalog,
                                   std::size_t k, const std::set<std::string>& pinned) {
    if (k > raw_catalog.size()) {
        throw ValidationError("cannot select " + std::to_string(k) + " features from a catalog of " +
                              std::to_string(raw_catalog.size()));
    }
    if (k < pinned.size()) {
        throw ValidationError("k (" + std::to_string(k) + ") is smaller than the pinned set (" +
                              std::to_string(pinned.size()) + ")");
    }
    std::vector<bool> keep(raw_catalog.size(), false);
    for (const auto& name : pinned) {
        auto id = raw_catalog.find(name);
        if (!id) throw ValidationError("pinned feature not in catalog: " + name);
        keep[static_cast<std::size_t>(*id)] = true;
    }

    std::vector<double> gains(raw_catalog.size(), 0.0);
    for (std::size_t id = 0; id < raw_catalog.size(); ++id) {
        gains[id] = information_gain(corpus, static_cast<int>(id));
    }
    std::vector<int> order(raw_catalog.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    // descending gain, ties by catalog order
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return gains[static_cast<std::size_t>(a)] >
                                                gains[static_cast<std::size_t>(b)]; });

    std::size_t selected = pinned.size();
    for (int id : order) {
        if (selected == k) break;
        if (!keep[static_cast<std::size_t>(id)]) {
            keep[static_cast<std::size_t>(id)] = true;
            ++selected;
        }
    }

    std::vector<FeatureDef> defs;
    defs.reserve(k);
    for (std::size_t id = 0; id < raw_catalog.size(); ++id) {
        if (keep[id]) defs.push_back(raw_catalog.feature(id));
    }
    return FeatureCatalog(std::move(defs));
}

FeatureCatalog with_doc_frequencies(const FeatureCatalog& catalog, const Corpus& corpus) {
    std::vector<FeatureDef> defs = catalog.features();
    if (corpus.empty()) throw ValidationError("doc frequencies over an empty corpus");
    for (auto& f : defs) {
        if (!is_syntax_kind(f.kind)) {
            f.doc_frequency_weight = 0.0;
            continue;
        }
        std::size_t count = 0;
        for (const auto& s : corpus) {
            if (s.vector.get(static_cast<std::size_t>(f.id))) ++count;
        }
        f.doc_frequency_weight = static_cast<double>(count) / static_cast<double>(corpus.size());
    }
    return FeatureCatalog(std::move(defs));
}

std::vector<int> catalog_projection(const FeatureCatalog& from, const FeatureCatalog& to) {
    std::vector<int> mapping;
    mapping.reserve(to.size());
    for (const auto& f : to.features()) {
        auto id = from.find(f.name);
        if (!id) throw ValidationError("projection target feature missing from source: " + f.name);
        mapping.push_back(*id);
    }
    return mapping;
}

Corpus project_corpus(const Corpus& corpus, const FeatureCatalog& from, const FeatureCatalog& to) {
    std::vector<int> mapping = catalog_projection(from, to);
    Corpus out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) {
        LabeledSample p;
        p.sample_id = s.sample_id;
        p.label = s.label;
        p.provenance = s.provenance;
        p.vector = FeatureVector(to.size());
        for (std::size_t j = 0; j < mapping.size(); ++j) {
            if (s.vector.get(static_cast<std::size_t>(mapping[j]))) p.vector.set(j, true);
        }
        out.push_back(std::move(p));
    }
    return out;
}

FeatureCatalog compact_catalog() {
    struct Row {
        const char* name;
        FeatureKind kind;
        char ind;
    };
    static const Row rows[] = {
        {"ACCESS_NETWORK_STATE", FeatureKind::Permission, 'B'},
        {"BLUETOOTH", FeatureKind::Permission, 'B'},
        {"CAMERA", FeatureKind::Permission, 'B'},
        {"INTERNET", FeatureKind::Permission, 'B'},
        {"VIBRATE", FeatureKind::Permission, 'B'},
        {"WAKE_LOCK", FeatureKind::Permission, 'B'},
        {"GET_TASKS", FeatureKind::Permission, 'M'},
        {"INSTALL_PACKAGES", FeatureKind::Permission, 'M'},
        {"READ_CONTACTS", FeatureKind::Permission, 'M'},
        {"READ_PHONE_STATE", FeatureKind::Permission, 'M'},
        {"READ_SMS", FeatureKind::Permission, 'M'},
        {"RECEIVE_SMS", FeatureKind::Permission, 'M'},
        {"RECORD_AUDIO", FeatureKind::Permission, 'M'},
        {"SEND_SMS", FeatureKind::Permission, 'M'},
        {"action.MAIN", FeatureKind::Intent, 'B'},
        {"category.LAUNCHER", FeatureKind::Intent, 'B'},
        {"action.DELETE", FeatureKind::Intent, 'M'},
        {"touchscreen", FeatureKind::Hardware, 'B'},
        {"telephony", FeatureKind::Hardware, 'M'},
        {"ActivityManager.isLowRamDevice", FeatureKind::ApiCall, 'B'},
        {"HttpURLConnection.getResponseCode", FeatureKind::ApiCall, 'B'},
        {"NotificationManager.notify", FeatureKind::ApiCall, 'B'},
        {"PowerManager.isScreenOn", FeatureKind::ApiCall, 'B'},
        {"URLConnection.getURL", FeatureKind::ApiCall, 'B'},
        {"WifiManager.getWifiState", FeatureKind::ApiCall, 'B'},
        {"ContentResolver.delete", FeatureKind::ApiCall, 'M'},
        {"ContentResolver.query", FeatureKind::ApiCall, 'M'},
        {"DownloadManager.enqueue", FeatureKind::ApiCall, 'M'},
        {"LocationManager.getLastKnownLocation", FeatureKind::ApiCall, 'M'},
        {"PackageManager.checkPermission", FeatureKind::ApiCall, 'M'},
        {"Runtime.exec", FeatureKind::ApiCall, 'M'},
        {"Runtime.getRuntime", FeatureKind::ApiCall, 'M'},
        {"SmsManager.sendTextMessage", FeatureKind::ApiCall, 'M'},
        {"TelephonyManager.getDeviceId", FeatureKind::ApiCall, 'M'},
        {"TelephonyManager.getSubscriberId", FeatureKind::ApiCall, 'M'},
        {"Request for chmod", FeatureKind::Sequence, 'M'},
        {"Send Sms", FeatureKind::Sequence, 'M'},
        {"Delete Sms", FeatureKind::Sequence, 'M'},
        {"Get contacts", FeatureKind::Sequence, 'M'},
        {"Get Logs", FeatureKind::Sequence, 'M'},
    };
    std::vector<FeatureDef> defs;
    defs.reserve(std::size(rows));
    for (const auto& row : rows) {
        FeatureDef f;
        f.name = row.name;
        f.kind = row.kind;
        f.indicativeness = row.ind == 'B' ? Indicativeness::BenignIndicative
                                          : Indicativeness::MaliciousIndicative;
        defs.push_back(std::move(f));
    }
    return FeatureCatalog(std::move(defs));
}

} // namespace kuafu
