#include "kuafu/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kuafu/io_util.hpp"
#include "kuafu/parallel.hpp"
#include "kuafu/rng.hpp"

namespace kuafu {

using nlohmann::json;

namespace {

void check_rate(double rate, const char* name) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw ValidationError(std::string(name) + " must be in [0,1], got " + std::to_string(rate));
    }
}

std::vector<std::uint8_t> pack_bits(const FeatureVector& v) {
    std::vector<std::uint8_t> bytes((v.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v.get(i)) bytes[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    }
    return bytes;
}

FeatureVector unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t size) {
    FeatureVector v(size);
    for (std::size_t i = 0; i < size; ++i) {
        if ((i >> 3) < bytes.size() && ((bytes[i >> 3] >> (i & 7)) & 1u)) v.set(i, true);
    }
    return v;
}

} // namespace

std::string GeneratorSpec::sha256() const {
    json j{{"catalog_sha256", catalog.sha256()},
           {"n_benign", n_benign},
           {"n_malicious", n_malicious},
           {"p_benign", p_benign},
           {"q_benign", q_benign},
           {"p_malicious", p_malicious},
           {"q_malicious", q_malicious},
           {"p_sequence", p_sequence},
           {"q_sequence", q_sequence},
           {"noise_rate", noise_rate},
           {"seed", seed}};
    if (!rate_overrides.empty()) {
        json o = json::object();
        for (const auto& [id, rates] : rate_overrides) {
            o[std::to_string(id)] = {rates.first, rates.second};
        }
        j["rate_overrides"] = std::move(o);
    }
    return sha256_hex(j.dump());
}

Corpus generate_corpus(const GeneratorSpec& spec) {
    check_rate(spec.p_benign, "p_benign");
    check_rate(spec.q_benign, "q_benign");
    check_rate(spec.p_malicious, "p_malicious");
    check_rate(spec.q_malicious, "q_malicious");
    check_rate(spec.p_sequence, "p_sequence");
    check_rate(spec.q_sequence, "q_sequence");
    check_rate(spec.noise_rate, "noise_rate");
    for (const auto& [id, rates] : spec.rate_overrides) {
        if (id < 0 || static_cast<std::size_t>(id) >= spec.catalog.size()) {
            throw ValidationError("rate override for unknown feature id " + std::to_string(id));
        }
        check_rate(rates.first, "rate override (benign)");
        check_rate(rates.second, "rate override (malicious)");
    }
    if (spec.n_malicious == 0) throw ValidationError("corpus needs at least one malicious sample");
    if (spec.n_benign == 0) throw ValidationError("corpus needs at least one benign sample");

    const std::size_t m = spec.catalog.size();
    // per-feature firing rate on (benign, malicious) samples
    std::vector<std::pair<double, double>> rates(m);
    for (std::size_t j = 0; j < m; ++j) {
        const FeatureDef& f = spec.catalog.feature(j);
        if (auto it = spec.rate_overrides.find(static_cast<int>(j)); it != spec.rate_overrides.end()) {
            rates[j] = it->second;
        } else if (f.kind == FeatureKind::Sequence) {
            rates[j] = {spec.q_sequence, spec.p_sequence};
        } else if (f.indicativeness == Indicativeness::BenignIndicative) {
            rates[j] = {spec.p_benign, spec.q_benign};
        } else {
            rates[j] = {spec.q_malicious, spec.p_malicious};
        }
    }

    std::size_t total = spec.n_benign + spec.n_malicious;
    Corpus corpus(total);
    parallel_for(total, [&](std::size_t i) {
        bool malicious = i >= spec.n_benign;
        LabeledSample s;
        char id_buf[24];
        std::snprintf(id_buf, sizeof(id_buf), "%c%06zu", malicious ? 'm' : 'b',
                      malicious ? i - spec.n_benign : i);
        s.sample_id = id_buf;
        s.label = malicious ? Label::Malicious : Label::Benign;
        s.provenance = Provenance::Original;
        s.vector = FeatureVector(m);
        Rng rng(derive_seed(spec.seed, "sample", i));
        for (std::size_t j = 0; j < m; ++j) {
            double rate = malicious ? rates[j].second : rates[j].first;
            bool bit = rng.next_bernoulli(rate);
            if (rng.next_bernoulli(spec.noise_rate)) bit = !bit;
            if (bit) s.vector.set(j, true);
        }
        corpus[i] = std::move(s);
    });
    return corpus;
}

std::string serialize_corpus(const Corpus& corpus, const FeatureCatalog& catalog,
                             const std::string& spec_sha256) {
    std::ostringstream out;
    json header{{"catalog_sha256", catalog.sha256()},
                {"spec_sha256", spec_sha256},
                {"n", corpus.size()}};
    out << header.dump() << '\n';
    for (const auto& s : corpus) {
        if (s.vector.size() != catalog.size()) {
            throw ValidationError("sample " + s.sample_id + " does not match catalog dimension");
        }
        json rec{{"id", s.sample_id},
                 {"label", static_cast<int>(s.label)},
                 {"bits", base64_encode(pack_bits(s.vector))},
                 {"provenance", provenance_code(s.provenance)}};
        out << rec.dump() << '\n';
    }
    return out.str();
}

Corpus parse_corpus(const std::string& text, const FeatureCatalog& catalog) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("corpus file is empty");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad corpus header: ") + e.what(), 1);
    }
    if (!header.contains("catalog_sha256") || !header.contains("n")) {
        throw ParseError("corpus header must declare catalog_sha256 and n", 1);
    }
    if (header["catalog_sha256"].get<std::string>() != catalog.sha256()) {
        throw ValidationError("catalog drift: corpus was built against a different catalog");
    }
    std::size_t declared = header["n"].get<std::size_t>();

    Corpus corpus;
    corpus.reserve(declared);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad corpus record: ") + e.what(), line_no);
        }
        LabeledSample s;
        try {
            s.sample_id = rec.at("id").get<std::string>();
            int label = rec.at("label").get<int>();
            if (label != 0 && label != 1) {
                throw ValidationError("label must be 0 or 1");
            }
            s.label = static_cast<Label>(label);
            auto prov = provenance_from_code(rec.at("provenance").get<std::string>());
            if (!prov) throw ValidationError("unknown provenance");
            s.provenance = *prov;
            s.vector = unpack_bits(base64_decode(rec.at("bits").get<std::string>()),
                                   catalog.size());
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad corpus record: ") + e.what(), line_no);
        }
        corpus.push_back(std::move(s));
    }
    if (corpus.size() != declared) {
        throw ValidationError("corpus truncated: header declares " + std::to_string(declared) +
                              " records, found " + std::to_string(corpus.size()) +
                              " (last record " + std::to_string(corpus.size()) + ")");
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const FeatureCatalog& catalog,
                 const std::string& spec_sha256, const std::string& path) {
    write_file_atomic(path, serialize_corpus(corpus, catalog, spec_sha256));
}

Corpus load_corpus(const std::string& path, const FeatureCatalog& catalog) {
    return parse_corpus(read_file(path), catalog);
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError("test fraction must be in (0,1)");
    }
    std::vector<std::size_t> benign_idx;
    std::vector<std::size_t> malicious_idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        (corpus[i].label == Label::Malicious ? malicious_idx : benign_idx).push_back(i);
    }
    if (benign_idx.size() < 2 || malicious_idx.size() < 2) {
        throw ValidationError("each class needs at least 2 samples to split");
    }

    Corpus train;
    Corpus test;
    auto assign = [&](std::vector<std::size_t>& idx, const char* tag) {
        Rng rng(derive_seed(seed, tag));
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::size_t j = rng.next_below(i);
            std::swap(idx[i - 1], idx[j]);
        }
        std::size_t test_count = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(idx.size())));
        test_count = std::clamp<std::size_t>(test_count, 1, idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < test_count ? test : train).push_back(corpus[idx[i]]);
        }
    };
    assign(benign_idx, "split-benign");
    assign(malicious_idx, "split-malicious");

    // stable presentation order regardless of shuffle internals
    auto by_id = [](const LabeledSample& a, const LabeledSample& b) {
        return a.sample_id < b.sample_id;
    };
    std::sort(train.begin(), train.end(), by_id);
    std::sort(test.begin(), test.end(), by_id);
    return {std::move(train), std::move(test)};
}

std::size_t count_label(const Corpus& corpus, Label label) {
    std::size_t n = 0;
    for (const auto& s : corpus) n += s.label == label;
    return n;
}

} // namespace kuafu
