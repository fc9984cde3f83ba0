#include "kuafu/app_parser.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "kuafu/io_util.hpp"

namespace kuafu {

namespace {

void push_unique(std::vector<std::string>& list, const std::string& value) {
    if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
}

struct XmlScanner {
    const std::string& text;
    std::size_t pos = 0;
    std::size_t line = 1;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    char take() {
        char c = text[pos++];
        if (c == '\n') ++line;
        return c;
    }

    void skip_until(const std::string& end) {
        std::size_t found = text.find(end, pos);
        if (found == std::string::npos) {
            throw ParseError("unterminated construct, expected '" + end + "'", line);
        }
        while (pos < found + end.size()) take();
    }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) take();
    }

    std::string read_name() {
        std::string name;
        while (!eof()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' ||
                c == '.') {
                name.push_back(take());
            } else {
                break;
            }
        }
        if (name.empty()) throw ParseError("expected a tag or attribute name", line);
        return name;
    }
};

} // namespace

ManifestDoc parse_manifest(const std::string& text) {
    ManifestDoc doc;
    XmlScanner s{text};
    std::vector<std::string> open_stack;

    auto record = [&](const std::string& element, const std::string& name_attr, bool has_name,
                      std::size_t line) {
        bool recognized = element == "uses-permission" || element == "action" ||
                          element == "category" || element == "uses-feature";
        if (!recognized) return;
        if (!has_name) {
            throw ParseError("element <" + element + "> is missing its name attribute", line);
        }
        if (element == "uses-permission") {
            push_unique(doc.permissions, name_attr);
        } else if (element == "uses-feature") {
            push_unique(doc.hardware_features, name_attr);
        } else {
            push_unique(doc.intent_actions_categories, name_attr);
        }
    };

    while (true) {
        while (!s.eof() && s.peek() != '<') s.take(); // character data is ignored
        if (s.eof()) break;
        std::size_t tag_line = s.line;
        s.take(); // '<'
        if (s.eof()) throw ParseError("dangling '<'", tag_line);

        if (s.peek() == '?') {
            s.skip_until("?>");
            continue;
        }
        if (text.compare(s.pos, 3, "!--") == 0) {
            s.skip_until("-->");
            continue;
        }
        if (s.peek() == '/') {
            s.take();
            std::string name = s.read_name();
            s.skip_ws();
            if (s.eof() || s.take() != '>') throw ParseError("malformed closing tag", tag_line);
            if (open_stack.empty() || open_stack.back() != name) {
                throw ParseError("unbalanced closing tag </" + name + ">", tag_line);
            }
            open_stack.pop_back();
            continue;
        }

        std::string element = s.read_name();
        std::string name_attr;
        bool has_name = false;
        bool self_closing = false;
        while (true) {
            s.skip_ws();
            if (s.eof()) throw ParseError("unterminated tag <" + element + ">", tag_line);
            char c = s.peek();
            if (c == '>') {
                s.take();
                break;
            }
            if (c == '/') {
                s.take();
                if (s.eof() || s.take() != '>') {
                    throw ParseError("malformed self-closing tag", tag_line);
                }
                self_closing = true;
                break;
            }
            std::string attr = s.read_name();
            s.skip_ws();
            if (s.eof() || s.take() != '=') {
                throw ParseError("attribute '" + attr + "' is missing '='", tag_line);
            }
            s.skip_ws();
            if (s.eof() || s.take() != '"') {
                throw ParseError("attribute '" + attr + "' value must be quoted", tag_line);
            }
            std::string value;
            while (!s.eof() && s.peek() != '"') value.push_back(s.take());
            if (s.eof()) throw ParseError("unterminated attribute value", tag_line);
            s.take(); // closing quote
            if (attr == "name") {
                name_attr = value;
                has_name = true;
            }
        }
        record(element, name_attr, has_name, tag_line);
        if (!self_closing) open_stack.push_back(element);
    }
    if (!open_stack.empty()) {
        throw ParseError("unclosed element <" + open_stack.back() + ">", s.line);
    }
    return doc;
}

std::string serialize_manifest(const ManifestDoc& doc) {
    std::ostringstream out;
    out << "<manifest>\n";
    for (const auto& p : doc.permissions) {
        out << "  <uses-permission name=\"" << p << "\"/>\n";
    }
    if (!doc.intent_actions_categories.empty()) {
        out << "  <intent-filter>\n";
        for (const auto& i : doc.intent_actions_categories) {
            // actions and categories share one list; re-emit by prefix
            out << "    <" << (i.rfind("category.", 0) == 0 ? "category" : "action") << " name=\""
                << i << "\"/>\n";
        }
        out << "  </intent-filter>\n";
    }
    for (const auto& h : doc.hardware_features) {
        out << "  <uses-feature name=\"" << h << "\"/>\n";
    }
    out << "</manifest>\n";
    return out.str();
}

SmaliUnit parse_smali(const std::string& text) {
    SmaliUnit unit;
    SmaliClass* current_class = nullptr;
    SmaliMethod* current_method = nullptr;
    std::size_t method_line = 0;

    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        if (line.rfind(".class", 0) == 0) {
            if (current_method) {
                throw ParseError("method started at line " + std::to_string(method_line) +
                                 " is not terminated before the next .class", line_no);
            }
            std::string name = trim(line.substr(6));
            if (name.empty()) throw ParseError(".class needs a name", line_no);
            unit.classes.push_back(SmaliClass{name, {}});
            current_class = &unit.classes.back();
        } else if (line.rfind(".method", 0) == 0) {
            if (!current_class) {
                throw ParseError(".method outside of a .class", line_no);
            }
            if (current_method) {
                throw ParseError("method started at line " + std::to_string(method_line) +
                                 " is not terminated before the next .method", line_no);
            }
            std::string name = trim(line.substr(7));
            if (name.empty()) throw ParseError(".method needs a name", line_no);
            current_class->methods.push_back(SmaliMethod{name, {}});
            current_method = &current_class->methods.back();
            method_line = line_no;
        } else if (line.rfind(".end method", 0) == 0) {
            if (!current_method) throw ParseError(".end method without an open method", line_no);
            current_method = nullptr;
        } else if (line.rfind("invoke", 0) == 0) {
            if (!current_method) continue; // invocations outside methods carry no evidence
            std::size_t sp = line.find_first_of(" \t");
            if (sp == std::string::npos) throw ParseError("invoke needs a target", line_no);
            std::string target = trim(line.substr(sp + 1));
            std::size_t arrow = target.find("->");
            if (arrow == std::string::npos || arrow == 0 || arrow + 2 >= target.size()) {
                throw ParseError("invoke target must look like CLASS->METHOD", line_no);
            }
            current_method->tokens.push_back(target.substr(0, arrow) + "." +
                                             target.substr(arrow + 2));
        } else if (line.rfind("const-string", 0) == 0) {
            if (!current_method) continue;
            std::size_t open = line.find('"');
            if (open == std::string::npos) {
                throw ParseError("const-string needs a quoted literal", line_no);
            }
            std::size_t close = line.find('"', open + 1);
            if (close == std::string::npos) {
                throw ParseError("unterminated string literal", line_no);
            }
            current_method->tokens.push_back(line.substr(open + 1, close - open - 1));
        }
        // anything else is smali we do not model
    }
    if (current_method) {
        throw ParseError("method started at line " + std::to_string(method_line) +
                         " is not terminated", line_no == 0 ? 1 : line_no);
    }
    return unit;
}

bool match_sequence(const std::vector<std::string>& tokens,
                    const std::vector<std::string>& pattern) {
    if (pattern.empty()) throw ValidationError("sequence pattern must be nonempty");
    std::size_t cursor = 0;
    for (const auto& token : tokens) {
        if (token == pattern[cursor]) {
            if (++cursor == pattern.size()) return true;
        }
    }
    return false;
}

FeatureVector extract_features(const AppPackage& app, const FeatureCatalog& catalog) {
    FeatureVector bits(catalog.size());

    std::set<std::string> manifest_names;
    std::set<std::string> api_tokens;
    for (const auto& p : app.manifest.permissions) manifest_names.insert(p);
    for (const auto& i : app.manifest.intent_actions_categories) manifest_names.insert(i);
    for (const auto& h : app.manifest.hardware_features) manifest_names.insert(h);
    for (const auto& cls : app.smali.classes) {
        for (const auto& method : cls.methods) {
            for (const auto& token : method.tokens) api_tokens.insert(token);
        }
    }

    for (const FeatureDef& f : catalog.features()) {
        bool present = false;
        switch (f.kind) {
            case FeatureKind::Permission:
            case FeatureKind::Intent:
            case FeatureKind::Hardware:
                present = manifest_names.count(f.name) > 0;
                break;
            case FeatureKind::ApiCall:
                present = api_tokens.count(f.name) > 0;
                break;
            case FeatureKind::Sequence: {
                if (f.sequence_pattern.empty()) break; // no pattern, no evidence
                for (const auto& cls : app.smali.classes) {
                    for (const auto& method : cls.methods) {
                        if (match_sequence(method.tokens, f.sequence_pattern)) {
                            present = true;
                            break;
                        }
                    }
                    if (present) break;
                }
                break;
            }
        }
        if (present) bits.set(static_cast<std::size_t>(f.id), true);
    }
    return bits;
}

AppPackage load_app_package(const std::string& dir, const std::string& app_id) {
    namespace fs = std::filesystem;
    fs::path base(dir);
    fs::path manifest_path = base / "manifest.xml";
    fs::path smali_path = base / "code.smali";
    if (!fs::exists(manifest_path)) {
        throw ValidationError("app package " + app_id + " is missing manifest.xml");
    }
    if (!fs::exists(smali_path)) {
        throw ValidationError("app package " + app_id + " is missing code.smali");
    }
    AppPackage app;
    app.app_id = app_id;
    app.manifest = parse_manifest(read_file(manifest_path.string()));
    app.smali = parse_smali(read_file(smali_path.string()));
    return app;
}

Corpus load_app_corpus(const std::string& root, const FeatureCatalog& catalog,
                       const std::map<std::string, Label>& labels) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ValidationError("not a directory: " + root);
    std::vector<std::string> app_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) app_dirs.push_back(entry.path().filename().string());
    }
    std::sort(app_dirs.begin(), app_dirs.end());

    Corpus corpus;
    for (const auto& app_id : app_dirs) {
        auto label = labels.find(app_id);
        if (label == labels.end()) {
            throw ValidationError("no label for app: " + app_id);
        }
        AppPackage app = load_app_package((fs::path(root) / app_id).string(), app_id);
        LabeledSample s;
        s.sample_id = app_id;
        s.label = label->second;
        s.provenance = Provenance::Original;
        s.vector = extract_features(app, catalog);
        corpus.push_back(std::move(s));
    }
    return corpus;
}

std::map<std::string, Label> parse_labels(const std::string& text) {
    std::map<std::string, Label> labels;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 2) throw ParseError("expected `app_id<TAB>B|M`", line_no);
        std::string id = trim(cols[0]);
        std::string label = trim(cols[1]);
        if (label != "B" && label != "M") throw ParseError("label must be B or M", line_no);
        if (!labels.emplace(id, label == "M" ? Label::Malicious : Label::Benign).second) {
            throw ParseError("duplicate label for app: " + id, line_no);
        }
    }
    return labels;
}

} // namespace kuafu
