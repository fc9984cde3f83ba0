#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <map>

#include "kuafu/app_parser.hpp"
#include "kuafu/io_util.hpp"
#include "kuafu/rng.hpp"

using namespace kuafu;

TEST_CASE("manifest: single permission") {
    ManifestDoc doc = parse_manifest(R"(<manifest>
  <uses-permission name="READ_PHONE_STATE"/>
</manifest>)");
    REQUIRE(doc.permissions.size() == 1);
    CHECK(doc.permissions[0] == "READ_PHONE_STATE");
    CHECK(doc.intent_actions_categories.empty());
    CHECK(doc.hardware_features.empty());
}

TEST_CASE("manifest: empty document") {
    ManifestDoc doc = parse_manifest("<manifest/>");
    CHECK(doc.permissions.empty());
    CHECK(doc.intent_actions_categories.empty());
    CHECK(doc.hardware_features.empty());
}

TEST_CASE("manifest: duplicates collapse, order preserved") {
    ManifestDoc doc = parse_manifest(R"(<manifest>
  <uses-permission name="SEND_SMS"/>
  <uses-permission name="INTERNET"/>
  <uses-permission name="SEND_SMS"/>
</manifest>)");
    REQUIRE(doc.permissions.size() == 2);
    CHECK(doc.permissions[0] == "SEND_SMS");
    CHECK(doc.permissions[1] == "INTERNET");
}

TEST_CASE("manifest: actions, categories and hardware are collected") {
    ManifestDoc doc = parse_manifest(R"(<manifest>
  <application>
    <activity>
      <intent-filter>
        <action name="action.MAIN"/>
        <category name="category.LAUNCHER"/>
      </intent-filter>
    </activity>
  </application>
  <uses-feature name="telephony"/>
  <unknown-element foo="bar">text is ignored</unknown-element>
</manifest>)");
    REQUIRE(doc.intent_actions_categories.size() == 2);
    CHECK(doc.intent_actions_categories[0] == "action.MAIN");
    CHECK(doc.intent_actions_categories[1] == "category.LAUNCHER");
    REQUIRE(doc.hardware_features.size() == 1);
    CHECK(doc.hardware_features[0] == "telephony");
}

TEST_CASE("manifest: xml declarations and comments are skipped") {
    ManifestDoc doc = parse_manifest(
        "<?xml version=\"1.0\"?>\n<!-- header -->\n<manifest>\n"
        "  <uses-permission name=\"CAMERA\"/>\n</manifest>\n");
    REQUIRE(doc.permissions.size() == 1);
}

TEST_CASE("manifest: structural errors carry a location") {
    CHECK_THROWS_AS(parse_manifest("<manifest><application></manifest>"), ParseError);
    CHECK_THROWS_AS(parse_manifest("<manifest>"), ParseError);
    CHECK_THROWS_AS(parse_manifest("<manifest><uses-permission/></manifest>"), ParseError);
    try {
        parse_manifest("<manifest>\n<uses-permission/>\n</manifest>");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("name") != std::string::npos);
    }
}

TEST_CASE("manifest: parse-serialize-parse is a fixed point") {
    ManifestDoc doc = parse_manifest(R"(<manifest>
  <uses-permission name="SEND_SMS"/>
  <uses-permission name="INTERNET"/>
  <action name="action.VIEW"/>
  <category name="category.DEFAULT"/>
  <uses-feature name="camera"/>
</manifest>)");
    ManifestDoc again = parse_manifest(serialize_manifest(doc));
    CHECK(again == doc);
    CHECK(parse_manifest(serialize_manifest(again)) == again);
}

TEST_CASE("smali: invoke renders Class.method") {
    SmaliUnit unit = parse_smali(R"(.class Lcom/app/Main;
.method leak
invoke TelephonyManager->getDeviceId
.end method
)");
    REQUIRE(unit.classes.size() == 1);
    REQUIRE(unit.classes[0].methods.size() == 1);
    REQUIRE(unit.classes[0].methods[0].tokens.size() == 1);
    CHECK(unit.classes[0].methods[0].tokens[0] == "TelephonyManager.getDeviceId");
}

TEST_CASE("smali: empty input parses to zero classes") {
    CHECK(parse_smali("").classes.empty());
    CHECK(parse_smali("# only a comment\n").classes.empty());
}

TEST_CASE("smali: string literal then invoke keep source order") {
    SmaliUnit unit = parse_smali(R"(.class Lapp;
.method run
const-string "chmod 777"
invoke Runtime->getRuntime
.end method
)");
    const auto& tokens = unit.classes[0].methods[0].tokens;
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0] == "chmod 777");
    CHECK(tokens[1] == "Runtime.getRuntime");
}

TEST_CASE("smali: structural errors carry line numbers") {
    try {
        parse_smali(".method orphan\n.end method\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
    CHECK_THROWS_AS(parse_smali(".class A\n.method m\ninvoke X->y\n"), ParseError); // unterminated
    CHECK_THROWS_AS(parse_smali(".class A\n.method m\n.method n\n.end method\n"), ParseError);
    CHECK_THROWS_AS(parse_smali(".class A\n.end method\n"), ParseError);
    CHECK_THROWS_AS(parse_smali(".class A\n.method m\ninvoke broken\n.end method\n"), ParseError);
    CHECK_THROWS_AS(parse_smali(".class A\n.method m\nconst-string \"open\n.end method\n"),
                    ParseError);
}

TEST_CASE("smali: unmodeled lines are ignored") {
    SmaliUnit unit = parse_smali(R"(.class Lapp;
.super Ljava/lang/Object;
.method run
    .locals 2
    move v0, v1
    invoke A->b
.end method
)");
    REQUIRE(unit.classes[0].methods[0].tokens.size() == 1);
}

namespace {

// Oracle: try every strictly increasing index tuple via recursion.
bool oracle_subsequence(const std::vector<std::string>& tokens,
                        const std::vector<std::string>& pattern, std::size_t ti, std::size_t pi) {
    if (pi == pattern.size()) return true;
    for (std::size_t t = ti; t < tokens.size(); ++t) {
        if (tokens[t] == pattern[pi] && oracle_subsequence(tokens, pattern, t + 1, pi + 1)) {
            return true;
        }
    }
    return false;
}

} // namespace

TEST_CASE("match_sequence: chmod request examples") {
    std::vector<std::string> pattern = {"chmod 777", "Runtime", "getRuntime", "exec"};
    CHECK(match_sequence({"chmod 777", "Runtime", "getRuntime", "exec"}, pattern));
    CHECK_FALSE(match_sequence({"exec", "getRuntime", "Runtime", "chmod 777"}, pattern));
    CHECK(match_sequence({"a", "chmod 777", "b", "Runtime", "getRuntime", "c", "exec"}, pattern));
}

TEST_CASE("match_sequence agrees with the exhaustive index-tuple oracle") {
    const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
    Rng rng(303);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::string> tokens(rng.next_below(10));
        for (auto& t : tokens) t = alphabet[rng.next_below(alphabet.size())];
        std::vector<std::string> pattern(1 + rng.next_below(4));
        for (auto& p : pattern) p = alphabet[rng.next_below(alphabet.size())];
        CHECK(match_sequence(tokens, pattern) == oracle_subsequence(tokens, pattern, 0, 0));
    }
}

TEST_CASE("match_sequence rejects an empty pattern") {
    CHECK_THROWS_AS(match_sequence({"a"}, {}), ValidationError);
}

namespace {

FeatureCatalog demo_catalog() {
    FeatureCatalog base = parse_catalog(
        "READ_PHONE_STATE\tPERM\tM\n"
        "INTERNET\tPERM\tB\n"
        "action.MAIN\tINT\tB\n"
        "telephony\tHW\tM\n"
        "TelephonyManager.getDeviceId\tAPI\tM\n"
        "Runtime.exec\tAPI\tM\n"
        "Request for chmod\tSEQ\tM\n");
    return base.with_sequence_patterns(
        {{"Request for chmod", {"chmod 777", "Runtime.getRuntime", "Runtime.exec"}}});
}

AppPackage app_from(const std::string& manifest, const std::string& smali) {
    AppPackage app;
    app.app_id = "test-app";
    app.manifest = parse_manifest(manifest);
    app.smali = parse_smali(smali);
    return app;
}

} // namespace

TEST_CASE("extract: single manifest permission sets exactly one bit") {
    FeatureCatalog catalog = demo_catalog();
    AppPackage app =
        app_from("<manifest><uses-permission name=\"READ_PHONE_STATE\"/></manifest>", "");
    FeatureVector bits = extract_features(app, catalog);
    CHECK(bits.popcount() == 1);
    CHECK(bits.get(static_cast<std::size_t>(*catalog.find("READ_PHONE_STATE"))));
}

TEST_CASE("extract: full chmod sequence sets the sequence bit") {
    FeatureCatalog catalog = demo_catalog();
    AppPackage app = app_from("<manifest/>", R"(.class Lapp;
.method root
const-string "chmod 777"
invoke Runtime->getRuntime
invoke Runtime->exec
.end method
)");
    FeatureVector bits = extract_features(app, catalog);
    CHECK(bits.get(static_cast<std::size_t>(*catalog.find("Request for chmod"))));
    CHECK(bits.get(static_cast<std::size_t>(*catalog.find("Runtime.exec")))); // api evidence too
}

TEST_CASE("extract: sequence split across methods does not match") {
    FeatureCatalog catalog = demo_catalog();
    AppPackage app = app_from("<manifest/>", R"(.class Lapp;
.method a
const-string "chmod 777"
invoke Runtime->getRuntime
.end method
.method b
invoke Runtime->exec
.end method
)");
    FeatureVector bits = extract_features(app, catalog);
    CHECK_FALSE(bits.get(static_cast<std::size_t>(*catalog.find("Request for chmod"))));
}

namespace {

// Second, unoptimized extraction pass used as the oracle: rescans the app
// for every feature with no shared precomputation.
bool oracle_has_feature(const AppPackage& app, const FeatureDef& f) {
    auto in_any_manifest_list = [&]() {
        for (const auto* list : {&app.manifest.permissions, &app.manifest.intent_actions_categories,
                                 &app.manifest.hardware_features}) {
            for (const auto& name : *list) {
                if (name == f.name) return true;
            }
        }
        return false;
    };
    switch (f.kind) {
        case FeatureKind::Permission:
        case FeatureKind::Intent:
        case FeatureKind::Hardware:
            return in_any_manifest_list();
        case FeatureKind::ApiCall: {
            for (const auto& cls : app.smali.classes) {
                for (const auto& method : cls.methods) {
                    for (const auto& token : method.tokens) {
                        if (token == f.name) return true;
                    }
                }
            }
            return false;
        }
        case FeatureKind::Sequence: {
            if (f.sequence_pattern.empty()) return false;
            for (const auto& cls : app.smali.classes) {
                for (const auto& method : cls.methods) {
                    if (oracle_subsequence(method.tokens, f.sequence_pattern, 0, 0)) return true;
                }
            }
            return false;
        }
    }
    return false;
}

} // namespace

TEST_CASE("extract matches a naive re-scan oracle on randomized apps") {
    FeatureCatalog catalog = demo_catalog();
    const std::vector<std::string> names = {"READ_PHONE_STATE", "INTERNET",  "action.MAIN",
                                            "telephony",        "other.xyz", "camera"};
    const std::vector<std::string> calls = {"TelephonyManager->getDeviceId", "Runtime->exec",
                                            "Runtime->getRuntime", "Foo->bar"};
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::string manifest = "<manifest>";
        for (int i = 0; i < 4; ++i) {
            const std::string& n = names[rng.next_below(names.size())];
            switch (rng.next_below(3)) {
                case 0: manifest += "<uses-permission name=\"" + n + "\"/>"; break;
                case 1: manifest += "<action name=\"" + n + "\"/>"; break;
                default: manifest += "<uses-feature name=\"" + n + "\"/>"; break;
            }
        }
        manifest += "</manifest>";
        std::string smali = ".class Lapp;\n";
        for (int m = 0; m < 2; ++m) {
            smali += ".method m" + std::to_string(m) + "\n";
            for (int t = 0; t < 3; ++t) {
                if (rng.next_bernoulli(0.3)) {
                    smali += "const-string \"chmod 777\"\n";
                } else {
                    smali += "invoke " + calls[rng.next_below(calls.size())] + "\n";
                }
            }
            smali += ".end method\n";
        }
        AppPackage app = app_from(manifest, smali);
        FeatureVector bits = extract_features(app, catalog);
        for (const auto& f : catalog.features()) {
            CAPTURE(trial);
            CAPTURE(f.name);
            CHECK(bits.get(static_cast<std::size_t>(f.id)) == oracle_has_feature(app, f));
        }
    }
}

TEST_CASE("extract is monotone under added evidence") {
    FeatureCatalog catalog = demo_catalog();
    AppPackage small =
        app_from("<manifest><uses-permission name=\"INTERNET\"/></manifest>",
                 ".class Lapp;\n.method m\ninvoke Runtime->exec\n.end method\n");
    AppPackage big = app_from(
        "<manifest><uses-permission name=\"INTERNET\"/>"
        "<uses-permission name=\"READ_PHONE_STATE\"/><uses-feature name=\"telephony\"/></manifest>",
        ".class Lapp;\n.method m\nconst-string \"chmod 777\"\ninvoke Runtime->getRuntime\n"
        "invoke Runtime->exec\n.end method\n"
        ".method n\ninvoke TelephonyManager->getDeviceId\n.end method\n");
    FeatureVector a = extract_features(small, catalog);
    FeatureVector b = extract_features(big, catalog);
    for (std::size_t j = 0; j < catalog.size(); ++j) {
        if (a.get(j)) CHECK(b.get(j)); // adding evidence never clears a bit
    }
}

TEST_CASE("concatenating methods keeps api bits and can only add sequence matches") {
    FeatureCatalog catalog = demo_catalog();
    AppPackage split = app_from("<manifest/>", R"(.class Lapp;
.method a
const-string "chmod 777"
invoke Runtime->getRuntime
.end method
.method b
invoke Runtime->exec
.end method
)");
    AppPackage merged = app_from("<manifest/>", R"(.class Lapp;
.method ab
const-string "chmod 777"
invoke Runtime->getRuntime
invoke Runtime->exec
.end method
)");
    FeatureVector before = extract_features(split, catalog);
    FeatureVector after = extract_features(merged, catalog);
    for (const auto& f : catalog.features()) {
        std::size_t j = static_cast<std::size_t>(f.id);
        if (before.get(j) && f.kind != FeatureKind::Sequence) CHECK(after.get(j));
    }
    CHECK(after.get(static_cast<std::size_t>(*catalog.find("Request for chmod"))));
}

TEST_CASE("app corpus ingestion from a directory tree") {
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / "kuafu_apps_test";
    fs::remove_all(root);
    fs::create_directories(root / "app_one");
    fs::create_directories(root / "app_two");
    write_file_atomic((root / "app_one" / "manifest.xml").string(),
                      "<manifest><uses-permission name=\"READ_PHONE_STATE\"/></manifest>");
    write_file_atomic((root / "app_one" / "code.smali").string(),
                      ".class La;\n.method m\ninvoke Runtime->exec\n.end method\n");
    write_file_atomic((root / "app_two" / "manifest.xml").string(),
                      "<manifest><uses-permission name=\"INTERNET\"/></manifest>");
    write_file_atomic((root / "app_two" / "code.smali").string(), "");

    FeatureCatalog catalog = demo_catalog();
    std::map<std::string, Label> labels = parse_labels("app_one\tM\napp_two\tB\n");
    Corpus corpus = load_app_corpus(root.string(), catalog, labels);
    REQUIRE(corpus.size() == 2);
    CHECK(corpus[0].sample_id == "app_one");
    CHECK(corpus[0].label == Label::Malicious);
    CHECK(corpus[1].label == Label::Benign);

    // missing label and missing file both fail loudly
    CHECK_THROWS_AS(load_app_corpus(root.string(), catalog, {}), ValidationError);
    fs::remove(root / "app_two" / "code.smali");
    CHECK_THROWS_AS(load_app_corpus(root.string(), catalog, labels), ValidationError);
    fs::remove_all(root);
}

TEST_CASE("labels file parsing") {
    auto labels = parse_labels("# apps\none\tB\ntwo\tM\n");
    CHECK(labels.size() == 2);
    CHECK(labels.at("two") == Label::Malicious);
    CHECK_THROWS_AS(parse_labels("one\tX\n"), ParseError);
    CHECK_THROWS_AS(parse_labels("one\tB\none\tM\n"), ParseError);
}
