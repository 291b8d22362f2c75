#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "imfield/config.hpp"

using namespace imfield;

TEST_CASE("defaults cover every registry key and carry documentation") {
    Config c;
    for (const auto& e : Config::registry()) {
        CHECK(!e.doc.empty());
        CHECK(c.get(e.key) == e.def);
    }
    CHECK(c.get_int("data.count") == 20);
    CHECK(c.get_double("gan.lambda_gp") == 10.0);
    CHECK(c.get_int_list("ae.schedule") == std::vector<int>{16, 32});
    CHECK(c.get_bool("train.resume") == false);
}

TEST_CASE("file text parses comments, blanks, and spaced assignments") {
    Config c;
    c.load_text("# a comment\n\n  ae.lr = 5e-4  \nae.epochs=2,3\n", "cfg");
    CHECK(c.get_double("ae.lr") == 5e-4);
    CHECK(c.get_int_list("ae.epochs") == std::vector<int>{2, 3});
    CHECK(c.get_int("data.count") == 20);  // untouched default
}

TEST_CASE("unknown keys and malformed lines name the offending line") {
    Config c;
    CHECK_THROWS_WITH_AS(c.load_text("# ok\nnot.a.key=1\n", "bad.cfg"),
                         doctest::Contains("bad.cfg:2"), ConfigError);
    CHECK_THROWS_WITH_AS(c.load_text("justtext\n", "bad.cfg"), doctest::Contains("bad.cfg:1"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(c.set("nope", "1", "flag --nope"), doctest::Contains("flag --nope"),
                         ConfigError);
}

TEST_CASE("later sources override earlier ones") {
    Config c;
    c.load_text("ae.lr=1e-2\n", "file");
    CHECK(c.get_double("ae.lr") == 1e-2);
    c.set("ae.lr", "3e-3", "flag --ae.lr");
    CHECK(c.get_double("ae.lr") == 3e-3);
}

TEST_CASE("typed getters reject unparseable values by key name") {
    Config c;
    c.set("ae.lr", "fast", "t");
    CHECK_THROWS_WITH_AS(c.get_double("ae.lr"), doctest::Contains("ae.lr"), ConfigError);
    c.set("data.count", "7x", "t");
    CHECK_THROWS_AS(c.get_int("data.count"), ConfigError);
    c.set("ae.schedule", "16,,32", "t");
    CHECK_THROWS_AS(c.get_int_list("ae.schedule"), ConfigError);
    c.set("train.resume", "maybe", "t");
    CHECK_THROWS_AS(c.get_bool("train.resume"), ConfigError);
    c.set("train.resume", "true", "t");
    CHECK(c.get_bool("train.resume"));
}

TEST_CASE("dump emits one line per key and reloads cleanly") {
    Config c;
    c.set("gan.epochs", "123", "t");
    const std::string text = c.dump();
    CHECK(text.find("gan.epochs=123\n") != std::string::npos);

    Config back;
    back.load_text(text, "dump");
    for (const auto& e : Config::registry()) CHECK(back.get(e.key) == c.get(e.key));
}
