#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "elicit/corpus.hpp"
#include "synthetic.hpp"

using namespace elicit;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    auto dir = fs::temp_directory_path() / "elicit-tests";
    fs::create_directories(dir);
    return dir / name;
}

Dialogue six_turn_dialogue() {
    return testing::make_dialogue(
        "dlg-1", DomainTag::journalistic_investigations,
        {{Role::elicitor, "why are you here now in Mexico?"},
         {Role::respondent, "we are working on foreign policy."},
         {Role::elicitor, "what about the caravan?"},
         {Role::respondent, "Mexico agrees it is not constructive."},
         {Role::elicitor, "when did that start?"},
         {Role::respondent, "around Dec. 1 as the government transitions."}});
}

}  // namespace

TEST_CASE("well-formed record round-trips through load_corpus") {
    auto d = six_turn_dialogue();
    auto path = temp_file("roundtrip.jsonl");
    save_corpus({d}, path);
    auto result = load_corpus({path});
    REQUIRE(result.dialogues.size() == 1);
    REQUIRE(result.issues.empty());
    const auto& back = result.dialogues[0];
    CHECK(back.dialogue_id == d.dialogue_id);
    CHECK(back.domain == d.domain);
    CHECK(back.turns.size() == 6);
    // field-identical serialization
    CHECK(to_json(back) == to_json(d));
}

TEST_CASE("unknown role is a validation error naming the dialogue") {
    auto j = to_json(six_turn_dialogue());
    j["turns"][2]["role"] = "moderator";
    auto path = temp_file("badrole.jsonl");
    {
        std::ofstream out(path);
        out << j.dump() << "\n";
    }
    auto result = load_corpus({path});
    CHECK(result.dialogues.empty());
    REQUIRE(result.issues.size() == 1);
    CHECK(result.issues[0].message.find("dlg-1") != std::string::npos);
    CHECK(result.issues[0].message.find("moderator") != std::string::npos);
    CHECK(result.issues[0].line == 1);
}

TEST_CASE("unknown domain is rejected with the offending value reported") {
    auto j = to_json(six_turn_dialogue());
    j["domain"] = "cooking_shows";
    CHECK_THROWS_WITH_AS(dialogue_from_json(j),
                         doctest::Contains("cooking_shows"), ValidationError);
}

TEST_CASE("domain aliases canonicalize") {
    CHECK(parse_domain("judicial_dialogue") == DomainTag::judicial_proceedings);
    CHECK(parse_domain("Judicial Proceedings") == DomainTag::judicial_proceedings);
    CHECK(parse_domain("ORAL_HISTORY") == DomainTag::oral_history);
    CHECK(!parse_domain("sports"));
}

TEST_CASE("unreadable file raises IoError naming the path") {
    CHECK_THROWS_WITH_AS(load_corpus({"/no/such/file.jsonl"}),
                         doctest::Contains("/no/such/file.jsonl"), IoError);
}

TEST_CASE("empty utterance and duplicate turn ids are schema violations") {
    auto j = to_json(six_turn_dialogue());
    j["turns"][0]["utterance"] = "   ";
    CHECK_THROWS_AS(dialogue_from_json(j), ValidationError);
    j = to_json(six_turn_dialogue());
    j["turns"][1]["turn_id"] = j["turns"][0]["turn_id"];
    CHECK_THROWS_AS(dialogue_from_json(j), ValidationError);
}

TEST_CASE("metric eligibility flags single-role dialogues without rejecting them") {
    auto d = testing::make_dialogue("solo", DomainTag::oral_history,
                                    {{Role::elicitor, "hello there friend"}});
    CHECK_FALSE(d.metric_eligible());
    CHECK(six_turn_dialogue().metric_eligible());
}

TEST_CASE("stratified split: 10 dialogues of one domain go 8/1/1") {
    std::vector<Dialogue> corpus;
    for (int i = 0; i < 10; ++i)
        corpus.push_back(testing::make_dialogue("d" + std::to_string(i),
                                                DomainTag::oral_history,
                                                {{Role::elicitor, "a b c"}}));
    auto split = stratified_split(corpus, {0.8, 0.1, 0.1}, 42);
    CHECK(split.train.size() == 8);
    CHECK(split.dev.size() == 1);
    CHECK(split.test.size() == 1);
}

TEST_CASE("stratified split is deterministic and a partition") {
    auto corpus = testing::topical_corpus(57, 9);
    auto a = stratified_split(corpus, {0.8, 0.1, 0.1}, 123);
    auto b = stratified_split(corpus, {0.8, 0.1, 0.1}, 123);
    CHECK(a.train == b.train);
    CHECK(a.dev == b.dev);
    CHECK(a.test == b.test);

    std::set<std::string> all;
    for (const auto& d : corpus) all.insert(d.dialogue_id);
    std::set<std::string> unioned;
    unioned.insert(a.train.begin(), a.train.end());
    unioned.insert(a.dev.begin(), a.dev.end());
    unioned.insert(a.test.begin(), a.test.end());
    CHECK(unioned == all);
    CHECK(a.train.size() + a.dev.size() + a.test.size() == all.size());

    auto c = stratified_split(corpus, {0.8, 0.1, 0.1}, 124);
    CHECK(c.train != a.train);  // seed actually matters
}

TEST_CASE("split manifest round-trips") {
    auto corpus = testing::topical_corpus(12, 1);
    auto split = stratified_split(corpus, {0.8, 0.1, 0.1}, 5);
    auto back = split_from_json(to_json(split));
    CHECK(back.train == split.train);
    CHECK(back.dev == split.dev);
    CHECK(back.test == split.test);
    CHECK(back.seed == split.seed);
}

TEST_CASE("bad fractions are rejected") {
    auto corpus = testing::topical_corpus(4, 2);
    CHECK_THROWS_AS(stratified_split(corpus, {0.5, 0.5, 0.5}, 1), std::invalid_argument);
    CHECK_THROWS_AS(stratified_split(corpus, {1.0, 0.0, 0.0}, 1), std::invalid_argument);
}

TEST_CASE("small domain produces a warning but still assigns everything") {
    std::vector<Dialogue> corpus = {
        testing::make_dialogue("only", DomainTag::academic_interviews,
                               {{Role::elicitor, "one two three"}})};
    std::vector<SplitWarning> warnings;
    auto split = stratified_split(corpus, {0.8, 0.1, 0.1}, 0, &warnings);
    CHECK(split.train.size() + split.dev.size() + split.test.size() == 1);
    CHECK(!warnings.empty());
}

TEST_CASE("shard sizes follow division with remainder") {
    auto dir = fs::temp_directory_path() / "elicit-tests" / "shards";
    fs::remove_all(dir);

    auto count_lines = [](const fs::path& p) {
        std::ifstream in(p);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) ++n;
        return n;
    };

    SUBCASE("300 dialogues -> 128/128/44") {
        auto corpus = testing::topical_corpus(300, 3, 1);
        auto files = shard(corpus, dir);
        REQUIRE(files.size() == 3);
        CHECK(count_lines(files[0]) == 128);
        CHECK(count_lines(files[1]) == 128);
        CHECK(count_lines(files[2]) == 44);
    }
    SUBCASE("exact fit -> one file") {
        auto corpus = testing::topical_corpus(128, 3, 1);
        CHECK(shard(corpus, dir).size() == 1);
    }
    SUBCASE("1824 dialogues -> 15 files, last holding 32") {
        // oracle: 1824 = 14 * 128 + 32
        auto corpus = testing::topical_corpus(1824, 3, 1);
        auto files = shard(corpus, dir);
        REQUIRE(files.size() == 15);
        for (std::size_t i = 0; i + 1 < files.size(); ++i)
            CHECK(count_lines(files[i]) == 128);
        CHECK(count_lines(files.back()) == 32);
    }
    SUBCASE("empty input -> zero files") {
        CHECK(shard({}, dir).empty());
    }
    SUBCASE("concatenating shards reproduces input order") {
        auto corpus = testing::topical_corpus(10, 3, 1);
        auto files = shard(corpus, dir, "ordered", 4);
        std::vector<Dialogue> back;
        for (const auto& f : files) {
            auto part = load_corpus({f});
            back.insert(back.end(), part.dialogues.begin(), part.dialogues.end());
        }
        REQUIRE(back.size() == corpus.size());
        for (std::size_t i = 0; i < back.size(); ++i)
            CHECK(back[i].dialogue_id == corpus[i].dialogue_id);
    }
}

TEST_CASE("shuffle preserves the turn multiset and is seed-deterministic") {
    auto d = testing::topical_dialogue("shuf", DomainTag::oral_history, 6, 11);
    auto a = shuffle_dialogue(d, 99);
    auto b = shuffle_dialogue(d, 99);

    auto triple_set = [](const Dialogue& x) {
        std::multiset<std::tuple<std::string, std::string, std::string>> s;
        for (const auto& t : x.turns)
            s.insert({t.speaker, to_string(t.role), t.utterance});
        return s;
    };
    CHECK(triple_set(a) == triple_set(d));
    CHECK(to_json(a) == to_json(b));
    CHECK(to_json(shuffle_dialogue(d, 100)) != to_json(a));

    // role labels travel with their turns
    for (const auto& t : a.turns) {
        bool found = false;
        for (const auto& orig : d.turns)
            if (orig.turn_id == t.turn_id) {
                found = true;
                CHECK(orig.role == t.role);
                CHECK(orig.utterance == t.utterance);
            }
        CHECK(found);
    }
}

TEST_CASE("shuffling a one-turn dialogue warns and returns it unchanged") {
    auto d = testing::make_dialogue("tiny", DomainTag::oral_history,
                                    {{Role::elicitor, "hello there friend"}});
    bool warned = false;
    auto out = shuffle_dialogue(d, 5, &warned);
    CHECK(warned);
    CHECK(to_json(out) == to_json(d));
}

TEST_CASE("positional role reassignment keeps the original role pattern") {
    auto d = testing::topical_dialogue("pos", DomainTag::oral_history, 5, 4);
    auto baseline = shuffled_baseline(d, 17);
    REQUIRE(baseline.turns.size() == d.turns.size());
    for (std::size_t i = 0; i < d.turns.size(); ++i)
        CHECK(baseline.turns[i].role == d.turns[i].role);
}
