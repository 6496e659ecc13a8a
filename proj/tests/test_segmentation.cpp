#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "elicit/segmentation.hpp"
#include "synthetic.hpp"

using namespace elicit;

namespace {

const SegmentationConfig kDefault{};
const ReferenceTokenizer kTok;

Dialogue alternating(std::size_t turns, const std::string& id = "alt") {
    std::vector<std::pair<Role, std::string>> t;
    for (std::size_t i = 0; i < turns; ++i)
        t.emplace_back(i % 2 == 0 ? Role::elicitor : Role::respondent,
                       "utterance number " + std::to_string(i) + " here");
    return testing::make_dialogue(id, DomainTag::oral_history, t);
}

}  // namespace

TEST_CASE("8-turn alternating dialogue yields exactly one block") {
    // turns 1..8 = E,R,E,R,E,R,E,R; windows [1..6],[2..7],[3..8] end at
    // turns 6 (R), 7 (E), 8 (R) -> only [2..7] qualifies
    auto d = alternating(8);
    auto blocks = segment_dialogue(d, kDefault, kTok);
    REQUIRE(blocks.size() == 1);
    const auto& b = blocks[0];
    CHECK(b.block_id == "alt:0");
    CHECK(b.context.size() == 5);
    CHECK(b.target == d.turns[6].utterance);
    CHECK(b.target_turn_index == 6);
    CHECK(b.context.front().utterance == d.turns[1].utterance);
}

TEST_CASE("dialogues shorter than the window emit nothing") {
    CHECK(segment_dialogue(alternating(5), kDefault, kTok).empty());
}

TEST_CASE("window enumeration matches a hand oracle on alternating lengths") {
    for (std::size_t n = 6; n <= 14; ++n) {
        auto d = alternating(n, "n" + std::to_string(n));
        auto blocks = segment_dialogue(d, kDefault, kTok);
        // oracle: 0-based window ends run over [5, n); qualifying ends are
        // elicitor turns, i.e. even indices
        std::size_t expected = 0;
        for (std::size_t end = 5; end < n; ++end)
            if (end % 2 == 0) ++expected;
        CHECK(blocks.size() == expected);
    }
}

TEST_CASE("backchannel filter drops two-word-or-fewer targets") {
    SegmentationConfig cfg;
    ReferenceTokenizer tok;

    auto make_block = [](const std::string& target) {
        Block b;
        b.dialogue_id = "d";
        b.domain = DomainTag::oral_history;
        for (int i = 0; i < 5; ++i) b.context.push_back({Role::respondent, "ctx words here"});
        b.target = target;
        return b;
    };
    DropReport report;
    auto kept = filter_blocks({make_block("Okay."), make_block("Got it, continue."),
                               make_block("Hmm")},
                              cfg, tok, &report);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].target == "Got it, continue.");
    CHECK(report.short_target == 2);
}

TEST_CASE("token cap boundary: 512 kept, 513 dropped") {
    SegmentationConfig cfg;
    ReferenceTokenizer tok;
    Block b;
    b.dialogue_id = "cap";
    b.domain = DomainTag::oral_history;  // system renders to 9 tokens
    for (int i = 0; i < 5; ++i) b.context.push_back({Role::respondent, "x"});
    b.target = "one two three";

    std::size_t base = rendered_token_count(b, cfg, tok);
    auto pad_to = [&](std::size_t total) {
        Block p = b;
        std::string filler;
        for (std::size_t i = 0; i < total - base; ++i) filler += " pad";
        p.context[0].utterance += filler;
        return p;
    };
    auto at512 = pad_to(512);
    auto at513 = pad_to(513);
    REQUIRE(rendered_token_count(at512, cfg, tok) == 512);
    REQUIRE(rendered_token_count(at513, cfg, tok) == 513);
    DropReport report;
    auto kept = filter_blocks({at512, at513}, cfg, tok, &report);
    CHECK(kept.size() == 1);
    CHECK(report.over_token_cap == 1);
}

TEST_CASE("rendered messages follow the system/user/assistant convention") {
    auto d = alternating(8);
    auto blocks = segment_dialogue(d, kDefault, kTok);
    REQUIRE(blocks.size() == 1);
    auto messages = render_block_messages(blocks[0], kDefault);
    REQUIRE(messages.size() == 7);
    CHECK(messages[0].role == "system");
    CHECK(messages[0].content == "Act as an information elicitation agent for oral history.");
    // context starts at turn 2 (respondent)
    CHECK(messages[1].role == "user");
    CHECK(messages[2].role == "assistant");
    CHECK(messages.back().role == "assistant");
    CHECK(messages.back().content == blocks[0].target);
}

TEST_CASE("system instruction substitutes the human-readable domain") {
    Block b;
    b.domain = DomainTag::journalistic_investigations;
    auto messages = render_block_messages(b, kDefault);
    CHECK(messages[0].content ==
          "Act as an information elicitation agent for journalistic investigations.");
}

TEST_CASE("role mapping is per-turn, not positional") {
    // context beginning with an elicitor turn renders message 1 as assistant
    auto d = testing::make_dialogue(
        "ee", DomainTag::oral_history,
        {{Role::elicitor, "first question goes here"},
         {Role::elicitor, "second question goes here"},
         {Role::respondent, "an answer arrives here"},
         {Role::respondent, "another answer arrives here"},
         {Role::respondent, "more answers arrive here"},
         {Role::elicitor, "closing question goes here"}});
    auto blocks = segment_dialogue(d, kDefault, kTok);
    REQUIRE(blocks.size() == 1);
    auto messages = render_block_messages(blocks[0], kDefault);
    CHECK(messages[1].role == "assistant");
    CHECK(messages[2].role == "assistant");
    CHECK(messages[3].role == "user");
}

TEST_CASE("segmentation is deterministic and blocks are contiguous subsequences") {
    auto corpus = testing::topical_corpus(20, 77);
    for (const auto& d : corpus) {
        auto a = segment_dialogue(d, kDefault, kTok);
        auto b = segment_dialogue(d, kDefault, kTok);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(block_to_json(a[i], kDefault) == block_to_json(b[i], kDefault));
            // context + target appear contiguously in the dialogue
            REQUIRE(a[i].target_turn_index >= 5);
            std::size_t start = a[i].target_turn_index - 5;
            for (std::size_t j = 0; j < 5; ++j)
                CHECK(a[i].context[j].utterance == d.turns[start + j].utterance);
        }
    }
}

TEST_CASE("emitted block count never exceeds late elicitor turns") {
    auto corpus = testing::topical_corpus(10, 5);
    for (const auto& d : corpus) {
        auto blocks = segment_dialogue(d, kDefault, kTok);
        std::size_t late_elicitor = 0;
        for (std::size_t i = kDefault.window_turns - 1; i < d.turns.size(); ++i)
            if (d.turns[i].role == Role::elicitor) ++late_elicitor;
        CHECK(blocks.size() <= late_elicitor);
    }
}

TEST_CASE("block file format round-trips") {
    auto d = alternating(10, "io");
    auto blocks = segment_dialogue(d, kDefault, kTok);
    REQUIRE(!blocks.empty());
    blocks[0].reward = 2;
    blocks[0].return_to_go = 18.550635;
    auto path = std::filesystem::temp_directory_path() / "elicit-tests" / "blocks.jsonl";
    std::filesystem::create_directories(path.parent_path());
    save_blocks(blocks, kDefault, path);
    auto back = load_blocks(path);
    REQUIRE(back.size() == blocks.size());
    CHECK(back[0].block_id == blocks[0].block_id);
    CHECK(back[0].reward == 2);
    CHECK(back[0].return_to_go == doctest::Approx(18.550635));
    CHECK(back[0].target == blocks[0].target);
    CHECK(back[0].context.size() == 5);
    CHECK(block_to_json(back[0], kDefault) == block_to_json(blocks[0], kDefault));
}

TEST_CASE("config invariants are enforced") {
    SegmentationConfig cfg;
    cfg.window_turns = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.max_tokens = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
