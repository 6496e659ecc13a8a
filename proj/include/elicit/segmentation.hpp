#pragma once
// Sliding-window segmentation of dialogues into fixed six-turn blocks that
// end in an elicitor utterance, the token/backchannel filters, and rendering
// into the system/user/assistant message format of the experimental dataset.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "elicit/corpus.hpp"
#include "elicit/providers.hpp"

namespace elicit {

struct SegmentationConfig {
    std::size_t window_turns = 6;
    std::size_t max_tokens = 512;
    std::size_t min_target_words = 3;  // targets of <= min-1 words removed
    std::string system_template = "Act as an information elicitation agent for {domain}.";

    void validate() const {
        if (window_turns < 2) throw std::invalid_argument("window_turns must be >= 2");
        if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
        if (min_target_words < 1) throw std::invalid_argument("min_target_words must be >= 1");
    }
};

struct ContextTurn {
    Role role;
    std::string utterance;
};

struct Block {
    std::string block_id;  // "{dialogue_id}:{index}", index assigned post-filter
    std::string dialogue_id;
    DomainTag domain = DomainTag::oral_history;
    std::vector<ContextTurn> context;  // window_turns - 1 entries
    std::string target;                // final elicitor utterance
    std::string target_turn_id;
    std::size_t target_turn_index = 0;  // position within the source dialogue
    long long reward = 0;               // factual_novelty_score
    double return_to_go = 0.0;
};

inline std::string render_system_instruction(const SegmentationConfig& cfg,
                                             DomainTag domain) {
    std::string text = cfg.system_template;
    auto pos = text.find("{domain}");
    if (pos != std::string::npos) text.replace(pos, 8, human_readable(domain));
    return text;
}

// Chat-style message rendering: system first, then context turns with
// respondent -> "user" and elicitor -> "assistant" (per-turn mapping, no
// forced alternation), closing with the target as "assistant".
inline std::vector<Message> render_block_messages(const Block& b,
                                                  const SegmentationConfig& cfg) {
    std::vector<Message> messages;
    messages.push_back({"system", render_system_instruction(cfg, b.domain)});
    for (const auto& turn : b.context)
        messages.push_back({turn.role == Role::respondent ? "user" : "assistant",
                            turn.utterance});
    messages.push_back({"assistant", b.target});
    return messages;
}

inline std::size_t rendered_token_count(const Block& b, const SegmentationConfig& cfg,
                                        const TokenizerProvider& tokenizer) {
    std::size_t total = 0;
    for (const auto& m : render_block_messages(b, cfg)) total += tokenizer.count(m.content);
    return total;
}

inline std::size_t word_count(const std::string& text) {
    std::istringstream in(text);
    std::size_t n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

struct DropReport {
    std::size_t over_token_cap = 0;
    std::size_t short_target = 0;  // backchannel filter
};

// Token cap is measured on the fully rendered sequence (system instruction
// included). Keeps relative order; block ids are assigned by the caller.
inline std::vector<Block> filter_blocks(const std::vector<Block>& candidates,
                                        const SegmentationConfig& cfg,
                                        const TokenizerProvider& tokenizer,
                                        DropReport* report = nullptr) {
    std::vector<Block> kept;
    for (const auto& b : candidates) {
        if (word_count(b.target) < cfg.min_target_words) {
            if (report) ++report->short_target;
            continue;
        }
        if (rendered_token_count(b, cfg, tokenizer) > cfg.max_tokens) {
            if (report) ++report->over_token_cap;
            continue;
        }
        kept.push_back(b);
    }
    return kept;
}

// Slides a window of cfg.window_turns with stride 1; every full window whose
// final turn is an elicitor turn becomes a candidate. Indices are assigned
// after filtering, 0-based, in emission order.
inline std::vector<Block> segment_dialogue(const Dialogue& d,
                                           const SegmentationConfig& cfg,
                                           const TokenizerProvider& tokenizer,
                                           DropReport* report = nullptr) {
    cfg.validate();
    std::vector<Block> candidates;
    if (d.turns.size() >= cfg.window_turns) {
        for (std::size_t end = cfg.window_turns - 1; end < d.turns.size(); ++end) {
            if (d.turns[end].role != Role::elicitor) continue;
            Block b;
            b.dialogue_id = d.dialogue_id;
            b.domain = d.domain;
            for (std::size_t i = end + 1 - cfg.window_turns; i < end; ++i)
                b.context.push_back({d.turns[i].role, d.turns[i].utterance});
            b.target = d.turns[end].utterance;
            b.target_turn_id = d.turns[end].turn_id;
            b.target_turn_index = end;
            candidates.push_back(std::move(b));
        }
    }
    auto kept = filter_blocks(candidates, cfg, tokenizer, report);
    for (std::size_t i = 0; i < kept.size(); ++i)
        kept[i].block_id = d.dialogue_id + ":" + std::to_string(i);
    return kept;
}

// ---------------------------------------------------------------------------
// block file format (experimental dataset), one record per line

inline json block_to_json(const Block& b, const SegmentationConfig& cfg) {
    json j;
    j["block_id"] = b.block_id;
    j["domain"] = to_string(b.domain);
    j["factual_novelty_score"] = b.reward;
    j["return_to_go"] = b.return_to_go;
    j["messages"] = json::array();
    for (const auto& m : render_block_messages(b, cfg)) {
        json mj;
        mj["role"] = m.role;
        mj["content"] = m.content;
        j["messages"].push_back(mj);
    }
    return j;
}

inline Block block_from_json(const json& j) {
    Block b;
    b.block_id = j.at("block_id").get<std::string>();
    auto colon = b.block_id.rfind(':');
    b.dialogue_id = colon == std::string::npos ? b.block_id : b.block_id.substr(0, colon);
    auto dom = parse_domain(j.at("domain").get<std::string>());
    if (!dom) throw ValidationError("block " + b.block_id + ": unknown domain");
    b.domain = *dom;
    b.reward = j.at("factual_novelty_score").get<long long>();
    b.return_to_go = j.at("return_to_go").get<double>();
    const auto& messages = j.at("messages");
    if (!messages.is_array() || messages.size() < 2)
        throw ValidationError("block " + b.block_id + ": messages must hold system + turns");
    for (std::size_t i = 1; i + 1 < messages.size(); ++i) {
        const auto& m = messages[i];
        b.context.push_back(
            {m.at("role").get<std::string>() == "user" ? Role::respondent : Role::elicitor,
             m.at("content").get<std::string>()});
    }
    b.target = messages.back().at("content").get<std::string>();
    return b;
}

inline void save_blocks(const std::vector<Block>& blocks, const SegmentationConfig& cfg,
                        const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write block file: " + path.string());
    for (const auto& b : blocks) out << block_to_json(b, cfg).dump() << "\n";
}

inline std::vector<Block> load_blocks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open block file: " + path.string());
    std::vector<Block> blocks;
    std::string line;
    while (std::getline(in, line)) {
        if (trim_copy(line).empty()) continue;
        blocks.push_back(block_from_json(json::parse(line)));
    }
    return blocks;
}

}  // namespace elicit
