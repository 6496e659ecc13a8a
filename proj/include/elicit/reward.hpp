#pragma once
// Factual-novelty reward over full dialogues with the anti-gaming
// attribution rules, and discounted return-to-go conversion.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "elicit/corpus.hpp"
#include "elicit/providers.hpp"
#include "elicit/segmentation.hpp"

namespace elicit {

// Entity keys: case-fold + internal-whitespace collapse + trim. No
// lemmatization or coreference; documented so reward numbers reproduce.
inline std::string normalize_entity_key(const std::string& surface) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : surface) {
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

// Cumulative set of normalized entity mentions; dialogue-local.
struct EntityLedger {
    std::set<std::string> seen;

    // Returns the keys that were not yet in the ledger, inserting all.
    std::vector<std::string> add(const std::vector<std::string>& keys) {
        std::vector<std::string> fresh;
        for (const auto& k : keys)
            if (seen.insert(k).second) fresh.push_back(k);
        return fresh;
    }
};

struct RewardEntry {
    std::size_t turn_index = 0;  // index of the elicitor turn in the dialogue
    std::string turn_id;
    long long reward = 0;
    std::vector<std::string> new_entities;  // keys credited to this turn
    double return_to_go = 0.0;
};

struct RewardTrace {
    std::string dialogue_id;
    double gamma = 0.9;
    std::vector<RewardEntry> entries;  // one per elicitor turn, in order
    std::vector<std::string> extractor_warnings;

    const RewardEntry* find(std::size_t turn_index) const {
        for (const auto& e : entries)
            if (e.turn_index == turn_index) return &e;
        return nullptr;
    }
};

// output[i] = rewards[i] + gamma * output[i+1], computed in reverse; the
// index runs over reward-bearing (elicitor) turns only.
inline std::vector<double> returns_to_go(const std::vector<double>& rewards,
                                         double gamma) {
    if (gamma <= 0.0 || gamma > 1.0)
        throw std::invalid_argument("gamma must lie in (0, 1]");
    std::vector<double> out(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i > 0; --i) {
        acc = rewards[i - 1] + gamma * acc;
        out[i - 1] = acc;
    }
    return out;
}

inline std::vector<std::string> extract_keys(const EntityExtractor& extractor,
                                             const Turn& turn,
                                             std::vector<std::string>* warnings) {
    std::vector<std::string> keys;
    try {
        for (const auto& m : extractor.extract(turn.utterance))
            keys.push_back(normalize_entity_key(m.surface));
    } catch (const std::exception& e) {
        if (warnings)
            warnings->push_back("extractor failed on turn " + turn.turn_id + ": " +
                                e.what());
        keys.clear();
    }
    return keys;
}

// Walks the dialogue once with a single ledger. For an elicitor turn
// followed directly by a respondent reply: the elicitor's own entities enter
// the ledger BEFORE the reply is scored, so self-introduced entities never
// earn credit; the reward is the count of reply entities absent from the
// ledger at that point. Respondent turns without a preceding elicitor turn
// add their entities creditlessly. Returns-to-go are filled in reverse.
inline RewardTrace annotate_rewards(const Dialogue& d, const EntityExtractor& extractor,
                                    double gamma = 0.9) {
    RewardTrace trace;
    trace.dialogue_id = d.dialogue_id;
    trace.gamma = gamma;
    EntityLedger ledger;

    for (std::size_t i = 0; i < d.turns.size(); ++i) {
        const Turn& turn = d.turns[i];
        auto keys = extract_keys(extractor, turn, &trace.extractor_warnings);
        if (turn.role == Role::elicitor) {
            ledger.add(keys);
            RewardEntry entry;
            entry.turn_index = i;
            entry.turn_id = turn.turn_id;
            trace.entries.push_back(std::move(entry));
        } else {
            auto fresh = ledger.add(keys);
            const bool follows_elicitor = i > 0 && d.turns[i - 1].role == Role::elicitor;
            if (follows_elicitor) {
                RewardEntry& entry = trace.entries.back();
                entry.reward = static_cast<long long>(fresh.size());
                entry.new_entities = std::move(fresh);
            }
        }
    }

    std::vector<double> rewards;
    rewards.reserve(trace.entries.size());
    for (const auto& e : trace.entries) rewards.push_back(static_cast<double>(e.reward));
    auto rtg = returns_to_go(rewards, gamma);
    for (std::size_t i = 0; i < trace.entries.size(); ++i)
        trace.entries[i].return_to_go = rtg[i];
    return trace;
}

// Copies reward / return-to-go from the trace entry of each block's target
// elicitor turn. A block targeting the dialogue's final turn gets (0, 0).
inline std::vector<Block> attach_rewards_to_blocks(std::vector<Block> blocks,
                                                   const RewardTrace& trace,
                                                   std::size_t dialogue_turn_count) {
    for (auto& b : blocks) {
        if (b.target_turn_index + 1 >= dialogue_turn_count) {
            b.reward = 0;
            b.return_to_go = 0.0;
            continue;
        }
        const RewardEntry* entry = trace.find(b.target_turn_index);
        if (!entry)
            throw ValidationError("block " + b.block_id +
                                  ": target turn missing from reward trace");
        b.reward = entry->reward;
        b.return_to_go = entry->return_to_go;
    }
    return blocks;
}

// Optional line-delimited audit file: per elicitor turn, the credited keys.
inline void write_reward_audit(const RewardTrace& trace,
                               const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot write reward audit: " + path.string());
    for (const auto& e : trace.entries) {
        json j;
        j["dialogue_id"] = trace.dialogue_id;
        j["turn_id"] = e.turn_id;
        j["credited_entities"] = e.new_entities;
        j["reward"] = e.reward;
        j["return_to_go"] = e.return_to_go;
        out << j.dump() << "\n";
    }
}

}  // namespace elicit
