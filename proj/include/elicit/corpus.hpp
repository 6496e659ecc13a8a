#pragma once
// Canonical data model for information-elicitation dialogues: schema
// validation, JSONL ingestion, stratified splitting, sharding, corpus
// statistics and the shuffled baseline transform.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace elicit {

using json = nlohmann::ordered_json;

enum class Role { elicitor, respondent };

inline std::string to_string(Role r) {
    return r == Role::elicitor ? "elicitor" : "respondent";
}

inline std::optional<Role> parse_role(const std::string& s) {
    if (s == "elicitor") return Role::elicitor;
    if (s == "respondent") return Role::respondent;
    return std::nullopt;
}

enum class DomainTag {
    academic_interviews,
    journalistic_investigations,
    judicial_proceedings,
    oral_history,
};

inline constexpr DomainTag kAllDomains[] = {
    DomainTag::academic_interviews,
    DomainTag::journalistic_investigations,
    DomainTag::judicial_proceedings,
    DomainTag::oral_history,
};

inline std::string to_string(DomainTag d) {
    switch (d) {
        case DomainTag::academic_interviews: return "academic_interviews";
        case DomainTag::journalistic_investigations: return "journalistic_investigations";
        case DomainTag::judicial_proceedings: return "judicial_proceedings";
        case DomainTag::oral_history: return "oral_history";
    }
    return "unknown";
}

// Human-readable form used in the rendered system instruction.
inline std::string human_readable(DomainTag d) {
    switch (d) {
        case DomainTag::academic_interviews: return "academic interviews";
        case DomainTag::journalistic_investigations: return "journalistic investigations";
        case DomainTag::judicial_proceedings: return "judicial proceedings";
        case DomainTag::oral_history: return "oral history";
    }
    return "unknown";
}

// Canonicalizes lowercase snake_case plus the aliases that occur in the
// source archives ("judicial_dialogue" vs "judicial_proceedings").
inline std::optional<DomainTag> parse_domain(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::replace(s.begin(), s.end(), ' ', '_');
    if (s == "academic_interviews") return DomainTag::academic_interviews;
    if (s == "journalistic_investigations") return DomainTag::journalistic_investigations;
    if (s == "judicial_proceedings" || s == "judicial_dialogue")
        return DomainTag::judicial_proceedings;
    if (s == "oral_history") return DomainTag::oral_history;
    return std::nullopt;
}

struct Turn {
    std::string turn_id;
    std::optional<std::string> timestamp;
    std::string speaker;
    Role role = Role::elicitor;
    std::string utterance;
};

struct Dialogue {
    std::string dialogue_id;
    json metadata = json::object();
    std::string broad_source;
    DomainTag domain = DomainTag::oral_history;
    std::optional<std::string> title;
    std::vector<std::string> elicitors;
    std::vector<std::string> respondents;
    std::vector<std::string> languages;
    std::vector<Turn> turns;

    // A dialogue needs at least one turn of each role to enter metric
    // aggregation; flagged, never rejected.
    bool metric_eligible() const {
        bool has_e = false, has_r = false;
        for (const auto& t : turns) (t.role == Role::elicitor ? has_e : has_r) = true;
        return has_e && has_r;
    }
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationIssue {
    std::string path;
    std::size_t line = 0;
    std::string dialogue_id;
    std::string message;
};

inline std::string trim_copy(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// ---------------------------------------------------------------------------
// serialization

inline json to_json(const Turn& t) {
    json j;
    j["turn_id"] = t.turn_id;
    j["timestamp"] = t.timestamp ? json(*t.timestamp) : json(nullptr);
    j["speaker"] = t.speaker;
    j["role"] = to_string(t.role);
    j["utterance"] = t.utterance;
    return j;
}

inline json to_json(const Dialogue& d) {
    json j;
    j["dialogue_id"] = d.dialogue_id;
    j["metadata"] = d.metadata;
    j["broad_source"] = d.broad_source;
    j["domain"] = to_string(d.domain);
    j["title"] = d.title ? json(*d.title) : json(nullptr);
    j["elicitors"] = d.elicitors;
    j["respondents"] = d.respondents;
    j["languages"] = d.languages;
    j["turns"] = json::array();
    for (const auto& t : d.turns) j["turns"].push_back(to_json(t));
    return j;
}

// Validates one record against the published schema. Throws ValidationError
// with the dialogue_id / offending field in the message.
inline Dialogue dialogue_from_json(const json& j) {
    auto fail = [&](const std::string& msg) -> ValidationError {
        std::string id = j.contains("dialogue_id") && j["dialogue_id"].is_string()
                             ? j["dialogue_id"].get<std::string>()
                             : "<missing dialogue_id>";
        return ValidationError("dialogue " + id + ": " + msg);
    };
    if (!j.is_object()) throw fail("record is not an object");
    Dialogue d;
    if (!j.contains("dialogue_id") || !j["dialogue_id"].is_string())
        throw fail("missing or non-string dialogue_id");
    d.dialogue_id = j["dialogue_id"].get<std::string>();
    if (j.contains("metadata") && !j["metadata"].is_null()) {
        if (!j["metadata"].is_object()) throw fail("metadata must be an object");
        d.metadata = j["metadata"];
    }
    if (j.contains("broad_source") && j["broad_source"].is_string())
        d.broad_source = j["broad_source"].get<std::string>();
    if (!j.contains("domain") || !j["domain"].is_string())
        throw fail("missing domain");
    auto dom = parse_domain(j["domain"].get<std::string>());
    if (!dom) throw fail("unknown domain \"" + j["domain"].get<std::string>() + "\"");
    d.domain = *dom;
    if (j.contains("title") && j["title"].is_string())
        d.title = j["title"].get<std::string>();
    auto read_strings = [&](const char* key, std::vector<std::string>& out) {
        if (!j.contains(key) || j[key].is_null()) return;
        if (!j[key].is_array()) throw fail(std::string(key) + " must be an array");
        for (const auto& v : j[key]) {
            if (!v.is_string()) throw fail(std::string(key) + " entries must be strings");
            out.push_back(v.get<std::string>());
        }
    };
    read_strings("elicitors", d.elicitors);
    read_strings("respondents", d.respondents);
    read_strings("languages", d.languages);

    if (!j.contains("turns") || !j["turns"].is_array() || j["turns"].empty())
        throw fail("turns must be a nonempty array");
    std::set<std::string> seen_ids;
    for (const auto& tj : j["turns"]) {
        if (!tj.is_object()) throw fail("turn is not an object");
        Turn t;
        if (!tj.contains("turn_id") || !tj["turn_id"].is_string())
            throw fail("turn missing turn_id");
        t.turn_id = tj["turn_id"].get<std::string>();
        if (!seen_ids.insert(t.turn_id).second)
            throw fail("duplicate turn_id \"" + t.turn_id + "\"");
        if (tj.contains("timestamp") && tj["timestamp"].is_string())
            t.timestamp = tj["timestamp"].get<std::string>();
        if (tj.contains("speaker") && tj["speaker"].is_string())
            t.speaker = tj["speaker"].get<std::string>();
        if (!tj.contains("role") || !tj["role"].is_string())
            throw fail("turn " + t.turn_id + " missing role");
        auto role = parse_role(tj["role"].get<std::string>());
        if (!role)
            throw fail("turn " + t.turn_id + " has invalid role \"" +
                       tj["role"].get<std::string>() + "\"");
        t.role = *role;
        if (!tj.contains("utterance") || !tj["utterance"].is_string())
            throw fail("turn " + t.turn_id + " missing utterance");
        t.utterance = tj["utterance"].get<std::string>();
        if (trim_copy(t.utterance).empty())
            throw fail("turn " + t.turn_id + " has empty utterance");
        d.turns.push_back(std::move(t));
    }
    return d;
}

struct LoadResult {
    std::vector<Dialogue> dialogues;
    std::vector<ValidationIssue> issues;  // skipped records, with line numbers
};

// Loads line-delimited dialogue records. Invalid records are collected in
// `issues` rather than aborting the batch; unreadable files throw IoError.
inline LoadResult load_corpus(const std::vector<std::filesystem::path>& paths) {
    LoadResult result;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open corpus file: " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim_copy(line).empty()) continue;
            try {
                json j = json::parse(line);
                result.dialogues.push_back(dialogue_from_json(j));
            } catch (const std::exception& e) {
                result.issues.push_back({path.string(), line_no, "", e.what()});
            }
        }
    }
    return result;
}

inline void save_corpus(const std::vector<Dialogue>& dialogues,
                        const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus file: " + path.string());
    for (const auto& d : dialogues) out << to_json(d).dump() << "\n";
}

// ---------------------------------------------------------------------------
// deterministic RNG helpers
//
// std::shuffle / uniform_int_distribution are implementation-defined, so the
// split and shuffle paths use an explicit Fisher-Yates with rejection-sampled
// bounded draws to stay byte-reproducible across standard libraries.

inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

template <typename T>
void fisher_yates(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(bounded_draw(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

// ---------------------------------------------------------------------------
// stratified split

struct CorpusSplit {
    std::set<std::string> train;
    std::set<std::string> dev;
    std::set<std::string> test;
    std::uint64_t seed = 0;

    const char* bucket_of(const std::string& id) const {
        if (train.count(id)) return "train";
        if (dev.count(id)) return "dev";
        if (test.count(id)) return "test";
        return nullptr;
    }
};

struct SplitWarning {
    DomainTag domain;
    std::string message;
};

// Per-domain 80/10/10 (or caller-supplied fractions) with largest-remainder
// bucket assignment; deterministic for a fixed seed.
inline CorpusSplit stratified_split(const std::vector<Dialogue>& dialogues,
                                    std::array<double, 3> fractions,
                                    std::uint64_t seed,
                                    std::vector<SplitWarning>* warnings = nullptr) {
    double sum = fractions[0] + fractions[1] + fractions[2];
    if (fractions[0] <= 0 || fractions[1] <= 0 || fractions[2] <= 0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must be positive and sum to 1");

    std::map<DomainTag, std::vector<std::string>> by_domain;
    for (const auto& d : dialogues) by_domain[d.domain].push_back(d.dialogue_id);

    CorpusSplit split;
    split.seed = seed;
    std::set<std::string>* buckets[3] = {&split.train, &split.dev, &split.test};

    for (auto& [domain, ids] : by_domain) {
        std::mt19937_64 rng(seed ^ std::hash<std::string>{}(to_string(domain)));
        fisher_yates(ids, rng);

        const std::size_t n = ids.size();
        std::size_t counts[3];
        double remainders[3];
        std::size_t assigned = 0;
        for (int b = 0; b < 3; ++b) {
            double exact = fractions[b] * static_cast<double>(n);
            counts[b] = static_cast<std::size_t>(std::floor(exact));
            remainders[b] = exact - std::floor(exact);
            assigned += counts[b];
        }
        // Leftover seats go to the largest fractional remainders; ties break
        // toward the smaller bucket (test, then dev, then train).
        std::array<int, 3> order = {2, 1, 0};
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return remainders[a] > remainders[b]; });
        for (std::size_t r = 0; r < n - assigned; ++r) ++counts[order[r % 3]];

        if (warnings && n < 3)
            warnings->push_back({domain, "domain " + to_string(domain) + " has only " +
                                             std::to_string(n) +
                                             " dialogues; some buckets receive none"});

        std::size_t pos = 0;
        for (int b = 0; b < 3; ++b)
            for (std::size_t i = 0; i < counts[b]; ++i) buckets[b]->insert(ids[pos++]);
    }
    return split;
}

inline json to_json(const CorpusSplit& split) {
    json assignments = json::object();
    for (const auto& id : split.train) assignments[id] = "train";
    for (const auto& id : split.dev) assignments[id] = "dev";
    for (const auto& id : split.test) assignments[id] = "test";
    json j;
    j["seed"] = split.seed;
    j["assignments"] = assignments;
    return j;
}

inline CorpusSplit split_from_json(const json& j) {
    CorpusSplit split;
    split.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [id, bucket] : j.at("assignments").items()) {
        const std::string b = bucket.get<std::string>();
        if (b == "train") split.train.insert(id);
        else if (b == "dev") split.dev.insert(id);
        else if (b == "test") split.test.insert(id);
        else throw ValidationError("split manifest: unknown bucket \"" + b + "\"");
    }
    return split;
}

// ---------------------------------------------------------------------------
// sharding

// Writes <prefix>-NNNN.jsonl files of shard_size dialogues each (last file
// may be short). Returns the written paths in order.
inline std::vector<std::filesystem::path> shard(
    const std::vector<Dialogue>& dialogues, const std::filesystem::path& out_dir,
    const std::string& prefix = "dialogues", std::size_t shard_size = 128) {
    if (shard_size < 1) throw std::invalid_argument("shard_size must be >= 1");
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (std::size_t start = 0; start < dialogues.size(); start += shard_size) {
        std::size_t end = std::min(start + shard_size, dialogues.size());
        char name[64];
        std::snprintf(name, sizeof(name), "%s-%04zu.jsonl", prefix.c_str(),
                      written.size());
        std::filesystem::path path = out_dir / name;
        std::ofstream out(path);
        if (!out) throw IoError("cannot write shard: " + path.string());
        for (std::size_t i = start; i < end; ++i)
            out << to_json(dialogues[i]).dump() << "\n";
        written.push_back(path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// shuffled baseline

// Uniform permutation of the turn sequence (roles travel with their turns).
// Dialogues of fewer than two turns are returned unchanged.
inline Dialogue shuffle_dialogue(const Dialogue& d, std::uint64_t seed,
                                 bool* warned = nullptr) {
    Dialogue out = d;
    if (d.turns.size() < 2) {
        if (warned) *warned = true;
        return out;
    }
    std::mt19937_64 rng(seed ^ std::hash<std::string>{}(d.dialogue_id));
    fisher_yates(out.turns, rng);
    return out;
}

// Reapplies the original dialogue's positional role pattern to a shuffled
// turn sequence, so answers land in question slots and vice versa. This is
// the transform that neutralizes the elicitation asymmetry in the baseline.
inline Dialogue apply_positional_roles(const Dialogue& shuffled,
                                       const Dialogue& original) {
    if (shuffled.turns.size() != original.turns.size())
        throw std::invalid_argument("positional role template length mismatch");
    Dialogue out = shuffled;
    for (std::size_t i = 0; i < out.turns.size(); ++i)
        out.turns[i].role = original.turns[i].role;
    return out;
}

inline Dialogue shuffled_baseline(const Dialogue& d, std::uint64_t seed) {
    return apply_positional_roles(shuffle_dialogue(d, seed), d);
}

}  // namespace elicit
