#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qkvcomm {

enum class FactKind : uint8_t {
    Keyword = 0,
    Endpoint = 1,
    RateLimit = 2,
    Version = 3,
    Numeric = 4,
    Entity = 5,
};

const char* fact_kind_name(FactKind kind);

struct Fact {
    FactKind kind = FactKind::Keyword;
    std::string content;
    float confidence = 0.0f;  // in [0,1]
    std::vector<std::pair<std::string, std::string>> metadata;

    bool operator==(const Fact&) const = default;
};

enum class ContentType { General, Structured };

// Lowercased alphanumeric tokens grouped by sentence. Sentences are
// split on '.', '!' and '?'; sentences without tokens are dropped.
struct TokenizedCorpus {
    std::vector<std::vector<std::string>> sentences;

    size_t total_tokens() const;
};

TokenizedCorpus tokenize(const std::string& text);

// YAKE-style score S = TF * TS / (TL * TP), higher is more important:
//   TF = occurrence count, TS = fraction of sentences containing the word,
//   TL = min(length, 10) / 10, TP = 1 / (1 + first sentence index).
// Matching is case-insensitive; throws InvalidArgument if absent.
double yake_score(const std::string& word, const TokenizedCorpus& corpus);

// Top-k tokens (>= 3 chars, stopwords removed) ranked by score, ties
// alphabetical; confidence normalized so the best keyword gets 1.0.
std::vector<Fact> extract_keywords(const std::string& text, size_t top_k);

// Regex rules for endpoints, rate limits, version numbers and numbers
// with unit suffixes. Confidence 0.9; metadata names the matching rule.
std::vector<Fact> extract_patterns(const std::string& text);

// Capitalized runs of two or more adjacent words that do not open a
// sentence. Confidence 0.7.
std::vector<Fact> extract_entities(const std::string& text);

// Structured when pattern facts number >= 3 or reach 1 per 50 tokens.
ContentType detect_content_type(const std::string& text);

// Pattern + keyword + entity extraction, deduplicated by lowercased
// content (highest confidence wins), sorted by confidence descending
// (ties alphabetical), truncated to budget.
std::vector<Fact> extract_facts(const std::string& text, size_t budget);

// "FACTS(n):" header plus one "- [kind] content" line per fact; empty
// input yields an empty string.
std::string format_facts_summary(const std::vector<Fact>& facts);

bool is_stopword(const std::string& lowercased);

}  // namespace qkvcomm
