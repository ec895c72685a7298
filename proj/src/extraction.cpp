#include "qkvcomm/extraction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <unordered_set>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

const char* fact_kind_name(FactKind kind) {
    switch (kind) {
        case FactKind::Keyword: return "keyword";
        case FactKind::Endpoint: return "endpoint";
        case FactKind::RateLimit: return "rate_limit";
        case FactKind::Version: return "version";
        case FactKind::Numeric: return "numeric";
        case FactKind::Entity: return "entity";
    }
    return "unknown";
}

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
        "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
        "between", "both", "but", "by", "can", "cannot", "could", "did", "do", "does",
        "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
        "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his",
        "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
        "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on",
        "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own",
        "per", "same", "she", "should", "so", "some", "such", "than", "that", "the",
        "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
        "those", "through", "to", "too", "under", "until", "up", "very", "was", "we",
        "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will",
        "with", "would", "you", "your", "yours", "yourself", "yourselves",
    };
    return words;
}

std::string to_lower(std::string s) {
    for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

bool is_stopword(const std::string& lowercased) {
    return stopwords().count(lowercased) > 0;
}

size_t TokenizedCorpus::total_tokens() const {
    size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
}

TokenizedCorpus tokenize(const std::string& text) {
    TokenizedCorpus corpus;
    std::vector<std::string> current;
    std::string token;

    auto flush_token = [&]() {
        if (!token.empty()) {
            current.push_back(to_lower(token));
            token.clear();
        }
    };
    auto flush_sentence = [&]() {
        flush_token();
        if (!current.empty()) corpus.sentences.push_back(std::move(current));
        current.clear();
    };

    for (char c : text) {
        if (is_word_char(c)) {
            token.push_back(c);
        } else {
            flush_token();
            if (c == '.' || c == '!' || c == '?') flush_sentence();
        }
    }
    flush_sentence();
    return corpus;
}

double yake_score(const std::string& word, const TokenizedCorpus& corpus) {
    const std::string w = to_lower(word);
    size_t term_frequency = 0;
    size_t sentences_with_word = 0;
    size_t first_sentence = 0;
    bool seen = false;

    for (size_t si = 0; si < corpus.sentences.size(); ++si) {
        size_t in_sentence = 0;
        for (const std::string& token : corpus.sentences[si]) {
            if (token == w) ++in_sentence;
        }
        if (in_sentence > 0) {
            if (!seen) {
                first_sentence = si;
                seen = true;
            }
            ++sentences_with_word;
            term_frequency += in_sentence;
        }
    }
    if (!seen) throw InvalidArgument("yake_score: word not present in corpus");

    const double tf = double(term_frequency);
    const double ts = double(sentences_with_word) / double(corpus.sentences.size());
    const double tl = double(std::min<size_t>(w.size(), 10)) / 10.0;
    const double tp = 1.0 / (1.0 + double(first_sentence));
    return tf * ts / (tl * tp);
}

std::vector<Fact> extract_keywords(const std::string& text, size_t top_k) {
    if (text.empty()) throw InvalidArgument("extract_keywords: empty text");

    const TokenizedCorpus corpus = tokenize(text);
    std::set<std::string> candidates;
    for (const auto& sentence : corpus.sentences) {
        for (const std::string& token : sentence) {
            if (token.size() >= 3 && !is_stopword(token)) candidates.insert(token);
        }
    }
    if (candidates.empty()) return {};

    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(candidates.size());
    for (const std::string& word : candidates)
        scored.emplace_back(word, yake_score(word, corpus));
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    const double max_score = scored.front().second;
    std::vector<Fact> facts;
    for (size_t i = 0; i < scored.size() && i < top_k; ++i) {
        Fact f;
        f.kind = FactKind::Keyword;
        f.content = scored[i].first;
        f.confidence = float(scored[i].second / max_score);
        facts.push_back(std::move(f));
    }
    return facts;
}

namespace {

struct PatternRule {
    const char* name;
    FactKind kind;
    std::regex regex;
    int group;  // capture group holding the fact content; 0 = whole match
};

const std::vector<PatternRule>& pattern_rules() {
    static const std::vector<PatternRule> rules = [] {
        std::vector<PatternRule> r;
        r.push_back({"method_path", FactKind::Endpoint,
                     std::regex(R"((GET|POST|PUT|DELETE|PATCH|HEAD|OPTIONS)[ \t]+(/[A-Za-z0-9_\-./{}:]*))"),
                     0});
        r.push_back({"url_path", FactKind::Endpoint,
                     std::regex(R"((^|[\s"'(])(/[A-Za-z0-9_\-{}:][A-Za-z0-9_\-./{}:]*))"), 2});
        r.push_back({"rate_per", FactKind::RateLimit,
                     std::regex(R"(\b(\d+)[ \t]+(requests?|calls?|queries|query|operations?|ops?|messages?|tokens?|hits?|connections?)[ \t]+per[ \t]+(second|minute|hour|day|week|month)\b)",
                                std::regex::icase),
                     0});
        r.push_back({"rate_slash", FactKind::RateLimit,
                     std::regex(R"(\b(\d+)[ \t]*/[ \t]*(second|minute|hour|day|sec|min|hr)\b)",
                                std::regex::icase),
                     0});
        r.push_back({"version", FactKind::Version,
                     std::regex(R"(\b(v?\d+\.\d+(\.\d+)?)(?![.\d]))"), 1});
        r.push_back({"numeric_unit", FactKind::Numeric,
                     std::regex(R"(\b(\d+(\.\d+)?)[ \t]?(ms|us|ns|KB|MB|GB|TB|PB|kb|mb|gb|tb|bytes?|bits?|%)(?![A-Za-z0-9]))"),
                     0});
        return r;
    }();
    return rules;
}

bool overlaps(size_t begin, size_t end, const std::vector<std::pair<size_t, size_t>>& spans) {
    for (const auto& [b, e] : spans) {
        if (begin < e && b < end) return true;
    }
    return false;
}

}  // namespace

std::vector<Fact> extract_patterns(const std::string& text) {
    std::vector<Fact> facts;
    // Path spans already claimed by a METHOD /path match; the bare-path
    // rule skips them so one endpoint yields one fact.
    std::vector<std::pair<size_t, size_t>> endpoint_spans;

    for (const PatternRule& rule : pattern_rules()) {
        auto begin = std::sregex_iterator(text.begin(), text.end(), rule.regex);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const std::smatch& m = *it;
            const size_t content_begin = size_t(m.position(rule.group));
            const size_t content_end = content_begin + size_t(m.length(rule.group));

            if (std::string(rule.name) == "method_path")
                endpoint_spans.emplace_back(size_t(m.position(2)),
                                            size_t(m.position(2)) + size_t(m.length(2)));
            if (std::string(rule.name) == "url_path" &&
                overlaps(content_begin, content_end, endpoint_spans))
                continue;

            std::string content = m.str(rule.group);
            // collapse interior whitespace runs so "GET  /x" and "GET /x" agree
            std::string normalized;
            bool in_space = false;
            for (char c : content) {
                if (c == ' ' || c == '\t') {
                    if (!in_space) normalized.push_back(' ');
                    in_space = true;
                } else {
                    normalized.push_back(c);
                    in_space = false;
                }
            }

            Fact f;
            f.kind = rule.kind;
            f.content = std::move(normalized);
            f.confidence = 0.9f;
            f.metadata.emplace_back("pattern", rule.name);
            facts.push_back(std::move(f));
        }
    }
    return facts;
}

namespace {

struct WordSpan {
    size_t begin;
    size_t end;
    bool capitalized;
    bool sentence_start;
};

std::vector<WordSpan> scan_words(const std::string& text) {
    std::vector<WordSpan> words;
    bool at_sentence_start = true;
    size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (std::isalpha(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < text.size() && is_word_char(text[j])) ++j;
            words.push_back({i, j, std::isupper(static_cast<unsigned char>(c)) != 0,
                             at_sentence_start});
            at_sentence_start = false;
            i = j;
        } else {
            if (c == '.' || c == '!' || c == '?') at_sentence_start = true;
            ++i;
        }
    }
    return words;
}

bool whitespace_gap(const std::string& text, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
        if (text[i] != ' ' && text[i] != '\t') return false;
    }
    return begin < end;
}

}  // namespace

std::vector<Fact> extract_entities(const std::string& text) {
    const std::vector<WordSpan> words = scan_words(text);
    std::vector<Fact> facts;

    size_t i = 0;
    while (i < words.size()) {
        if (!words[i].capitalized) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < words.size() && words[j + 1].capitalized &&
               whitespace_gap(text, words[j].end, words[j + 1].begin))
            ++j;
        if (j > i && !words[i].sentence_start) {
            std::string content;
            for (size_t k = i; k <= j; ++k) {
                if (k > i) content.push_back(' ');
                content.append(text, words[k].begin, words[k].end - words[k].begin);
            }
            Fact f;
            f.kind = FactKind::Entity;
            f.content = std::move(content);
            f.confidence = 0.7f;
            facts.push_back(std::move(f));
        }
        i = j + 1;
    }
    return facts;
}

ContentType detect_content_type(const std::string& text) {
    const size_t pattern_count = extract_patterns(text).size();
    if (pattern_count >= 3) return ContentType::Structured;
    if (pattern_count >= 1) {
        const size_t tokens = tokenize(text).total_tokens();
        if (tokens <= 50 * pattern_count) return ContentType::Structured;
    }
    return ContentType::General;
}

std::vector<Fact> extract_facts(const std::string& text, size_t budget) {
    if (budget == 0) throw InvalidArgument("extract_facts: budget must be >= 1");

    std::vector<Fact> all = extract_patterns(text);
    if (!text.empty()) {
        for (Fact& f : extract_keywords(text, budget)) all.push_back(std::move(f));
    }
    for (Fact& f : extract_entities(text)) all.push_back(std::move(f));

    // Dedup by lowercased content, highest confidence wins; on equal
    // confidence the smaller kind code is kept.
    std::map<std::string, Fact> by_content;
    for (Fact& f : all) {
        const std::string key = to_lower(f.content);
        auto it = by_content.find(key);
        if (it == by_content.end()) {
            by_content.emplace(key, std::move(f));
        } else if (f.confidence > it->second.confidence ||
                   (f.confidence == it->second.confidence && f.kind < it->second.kind)) {
            it->second = std::move(f);
        }
    }

    std::vector<Fact> facts;
    facts.reserve(by_content.size());
    for (auto& [key, fact] : by_content) facts.push_back(std::move(fact));
    std::sort(facts.begin(), facts.end(), [](const Fact& a, const Fact& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        const std::string la = to_lower(a.content);
        const std::string lb = to_lower(b.content);
        if (la != lb) return la < lb;
        return a.kind < b.kind;
    });
    if (facts.size() > budget) facts.resize(budget);
    return facts;
}

std::string format_facts_summary(const std::vector<Fact>& facts) {
    if (facts.empty()) return "";
    std::string out = "FACTS(" + std::to_string(facts.size()) + "):";
    for (const Fact& f : facts) {
        out += "\n- [";
        out += fact_kind_name(f.kind);
        out += "] ";
        out += f.content;
    }
    return out;
}

}  // namespace qkvcomm
