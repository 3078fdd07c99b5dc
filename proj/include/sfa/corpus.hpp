#pragma once

#include <algorithm>
#include <compare>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sfa/tensor.hpp"

namespace sfa {

enum class Polarity { Positive, Negative, Neutral };

inline const char* to_string(Polarity p) {
    switch (p) {
        case Polarity::Positive: return "Positive";
        case Polarity::Negative: return "Negative";
        default: return "Neutral";
    }
}

inline Polarity parse_polarity(const std::string& s) {
    if (s == "Positive") return Polarity::Positive;
    if (s == "Negative") return Polarity::Negative;
    if (s == "Neutral") return Polarity::Neutral;
    fail("unknown polarity \"", s, "\"");
}

/// Half-open token-index span [begin, end); begin == end means absent.
struct Span {
    int begin = 0;
    int end = 0;
    bool empty() const { return begin >= end; }
    int size() const { return empty() ? 0 : end - begin; }
    auto operator<=>(const Span&) const = default;
};

struct SentimentTuple {
    Span holder;     // may be empty
    Span target;     // may be empty
    Span expression; // never empty
    Polarity polarity = Polarity::Neutral;
    auto operator<=>(const SentimentTuple&) const = default;
};

struct Sentence {
    std::string id;
    std::string text;
    std::vector<std::string> tokens;
    std::vector<int> char_begin; // per-token codepoint offsets into text
    std::vector<int> char_end;
    std::vector<std::string> pos;    // empty, or one tag per token
    std::vector<std::string> lemmas; // empty, or one lemma per token
    int size() const { return static_cast<int>(tokens.size()); }
};

// ---- UTF-8 helpers (codepoint-based offsets) ----

inline bool utf8_is_continuation(unsigned char b) { return (b & 0xC0) == 0x80; }

/// Split a UTF-8 string into codepoint substrings.
inline std::vector<std::string> utf8_chars(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t j = i + 1;
        while (j < s.size() && utf8_is_continuation(static_cast<unsigned char>(s[j]))) ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Substring by codepoint range [begin, end).
inline std::string utf8_substr(const std::string& s, int begin, int end) {
    auto chars = utf8_chars(s);
    std::string out;
    for (int i = begin; i < end && i < static_cast<int>(chars.size()); ++i)
        if (i >= 0) out += chars[static_cast<std::size_t>(i)];
    return out;
}

/// Whitespace tokenization with codepoint offsets recorded per token.
inline void tokenize_whitespace(Sentence& s) {
    s.tokens.clear();
    s.char_begin.clear();
    s.char_end.clear();
    auto chars = utf8_chars(s.text);
    auto is_space = [](const std::string& c) {
        return c == " " || c == "\t" || c == "\n" || c == "\r";
    };
    int i = 0;
    const int n = static_cast<int>(chars.size());
    while (i < n) {
        while (i < n && is_space(chars[static_cast<std::size_t>(i)])) ++i;
        if (i >= n) break;
        int start = i;
        std::string tok;
        while (i < n && !is_space(chars[static_cast<std::size_t>(i)])) {
            tok += chars[static_cast<std::size_t>(i)];
            ++i;
        }
        s.tokens.push_back(tok);
        s.char_begin.push_back(start);
        s.char_end.push_back(i);
    }
}

struct LoadReport {
    int sentences = 0;
    int opinions = 0;
    int skipped_opinions = 0;
    std::vector<std::string> warnings;
};

struct CorpusEntry {
    Sentence sentence;
    std::vector<SentimentTuple> tuples;
};

struct Corpus {
    std::vector<CorpusEntry> entries;
    LoadReport report;
};

namespace detail {

// One "b:e" character-offset interval.
struct CharSpan {
    int begin = 0;
    int end = 0;
};

inline CharSpan parse_char_span(const std::string& s, const std::string& sent_id) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        fail("sentence ", sent_id, ": malformed offset \"", s, "\" (expected \"begin:end\")");
    try {
        CharSpan span;
        span.begin = std::stoi(s.substr(0, colon));
        span.end = std::stoi(s.substr(colon + 1));
        if (span.begin < 0 || span.end < span.begin)
            fail("sentence ", sent_id, ": invalid offset range \"", s, "\"");
        return span;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail("sentence ", sent_id, ": malformed offset \"", s, "\"");
    }
}

// Collects the "b:e" strings of one opinion role; tolerates null / missing.
inline std::vector<CharSpan> role_char_spans(const nlohmann::json& opinion, const std::string& key,
                                             const std::string& sent_id) {
    std::vector<CharSpan> spans;
    if (!opinion.contains(key) || opinion[key].is_null()) return spans;
    const auto& role = opinion[key];
    if (!role.is_array() || role.size() != 2 || !role[1].is_array())
        fail("sentence ", sent_id, ": field ", key, " is not a [[strings], [offsets]] pair");
    for (const auto& off : role[1]) spans.push_back(parse_char_span(off.get<std::string>(), sent_id));
    return spans;
}

// A token belongs to a span when their character intervals overlap.
// The recovered token span is the hull of all matched tokens.
// Returns false when offsets were present but matched no token.
inline bool align_role(const Sentence& s, const std::vector<CharSpan>& spans, Span& out) {
    out = Span{};
    if (spans.empty()) return true;
    int lo = s.size(), hi = -1;
    for (int t = 0; t < s.size(); ++t) {
        for (const CharSpan& cs : spans) {
            if (s.char_begin[static_cast<std::size_t>(t)] < cs.end &&
                cs.begin < s.char_end[static_cast<std::size_t>(t)]) {
                lo = std::min(lo, t);
                hi = std::max(hi, t);
                break;
            }
        }
    }
    if (hi < 0) return false;
    out = Span{lo, hi + 1};
    return true;
}

} // namespace detail

inline Corpus parse_corpus(const nlohmann::json& doc, const std::string& origin = "<memory>") {
    if (!doc.is_array()) fail(origin, ": corpus root must be a JSON array");
    Corpus corpus;
    int index = 0;
    for (const auto& item : doc) {
        std::string sent_id = item.contains("sent_id") && item["sent_id"].is_string()
                                  ? item["sent_id"].get<std::string>()
                                  : detail::str("#", index);
        try {
            if (!item.contains("text") || !item["text"].is_string())
                fail("missing or non-string \"text\"");
            CorpusEntry entry;
            entry.sentence.id = sent_id;
            entry.sentence.text = item["text"].get<std::string>();
            tokenize_whitespace(entry.sentence);
            if (entry.sentence.tokens.empty()) fail("sentence has no tokens");
            if (item.contains("pos") && item["pos"].is_array()) {
                entry.sentence.pos = item["pos"].get<std::vector<std::string>>();
                if (entry.sentence.pos.size() != entry.sentence.tokens.size())
                    fail("pos list length ", entry.sentence.pos.size(), " != token count ",
                         entry.sentence.tokens.size());
            }
            if (item.contains("lemmas") && item["lemmas"].is_array()) {
                entry.sentence.lemmas = item["lemmas"].get<std::vector<std::string>>();
                if (entry.sentence.lemmas.size() != entry.sentence.tokens.size())
                    fail("lemma list length ", entry.sentence.lemmas.size(), " != token count ",
                         entry.sentence.tokens.size());
            }
            if (item.contains("opinions")) {
                for (const auto& op : item["opinions"]) {
                    ++corpus.report.opinions;
                    auto holder_spans = detail::role_char_spans(op, "Source", sent_id);
                    auto target_spans = detail::role_char_spans(op, "Target", sent_id);
                    auto expr_spans = detail::role_char_spans(op, "Polar_expression", sent_id);
                    if (!op.contains("Polarity") || !op["Polarity"].is_string())
                        fail("opinion without Polarity");
                    SentimentTuple tuple;
                    tuple.polarity = parse_polarity(op["Polarity"].get<std::string>());
                    bool ok = detail::align_role(entry.sentence, holder_spans, tuple.holder) &&
                              detail::align_role(entry.sentence, target_spans, tuple.target) &&
                              detail::align_role(entry.sentence, expr_spans, tuple.expression);
                    if (!ok || tuple.expression.empty()) {
                        ++corpus.report.skipped_opinions;
                        corpus.report.warnings.push_back(detail::str(
                            "sentence ", sent_id, ": skipped opinion (",
                            ok ? "empty expression" : "unalignable span", ")"));
                        continue;
                    }
                    entry.tuples.push_back(tuple);
                }
            }
            corpus.entries.push_back(std::move(entry));
            ++corpus.report.sentences;
        } catch (const Error& e) {
            fail(origin, ": sentence ", sent_id, ": ", e.what());
        }
        ++index;
    }
    return corpus;
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open corpus file ", path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(path, ": parse error: ", e.what());
    }
    return parse_corpus(doc, path);
}

/// Word/char/pos/lemma index maps with reserved PAD and UNK entries.
/// Indices are frequency-ordered (ties broken by first occurrence).
struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kReserved = 2;

    std::unordered_map<std::string, int> word;
    std::unordered_map<std::string, int> chr;
    std::unordered_map<std::string, int> pos;
    std::unordered_map<std::string, int> lemma;

    static int lookup(const std::unordered_map<std::string, int>& map, const std::string& key) {
        auto it = map.find(key);
        return it == map.end() ? kUnk : it->second;
    }

    int word_id(const std::string& w) const { return lookup(word, w); }
    int char_id(const std::string& c) const { return lookup(chr, c); }
    int pos_id(const std::string& p) const { return lookup(pos, p); }
    int lemma_id(const std::string& l) const { return lookup(lemma, l); }

    int word_count() const { return static_cast<int>(word.size()) + kReserved; }
    int char_count() const { return static_cast<int>(chr.size()) + kReserved; }
    int pos_count() const { return static_cast<int>(pos.size()) + kReserved; }
    int lemma_count() const { return static_cast<int>(lemma.size()) + kReserved; }
};

namespace detail {

inline void index_by_frequency(const std::vector<std::string>& stream,
                               std::unordered_map<std::string, int>& out) {
    std::unordered_map<std::string, std::pair<int, int>> stats; // count, first position
    int position = 0;
    for (const std::string& item : stream) {
        auto [it, inserted] = stats.try_emplace(item, 0, position);
        it->second.first += 1;
        ++position;
    }
    std::vector<std::pair<std::string, std::pair<int, int>>> ordered(stats.begin(), stats.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.second.second < b.second.second;
    });
    int next = Vocab::kReserved;
    for (const auto& [item, stat] : ordered) out.emplace(item, next++);
}

} // namespace detail

inline Vocab build_vocab(const Corpus& corpus) {
    if (corpus.entries.empty()) fail("build_vocab: empty corpus");
    std::vector<std::string> words, chars, tags, lemmas;
    for (const CorpusEntry& entry : corpus.entries) {
        for (const std::string& tok : entry.sentence.tokens) {
            words.push_back(tok);
            for (const std::string& c : utf8_chars(tok)) chars.push_back(c);
        }
        for (const std::string& p : entry.sentence.pos) tags.push_back(p);
        for (const std::string& l : entry.sentence.lemmas) lemmas.push_back(l);
    }
    Vocab vocab;
    detail::index_by_frequency(words, vocab.word);
    detail::index_by_frequency(chars, vocab.chr);
    detail::index_by_frequency(tags, vocab.pos);
    detail::index_by_frequency(lemmas, vocab.lemma);
    return vocab;
}

} // namespace sfa
