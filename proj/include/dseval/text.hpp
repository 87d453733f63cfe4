#pragma once
// Text utilities shared across the library: UTF-8 offset handling, alias
// normalization, tokenization, and sentence segmentation.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dseval::text {

// Byte offsets of each Unicode scalar value in a UTF-8 string, plus one
// past-the-end entry. Invalid bytes are treated as single-byte units.
inline std::vector<std::size_t> codepoint_byte_offsets(std::string_view s) {
    std::vector<std::size_t> offs;
    std::size_t i = 0;
    while (i < s.size()) {
        offs.push_back(i);
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if ((c & 0x80u) == 0x00u) len = 1;
        else if ((c & 0xE0u) == 0xC0u) len = 2;
        else if ((c & 0xF0u) == 0xE0u) len = 3;
        else if ((c & 0xF8u) == 0xF0u) len = 4;
        i += len;
        if (i > s.size()) i = s.size();
    }
    offs.push_back(s.size());
    return offs;
}

// Convert a [start,end) codepoint range into a byte range. Returns nullopt
// when the range is out of bounds or empty.
inline std::optional<std::pair<std::size_t, std::size_t>>
codepoint_range_to_bytes(std::string_view s, std::size_t cp_start, std::size_t cp_end) {
    if (cp_start >= cp_end) return std::nullopt;
    auto offs = codepoint_byte_offsets(s);
    if (cp_end >= offs.size()) return std::nullopt;
    return std::make_pair(offs[cp_start], offs[cp_end]);
}

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Alias normalization: casefold (ASCII range), trim, collapse internal
// whitespace, strip terminal punctuation.
inline std::string normalize(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t begin = 0, end = raw.size();
    while (begin < end && is_ascii_space(raw[begin])) ++begin;
    while (end > begin && is_ascii_space(raw[end - 1])) --end;
    // strip terminal punctuation (ASCII)
    while (end > begin) {
        char c = raw[end - 1];
        if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' ||
            c == ')' || c == ']' || c == '"' || c == '\'') {
            --end;
        } else {
            break;
        }
    }
    bool pending_space = false;
    for (std::size_t i = begin; i < end; ++i) {
        char c = raw[i];
        if (is_ascii_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(ascii_lower(c));
    }
    return out;
}

// Unigram tokens for indexing and matching: casefolded, punctuation-stripped.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80) {
            cur.push_back(ascii_lower(c));
        } else if (!cur.empty()) {
            toks.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) toks.push_back(std::move(cur));
    return toks;
}

// Case-insensitive (ASCII) substring search.
inline std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from = 0) {
    if (needle.empty() || needle.size() > hay.size()) return std::string_view::npos;
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (ascii_lower(hay[i + j]) != ascii_lower(needle[j])) { ok = false; break; }
        }
        if (ok) return i;
    }
    return std::string_view::npos;
}

struct SentenceSpan {
    std::size_t begin = 0;  // byte offsets
    std::size_t end = 0;
};

// Split on `.`, `!`, `?` followed by whitespace + uppercase, never inside
// the given protected byte ranges (link anchors).
inline std::vector<SentenceSpan> split_sentences(
    std::string_view body,
    const std::vector<std::pair<std::size_t, std::size_t>>& protected_ranges) {
    auto inside_protected = [&](std::size_t pos) {
        for (auto& [b, e] : protected_ranges)
            if (pos >= b && pos < e) return true;
        return false;
    };
    std::vector<SentenceSpan> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if ((c == '.' || c == '!' || c == '?') && !inside_protected(i)) {
            std::size_t j = i + 1;
            if (j < body.size() && is_ascii_space(body[j])) {
                while (j < body.size() && is_ascii_space(body[j])) ++j;
                if (j < body.size() && std::isupper(static_cast<unsigned char>(body[j]))) {
                    out.push_back({start, i + 1});
                    start = j;
                    i = j - 1;
                }
            }
        }
    }
    if (start < body.size()) out.push_back({start, body.size()});
    return out;
}

// True when `text` (after normalization) equals or contains `alias` on token
// boundaries. Used for probe completions and final-answer matching.
inline bool contains_alias(std::string_view txt, std::string_view alias) {
    std::string nt = normalize(txt);
    std::string na = normalize(alias);
    if (na.empty()) return false;
    if (nt == na) return true;
    std::size_t pos = 0;
    while ((pos = nt.find(na, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(nt[pos - 1]));
        std::size_t after = pos + na.size();
        bool right_ok = after == nt.size() || !std::isalnum(static_cast<unsigned char>(nt[after]));
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

inline bool matches_any_alias(std::string_view txt, const std::vector<std::string>& aliases) {
    return std::any_of(aliases.begin(), aliases.end(),
                       [&](const std::string& a) { return contains_alias(txt, a); });
}

}  // namespace dseval::text
