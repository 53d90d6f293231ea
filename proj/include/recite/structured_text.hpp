#pragma once

// Tag grammar of structured reasoning responses.
//
// A well-formed response is
//
//   [ws] <think> ... <retrieval>span</retrieval> ... </think> ... Answer: text
//
// with exactly one think pair, any number of retrieval pairs (all of them
// fully inside the think block), and at least one answer prefix after the
// think close. Markers are matched case-sensitively, byte for byte; no
// whitespace tolerance inside markers; retrieval pairs never nest.
//
// Everything here is a pure function of its input. Malformed text produces a
// violation report, never an exception; the only throwing operations are
// extract_answer (no prefix at all) and insert_retrieval_tokens (a fact with
// no occurrence).

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recite {

struct TagGrammar {
    static constexpr std::string_view think_open = "<think>";
    static constexpr std::string_view think_close = "</think>";
    static constexpr std::string_view retrieval_open = "<retrieval>";
    static constexpr std::string_view retrieval_close = "</retrieval>";
    static constexpr std::string_view answer_prefix = "Answer:";
};

enum class ViolationKind {
    MissingThink,
    UnbalancedThink,
    RetrievalOutsideThink,
    UnbalancedRetrieval,
    MissingAnswer,
    TextBeforeThink,
};

inline std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::MissingThink: return "MissingThink";
        case ViolationKind::UnbalancedThink: return "UnbalancedThink";
        case ViolationKind::RetrievalOutsideThink: return "RetrievalOutsideThink";
        case ViolationKind::UnbalancedRetrieval: return "UnbalancedRetrieval";
        case ViolationKind::MissingAnswer: return "MissingAnswer";
        case ViolationKind::TextBeforeThink: return "TextBeforeThink";
    }
    return "Unknown";
}

// Byte offset into the raw text; end-of-input for something that is absent.
struct FormatViolation {
    ViolationKind kind;
    std::size_t location;
};

// Span coordinates index into think_text (which keeps the retrieval markers);
// [begin, end) is the inner text between one marker pair.
struct RetrievalSpan {
    std::size_t begin;
    std::size_t end;
    std::string text;
};

struct StructuredResponse {
    std::string raw;
    std::string think_text;
    std::vector<RetrievalSpan> retrieval_spans;
    std::string answer_text;
};

struct ParseOutcome {
    std::optional<StructuredResponse> response;  // engaged iff violations empty
    std::vector<FormatViolation> violations;

    bool ok() const { return response.has_value(); }
};

struct FormatCheck {
    bool ok;
    std::vector<FormatViolation> violations;
};

struct ExtractedSpans {
    std::vector<std::string> spans;  // inner texts of balanced pairs, document order
    bool balanced;                   // false if stray retrieval markers remained
};

struct NoAnswerFound : std::runtime_error {
    NoAnswerFound() : std::runtime_error("no answer prefix in response") {}
};

struct FactNotFound : std::runtime_error {
    explicit FactNotFound(std::string_view fact)
        : std::runtime_error("fact has no occurrence in reasoning: \"" + std::string(fact) + "\"") {}
};

// How insert_retrieval_tokens locates fact occurrences. `exact` is byte
// equality; `whitespace_flexible` lets a whitespace run in the fact match any
// whitespace run in the text (and ignores leading/trailing fact whitespace),
// which tolerates line-wrapped evidence.
enum class FactMatch { exact, whitespace_flexible };

namespace detail {

inline std::vector<std::size_t> find_all(std::string_view text, std::string_view needle) {
    std::vector<std::size_t> out;
    for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + 1)) {
        out.push_back(pos);
    }
    return out;
}

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

struct Marker {
    std::size_t pos;
    bool is_open;
};

inline std::vector<Marker> ordered_markers(std::string_view text, std::string_view open,
                                           std::string_view close) {
    std::vector<Marker> markers;
    for (std::size_t p : find_all(text, open)) markers.push_back({p, true});
    for (std::size_t p : find_all(text, close)) markers.push_back({p, false});
    std::sort(markers.begin(), markers.end(),
              [](const Marker& a, const Marker& b) { return a.pos < b.pos; });
    return markers;
}

struct Analysis {
    std::vector<FormatViolation> violations;
    bool think_ok = false;
    std::size_t think_open_pos = 0;
    std::size_t inner_begin = 0;  // raw offset just past <think>
    std::size_t inner_end = 0;    // raw offset of </think>
    std::size_t think_close_end = 0;
    // Inner [begin, end) raw ranges of retrieval pairs fully inside the think
    // block, in document order.
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::optional<std::size_t> last_answer_pos;
};

inline Analysis analyze(std::string_view raw) {
    Analysis a;

    // Think pair: exactly one balanced, non-nested pair.
    const auto think_markers = ordered_markers(raw, TagGrammar::think_open, TagGrammar::think_close);
    if (think_markers.empty()) {
        a.violations.push_back({ViolationKind::MissingThink, raw.size()});
    } else {
        int complete_pairs = 0;
        bool open_set = false;
        std::size_t open_pos = 0;
        for (const Marker& m : think_markers) {
            if (m.is_open) {
                if (open_set || complete_pairs > 0) {
                    a.violations.push_back({ViolationKind::UnbalancedThink, m.pos});
                } else {
                    open_set = true;
                    open_pos = m.pos;
                }
            } else {
                if (!open_set) {
                    a.violations.push_back({ViolationKind::UnbalancedThink, m.pos});
                } else {
                    if (complete_pairs == 0) {
                        a.think_open_pos = open_pos;
                        a.inner_begin = open_pos + TagGrammar::think_open.size();
                        a.inner_end = m.pos;
                        a.think_close_end = m.pos + TagGrammar::think_close.size();
                    }
                    ++complete_pairs;
                    open_set = false;
                }
            }
        }
        if (open_set) a.violations.push_back({ViolationKind::UnbalancedThink, open_pos});
        a.think_ok = complete_pairs == 1 && a.violations.empty();
    }

    const auto inside_think = [&](std::size_t pos) {
        return a.think_ok && pos >= a.inner_begin && pos < a.inner_end;
    };

    // Retrieval markers: pair them in document order, then judge each pair
    // (or stray marker) against the think interior. Extents of everything we
    // classify are collected so the text-before-think scan can skip them.
    std::vector<std::pair<std::size_t, std::size_t>> retrieval_extents;
    const auto ret_markers =
        ordered_markers(raw, TagGrammar::retrieval_open, TagGrammar::retrieval_close);
    bool ret_open_set = false;
    std::size_t ret_open_pos = 0;
    for (const Marker& m : ret_markers) {
        if (m.is_open) {
            if (ret_open_set) {
                a.violations.push_back({ViolationKind::UnbalancedRetrieval, m.pos});
                retrieval_extents.emplace_back(m.pos, m.pos + TagGrammar::retrieval_open.size());
            } else {
                ret_open_set = true;
                ret_open_pos = m.pos;
            }
        } else {
            if (!ret_open_set) {
                a.violations.push_back({inside_think(m.pos) ? ViolationKind::UnbalancedRetrieval
                                                            : ViolationKind::RetrievalOutsideThink,
                                        m.pos});
                retrieval_extents.emplace_back(m.pos, m.pos + TagGrammar::retrieval_close.size());
            } else {
                const std::size_t close_end = m.pos + TagGrammar::retrieval_close.size();
                const bool open_in = inside_think(ret_open_pos);
                const bool close_in = inside_think(m.pos);
                if (open_in && close_in) {
                    a.spans.emplace_back(ret_open_pos + TagGrammar::retrieval_open.size(), m.pos);
                } else if (!open_in && !close_in) {
                    a.violations.push_back({ViolationKind::RetrievalOutsideThink, ret_open_pos});
                } else {
                    a.violations.push_back({ViolationKind::UnbalancedRetrieval, ret_open_pos});
                }
                retrieval_extents.emplace_back(ret_open_pos, close_end);
                ret_open_set = false;
            }
        }
    }
    if (ret_open_set) {
        a.violations.push_back({inside_think(ret_open_pos) ? ViolationKind::UnbalancedRetrieval
                                                           : ViolationKind::RetrievalOutsideThink,
                                ret_open_pos});
        retrieval_extents.emplace_back(ret_open_pos,
                                       ret_open_pos + TagGrammar::retrieval_open.size());
    }

    // Non-whitespace before the think open that is not a (already flagged)
    // retrieval construct.
    if (a.think_ok && a.think_open_pos > 0) {
        const auto covered = [&](std::size_t pos) {
            for (const auto& [b, e] : retrieval_extents) {
                if (pos >= b && pos < e) return true;
            }
            return false;
        };
        for (std::size_t i = 0; i < a.think_open_pos; ++i) {
            if (!is_space(raw[i]) && !covered(i)) {
                a.violations.push_back({ViolationKind::TextBeforeThink, i});
                break;
            }
        }
    }

    // Answer prefix: the last one, required after the think close when the
    // think pair is valid, required anywhere otherwise.
    const auto answers = find_all(raw, TagGrammar::answer_prefix);
    if (!answers.empty()) a.last_answer_pos = answers.back();
    const bool answer_ok =
        a.last_answer_pos && (!a.think_ok || *a.last_answer_pos >= a.think_close_end);
    if (!answer_ok) a.violations.push_back({ViolationKind::MissingAnswer, raw.size()});

    std::sort(a.violations.begin(), a.violations.end(),
              [](const FormatViolation& x, const FormatViolation& y) {
                  return x.location < y.location;
              });
    return a;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace detail

inline FormatCheck check_format(std::string_view raw) {
    auto analysis = detail::analyze(raw);
    return {analysis.violations.empty(), std::move(analysis.violations)};
}

inline ParseOutcome parse_response(std::string_view raw) {
    auto analysis = detail::analyze(raw);
    if (!analysis.violations.empty()) return {std::nullopt, std::move(analysis.violations)};

    StructuredResponse resp;
    resp.raw = std::string(raw);
    resp.think_text =
        std::string(raw.substr(analysis.inner_begin, analysis.inner_end - analysis.inner_begin));
    for (const auto& [b, e] : analysis.spans) {
        RetrievalSpan span;
        span.begin = b - analysis.inner_begin;
        span.end = e - analysis.inner_begin;
        span.text = std::string(raw.substr(b, e - b));
        resp.retrieval_spans.push_back(std::move(span));
    }
    resp.answer_text = detail::trim(
        raw.substr(*analysis.last_answer_pos + TagGrammar::answer_prefix.size()));
    return {std::move(resp), {}};
}

// Text after the LAST answer prefix, whitespace-trimmed.
inline std::string extract_answer(std::string_view raw) {
    const std::size_t pos = raw.rfind(TagGrammar::answer_prefix);
    if (pos == std::string_view::npos) throw NoAnswerFound{};
    return detail::trim(raw.substr(pos + TagGrammar::answer_prefix.size()));
}

// Inner texts of balanced retrieval pairs anywhere in the text, greedy
// left-to-right pairing. Stray markers leave balanced == false but never
// discard the pairs already collected.
inline ExtractedSpans extract_retrieval_spans(std::string_view raw) {
    ExtractedSpans out{{}, true};
    std::size_t pos = 0;
    std::vector<std::pair<std::size_t, std::size_t>> extents;
    while (true) {
        const std::size_t open = raw.find(TagGrammar::retrieval_open, pos);
        if (open == std::string_view::npos) break;
        const std::size_t inner = open + TagGrammar::retrieval_open.size();
        const std::size_t close = raw.find(TagGrammar::retrieval_close, inner);
        if (close == std::string_view::npos) {
            out.balanced = false;
            break;
        }
        out.spans.emplace_back(raw.substr(inner, close - inner));
        extents.emplace_back(open, close + TagGrammar::retrieval_close.size());
        pos = close + TagGrammar::retrieval_close.size();
    }
    // A close marker outside every paired extent is also an imbalance.
    for (std::size_t p : detail::find_all(raw, TagGrammar::retrieval_close)) {
        bool inside = false;
        for (const auto& [b, e] : extents) {
            if (p >= b && p < e) inside = true;
        }
        if (!inside) out.balanced = false;
    }
    return out;
}

namespace detail {

// Whitespace-flexible occurrence of `fact` in `text` starting at `from`:
// non-whitespace bytes must match exactly, a whitespace run in the fact
// matches one or more whitespace bytes in the text. Returns [begin, end) in
// text coordinates.
inline std::optional<std::pair<std::size_t, std::size_t>> find_flexible(std::string_view text,
                                                                        std::string_view fact,
                                                                        std::size_t from) {
    if (fact.empty()) return std::nullopt;
    for (std::size_t start = from; start < text.size(); ++start) {
        std::size_t ti = start;
        std::size_t fi = 0;
        bool match = true;
        while (fi < fact.size()) {
            if (is_space(fact[fi])) {
                std::size_t ws = 0;
                while (ti < text.size() && is_space(text[ti])) ++ti, ++ws;
                if (ws == 0) {
                    match = false;
                    break;
                }
                while (fi < fact.size() && is_space(fact[fi])) ++fi;
            } else {
                if (ti >= text.size() || text[ti] != fact[fi]) {
                    match = false;
                    break;
                }
                ++ti, ++fi;
            }
        }
        if (match) return std::make_pair(start, ti);
    }
    return std::nullopt;
}

}  // namespace detail

// Wraps every occurrence of every fact in one retrieval pair. Longer facts
// claim their occurrences first; an occurrence overlapping an earlier claim
// is skipped. Output with tags stripped equals the input.
inline std::string insert_retrieval_tokens(std::string_view reasoning,
                                           const std::vector<std::string>& facts,
                                           FactMatch match = FactMatch::exact) {
    std::vector<std::size_t> order(facts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return facts[a].size() > facts[b].size();
    });

    std::vector<std::pair<std::size_t, std::size_t>> claims;
    const auto overlaps = [&](std::size_t b, std::size_t e) {
        for (const auto& [cb, ce] : claims) {
            if (b < ce && cb < e) return true;
        }
        return false;
    };

    for (std::size_t idx : order) {
        std::string_view fact = facts[idx];
        if (match == FactMatch::whitespace_flexible) {
            const std::string trimmed = detail::trim(fact);
            bool found_any = false;
            std::size_t pos = 0;
            while (pos < reasoning.size()) {
                const auto hit = detail::find_flexible(reasoning, trimmed, pos);
                if (!hit) break;
                found_any = true;
                if (overlaps(hit->first, hit->second)) {
                    pos = hit->first + 1;
                } else {
                    claims.emplace_back(hit->first, hit->second);
                    pos = hit->second;
                }
            }
            if (!found_any) throw FactNotFound{facts[idx]};
        } else {
            if (fact.empty()) throw FactNotFound{fact};
            bool found_any = false;
            std::size_t pos = 0;
            while ((pos = reasoning.find(fact, pos)) != std::string_view::npos) {
                found_any = true;
                if (overlaps(pos, pos + fact.size())) {
                    ++pos;
                } else {
                    claims.emplace_back(pos, pos + fact.size());
                    pos += fact.size();
                }
            }
            if (!found_any) throw FactNotFound{fact};
        }
    }

    std::sort(claims.begin(), claims.end());
    std::string out;
    out.reserve(reasoning.size() + claims.size() * (TagGrammar::retrieval_open.size() +
                                                    TagGrammar::retrieval_close.size()));
    std::size_t cursor = 0;
    for (const auto& [b, e] : claims) {
        out.append(reasoning.substr(cursor, b - cursor));
        out.append(TagGrammar::retrieval_open);
        out.append(reasoning.substr(b, e - b));
        out.append(TagGrammar::retrieval_close);
        cursor = e;
    }
    out.append(reasoning.substr(cursor));
    return out;
}

// Removes every literal marker occurrence in one left-to-right scan; the
// answer prefix is not a marker and stays.
inline std::string strip_tags(std::string_view raw) {
    static constexpr std::string_view markers[] = {
        TagGrammar::think_open,
        TagGrammar::think_close,
        TagGrammar::retrieval_open,
        TagGrammar::retrieval_close,
    };
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        bool matched = false;
        if (raw[i] == '<') {
            for (std::string_view m : markers) {
                if (raw.substr(i, m.size()) == m) {
                    i += m.size();
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) {
            out.push_back(raw[i]);
            ++i;
        }
    }
    return out;
}

}  // namespace recite
