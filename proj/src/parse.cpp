#include "metajudge/parse.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>

namespace metajudge::parse {

namespace {

constexpr const char* kResultStart = "<RESULT_START>";
constexpr const char* kResultEnd = "<RESULT_END>";

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

/// Text between the result markers, or nullopt when either is missing.
std::optional<std::string> extract_result_block(const std::string& text) {
    auto start = text.find(kResultStart);
    if (start == std::string::npos) return std::nullopt;
    start += std::string(kResultStart).size();
    auto end = text.find(kResultEnd, start);
    if (end == std::string::npos) return std::nullopt;
    return text.substr(start, end - start);
}

/// Block content with a required start marker; the end marker is optional
/// (truncated outputs are still salvageable for decomposition).
std::optional<std::string> extract_block_from_start(const std::string& text) {
    auto start = text.find(kResultStart);
    if (start == std::string::npos) return std::nullopt;
    start += std::string(kResultStart).size();
    auto end = text.find(kResultEnd, start);
    if (end == std::string::npos) return text.substr(start);
    return text.substr(start, end - start);
}

/// Strips a leading "-" or "*" bullet. Returns nullopt when the line is not
/// a bullet.
std::optional<std::string> strip_bullet(const std::string& line) {
    std::string t = trim(line);
    if (t.size() >= 2 && (t[0] == '-' || t[0] == '*') &&
        std::isspace(static_cast<unsigned char>(t[1]))) {
        return trim(t.substr(2));
    }
    if (t.size() == 1 && (t[0] == '-' || t[0] == '*')) return std::string();
    return std::nullopt;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

/// Last \boxed{...} token in `text` whose content is one of the five
/// verdict forms (internal spaces ignored).
std::optional<Verdict> last_boxed_verdict(const std::string& text) {
    std::optional<Verdict> found;
    std::size_t pos = 0;
    const std::string needle = "\\boxed{";
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        std::size_t open = pos + needle.size();
        std::size_t close = text.find('}', open);
        if (close == std::string::npos) break;
        if (auto v = verdict_from_string(text.substr(open, close - open))) found = v;
        pos = close + 1;
    }
    return found;
}

struct IndexedLine {
    int index = 0;       // the <k> in R<k>/S<k>/C<k>
    std::string rest;    // content after the colon, trimmed
};

/// Matches "<letter><int>: rest" with optional leading bullet, ignoring the
/// letter's case. Returns nullopt when the shape does not match.
std::optional<IndexedLine> match_indexed_line(const std::string& line, char letter) {
    std::string body = strip_bullet(line).value_or(trim(line));
    if (body.empty()) return std::nullopt;
    if (std::tolower(static_cast<unsigned char>(body[0])) !=
        std::tolower(static_cast<unsigned char>(letter)))
        return std::nullopt;
    std::size_t i = 1;
    std::size_t digits_begin = i;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
    if (i == digits_begin) return std::nullopt;
    int index = std::atoi(body.substr(digits_begin, i - digits_begin).c_str());
    while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    if (i >= body.size() || body[i] != ':') return std::nullopt;
    return IndexedLine{index, trim(body.substr(i + 1))};
}

bool is_rubric_score(double s) {
    double q = s * 4.0;
    return q == std::round(q);
}

}  // namespace

// ---------------------------------------------------------------------------
// GenRM output
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> reasons_under_header(const std::vector<std::string>& lines) {
    std::vector<std::string> reasons;
    bool in_reasons = false;
    for (const auto& line : lines) {
        std::string t = trim(line);
        if (!in_reasons) {
            if (istarts_with(t, "List of reasons:")) in_reasons = true;
            continue;
        }
        if (t.empty()) continue;
        auto bullet = strip_bullet(line);
        if (!bullet) break;
        if (!bullet->empty()) reasons.push_back(*bullet);
    }
    return reasons;
}

}  // namespace

JudgeOutput parse_genrm_output(const std::string& text, bool strict) {
    auto block = extract_result_block(text);
    if (!block && strict) {
        throw MissingBlock("GenRM output has no <RESULT_START>/<RESULT_END> block");
    }

    const std::string& scope = block ? *block : text;
    std::vector<std::string> reason_texts = reasons_under_header(split_lines(scope));

    std::optional<Verdict> verdict = last_boxed_verdict(scope);
    if (!verdict && !strict && block) {
        // Block present but verdict outside it; lenient mode widens the scan.
        verdict = last_boxed_verdict(text);
    }
    if (!verdict) throw MissingVerdict("no valid \\boxed{...} verdict found");
    if (strict && reason_texts.empty()) {
        throw EmptyReasons("GenRM output has zero reason bullets");
    }

    JudgeOutput out;
    out.reasons = make_checklist(ChecklistOrigin::kModel, reason_texts, "S");
    out.verdict = *verdict;
    out.raw_text = text;
    return out;
}

std::string render_genrm_output(const JudgeOutput& output) {
    std::string s;
    s += kResultStart;
    s += "\nList of reasons:\n";
    for (const auto& reason : output.reasons.items) {
        s += "- " + reason.text + "\n";
    }
    s += "Final assessment result: \\boxed{" + to_string(output.verdict) + "}\n";
    s += kResultEnd;
    s += "\n";
    return s;
}

// ---------------------------------------------------------------------------
// Matcher scores
// ---------------------------------------------------------------------------

MatcherScores parse_matcher_scores(const std::string& text, int n_human, int n_model) {
    if (n_human < 1) throw IndexOutOfRange("n_human must be >= 1");
    if (n_model < 0) throw IndexOutOfRange("n_model must be >= 0");

    auto block = extract_result_block(text);
    if (!block) {
        throw MissingBlock("matcher output has no <RESULT_START>/<RESULT_END> block");
    }

    MatcherScores result;
    std::vector<std::optional<SparseScore>> by_human(static_cast<std::size_t>(n_human) + 1);

    for (const auto& line : split_lines(*block)) {
        // Shape: R<i> @ S<j> : <number>, with or without a leading bullet.
        std::string body = strip_bullet(line).value_or(trim(line));
        std::size_t at = body.find('@');
        if (at == std::string::npos) continue;
        std::string left = trim(body.substr(0, at));
        std::string right = trim(body.substr(at + 1));
        if (left.empty() || right.empty()) continue;
        if (std::tolower(static_cast<unsigned char>(left[0])) != 'r') continue;
        if (std::tolower(static_cast<unsigned char>(right[0])) != 's') continue;

        char* end = nullptr;
        long human_index = std::strtol(left.c_str() + 1, &end, 10);
        if (end == left.c_str() + 1 || trim(end).size() != 0) continue;

        std::size_t colon = right.find(':');
        if (colon == std::string::npos) continue;
        std::string s_part = trim(right.substr(1, colon - 1));
        long model_index = std::strtol(s_part.c_str(), &end, 10);
        if (end == s_part.c_str() || trim(end).size() != 0) continue;

        std::string num_part = trim(right.substr(colon + 1));
        double score = std::strtod(num_part.c_str(), &end);
        if (end == num_part.c_str()) continue;

        if (human_index < 1 || human_index > n_human) {
            throw IndexOutOfRange("R" + std::to_string(human_index) + " out of range 1.." +
                                  std::to_string(n_human));
        }
        if (model_index < 0 || model_index > n_model) {
            throw IndexOutOfRange("S" + std::to_string(model_index) + " out of range 0.." +
                                  std::to_string(n_model));
        }
        if (score < 0.0 || score > 1.0) {
            throw ScoreOutOfRange("score " + num_part + " outside [0,1] for R" +
                                  std::to_string(human_index));
        }

        SparseScore entry;
        entry.human_index = static_cast<int>(human_index);
        entry.model_index = static_cast<int>(model_index);
        entry.score = score;

        if (entry.model_index == 0 && entry.score != 0.0) {
            result.warnings.push_back("R" + std::to_string(entry.human_index) +
                                      "@S0 carries nonzero score; forced to 0");
            entry.score = 0.0;
        }
        if (!is_rubric_score(entry.score)) {
            result.warnings.push_back("off-rubric score " + num_part + " for R" +
                                      std::to_string(entry.human_index) + " accepted");
        }
        if (by_human[entry.human_index]) {
            result.warnings.push_back("duplicate line for R" +
                                      std::to_string(entry.human_index) +
                                      "; keeping the last occurrence");
        }
        by_human[entry.human_index] = entry;
    }

    for (int i = 1; i <= n_human; ++i) {
        if (!by_human[i]) {
            result.warnings.push_back("R" + std::to_string(i) +
                                      " missing; synthesized as R" + std::to_string(i) +
                                      "@S0: 0");
            by_human[i] = SparseScore{i, 0, 0.0};
        }
        result.scores.push_back(*by_human[i]);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

DecompositionResult parse_decomposition(const std::string& text) {
    auto block = extract_block_from_start(text);
    if (!block) throw MissingBlock("decomposition output has no <RESULT_START> marker");

    DecompositionResult result;
    std::optional<int> declared_count;
    enum class Section { kClaims, kIgnored } section = Section::kClaims;

    for (const auto& line : split_lines(*block)) {
        std::string t = trim(line);
        if (t.empty()) continue;

        if (istarts_with(t, "CLAIM_COUNT")) {
            std::size_t eq = t.find('=');
            if (eq != std::string::npos) {
                std::string num = trim(t.substr(eq + 1));
                char* end = nullptr;
                long n = std::strtol(num.c_str(), &end, 10);
                if (end != num.c_str()) declared_count = static_cast<int>(n);
            }
            continue;
        }
        if (istarts_with(t, "CLAIMS:")) {
            section = Section::kClaims;
            continue;
        }
        if (istarts_with(t, "IGNORED_SUMMARY:")) {
            section = Section::kIgnored;
            continue;
        }

        if (section == Section::kClaims) {
            auto m = match_indexed_line(line, 'c');
            if (m && !m->rest.empty()) {
                AtomicRationale claim;
                claim.rank = static_cast<int>(result.claims.size()) + 1;
                claim.id = "C" + std::to_string(claim.rank);
                claim.text = m->rest;
                result.claims.push_back(std::move(claim));
            }
        } else {
            auto bullet = strip_bullet(line);
            if (!bullet || bullet->empty()) continue;
            IgnoredStatement entry;
            entry.text = *bullet;
            // Parenthesized "(Reason: ...)" suffix, when present.
            std::size_t open = bullet->rfind('(');
            if (open != std::string::npos && bullet->back() == ')') {
                std::string inner = bullet->substr(open + 1, bullet->size() - open - 2);
                if (istarts_with(trim(inner), "Reason:")) {
                    entry.reason = trim(trim(inner).substr(7));
                    entry.text = trim(bullet->substr(0, open));
                }
            }
            result.ignored.push_back(std::move(entry));
        }
    }

    int bullet_count = static_cast<int>(result.claims.size());
    if (!declared_count) {
        result.warnings.push_back("CLAIM_COUNT line missing; using bullet count " +
                                  std::to_string(bullet_count));
    } else if (*declared_count != bullet_count) {
        result.warnings.push_back("CLAIM_COUNT=" + std::to_string(*declared_count) +
                                  " disagrees with " + std::to_string(bullet_count) +
                                  " bullets; trusting the bullets");
    }
    result.claim_count = bullet_count;
    return result;
}

// ---------------------------------------------------------------------------
// Flaw tags
// ---------------------------------------------------------------------------

std::string to_string(FlawTag tag) {
    switch (tag) {
        case FlawTag::kF1: return "F1";
        case FlawTag::kF2: return "F2";
        case FlawTag::kF3: return "F3";
        case FlawTag::kF4: return "F4";
        case FlawTag::kF5: return "F5";
        case FlawTag::kF6: return "F6";
        case FlawTag::kF7: return "F7";
    }
    throw std::logic_error("unreachable flaw tag");
}

FlawTagging parse_flaw_tags(const std::string& text, int n_items) {
    if (n_items < 0) throw IndexOutOfRange("n_items must be >= 0");
    auto block = extract_result_block(text);
    if (!block) throw MissingBlock("flaw-tag output has no <RESULT_START>/<RESULT_END> block");

    FlawTagging result;
    std::vector<std::optional<std::vector<FlawTag>>> by_item(
        static_cast<std::size_t>(n_items) + 1);

    for (const auto& line : split_lines(*block)) {
        auto m = match_indexed_line(line, 's');
        if (!m) continue;
        if (m->index < 1 || m->index > n_items) {
            throw IndexOutOfRange("S" + std::to_string(m->index) + " out of range 1.." +
                                  std::to_string(n_items));
        }

        std::string body = m->rest;
        if (!body.empty() && body.front() == '[' && body.back() == ']') {
            body = trim(body.substr(1, body.size() - 2));
        }

        std::vector<FlawTag> tags;
        std::istringstream parts(body);
        std::string token;
        while (std::getline(parts, token, ',')) {
            token = trim(token);
            if (token.empty()) continue;
            if (iequals(token, "NONE")) continue;
            if (token.size() == 2 &&
                std::tolower(static_cast<unsigned char>(token[0])) == 'f' &&
                token[1] >= '1' && token[1] <= '7') {
                tags.push_back(static_cast<FlawTag>(token[1] - '1'));
            } else {
                result.warnings.push_back("unknown flaw tag token '" + token + "' for S" +
                                          std::to_string(m->index));
            }
        }
        std::sort(tags.begin(), tags.end());
        tags.erase(std::unique(tags.begin(), tags.end()), tags.end());

        if (by_item[m->index]) {
            result.warnings.push_back("duplicate line for S" + std::to_string(m->index) +
                                      "; keeping the last occurrence");
        }
        by_item[m->index] = std::move(tags);
    }

    for (int i = 1; i <= n_items; ++i) {
        if (!by_item[i]) {
            result.warnings.push_back("S" + std::to_string(i) +
                                      " missing; treated as untagged");
            by_item[i] = std::vector<FlawTag>{};
        }
        result.per_item.push_back(std::move(*by_item[i]));
    }
    return result;
}

}  // namespace metajudge::parse
