#pragma once

#include <string>
#include <vector>

#include "metajudge/core.hpp"

namespace metajudge::parse {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Required <RESULT_START>/<RESULT_END> markers are absent.
struct MissingBlock : ParseError {
    using ParseError::ParseError;
};

/// No valid \boxed{...} verdict anywhere it was allowed to appear.
struct MissingVerdict : ParseError {
    using ParseError::ParseError;
};

/// Zero reason bullets in strict mode.
struct EmptyReasons : ParseError {
    using ParseError::ParseError;
};

/// An Rx or Sy index outside the declared list sizes.
struct IndexOutOfRange : ParseError {
    using ParseError::ParseError;
};

/// A fulfillment score outside [0, 1].
struct ScoreOutOfRange : ParseError {
    using ParseError::ParseError;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One matcher assignment: reference item Rx matched to original item Sy.
/// model_index 0 means "no matching content" and forces score 0.
struct SparseScore {
    int human_index = 1;  // Rx, 1-based
    int model_index = 0;  // Sy, 0 = no match
    double score = 0.0;   // in [0, 1]

    bool operator==(const SparseScore&) const = default;
};

struct MatcherScores {
    std::vector<SparseScore> scores;  // exactly one per Rx after reconciliation
    std::vector<std::string> warnings;
};

struct IgnoredStatement {
    std::string text;
    std::string reason;

    bool operator==(const IgnoredStatement&) const = default;
};

struct DecompositionResult {
    int claim_count = 0;
    std::vector<AtomicRationale> claims;
    std::vector<IgnoredStatement> ignored;
    std::vector<std::string> warnings;
};

enum class FlawTag { kF1, kF2, kF3, kF4, kF5, kF6, kF7 };

std::string to_string(FlawTag tag);

struct FlawTagging {
    std::vector<std::vector<FlawTag>> per_item;  // one (possibly empty) set per item
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

/// Parses a candidate-judge output: "- " bullets under "List of reasons:"
/// plus the \boxed{...} verdict, inside the result markers.
///
/// strict: markers required (MissingBlock), at least one reason required
/// (EmptyReasons). Lenient mode scans the whole text when markers are
/// missing and takes the LAST valid boxed token.
JudgeOutput parse_genrm_output(const std::string& text, bool strict);

/// Re-emits a JudgeOutput in the exact wire format parse_genrm_output reads.
std::string render_genrm_output(const JudgeOutput& output);

/// Parses matcher lines of the form "- R<i>@S<j>: <number>". After
/// reconciliation every Rx in 1..n_human appears exactly once; Rx absent
/// from the text are synthesized as Rx@S0: 0 with a warning. Duplicate Rx
/// lines keep the last occurrence. Off-rubric scores (not multiples of
/// 0.25) warn but are accepted.
MatcherScores parse_matcher_scores(const std::string& text, int n_human, int n_model);

/// Parses a decomposition output: CLAIM_COUNT, "- C<k>: text" bullets and
/// the IGNORED_SUMMARY entries. A CLAIM_COUNT that disagrees with the
/// bullet count is reconciled in favor of the bullets, with a warning.
/// Zero claims with a nonempty ignored list is valid.
DecompositionResult parse_decomposition(const std::string& text);

/// Parses "- S<k>: [F-tags or NONE]" lines; items missing from the text get
/// an empty tag set plus a warning.
FlawTagging parse_flaw_tags(const std::string& text, int n_items);

}  // namespace metajudge::parse
