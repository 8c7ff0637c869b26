#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metajudge {

/// Thrown when a domain type is constructed or loaded in a state that
/// violates its documented invariants.
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Verdicts and preference labels
// ---------------------------------------------------------------------------

/// Five-way pairwise verdict. Serialized forms are exactly
/// "A>>B", "A>B", "A=B", "B>A", "B>>A".
enum class Verdict {
    kAMuchBetter,
    kABetter,
    kTie,
    kBBetter,
    kBMuchBetter,
};

std::string to_string(Verdict v);

/// Parses one of the five canonical forms; internal spaces are ignored
/// ("B > A" parses). Returns nullopt for anything else.
std::optional<Verdict> verdict_from_string(std::string_view s);

enum class Direction { kA, kB, kTie };
enum class Magnitude { kSlight, kSignificant };

struct PreferenceLabel {
    Direction direction = Direction::kTie;
    std::optional<Magnitude> magnitude;  // absent when direction == kTie

    bool operator==(const PreferenceLabel&) const = default;
};

/// Total mapping from the five verdicts onto preference labels.
/// MUCH variants carry SIGNIFICANT magnitude, plain variants SLIGHT,
/// ties carry none.
PreferenceLabel verdict_to_preference(Verdict v);

std::string to_string(Direction d);
std::string to_string(Magnitude m);

// ---------------------------------------------------------------------------
// Rationales and checklists
// ---------------------------------------------------------------------------

/// One evidence-grounded critique unit.
struct AtomicRationale {
    std::string id;    // e.g. "C1" / "R1" / "S1"
    std::string text;  // nonblank after trim
    int rank = 1;      // 1-based position in its list

    bool operator==(const AtomicRationale&) const = default;
};

enum class ChecklistOrigin { kHuman, kModel };

/// Ordered list of atomic rationales. Ranks must be 1..n contiguous and
/// ids unique within the list.
struct RationaleChecklist {
    ChecklistOrigin origin = ChecklistOrigin::kHuman;
    std::vector<AtomicRationale> items;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }

    /// Throws InvariantViolation on rank gaps, duplicate ids, or blank text.
    void validate() const;

    bool operator==(const RationaleChecklist&) const = default;
};

/// Builds a checklist from bare texts, assigning ids `<prefix>1..n` and
/// contiguous ranks.
RationaleChecklist make_checklist(ChecklistOrigin origin,
                                  const std::vector<std::string>& texts,
                                  std::string_view id_prefix);

// ---------------------------------------------------------------------------
// Benchmark instances and raw feedback
// ---------------------------------------------------------------------------

enum class Domain { kCode, kGeneral, kMultilingual, kStem, kCreativeWriting, kOther };

std::string to_string(Domain d);
std::optional<Domain> domain_from_string(std::string_view s);

struct ChatTurn {
    std::string role;  // "user" or "assistant"
    std::string content;

    bool operator==(const ChatTurn&) const = default;
};

struct BenchmarkInstance {
    std::string id;
    Domain domain = Domain::kOther;
    std::vector<ChatTurn> history;
    std::string query;
    std::string response_a;
    std::string response_b;
    PreferenceLabel label;
    RationaleChecklist human_checklist;  // origin kHuman

    bool operator==(const BenchmarkInstance&) const = default;
};

/// Free-form rationale material before atomic decomposition.
struct RawFeedback {
    std::string brief_summary;
    std::vector<std::string> full_evaluations;  // at least one nonempty

    bool operator==(const RawFeedback&) const = default;
};

/// A parsed candidate-judge output: ordered model reasons plus the verdict.
struct JudgeOutput {
    RationaleChecklist reasons;  // origin kModel, ranks follow text order
    Verdict verdict = Verdict::kTie;
    std::string raw_text;

    bool operator==(const JudgeOutput&) const = default;
};

// ---------------------------------------------------------------------------
// Canonical JSONL schema
// ---------------------------------------------------------------------------

/// One instance per line. Field names match the struct members; checklist
/// items serialize as {"id", "text"} with rank implied by position.
std::string instance_to_json_line(const BenchmarkInstance& inst);
BenchmarkInstance instance_from_json_line(const std::string& line);

std::vector<BenchmarkInstance> load_benchmark_jsonl(const std::string& path);
void save_benchmark_jsonl(const std::string& path,
                          const std::vector<BenchmarkInstance>& instances);

}  // namespace metajudge
