#include <string>

#include "fnv.hpp"
#include "metajudge/judge_gateway.hpp"

namespace metajudge::gateway {

namespace {

// Template texts are frozen: the parsers in this toolkit and the golden
// prompt tests both depend on the exact bytes. Bump prompt_fingerprint
// inputs when editing anything here.

constexpr const char* kDecompositionHeader =
    R"(You are an assistant for extracting and concretizing key points. Based on the "Evaluation Content", structurally summarize the "Brief Evaluation Summary", keeping only specific, constructive points that can be directly supported by the evaluation content. You may add details from the evaluation content; remove subjective and vague comments; merge duplicate points.)";

constexpr const char* kDecompositionRules =
    R"(Rules:
1. Each output point must be specific and directly evidenced by the evaluation content; include elements such as object/step/metric, and provide numbers, conditions, ranges, times, or examples whenever possible.
2. Keep only problem/error-type points that can improve the content; ignore neutral statements.
3. Remove vague descriptions (e.g., overall poor, needs improvement, may have issues, average performance).
4. You may use the evaluation content to supplement details to concretize vague statements; if it still cannot be concretized, ignore that summary sentence.
5. Each point should be simple, specific, and clear. Merge duplicate or synonymous points, keeping the more specific version.
6. If no specific points can be extracted, output an empty list and explain the reason.
7. If there are conflicting statements in the evaluation summary, ignore them and explain the reason.

Important Notes: It is absolutely forbidden to output any content not mentioned in the [Brief Evaluation Summary]! Absolutely no independent evaluation; only rewrite the [Brief Evaluation Summary].

Output Format:
<RESULT_START>
CLAIM_COUNT=integer
CLAIMS:
- C1: specific point text
- C2: specific point text
IGNORED_SUMMARY:
- Ignored sentence 1 (Reason: ...)
<RESULT_END>)";

constexpr const char* kMatcherHeader =
    R"(You are a rigorous achievement-rate analyst. Given an original evaluation list and a reference evaluation list (both are lists of reason points), please judge to what extent each item in the "original evaluation list" expresses the "intended purpose/improvement goal of each reason in the reference evaluation list", and provide an achievement score (0-1) based on semantic importance. Different expressions with the same meaning should be considered equivalent, but merely mentioning something semantically without achieving the purpose should be considered as not achieved. Abstract or vague descriptions of weaknesses/problems should be considered as not achieved.)";

constexpr const char* kMatcherRubric =
    R"(For each item in the reference evaluation list, find the best matching single item in the original evaluation list (if no match exists, consider it as not achieved, match R0). Calculate the achievement score (c value) using the following criteria, applying strict matching and prioritizing low scores:

- Not Achieved / Contradictory: 0.0 -- The detailed process does not address this evaluation's goal, or provides opposite conclusion/failure, or merely lists elements without achieving the purpose, or abstractly/vaguely describes weaknesses without precisely locating the problem (e.g., only states which is better without explaining why, or states something is illogical without specifying where)
- Slightly Touched: 0.25 -- Only mentions partial elements; not implemented or no result; cannot prove purpose achievement
- Partially Achieved: 0.5 -- Takes measures or analysis related to the goal, but misses multiple key steps or fails to form verifiable results/conclusions
- Mostly Achieved: 0.75 -- Main goal is basically achieved, key conclusions are consistent, but lacks secondary conditions, boundaries, or minor supporting details
- Fully Achieved: 1.0 -- The detailed process clearly shows this evaluation's intended purpose is achieved; includes necessary execution steps, evidence and results; all key conditions and constraints are satisfied

Output Format (fixed, ensure scores are extractable, Rx@Sy means reference list item Rx best matches original list item Sy):

(Provide reasoning)

<RESULT_START>
Scores for each claim:
- R1@Sx: decimal between 0 and 1, at least two decimal places, e.g., 0.75
- R2@Sx: decimal between 0 and 1, at least two decimal places, e.g., 0.75
- R3@S0: 0 (indicates no matching content)
- ... list all items
<RESULT_END>

Notes:
- Only evaluate based on "reason points" in the brief summary; do not count new content from detailed processes toward achievement.
- For quantitative claims, verify values, ranges, thresholds and conditions; if key constraints are not satisfied, do not judge as fully achieved.)";

constexpr const char* kGenRmHeader =
    R"(You will be shown a conversation context followed by a user query and two responses. You need to predict which response to the final query will be more favored by human expert annotators. You may consider any criteria you find appropriate. Try your best and think carefully, deeply analyze the responses, and provide a final verdict.

First, output the evaluation reasons in a list format. The reasons should be ordered from high to low importance based on their impact on the final assessment. The reasons should be specific, clear, and well-directed, avoid being vague or repetitive.

Finally, give the final assessment result separately, and must strictly use one of the following five formats:

Response A is significantly favored by human expert annotators: \boxed{A>>B}

Response A is slightly favored by human expert annotators: \boxed{A>B}

Tie, relatively the same by human expert annotators: \boxed{A=B}

Response B is slightly favored by human expert annotators: \boxed{B>A}

Response B is significantly favored by human expert annotators: \boxed{B>>A}

Output format (strictly follow; do not add content outside the markers):

<RESULT_START>

List of reasons:

- Specific evaluation reason

- ...

Final assessment result: Use one of the five formats above.

<RESULT_END>)";

constexpr const char* kFlawTagHeader =
    R"(You are auditing the quality of evaluation rationales. You will be shown a numbered list of atomic evaluation reasons produced by a judge model when comparing two responses. Label each item with every flaw tag that applies, or NONE when the item is free of these flaws.

Flaw tags:
- F1 Style Only: focuses on format, length, or tone rather than content.
- F2 Generic Correctness: claims one response is more correct without citing evidence.
- F3 Generic Relevance: claims one response is more relevant without pointing to specific content.
- F4 Single-Sided Praise: praises one response without comparing it to the other.
- F5 Unfalsifiable: cannot be verified or refuted from the given responses.
- F6 Non Sequitur: the conclusion does not follow from the stated premises.
- F7 Contradiction: conflicts with other statements in the same rationale.)";

std::string render_history(const std::vector<ChatTurn>& history) {
    std::string out;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i > 0) out += "\n";
        out += "[" + history[i].role + "]: " + history[i].content;
    }
    return out;
}

std::string numbered_list(const RationaleChecklist& list, char prefix) {
    std::string out;
    for (const auto& item : list.items) {
        out += prefix + std::to_string(item.rank) + ": " + item.text + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

}  // namespace

std::string render_decomposition_prompt(const std::vector<ChatTurn>& history,
                                        const std::string& query,
                                        const std::string& response_1,
                                        const std::string& response_2,
                                        const RawFeedback& feedback) {
    if (query.empty()) throw MissingField("decomposition prompt requires a query");
    if (response_1.empty()) throw MissingField("decomposition prompt requires response 1");
    if (response_2.empty()) throw MissingField("decomposition prompt requires response 2");
    bool any_eval = false;
    for (const auto& e : feedback.full_evaluations) {
        if (!e.empty()) any_eval = true;
    }
    if (!any_eval) throw MissingField("decomposition prompt requires at least one evaluation");

    std::string evals;
    for (std::size_t i = 0; i < feedback.full_evaluations.size(); ++i) {
        if (i > 0) evals += "\n";
        evals += feedback.full_evaluations[i];
    }

    std::string prompt;
    prompt += kDecompositionHeader;
    prompt += "\n\n<INPUT START>\n[Evaluation Content]\n";
    prompt += "<history>" + render_history(history) + "</history>\n";
    prompt += "<query>" + query + "</query>\n";
    prompt += "<response 1>" + response_1 + "</response 1>\n";
    prompt += "<response 2>" + response_2 + "</response 2>\n";
    prompt += "[Brief Evaluation Summary]" + feedback.brief_summary + "\n";
    prompt += "[Evaluation Content]" + evals + "\n";
    prompt += "<INPUT END>\n\n";
    prompt += kDecompositionRules;
    return prompt;
}

std::string render_metajudge_prompt(const RationaleChecklist& source,
                                    const RationaleChecklist& target) {
    if (source.empty()) throw EmptyList("matcher prompt requires a nonempty original list");
    if (target.empty()) throw EmptyList("matcher prompt requires a nonempty reference list");

    std::string prompt;
    prompt += kMatcherHeader;
    prompt += "\n\n[Original Evaluation List Start]\n";
    prompt += numbered_list(source, 'S');
    prompt += "\n[Original Evaluation List End]\n\n";
    prompt += "[Reference Evaluation List Start]\n";
    prompt += numbered_list(target, 'R');
    prompt += "\n[Reference Evaluation List End]\n\n";
    prompt += kMatcherRubric;
    return prompt;
}

std::string render_genrm_prompt(const BenchmarkInstance& instance) {
    if (instance.query.empty()) throw MissingField("GenRM prompt requires a query");
    if (instance.response_a.empty()) throw MissingField("GenRM prompt requires response A");
    if (instance.response_b.empty()) throw MissingField("GenRM prompt requires response B");

    std::string prompt;
    prompt += kGenRmHeader;
    prompt += "\n\n<history>" + render_history(instance.history) + "</history>\n";
    prompt += "<query>" + instance.query + "</query>\n";
    prompt += "<response A>" + instance.response_a + "</response A>\n";
    prompt += "<response B>" + instance.response_b + "</response B>\n";
    return prompt;
}

std::string render_flaw_tag_prompt(const RationaleChecklist& reasons) {
    if (reasons.empty()) throw EmptyList("flaw-tag prompt requires a nonempty reason list");

    std::string prompt;
    prompt += kFlawTagHeader;
    prompt += "\n\n[Reason List Start]\n";
    prompt += numbered_list(reasons, 'S');
    prompt += "\n[Reason List End]\n\n";
    prompt += "Output exactly one line per input item, in order, between the markers:\n\n";
    prompt += "<RESULT_START>\n";
    for (const auto& item : reasons.items) {
        prompt += "- S" + std::to_string(item.rank) + ": [F-tags or NONE]\n";
    }
    prompt += "<RESULT_END>\n";
    return prompt;
}

std::string prompt_fingerprint() {
    using detail::fnv1a64;
    std::uint64_t h = fnv1a64(kDecompositionHeader);
    h = fnv1a64(kDecompositionRules, h);
    h = fnv1a64(kMatcherHeader, h);
    h = fnv1a64(kMatcherRubric, h);
    h = fnv1a64(kGenRmHeader, h);
    h = fnv1a64(kFlawTagHeader, h);
    h = fnv1a64(kFlawTagPromptVersion, h);
    return detail::to_hex(h);
}

}  // namespace metajudge::gateway
