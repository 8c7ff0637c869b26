#include "metajudge/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace metajudge {

using nlohmann::ordered_json;

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::kAMuchBetter: return "A>>B";
        case Verdict::kABetter: return "A>B";
        case Verdict::kTie: return "A=B";
        case Verdict::kBBetter: return "B>A";
        case Verdict::kBMuchBetter: return "B>>A";
    }
    throw std::logic_error("unreachable verdict value");
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
    std::string compact;
    compact.reserve(s.size());
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    }
    if (compact == "A>>B") return Verdict::kAMuchBetter;
    if (compact == "A>B") return Verdict::kABetter;
    if (compact == "A=B") return Verdict::kTie;
    if (compact == "B>A") return Verdict::kBBetter;
    if (compact == "B>>A") return Verdict::kBMuchBetter;
    return std::nullopt;
}

PreferenceLabel verdict_to_preference(Verdict v) {
    switch (v) {
        case Verdict::kAMuchBetter: return {Direction::kA, Magnitude::kSignificant};
        case Verdict::kABetter: return {Direction::kA, Magnitude::kSlight};
        case Verdict::kTie: return {Direction::kTie, std::nullopt};
        case Verdict::kBBetter: return {Direction::kB, Magnitude::kSlight};
        case Verdict::kBMuchBetter: return {Direction::kB, Magnitude::kSignificant};
    }
    throw std::logic_error("unreachable verdict value");
}

std::string to_string(Direction d) {
    switch (d) {
        case Direction::kA: return "A";
        case Direction::kB: return "B";
        case Direction::kTie: return "TIE";
    }
    throw std::logic_error("unreachable direction value");
}

std::string to_string(Magnitude m) {
    return m == Magnitude::kSlight ? "SLIGHT" : "SIGNIFICANT";
}

namespace {

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

Direction direction_from_string(const std::string& s) {
    if (s == "A") return Direction::kA;
    if (s == "B") return Direction::kB;
    if (s == "TIE") return Direction::kTie;
    throw InvariantViolation("unknown direction: " + s);
}

Magnitude magnitude_from_string(const std::string& s) {
    if (s == "SLIGHT") return Magnitude::kSlight;
    if (s == "SIGNIFICANT") return Magnitude::kSignificant;
    throw InvariantViolation("unknown magnitude: " + s);
}

}  // namespace

void RationaleChecklist::validate() const {
    std::unordered_set<std::string> seen_ids;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        if (item.rank != static_cast<int>(i) + 1) {
            throw InvariantViolation("checklist ranks must be 1..n contiguous, got rank " +
                                     std::to_string(item.rank) + " at position " +
                                     std::to_string(i + 1));
        }
        if (item.text.empty() || is_blank(item.text)) {
            throw InvariantViolation("checklist item " + item.id + " has blank text");
        }
        if (!seen_ids.insert(item.id).second) {
            throw InvariantViolation("duplicate checklist id: " + item.id);
        }
    }
}

RationaleChecklist make_checklist(ChecklistOrigin origin,
                                  const std::vector<std::string>& texts,
                                  std::string_view id_prefix) {
    RationaleChecklist list;
    list.origin = origin;
    list.items.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        AtomicRationale r;
        r.id = std::string(id_prefix) + std::to_string(i + 1);
        r.text = texts[i];
        r.rank = static_cast<int>(i) + 1;
        list.items.push_back(std::move(r));
    }
    list.validate();
    return list;
}

std::string to_string(Domain d) {
    switch (d) {
        case Domain::kCode: return "CODE";
        case Domain::kGeneral: return "GENERAL";
        case Domain::kMultilingual: return "MULTILINGUAL";
        case Domain::kStem: return "STEM";
        case Domain::kCreativeWriting: return "CREATIVE_WRITING";
        case Domain::kOther: return "OTHER";
    }
    throw std::logic_error("unreachable domain value");
}

std::optional<Domain> domain_from_string(std::string_view s) {
    if (s == "CODE") return Domain::kCode;
    if (s == "GENERAL") return Domain::kGeneral;
    if (s == "MULTILINGUAL") return Domain::kMultilingual;
    if (s == "STEM") return Domain::kStem;
    if (s == "CREATIVE_WRITING") return Domain::kCreativeWriting;
    if (s == "OTHER") return Domain::kOther;
    return std::nullopt;
}

namespace {

ordered_json label_to_json(const PreferenceLabel& label) {
    ordered_json j;
    j["direction"] = to_string(label.direction);
    if (label.magnitude) j["magnitude"] = to_string(*label.magnitude);
    return j;
}

PreferenceLabel label_from_json(const ordered_json& j) {
    PreferenceLabel label;
    label.direction = direction_from_string(j.at("direction").get<std::string>());
    if (j.contains("magnitude")) {
        label.magnitude = magnitude_from_string(j.at("magnitude").get<std::string>());
    }
    if (label.direction == Direction::kTie && label.magnitude) {
        throw InvariantViolation("label magnitude must be absent when direction=TIE");
    }
    return label;
}

}  // namespace

std::string instance_to_json_line(const BenchmarkInstance& inst) {
    ordered_json j;
    j["id"] = inst.id;
    j["domain"] = to_string(inst.domain);
    j["history"] = ordered_json::array();
    for (const auto& turn : inst.history) {
        j["history"].push_back({{"role", turn.role}, {"content", turn.content}});
    }
    j["query"] = inst.query;
    j["response_a"] = inst.response_a;
    j["response_b"] = inst.response_b;
    j["label"] = label_to_json(inst.label);
    j["human_checklist"] = ordered_json::array();
    for (const auto& item : inst.human_checklist.items) {
        j["human_checklist"].push_back({{"id", item.id}, {"text", item.text}});
    }
    return j.dump();
}

BenchmarkInstance instance_from_json_line(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    BenchmarkInstance inst;
    inst.id = j.at("id").get<std::string>();
    auto domain = domain_from_string(j.at("domain").get<std::string>());
    if (!domain) {
        throw InvariantViolation("unknown domain in instance " + inst.id + ": " +
                                 j.at("domain").get<std::string>());
    }
    inst.domain = *domain;
    if (j.contains("history")) {
        for (const auto& turn : j.at("history")) {
            inst.history.push_back({turn.at("role").get<std::string>(),
                                    turn.at("content").get<std::string>()});
        }
    }
    inst.query = j.at("query").get<std::string>();
    inst.response_a = j.at("response_a").get<std::string>();
    inst.response_b = j.at("response_b").get<std::string>();
    inst.label = label_from_json(j.at("label"));
    inst.human_checklist.origin = ChecklistOrigin::kHuman;
    int rank = 1;
    for (const auto& item : j.at("human_checklist")) {
        AtomicRationale r;
        r.id = item.at("id").get<std::string>();
        r.text = item.at("text").get<std::string>();
        r.rank = rank++;
        inst.human_checklist.items.push_back(std::move(r));
    }
    inst.human_checklist.validate();
    return inst;
}

std::vector<BenchmarkInstance> load_benchmark_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open benchmark file: " + path);
    std::vector<BenchmarkInstance> instances;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        try {
            instances.push_back(instance_from_json_line(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return instances;
}

void save_benchmark_jsonl(const std::string& path,
                          const std::vector<BenchmarkInstance>& instances) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write benchmark file: " + path);
    for (const auto& inst : instances) {
        out << instance_to_json_line(inst) << '\n';
    }
}

}  // namespace metajudge
