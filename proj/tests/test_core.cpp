#include <doctest.h>

#include "metajudge/core.hpp"

using namespace metajudge;

TEST_SUITE("core") {

TEST_CASE("verdict serialized forms are the five canonical strings") {
    CHECK(to_string(Verdict::kAMuchBetter) == "A>>B");
    CHECK(to_string(Verdict::kABetter) == "A>B");
    CHECK(to_string(Verdict::kTie) == "A=B");
    CHECK(to_string(Verdict::kBBetter) == "B>A");
    CHECK(to_string(Verdict::kBMuchBetter) == "B>>A");
}

TEST_CASE("verdict parsing ignores internal spaces, rejects everything else") {
    CHECK(verdict_from_string("B > A") == Verdict::kBBetter);
    CHECK(verdict_from_string(" A>>B ") == Verdict::kAMuchBetter);
    CHECK(!verdict_from_string("A<B"));
    CHECK(!verdict_from_string("A"));
    CHECK(!verdict_from_string(""));
}

TEST_CASE("verdict round trip") {
    for (Verdict v : {Verdict::kAMuchBetter, Verdict::kABetter, Verdict::kTie,
                      Verdict::kBBetter, Verdict::kBMuchBetter}) {
        CHECK(verdict_from_string(to_string(v)) == v);
    }
}

TEST_CASE("verdict_to_preference maps all five verdicts") {
    CHECK(verdict_to_preference(Verdict::kAMuchBetter) ==
          PreferenceLabel{Direction::kA, Magnitude::kSignificant});
    CHECK(verdict_to_preference(Verdict::kTie) == PreferenceLabel{Direction::kTie, {}});
    CHECK(verdict_to_preference(Verdict::kBBetter) ==
          PreferenceLabel{Direction::kB, Magnitude::kSlight});
}

TEST_CASE("verdict_to_preference is injective") {
    std::vector<PreferenceLabel> seen;
    for (Verdict v : {Verdict::kAMuchBetter, Verdict::kABetter, Verdict::kTie,
                      Verdict::kBBetter, Verdict::kBMuchBetter}) {
        PreferenceLabel label = verdict_to_preference(v);
        for (const auto& other : seen) CHECK(!(other == label));
        seen.push_back(label);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("checklist validation") {
    RationaleChecklist list = make_checklist(
        ChecklistOrigin::kHuman, {"first point", "second point"}, "R");
    CHECK_NOTHROW(list.validate());
    CHECK(list.items[1].rank == 2);

    SUBCASE("rank gap") {
        list.items[1].rank = 3;
        CHECK_THROWS_AS(list.validate(), InvariantViolation);
    }
    SUBCASE("duplicate id") {
        list.items[1].id = "R1";
        CHECK_THROWS_AS(list.validate(), InvariantViolation);
    }
    SUBCASE("blank text") {
        list.items[0].text = "   ";
        CHECK_THROWS_AS(list.validate(), InvariantViolation);
    }
}

TEST_CASE("benchmark instance JSONL round trip") {
    BenchmarkInstance inst;
    inst.id = "case-001";
    inst.domain = Domain::kCreativeWriting;
    inst.history = {{"user", "earlier question"}, {"assistant", "earlier answer"}};
    inst.query = "write me powerful ads";
    inst.response_a = "ad copy A";
    inst.response_b = "ad copy B";
    inst.label = {Direction::kB, Magnitude::kSlight};
    inst.human_checklist =
        make_checklist(ChecklistOrigin::kHuman,
                       {"missing name", "bad format", "limit violation"}, "R");

    std::string line = instance_to_json_line(inst);
    BenchmarkInstance back = instance_from_json_line(line);
    CHECK(back == inst);
}

TEST_CASE("instance with magnitude on a tie label is rejected") {
    std::string line = R"({"id":"x","domain":"CODE","history":[],"query":"q",)"
                       R"("response_a":"a","response_b":"b",)"
                       R"("label":{"direction":"TIE","magnitude":"SLIGHT"},)"
                       R"("human_checklist":[{"id":"R1","text":"t"}]})";
    CHECK_THROWS_AS(instance_from_json_line(line), InvariantViolation);
}

TEST_CASE("domain names round trip") {
    for (Domain d : {Domain::kCode, Domain::kGeneral, Domain::kMultilingual,
                     Domain::kStem, Domain::kCreativeWriting, Domain::kOther}) {
        CHECK(domain_from_string(to_string(d)) == d);
    }
    CHECK(!domain_from_string("code"));
}

}  // TEST_SUITE
