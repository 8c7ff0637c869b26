#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "metajudge/metrics.hpp"

using namespace metajudge;
using namespace metajudge::metrics;

namespace {

matching::MatchingResult match_at_ranks(const std::set<int>& model_ranks, int n_human) {
    matching::MatchingResult match;
    int human = 1;
    for (int rank : model_ranks) {
        match.pairs.emplace_back(human, rank);
        match.per_human[human] = 1.0;
        match.total += 1.0;
        ++human;
    }
    for (; human <= n_human; ++human) match.per_human[human] = 0.0;
    return match;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("rationale consistency is total over checklist size") {
    matching::MatchingResult match;
    match.total = 3.0;
    CHECK(sample_rationale_consistency(match, 4) == 0.75);
    match.total = 0.0;
    CHECK(sample_rationale_consistency(match, 4) == 0.0);
    match.total = 0.25;
    CHECK(sample_rationale_consistency(match, 3) == doctest::Approx(0.0833333).epsilon(1e-5));
}

TEST_CASE("rationale consistency rejects an empty checklist") {
    matching::MatchingResult match;
    CHECK_THROWS_AS(sample_rationale_consistency(match, 0), EmptyChecklist);
}

TEST_CASE("aggregate_rc") {
    CHECK(aggregate_rc({0.75, 0.0}) == 0.375);
    CHECK(aggregate_rc({1.0, 1.0, 1.0}) == 1.0);
    CHECK(aggregate_rc({0.5}) == 0.5);
    CHECK_THROWS_AS(aggregate_rc({}), EmptyRun);
}

TEST_CASE("outcome reward: direction-only by default, magnitude under strict") {
    PreferenceLabel a_significant{Direction::kA, Magnitude::kSignificant};
    CHECK(outcome_reward(Verdict::kABetter, a_significant, false) == 1);
    CHECK(outcome_reward(Verdict::kABetter, a_significant, true) == 0);
    CHECK(outcome_reward(Verdict::kAMuchBetter, a_significant, true) == 1);
    CHECK(outcome_reward(Verdict::kTie, {Direction::kB, Magnitude::kSlight}, false) == 0);
    CHECK(outcome_reward(Verdict::kTie, {Direction::kTie, {}}, true) == 1);
}

TEST_CASE("average precision worked example: ranks {1,3} of 3, checklist 4") {
    auto match = match_at_ranks({1, 3}, 2);
    // P@1 = 1/1, P@3 = 2/3, so AP = (1 + 2/3) / 4 = 5/12.
    CHECK(average_precision(match, 3, 4) == doctest::Approx(5.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("average precision perfect prefix gives m/n") {
    for (int m = 1; m <= 5; ++m) {
        std::set<int> prefix;
        for (int k = 1; k <= m; ++k) prefix.insert(k);
        auto match = match_at_ranks(prefix, m);
        CHECK(average_precision(match, m, m) == 1.0);
        CHECK(average_precision(match, m, 2 * m) == 0.5);
    }
}

TEST_CASE("average precision with no matches is zero") {
    matching::MatchingResult match;
    CHECK(average_precision(match, 5, 4) == 0.0);
}

TEST_CASE("average precision stays in [0,1] over random matchings") {
    std::mt19937 rng(1618);
    std::uniform_int_distribution<int> n_model_dist(1, 10);
    for (int trial = 0; trial < 2000; ++trial) {
        int n_model = n_model_dist(rng);
        std::uniform_int_distribution<int> n_human_dist(1, 8);
        int n_human = n_human_dist(rng);
        std::set<int> ranks;
        std::uniform_int_distribution<int> coin(0, 1);
        int budget = std::min(n_model, n_human);
        for (int k = 1; k <= n_model && static_cast<int>(ranks.size()) < budget; ++k) {
            if (coin(rng)) ranks.insert(k);
        }
        auto match = match_at_ranks(ranks, n_human);
        double ap = average_precision(match, n_model, n_human);
        CHECK(ap >= 0.0);
        CHECK(ap <= 1.0);
    }
}

TEST_CASE("AP rank degradation: pushing a hit to a later rank never helps") {
    std::mt19937 rng(2718);
    std::uniform_int_distribution<int> n_model_dist(2, 10);
    for (int trial = 0; trial < 10000; ++trial) {
        int n_model = n_model_dist(rng);
        int n_human = std::uniform_int_distribution<int>(1, 8)(rng);
        int budget = std::min(n_model, n_human);

        std::set<int> ranks;
        std::uniform_int_distribution<int> pick(1, n_model);
        int want = std::uniform_int_distribution<int>(1, budget)(rng);
        while (static_cast<int>(ranks.size()) < want) ranks.insert(pick(rng));

        // Choose a matched rank and an unmatched later rank, then swap.
        std::vector<int> matched(ranks.begin(), ranks.end());
        std::shuffle(matched.begin(), matched.end(), rng);
        int moved = -1, target = -1;
        for (int candidate : matched) {
            for (int later = candidate + 1; later <= n_model; ++later) {
                if (!ranks.count(later)) {
                    moved = candidate;
                    target = later;
                    break;
                }
            }
            if (moved != -1) break;
        }
        if (moved == -1) continue;  // fully packed suffix; nothing to degrade

        std::set<int> degraded = ranks;
        degraded.erase(moved);
        degraded.insert(target);

        double before = average_precision(match_at_ranks(ranks, n_human), n_model, n_human);
        double after =
            average_precision(match_at_ranks(degraded, n_human), n_model, n_human);
        REQUIRE(after <= before + 1e-12);
    }
}

TEST_CASE("hybrid reward gates on outcome") {
    CHECK(hybrid_reward(0.4167, 0) == 0.0);
    CHECK(hybrid_reward(0.4167, 1) == 0.4167);
    CHECK(hybrid_reward(0.0, 1) == 0.0);
    CHECK_THROWS_AS(hybrid_reward(1.5, 1), MetricsError);
}

TEST_CASE("hybrid gating over 10000 random pairs") {
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> ap_dist(0.0, 1.0);
    std::uniform_int_distribution<int> outcome_dist(0, 1);
    for (int trial = 0; trial < 10000; ++trial) {
        double ap = ap_dist(rng);
        int outcome = outcome_dist(rng);
        double reward = hybrid_reward(ap, outcome);
        if (outcome == 0) {
            REQUIRE(reward == 0.0);
        } else {
            REQUIRE(reward == ap);  // bit-exact identity
        }
    }
}

TEST_CASE("group advantages hand-computed example") {
    auto adv = group_advantages({1, 0, 1, 0});
    // mean 0.5, population std 0.5
    REQUIRE(adv.size() == 4);
    CHECK(adv[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(adv[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(adv[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(adv[3] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("group advantages zero-variance and singleton guards") {
    CHECK(group_advantages({0.3, 0.3, 0.3}) == std::vector<double>{0, 0, 0});
    CHECK(group_advantages({0.7}) == std::vector<double>{0});
    CHECK_THROWS_AS(group_advantages({}), EmptyGroup);
}

TEST_CASE("group advantages standardize: mean 0, population std 1") {
    std::mt19937 rng(55);
    std::uniform_int_distribution<int> size_dist(2, 16);
    std::uniform_real_distribution<double> reward_dist(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = size_dist(rng);
        std::vector<double> rewards(n);
        for (auto& r : rewards) r = reward_dist(rng);
        bool constant = std::all_of(rewards.begin(), rewards.end(),
                                    [&](double r) { return r == rewards[0]; });
        if (constant) continue;

        auto adv = group_advantages(rewards);
        double mean = 0.0;
        for (double a : adv) mean += a;
        mean /= n;
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= n;
        REQUIRE(std::abs(mean) < 1e-9);
        REQUIRE(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
}

TEST_CASE("make_group_rewards keeps rewards and advantages aligned") {
    auto group = make_group_rewards({1, 0, 1, 0});
    CHECK(group.rewards == std::vector<double>{1, 0, 1, 0});
    CHECK(group.advantages == group_advantages(group.rewards));
    CHECK(group.rewards.size() == group.advantages.size());
}

TEST_CASE("RC is 1 exactly when every human reason matches at score 1") {
    matching::MatchingResult full;
    full.pairs = {{1, 2}, {2, 1}, {3, 3}};
    full.per_human = {{1, 1.0}, {2, 1.0}, {3, 1.0}};
    full.total = 3.0;
    CHECK(sample_rationale_consistency(full, 3) == 1.0);

    matching::MatchingResult partial = full;
    partial.per_human[3] = 0.75;
    partial.total = 2.75;
    CHECK(sample_rationale_consistency(partial, 3) < 1.0);
}

TEST_CASE("make_sample_metrics keeps hybrid == ap * outcome") {
    auto match = match_at_ranks({1, 3}, 2);
    PreferenceLabel label{Direction::kA, Magnitude::kSlight};
    SampleMetrics right = make_sample_metrics(match, 4, 3, Verdict::kABetter, label, false);
    CHECK(right.outcome == 1);
    CHECK(right.hybrid == right.ap);
    SampleMetrics wrong = make_sample_metrics(match, 4, 3, Verdict::kBBetter, label, false);
    CHECK(wrong.outcome == 0);
    CHECK(wrong.hybrid == 0.0);
    CHECK(wrong.ap == right.ap);
}

}  // TEST_SUITE
