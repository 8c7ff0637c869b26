#include "metajudge/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

namespace metajudge::matching {

namespace {

constexpr double kTieTolerance = 1e-12;  // generic float path only

struct WeightTraits {
    bool rubric = false;  // all entries exact multiples of 0.25
};

WeightTraits classify(const ScoreMatrix& m) {
    WeightTraits t{true};
    for (int i = 1; i <= m.n_human(); ++i) {
        for (int j = 1; j <= m.n_model(); ++j) {
            double s = m.at(i, j);
            if (s < 0.0 || s > 1.0 || std::isnan(s)) {
                throw ScoreOutOfRange("score " + std::to_string(s) + " at (" +
                                      std::to_string(i) + "," + std::to_string(j) +
                                      ") outside [0,1]");
            }
            double q = s * 4.0;
            if (q != std::round(q)) t.rubric = false;
        }
    }
    return t;
}

template <typename W>
bool weights_equal(W a, W b) {
    if constexpr (std::is_integral_v<W>) {
        return a == b;
    } else {
        return std::abs(a - b) <= kTieTolerance;
    }
}

/// Jonker-Volgenant style shortest-augmenting-path assignment, O(n^3).
/// Square weight matrix, maximization, returns row->col (0-based, always a
/// perfect assignment on the padded square problem).
template <typename W>
std::vector<int> solve_square_max(const std::vector<std::vector<W>>& w) {
    const int n = static_cast<int>(w.size());
    if (n == 0) return {};
    const W kInf = std::numeric_limits<W>::max() / 4;

    std::vector<W> u(n + 1, W{}), v(n + 1, W{});
    std::vector<int> p(n + 1, 0), way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<W> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            W delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                W cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

template <typename W>
struct SubSolution {
    W total{};
    std::vector<std::pair<int, int>> pairs;  // 1-based original indices, positive weight only
};

/// Solves the max-weight matching restricted to the given free rows/cols
/// (1-based original indices). Pads to a square problem with zero weights;
/// zero-weight assignments are dropped from the reported pairs.
template <typename W>
SubSolution<W> solve_restricted(const std::vector<std::vector<W>>& weights,
                                const std::vector<int>& rows,
                                const std::vector<int>& cols) {
    SubSolution<W> sol;
    const int n = static_cast<int>(std::max(rows.size(), cols.size()));
    if (n == 0) return sol;

    std::vector<std::vector<W>> square(n, std::vector<W>(n, W{}));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            square[r][c] = weights[rows[r] - 1][cols[c] - 1];
        }
    }

    std::vector<int> row_to_col = solve_square_max(square);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        int c = row_to_col[r];
        if (c < 0 || c >= static_cast<int>(cols.size())) continue;
        W wt = square[r][c];
        if (wt > W{}) {
            sol.total += wt;
            sol.pairs.emplace_back(rows[r], cols[c]);
        }
    }
    std::sort(sol.pairs.begin(), sol.pairs.end());
    return sol;
}

/// Refines an optimal solution to the lexicographically smallest optimal
/// matching. Walks positive-weight pairs in (i,j) order; a pair is kept iff
/// some optimal completion of the kept prefix contains it. The current
/// witness matching answers most queries without a re-solve.
template <typename W>
std::vector<std::pair<int, int>> lexicographic_refine(
    const std::vector<std::vector<W>>& weights, int n_human, int n_model) {
    std::vector<int> all_rows(n_human), all_cols(n_model);
    for (int i = 0; i < n_human; ++i) all_rows[i] = i + 1;
    for (int j = 0; j < n_model; ++j) all_cols[j] = j + 1;

    SubSolution<W> base = solve_restricted(weights, all_rows, all_cols);
    const W optimal_total = base.total;

    std::vector<std::pair<int, int>> fixed;
    W fixed_total{};
    std::vector<char> row_used(n_human + 1, 0), col_used(n_model + 1, 0);
    std::vector<std::pair<int, int>> witness = base.pairs;

    auto free_rows = [&] {
        std::vector<int> rows;
        for (int i = 1; i <= n_human; ++i)
            if (!row_used[i]) rows.push_back(i);
        return rows;
    };
    auto free_cols = [&] {
        std::vector<int> cols;
        for (int j = 1; j <= n_model; ++j)
            if (!col_used[j]) cols.push_back(j);
        return cols;
    };

    for (int i = 1; i <= n_human; ++i) {
        if (row_used[i]) continue;
        for (int j = 1; j <= n_model; ++j) {
            if (col_used[j]) continue;
            if (!(weights[i - 1][j - 1] > W{})) continue;

            bool in_witness =
                std::binary_search(witness.begin(), witness.end(), std::make_pair(i, j));
            if (!in_witness) {
                row_used[i] = 1;
                col_used[j] = 1;
                SubSolution<W> sub = solve_restricted(weights, free_rows(), free_cols());
                row_used[i] = 0;
                col_used[j] = 0;
                W candidate = fixed_total + weights[i - 1][j - 1] + sub.total;
                if (!weights_equal(candidate, optimal_total)) continue;
                witness = fixed;
                witness.emplace_back(i, j);
                witness.insert(witness.end(), sub.pairs.begin(), sub.pairs.end());
                std::sort(witness.begin(), witness.end());
            }
            fixed.emplace_back(i, j);
            fixed_total += weights[i - 1][j - 1];
            row_used[i] = 1;
            col_used[j] = 1;
            break;  // row i is now matched
        }
    }
    return fixed;
}

template <typename W>
std::vector<std::vector<W>> to_weights(const ScoreMatrix& m, bool rubric) {
    std::vector<std::vector<W>> w(m.n_human(), std::vector<W>(m.n_model()));
    for (int i = 1; i <= m.n_human(); ++i) {
        for (int j = 1; j <= m.n_model(); ++j) {
            if constexpr (std::is_integral_v<W>) {
                w[i - 1][j - 1] = static_cast<W>(std::llround(m.at(i, j) * 4.0));
            } else {
                (void)rubric;
                w[i - 1][j - 1] = m.at(i, j);
            }
        }
    }
    return w;
}

MatchingResult finalize(const ScoreMatrix& m, std::vector<std::pair<int, int>> pairs) {
    MatchingResult result;
    std::sort(pairs.begin(), pairs.end());
    result.pairs = std::move(pairs);
    for (int i = 1; i <= m.n_human(); ++i) result.per_human[i] = 0.0;
    for (const auto& [i, j] : result.pairs) {
        double s = m.at(i, j);
        result.per_human[i] = s;
        result.total += s;
    }
    return result;
}

/// Recursive enumeration of all one-to-one matchings over positive pairs.
template <typename W>
void enumerate_matchings(const std::vector<std::vector<W>>& weights, int n_human,
                         int n_model, int row, std::vector<char>& col_used,
                         std::vector<std::pair<int, int>>& current, W current_total,
                         std::optional<W>& best_total,
                         std::vector<std::pair<int, int>>& best_pairs) {
    if (row > n_human) {
        bool better = false;
        if (!best_total || current_total > *best_total) {
            better = !best_total || !weights_equal(current_total, *best_total);
        }
        if (better) {
            best_total = current_total;
            best_pairs = current;
        } else if (best_total && weights_equal(current_total, *best_total) &&
                   current < best_pairs) {
            best_total = std::max(*best_total, current_total);
            best_pairs = current;
        }
        return;
    }
    // Leave this human reason unmatched.
    enumerate_matchings(weights, n_human, n_model, row + 1, col_used, current,
                        current_total, best_total, best_pairs);
    for (int j = 1; j <= n_model; ++j) {
        if (col_used[j] || !(weights[row - 1][j - 1] > W{})) continue;
        col_used[j] = 1;
        current.emplace_back(row, j);
        enumerate_matchings(weights, n_human, n_model, row + 1, col_used, current,
                            current_total + weights[row - 1][j - 1], best_total,
                            best_pairs);
        current.pop_back();
        col_used[j] = 0;
    }
}

template <typename W>
MatchingResult run_brute_force(const ScoreMatrix& m) {
    auto weights = to_weights<W>(m, std::is_integral_v<W>);
    std::vector<char> col_used(m.n_model() + 1, 0);
    std::vector<std::pair<int, int>> current, best_pairs;
    std::optional<W> best_total;
    enumerate_matchings<W>(weights, m.n_human(), m.n_model(), 1, col_used, current, W{},
                           best_total, best_pairs);
    return finalize(m, best_pairs);
}

}  // namespace

ScoreMatrix::ScoreMatrix(const std::vector<std::vector<double>>& rows) {
    n_human_ = static_cast<int>(rows.size());
    n_model_ = rows.empty() ? 0 : static_cast<int>(rows.front().size());
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != n_model_) {
            throw MatchingError("ragged score matrix rows");
        }
    }
    entries_.assign(static_cast<std::size_t>(n_human_) * n_model_, 0.0);
    for (int i = 1; i <= n_human_; ++i) {
        for (int j = 1; j <= n_model_; ++j) {
            set(i, j, rows[i - 1][j - 1]);
        }
    }
}

MatchingResult optimal_matching(const ScoreMatrix& m) {
    WeightTraits traits = classify(m);
    if (m.n_human() == 0 || m.n_model() == 0) return finalize(m, {});
    if (traits.rubric) {
        auto weights = to_weights<std::int64_t>(m, true);
        return finalize(m, lexicographic_refine(weights, m.n_human(), m.n_model()));
    }
    auto weights = to_weights<double>(m, false);
    return finalize(m, lexicographic_refine(weights, m.n_human(), m.n_model()));
}

MatchingResult brute_force_matching(const ScoreMatrix& m) {
    if (m.n_human() > 8 || m.n_model() > 8) {
        throw TooLarge("brute-force oracle is limited to 8x8, got " +
                       std::to_string(m.n_human()) + "x" + std::to_string(m.n_model()));
    }
    WeightTraits traits = classify(m);
    if (m.n_human() == 0 || m.n_model() == 0) return finalize(m, {});
    if (traits.rubric) return run_brute_force<std::int64_t>(m);
    return run_brute_force<double>(m);
}

}  // namespace metajudge::matching
