#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metajudge::matching {

struct MatchingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A score entry outside [0, 1].
struct ScoreOutOfRange : MatchingError {
    using MatchingError::MatchingError;
};

/// Brute-force oracle asked to enumerate beyond its 8x8 guard.
struct TooLarge : MatchingError {
    using MatchingError::MatchingError;
};

/// Dense fulfillment-score matrix, rows = human reasons, cols = model
/// reasons, 1-based indices, entries default 0.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    ScoreMatrix(int n_human, int n_model)
        : n_human_(n_human),
          n_model_(n_model),
          entries_(static_cast<std::size_t>(n_human) * n_model, 0.0) {
        if (n_human < 0 || n_model < 0) {
            throw MatchingError("matrix dimensions must be >= 0");
        }
    }

    /// Builds from a row-major dense grid.
    explicit ScoreMatrix(const std::vector<std::vector<double>>& rows);

    int n_human() const { return n_human_; }
    int n_model() const { return n_model_; }

    double at(int human_index, int model_index) const {
        return entries_[offset(human_index, model_index)];
    }
    void set(int human_index, int model_index, double score) {
        entries_[offset(human_index, model_index)] = score;
    }

private:
    std::size_t offset(int i, int j) const {
        if (i < 1 || i > n_human_ || j < 1 || j > n_model_) {
            throw MatchingError("index (" + std::to_string(i) + "," + std::to_string(j) +
                                ") outside " + std::to_string(n_human_) + "x" +
                                std::to_string(n_model_));
        }
        return static_cast<std::size_t>(i - 1) * n_model_ + (j - 1);
    }

    int n_human_ = 0;
    int n_model_ = 0;
    std::vector<double> entries_;
};

/// The optimal one-to-one matching: pairs carry only positive-score
/// assignments, total is the summed matched score, per_human maps every
/// human index to its matched score (0 when unmatched).
struct MatchingResult {
    std::vector<std::pair<int, int>> pairs;  // sorted (human_index, model_index)
    double total = 0.0;
    std::map<int, double> per_human;

    bool operator==(const MatchingResult&) const = default;
};

/// Maximum-weight one-to-one matching. Among equal-total matchings the
/// lexicographically smallest pair list wins, so results are reproducible.
/// Rubric-valued matrices (all entries multiples of 0.25) are solved in
/// exact integer quarter-units; general matrices use doubles with a 1e-12
/// tie tolerance.
MatchingResult optimal_matching(const ScoreMatrix& m);

/// Exhaustive oracle for dimensions up to 8x8, same tie-break.
MatchingResult brute_force_matching(const ScoreMatrix& m);

}  // namespace metajudge::matching
