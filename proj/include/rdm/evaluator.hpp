#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdm {

// Scores are oriented so that higher = more in-distribution.
struct ScoreSet {
    std::vector<double> scores;
    std::string source_tag;

    void validate() const;  // finite, non-empty
};

enum class Decision : int { OOD = 0, ID = 1 };

struct DetectionReport {
    double threshold = 0;
    double auroc_pct = 0;
    double fpr95_pct = 0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    std::vector<Decision> decisions;  // optional per-sample flags (id then ood)
};

// ID iff score >= threshold.
Decision decide(double score, double threshold);

// Largest threshold keeping at least ceil(tpr * N) ID scores at or above it
// (exact order statistics, no interpolation).
double threshold_at_tpr(const ScoreSet& id_scores, double tpr = 0.95);

// Probability that a random ID score exceeds a random OOD score, ties at 1/2
// (Mann-Whitney), exact, in percent. Rank-based O((N+M) log(N+M)).
double auroc(const ScoreSet& id_scores, const ScoreSet& ood_scores);

// Fraction of OOD scores at or above threshold_at_tpr(id, tpr), in percent.
double fpr_at_tpr(const ScoreSet& id_scores, const ScoreSet& ood_scores, double tpr = 0.95);

DetectionReport evaluate_detection(const ScoreSet& id_scores, const ScoreSet& ood_scores,
                                   double tpr = 0.95, bool with_decisions = false);

}  // namespace rdm
