#include "rdm/evaluator.hpp"

#include <algorithm>
#include <cmath>

#include "rdm/errors.hpp"

namespace rdm {

void ScoreSet::validate() const {
    if (scores.empty()) throw DataError("score set '" + source_tag + "' is empty");
    for (double s : scores)
        if (!std::isfinite(s)) throw DataError("score set '" + source_tag + "' has non-finite entries");
}

Decision decide(double score, double threshold) {
    return score >= threshold ? Decision::ID : Decision::OOD;
}

double threshold_at_tpr(const ScoreSet& id_scores, double tpr) {
    id_scores.validate();
    if (!(tpr > 0.0 && tpr <= 1.0)) throw ConfigError("tpr must lie in (0, 1]");
    const std::size_t n = id_scores.scores.size();
    // smallest count m with m/n >= tpr; the 1e-9 nudge absorbs representation
    // error in tpr * n for exact-rational inputs like 0.95 * 20
    std::size_t m = static_cast<std::size_t>(
        std::ceil(tpr * static_cast<double>(n) - 1e-9));
    m = std::max<std::size_t>(1, std::min(m, n));
    std::vector<double> sorted(id_scores.scores);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    return sorted[m - 1];  // m-th largest
}

double auroc(const ScoreSet& id_scores, const ScoreSet& ood_scores) {
    id_scores.validate();
    ood_scores.validate();
    const std::size_t n = id_scores.scores.size(), m = ood_scores.scores.size();
    struct Entry {
        double s;
        bool is_id;
    };
    std::vector<Entry> all;
    all.reserve(n + m);
    for (double s : id_scores.scores) all.push_back({s, true});
    for (double s : ood_scores.scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.s < b.s; });

    // Mann-Whitney U via average ranks over tie groups
    double rank_sum_id = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1].s == all[i].s) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (all[k].is_id) rank_sum_id += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_id - 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
    return 100.0 * u / (static_cast<double>(n) * static_cast<double>(m));
}

double fpr_at_tpr(const ScoreSet& id_scores, const ScoreSet& ood_scores, double tpr) {
    ood_scores.validate();
    const double lambda = threshold_at_tpr(id_scores, tpr);
    std::size_t count = 0;
    for (double s : ood_scores.scores)
        if (s >= lambda) ++count;
    return 100.0 * static_cast<double>(count) / static_cast<double>(ood_scores.scores.size());
}

DetectionReport evaluate_detection(const ScoreSet& id_scores, const ScoreSet& ood_scores,
                                   double tpr, bool with_decisions) {
    DetectionReport r;
    r.threshold = threshold_at_tpr(id_scores, tpr);
    r.auroc_pct = auroc(id_scores, ood_scores);
    r.fpr95_pct = fpr_at_tpr(id_scores, ood_scores, tpr);
    r.n_id = id_scores.scores.size();
    r.n_ood = ood_scores.scores.size();
    if (with_decisions) {
        r.decisions.reserve(r.n_id + r.n_ood);
        for (double s : id_scores.scores) r.decisions.push_back(decide(s, r.threshold));
        for (double s : ood_scores.scores) r.decisions.push_back(decide(s, r.threshold));
    }
    return r;
}

}  // namespace rdm
