#include "nestmix/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "nestmix/text_io.hpp"

namespace nestmix {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument(fmt::format("probabilities and labels differ in length ({} vs {})", a, b));
}

}  // namespace

std::vector<TradeoffPoint> tradeoff_curve(std::span<const double> probs, std::span<const char> labels,
                                          std::span<const double> thresholds) {
    check_lengths(probs.size(), labels.size());
    // Sort once; each threshold is then a binary search over the suffix sums.
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] < probs[b]; });
    std::vector<double> sorted(probs.size());
    std::vector<std::size_t> trues_from(probs.size() + 1, 0);
    for (std::size_t j = 0; j < order.size(); ++j) sorted[j] = probs[order[j]];
    for (std::size_t j = order.size(); j-- > 0;) trues_from[j] = trues_from[j + 1] + (labels[order[j]] ? 1 : 0);

    std::vector<TradeoffPoint> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        const auto first = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
        const std::size_t called = sorted.size() - first;
        const std::size_t trues = trues_from[first];
        out.push_back({t, trues, called - trues});
    }
    return out;
}

FdrPoint decoy_fdr(std::span<const double> probs, std::span<const char> is_decoy, double threshold) {
    check_lengths(probs.size(), is_decoy.size());
    FdrPoint p;
    p.threshold = threshold;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!(probs[i] > threshold)) continue;
        if (is_decoy[i]) {
            ++p.n_decoy;
        } else {
            ++p.n_target;
        }
    }
    p.decoy_fdr = static_cast<double>(p.n_decoy) / static_cast<double>(std::max<std::size_t>(p.n_target, 1));
    p.estimated_fdr = estimated_fdr(probs, threshold);
    return p;
}

double estimated_fdr(std::span<const double> probs, double threshold) {
    double absent = 0.0;
    std::size_t called = 0;
    for (double p : probs) {
        if (p > threshold) {
            absent += 1.0 - p;
            ++called;
        }
    }
    return called == 0 ? 0.0 : absent / static_cast<double>(called);
}

std::vector<CalibrationBin> calibration_table(std::span<const double> probs, std::span<const char> labels,
                                              std::size_t n_bins) {
    check_lengths(probs.size(), labels.size());
    if (n_bins < 2) throw std::invalid_argument("calibration_table needs at least 2 bins");
    std::vector<CalibrationBin> bins(n_bins);
    std::vector<double> prob_sum(n_bins, 0.0);
    std::vector<std::size_t> correct(n_bins, 0);
    const double n = static_cast<double>(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].lo = static_cast<double>(b) / n;
        bins[b].hi = static_cast<double>(b + 1) / n;
    }
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], 0.0, 1.0);
        auto b = static_cast<std::size_t>(p * static_cast<double>(n_bins));
        b = std::min(b, n_bins - 1);
        // Guard against p * n rounding across an edge.
        if (b > 0 && p < bins[b].lo) --b;
        if (b + 1 < n_bins && p >= bins[b + 1].lo) ++b;
        prob_sum[b] += probs[i];
        correct[b] += labels[i] ? 1 : 0;
        ++bins[b].count;
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (bins[b].count == 0) continue;
        const double cnt = static_cast<double>(bins[b].count);
        bins[b].mean_assigned_prob = prob_sum[b] / cnt;
        bins[b].empirical_fraction_correct = static_cast<double>(correct[b]) / cnt;
    }
    return bins;
}

std::vector<double> default_threshold_grid(std::span<const double> probs) {
    std::vector<double> unique(probs.begin(), probs.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    std::vector<double> grid{0.0, 0.5, 0.9, 0.95, 0.99};
    constexpr std::size_t kPoints = 512;
    if (unique.size() <= kPoints) {
        grid.insert(grid.end(), unique.begin(), unique.end());
    } else {
        for (std::size_t j = 0; j < kPoints; ++j) {
            grid.push_back(unique[j * (unique.size() - 1) / (kPoints - 1)]);
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

std::size_t true_calls_at_false_count(std::span<const double> probs, std::span<const char> labels,
                                      std::size_t max_false) {
    check_lengths(probs.size(), labels.size());
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });
    // Walk down tied blocks: calling a block is the same as lowering the
    // strict threshold just below its probability.
    std::size_t best = 0, trues = 0, falses = 0;
    for (std::size_t j = 0; j < order.size();) {
        std::size_t end = j;
        std::size_t bt = 0, bf = 0;
        while (end < order.size() && probs[order[end]] == probs[order[j]]) {
            (labels[order[end]] ? bt : bf) += 1;
            ++end;
        }
        if (falses + bf > max_false) break;
        trues += bt;
        falses += bf;
        best = trues;
        j = end;
    }
    return best;
}

void write_tradeoff_csv(std::ostream& out, std::span<const TradeoffPoint> points) {
    out << "threshold,true_calls,false_calls\n";
    for (const auto& p : points) out << text::num(p.threshold) << ',' << p.true_calls << ',' << p.false_calls << '\n';
}

void write_calibration_csv(std::ostream& out, std::span<const CalibrationBin> bins) {
    out << "bin_lo,bin_hi,mean_prob,frac_correct,count\n";
    for (const auto& b : bins) {
        out << text::num(b.lo) << ',' << text::num(b.hi) << ',' << text::num(b.mean_assigned_prob) << ','
            << text::num(b.empirical_fraction_correct) << ',' << b.count << '\n';
    }
}

void write_fdr_csv(std::ostream& out, std::span<const FdrPoint> points) {
    out << "threshold,n_target,n_decoy,decoy_fdr,estimated_fdr\n";
    for (const auto& p : points) {
        out << text::num(p.threshold) << ',' << p.n_target << ',' << p.n_decoy << ',' << text::num(p.decoy_fdr) << ','
            << text::num(p.estimated_fdr) << '\n';
    }
}

}  // namespace nestmix
