#pragma once
// True/false call tradeoffs, decoy and posterior-estimated FDR, and
// calibration tables. "Exceeding a threshold" is strict (p > t) throughout.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace nestmix {

struct TradeoffPoint {
    double threshold = 0.0;
    std::size_t true_calls = 0;
    std::size_t false_calls = 0;
};

struct FdrPoint {
    double threshold = 0.0;
    std::size_t n_target = 0;
    std::size_t n_decoy = 0;
    double decoy_fdr = 0.0;
    double estimated_fdr = 0.0;
};

struct CalibrationBin {
    double lo = 0.0;
    double hi = 0.0;
    double mean_assigned_prob = 0.0;  // 0 for an empty bin
    double empirical_fraction_correct = 0.0;
    std::size_t count = 0;
};

// Labels are passed as char (0/1) so callers can use contiguous storage.
std::vector<TradeoffPoint> tradeoff_curve(std::span<const double> probs, std::span<const char> labels,
                                          std::span<const double> thresholds);

// fdr = n_decoy / max(n_target, 1) among entries with prob > threshold.
FdrPoint decoy_fdr(std::span<const double> probs, std::span<const char> is_decoy, double threshold);

// Mean of (1 - p) over entries with p > threshold; 0 when nothing is called.
double estimated_fdr(std::span<const double> probs, double threshold);

// Equal-width bins on [0, 1]; the last bin is closed at 1.
std::vector<CalibrationBin> calibration_table(std::span<const double> probs, std::span<const char> labels,
                                              std::size_t n_bins = 10);

// Up to 512 evenly spaced picks from the sorted unique probabilities, plus
// {0, 0.5, 0.9, 0.95, 0.99}; ascending, deduplicated.
std::vector<double> default_threshold_grid(std::span<const double> probs);

// Largest true-call count over all strict thresholds whose false-call count
// stays within `max_false`. Thresholds range over every distinct probability,
// so this is the exact step function of the tradeoff curve.
std::size_t true_calls_at_false_count(std::span<const double> probs, std::span<const char> labels,
                                      std::size_t max_false);

void write_tradeoff_csv(std::ostream& out, std::span<const TradeoffPoint> points);
void write_calibration_csv(std::ostream& out, std::span<const CalibrationBin> bins);
void write_fdr_csv(std::ostream& out, std::span<const FdrPoint> points);

}  // namespace nestmix
