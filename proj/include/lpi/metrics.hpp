#pragma once

#include "lpi/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace lpi {

inline constexpr double kCaeFloor = 0.03;

// Σ|pred - gt|, accumulated left to right.
double sum_abs_loss(std::span<const double> pred, std::span<const double> gt);

// Cumulative absolute error after nullifying values below `floor` in both
// sequences.
double cae(std::span<const double> pred, std::span<const double> gt, double floor = kCaeFloor);

// Mean of the m = max(1, floor(frac * pooled)) largest per-step absolute
// errors pooled across every pair.
double top_fraction_mae(const std::vector<std::vector<double>>& preds,
                        const std::vector<std::vector<double>>& gts, double frac);

struct MetricReport {
    double cae = 0;
    double top1_mae = 0;
    double top5_mae = 0;
    std::size_t n_shots = 0;
    std::size_t pooled_steps = 0;
};

MetricReport evaluate_set(const std::vector<std::vector<double>>& preds,
                          const std::vector<std::vector<double>>& gts, double floor = kCaeFloor);

// Flat "key=value" lines in a fixed order.
std::string format_report(const MetricReport& report);
MetricReport parse_report(std::string_view text);

}  // namespace lpi
