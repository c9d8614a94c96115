#include "lpi/metrics.hpp"

#include "lpi/wire.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace lpi {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* who) {
    if (a.size() != b.size()) {
        throw ArgumentError(std::string(who) + ": length mismatch (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace

double sum_abs_loss(std::span<const double> pred, std::span<const double> gt) {
    check_pair(pred, gt, "sum_abs_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - gt[i]);
    return acc;
}

double cae(std::span<const double> pred, std::span<const double> gt, double floor) {
    check_pair(pred, gt, "cae");
    if (!(floor >= 0.0)) throw ArgumentError("cae: floor must be non-negative");
    auto nullify = [floor](double v) { return v < floor ? 0.0 : v; };
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(nullify(pred[i]) - nullify(gt[i]));
    return acc;
}

double top_fraction_mae(const std::vector<std::vector<double>>& preds,
                        const std::vector<std::vector<double>>& gts, double frac) {
    if (!(frac > 0.0 && frac <= 1.0)) throw ArgumentError("top_fraction_mae: frac must be in (0,1]");
    if (preds.size() != gts.size()) throw ArgumentError("top_fraction_mae: shot count mismatch");
    std::vector<double> errors;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        check_pair(preds[s], gts[s], "top_fraction_mae");
        for (std::size_t i = 0; i < preds[s].size(); ++i) {
            errors.push_back(std::abs(preds[s][i] - gts[s][i]));
        }
    }
    if (errors.empty()) throw ArgumentError("top_fraction_mae: empty error pool");
    const auto pooled = static_cast<double>(errors.size());
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * pooled)));
    std::stable_sort(errors.begin(), errors.end(), std::greater<>());
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += errors[i];
    return acc / static_cast<double>(m);
}

MetricReport evaluate_set(const std::vector<std::vector<double>>& preds,
                          const std::vector<std::vector<double>>& gts, double floor) {
    if (preds.size() != gts.size()) throw ArgumentError("evaluate_set: shot count mismatch");
    if (preds.empty()) throw ArgumentError("evaluate_set: no shots");
    MetricReport r;
    r.n_shots = preds.size();
    double cae_sum = 0.0;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        cae_sum += cae(preds[s], gts[s], floor);
        r.pooled_steps += preds[s].size();
    }
    r.cae = cae_sum / static_cast<double>(r.n_shots);
    r.top1_mae = top_fraction_mae(preds, gts, 0.01);
    r.top5_mae = top_fraction_mae(preds, gts, 0.05);
    return r;
}

std::string format_report(const MetricReport& r) {
    std::string out;
    auto number = [&out](const char* key, double v) {
        out += key;
        out.push_back('=');
        wire::append_number(out, v);
        out.push_back('\n');
    };
    number("cae", r.cae);
    number("top1_mae", r.top1_mae);
    number("top5_mae", r.top5_mae);
    out += "n_shots=" + std::to_string(r.n_shots) + "\n";
    out += "pooled_steps=" + std::to_string(r.pooled_steps) + "\n";
    return out;
}

MetricReport parse_report(std::string_view text) {
    MetricReport r;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "cae") r.cae = std::stod(value);
            else if (key == "top1_mae") r.top1_mae = std::stod(value);
            else if (key == "top5_mae") r.top5_mae = std::stod(value);
            else if (key == "n_shots") r.n_shots = std::stoul(value);
            else if (key == "pooled_steps") r.pooled_steps = std::stoul(value);
        } catch (const std::exception&) {
            throw ParseError("metric report: bad value for '" + key + "'");
        }
    }
    return r;
}

}  // namespace lpi
