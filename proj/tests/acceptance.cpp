// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Tolerances are fixed here and never relaxed.

#include "gradcheck.hpp"

#include "lpi/commands.hpp"
#include "lpi/confidence.hpp"
#include "lpi/metrics.hpp"
#include "lpi/reservoir.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

using namespace lpi;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lpi_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Independent references: strictly sequential loops, no shared helpers.
double ref_sum_abs(const std::vector<double>& p, const std::vector<double>& g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] > g[i] ? p[i] - g[i] : g[i] - p[i];
    return acc;
}

double ref_cae(const std::vector<double>& p, const std::vector<double>& g, double floor) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i] >= floor ? p[i] : 0.0;
        const double b = g[i] >= floor ? g[i] : 0.0;
        acc += a > b ? a - b : b - a;
    }
    return acc;
}

double ref_top(const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& g, double frac) {
    std::vector<double> e;
    for (std::size_t s = 0; s < p.size(); ++s) {
        for (std::size_t i = 0; i < p[s].size(); ++i) e.push_back(std::fabs(p[s][i] - g[s][i]));
    }
    std::sort(e.begin(), e.end());
    std::size_t m = static_cast<std::size_t>(frac * static_cast<double>(e.size()));
    if (m == 0) m = 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += e[e.size() - 1 - i];
    return acc / static_cast<double>(m);
}

Verdict metric_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1000);
    std::uniform_real_distribution<double> u(-0.2, 1.5);
    std::uniform_int_distribution<int> len(1, 400);
    std::vector<std::vector<double>> ps, gs;
    int mismatches = 0;
    for (int pair = 0; pair < 1000; ++pair) {
        const int n = len(rng);
        std::vector<double> p(n), g(n);
        for (auto& v : p) v = u(rng);
        for (auto& v : g) v = u(rng);
        if (pair % 7 == 0) g[0] = p[0];
        mismatches += sum_abs_loss(p, g) != ref_sum_abs(p, g);
        for (double floor : {0.0, kCaeFloor, 0.5}) mismatches += cae(p, g, floor) != ref_cae(p, g, floor);
        ps.push_back(std::move(p));
        gs.push_back(std::move(g));
    }
    for (double frac : {0.01, 0.05, 0.37, 1.0}) mismatches += top_fraction_mae(ps, gs, frac) != ref_top(ps, gs, frac);
    for (int chunk = 0; chunk < 10; ++chunk) {
        std::vector<std::vector<double>> p(ps.begin() + chunk * 100, ps.begin() + chunk * 100 + 100);
        std::vector<std::vector<double>> g(gs.begin() + chunk * 100, gs.begin() + chunk * 100 + 100);
        mismatches += top_fraction_mae(p, g, 0.01) != ref_top(p, g, 0.01);
        mismatches += top_fraction_mae(p, g, 0.05) != ref_top(p, g, 0.05);
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 10.0, fmt("1000 pairs, %.0f bitwise mismatches, %.2f s < 10 s", mismatches, secs)};
}

Verdict gradient_fidelity() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string where;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto r = gradcheck::check(seed);
        if (r.max_rel > worst) {
            worst = r.max_rel;
            where = r.worst + " (config " + std::to_string(seed) + ")";
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 60.0,
            fmt("50 configs, max rel err %.2e < 1e-4, %.2f s < 60 s", worst, secs) + ", worst at " + where};
}

Verdict confidence_algebra() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 2.0);
    std::uniform_real_distribution<double> ent(0.0, std::log(256.0));
    int bound_violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + trial % 60;
        const int len = 1 + trial % 40;
        Vector h(k);
        for (auto& v : h) v = ent(rng);
        Matrix norms(k, len);
        for (Eigen::Index i = 0; i < norms.size(); ++i) norms.data()[i] = std::fabs(n(rng));
        const Matrix s = confidence::saliency_from_norms(norms);
        const Vector c = confidence::confidence(h, s);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            bound_violations += c(i) < -h.maxCoeff() || c(i) > -h.minCoeff();
        }
    }

    double constant_err = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 1 + trial % 50;
        const double h0 = ent(rng);
        Matrix norms(k, 400);
        for (Eigen::Index i = 0; i < norms.size(); ++i) norms.data()[i] = std::fabs(n(rng));
        const Vector c = confidence::confidence(Vector::Constant(k, h0), confidence::saliency_from_norms(norms));
        constant_err = std::max(constant_err, (c.array() + h0).abs().maxCoeff());
    }

    Matrix norms(50, 3);
    for (Eigen::Index i = 0; i < norms.size(); ++i) norms.data()[i] = std::fabs(n(rng));
    norms.col(1).setZero();
    const Matrix s = confidence::saliency_from_norms(norms);
    const double uniform_err = (s.col(1).array() - 1.0 / 50.0).abs().maxCoeff();

    const double secs = seconds_since(t0);
    const bool pass = bound_violations == 0 && constant_err <= 1e-12 && uniform_err <= 1e-15 && secs < 5.0;
    return {pass, fmt("%.0f bound violations, constant-entropy err %.1e <= 1e-12, zero-column err %.1e, %.2f s < 5 s",
                      bound_violations, constant_err, uniform_err, secs)};
}

Verdict echo_state() {
    const auto t0 = Clock::now();
    GeneratorConfig g;
    g.n_shots = 10;
    const ShotSet shots = synth_shots(g);
    double worst = std::numeric_limits<double>::infinity();
    for (int seed = 0; seed < 10; ++seed) {
        reservoir::EsnConfig cfg;
        cfg.spectral_radius = 0.9;
        cfg.leak = 1.0;
        cfg.seed = static_cast<std::uint64_t>(seed);
        reservoir::Esn esn(cfg, 2);
        const Shot& shot = shots.shots[seed];
        Matrix u(400, 2);
        for (int t = 0; t < 400; ++t) {
            u(t, 0) = shot.laser[t];
            u(t, 1) = t > 0 ? shot.hxr[t - 1] : 0.0;
        }
        std::mt19937_64 rng(seed + 500);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        Vector a(cfg.n_units), b(cfg.n_units);
        for (auto& v : a) v = d(rng);
        for (auto& v : b) v = d(rng);
        const Matrix ra = esn.run(u, a), rb = esn.run(u, b);
        const double gap = (ra.row(399) - rb.row(399)).norm();
        worst = std::min(worst, (a - b).norm() / std::max(gap, 1e-300));
    }
    const double secs = seconds_since(t0);
    return {worst >= 1e6 && secs < 10.0,
            fmt("worst contraction over 10 seeds %.2e >= 1e6 after 400 steps, %.2f s < 10 s", worst, secs)};
}

Verdict exact_interpolation() {
    const fs::path dir = scratch("interp");
    RunConfig cfg;
    cfg.generator.n_shots = 10;
    cfg.shots_path = dir / "shots.jsonl";
    cmd::gen_data(cfg, cfg.shots_path);
    cfg.model.kind = ReservoirKind::esn;
    cfg.model.esn.n_units = 500;
    cfg.model.esn.ridge = 0.0;
    cfg.model.esn.washout = 0;
    cfg.train_limit = 1;
    const auto t = cmd::train(cfg, dir / "run");
    fs::remove_all(dir);
    return {t.fit.train_loss < 1e-6, fmt("esn 500 units, ridge 0, one shot: sum_abs_loss %.2e < 1e-6", t.fit.train_loss)};
}

Verdict end_to_end() {
    const auto t0 = Clock::now();
    const fs::path dir = scratch("e2e");
    RunConfig cfg;
    cfg.shots_path = dir / "shots.jsonl";
    cmd::gen_data(cfg, cfg.shots_path);
    const double mean_cae = cmd::eval(cfg, std::nullopt, Baseline::train_mean, dir / "train-mean").report.cae;
    const double copy_cae = cmd::eval(cfg, std::nullopt, Baseline::copy_laser, dir / "copy-laser").report.cae;
    const double bar = 0.8 * std::min(mean_cae, copy_cae);
    const auto summary = cmd::eval_seeds(cfg, {0, 1, 2}, dir / "llm");
    bool pass = true;
    std::string per_seed;
    for (std::size_t i = 0; i < summary.reports.size(); ++i) {
        pass = pass && summary.reports[i].cae <= bar;
        per_seed += (i ? ", " : "") + fmt("%.3f", summary.reports[i].cae);
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 600.0;
    fs::remove_all(dir);
    return {pass, "test CAE per seed [" + per_seed + "] " +
                      fmt("<= %.3f (80%% of min(train-mean %.3f, copy-laser %.3f)), %.0f s < 600 s", bar, mean_cae,
                          copy_cae, secs)};
}

Verdict sweep_harness() {
    const fs::path dir = scratch("sweep");
    RunConfig cfg;
    cfg.shots_path = dir / "shots.jsonl";
    cmd::gen_data(cfg, cfg.shots_path);
    bool pass = true;
    std::string detail;
    for (const auto axis : {cmd::SweepAxis::samples, cmd::SweepAxis::epochs}) {
        const auto rows = cmd::sweep(cfg, axis, dir / "sweep");
        const auto expected = axis == cmd::SweepAxis::samples ? std::vector<int>{80, 60, 40, 20}
                                                              : std::vector<int>{100, 50, 20, 10};
        pass = pass && rows.size() == expected.size();
        int equal = 0;
        for (std::size_t i = 0; i < rows.size() && i < expected.size(); ++i) {
            pass = pass && rows[i].value == expected[i];
            const RunConfig cell = cmd::sweep_cell_config(cfg, axis, rows[i].value);
            const fs::path solo = dir / ("solo-" + std::to_string(rows[i].value));
            const auto t = cmd::train(cell, solo);
            const auto r = cmd::eval(cell, t.checkpoint_path, std::nullopt, solo).report;
            const bool same = r.cae == rows[i].report.cae && r.top1_mae == rows[i].report.top1_mae &&
                              r.top5_mae == rows[i].report.top5_mae;
            equal += same;
            pass = pass && same;
        }
        std::string labels;
        for (const auto& r : rows) labels += (labels.empty() ? "" : "/") + std::to_string(r.value);
        detail += std::string(detail.empty() ? "" : "; ") + (axis == cmd::SweepAxis::samples ? "samples " : "epochs ") +
                  labels + ", " + std::to_string(equal) + "/" + std::to_string(rows.size()) + " cells bit-equal";
    }
    fs::remove_all(dir);
    return {pass, detail};
}

Verdict protocol_conformance() {
    const auto outcomes = cmd::check_conformance(LPI_FIXTURE_DIR "/conformance", "inproc", conformance::Mode::exact);
    int failed = 0;
    std::string first;
    for (const auto& o : outcomes) {
        if (!o.passed) {
            ++failed;
            if (first.empty()) first = ", first failure " + o.name + ": " + o.detail;
        }
    }
    return {failed == 0 && !outcomes.empty(),
            fmt("%.0f fixtures bit-exact against the in-process mock, %.0f failed", static_cast<double>(outcomes.size()),
                failed) +
                first};
}

Verdict overfit_capacity() {
    GeneratorConfig g;
    g.n_shots = 2;
    const auto shots = normalize(synth_shots(g)).set.shots;
    ModelConfig m;
    m.train.epochs = 200;
    MockReservoir mock;
    LlmForecaster f(m, mock);
    const auto r = f.fit(shots, {});
    const auto& t = r.trace.train_loss;
    const double drop = 1.0 - t.back() / t.front();
    return {drop >= 0.9, fmt("2 shots, 200 epochs: train loss %.3f -> %.3f, decrease %.1f%% >= 90%%", t.front(),
                             t.back(), 100.0 * drop)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"metric oracle equivalence", metric_oracle},
        {"gradient fidelity", gradient_fidelity},
        {"confidence algebra", confidence_algebra},
        {"echo-state property", echo_state},
        {"exact interpolation", exact_interpolation},
        {"end-to-end desk experiment", end_to_end},
        {"sweep harness", sweep_harness},
        {"protocol conformance", protocol_conformance},
        {"post-head overfit capacity", overfit_capacity},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s  %-28s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
