#include "lpi/commands.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            seeds.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw lpi::ArgumentError("bad seed '" + item + "' in --seeds " + text);
        }
    }
    if (seeds.empty()) throw lpi::ArgumentError("--seeds is empty");
    return seeds;
}

void print_report(const std::string& label, const lpi::MetricReport& r) {
    std::printf("%-12s %10s %10s %10s %6s\n", "", "CAE", "top1_MAE", "top5_MAE", "shots");
    std::printf("%-12s %10.4f %10.4f %10.4f %6zu\n", label.c_str(), r.cae, r.top1_mae, r.top5_mae, r.n_shots);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reservoir forecasting of hot-electron HXR signals from laser pulse shapes"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, reservoir, shots, out;
    const char* env_endpoint = std::getenv("LPI_ENDPOINT");
    std::string endpoint = env_endpoint ? env_endpoint : "";
    app.add_option("--config", config_path, "INI run config (defaults when omitted)");
    app.add_option("--reservoir", reservoir, "reservoir backend: esn, ngrc or llm");
    app.add_option("--endpoint", endpoint, "reservoir service: inproc or http://host:port (env LPI_ENDPOINT)");
    app.add_option("--shots", shots, "shot file, overriding [data] shots");
    app.add_option("--out", out, "output file or directory");

    auto* gen = app.add_subcommand("gen-data", "write synthetic shots");

    auto* train = app.add_subcommand("train", "fit a model and write checkpoint.json and trace.tsv");

    auto* eval = app.add_subcommand("eval", "test-split metrics of a checkpoint, a baseline, or fresh runs per seed");
    std::string checkpoint, baseline, seeds;
    eval->add_option("--checkpoint", checkpoint, "checkpoint.json to evaluate");
    eval->add_option("--baseline", baseline, "truth, train-mean or copy-laser");
    eval->add_option("--seeds", seeds, "comma-separated seeds; trains and evaluates once per seed");

    auto* predict = app.add_subcommand("predict", "forecast one shot as time_step/ground_truth/prediction columns");
    std::string shot_id;
    bool with_confidence = false;
    predict->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
    predict->add_option("--shot", shot_id, "shot id (default: first test shot)");
    predict->add_flag("--confidence", with_confidence, "add the per-step confidence column");

    auto* sweep = app.add_subcommand("sweep", "train and evaluate across sample counts or epoch counts");
    std::string axis;
    sweep->add_option("--axis", axis, "samples or epochs")->required();

    auto* serve = app.add_subcommand("serve-mock", "serve the mock reservoir over HTTP until SIGINT/SIGTERM");
    std::string host = "127.0.0.1";
    int port = 8000;
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port (0 picks a free one)");

    auto* conf = app.add_subcommand("conformance", "replay a fixture corpus against a service");
    std::string corpus = "tests/fixtures/conformance", mode = "structural";
    conf->add_option("--corpus", corpus, "fixture directory");
    conf->add_option("--mode", mode, "exact or structural");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        lpi::RunConfig cfg = config_path.empty() ? lpi::RunConfig{} : lpi::load_run_config(config_path);
        if (!reservoir.empty()) cfg.model.kind = lpi::parse_reservoir_kind(reservoir);
        if (!endpoint.empty()) cfg.endpoint = endpoint;
        if (!shots.empty()) cfg.shots_path = shots;
        cfg.validate();
        lpi::resolve_resources(cfg);
        namespace cmd = lpi::cmd;

        if (*gen) {
            const auto set = cmd::gen_data(cfg, out.empty() ? cfg.shots_path : std::filesystem::path(out));
            std::printf("wrote %zu shots to %s\n", set.size(),
                        (out.empty() ? cfg.shots_path.string() : out).c_str());
        } else if (*train) {
            const auto t = cmd::train(cfg, out.empty() ? "run" : out);
            std::printf("train loss %.6g, best epoch %d\ncheckpoint %s\n", t.fit.train_loss,
                        t.fit.trace.best_epoch, t.checkpoint_path.string().c_str());
        } else if (*eval) {
            const std::filesystem::path dir = out.empty() ? "eval" : out;
            if (!seeds.empty()) {
                const auto s = cmd::eval_seeds(cfg, parse_seeds(seeds), dir);
                for (std::size_t i = 0; i < s.seeds.size(); ++i) {
                    print_report("seed " + std::to_string(s.seeds[i]), s.reports[i]);
                }
                std::printf("CAE %.4f ± %.4f  top1 %.4f ± %.4f  top5 %.4f ± %.4f\n", s.mean.cae, s.std.cae,
                            s.mean.top1_mae, s.std.top1_mae, s.mean.top5_mae, s.std.top5_mae);
            } else {
                std::optional<lpi::Baseline> b;
                if (!baseline.empty()) b = lpi::parse_baseline(baseline);
                if (!b && checkpoint.empty()) throw lpi::ArgumentError("eval needs --checkpoint, --baseline or --seeds");
                std::optional<std::filesystem::path> ck;
                if (!checkpoint.empty()) ck = checkpoint;
                const auto e = cmd::eval(cfg, ck, b, dir);
                print_report(baseline.empty() ? "model" : baseline, e.report);
            }
        } else if (*predict) {
            std::optional<std::string> id;
            if (!shot_id.empty()) id = shot_id;
            const std::filesystem::path file = out.empty() ? "prediction.tsv" : out;
            const auto p = cmd::predict(cfg, checkpoint, id, with_confidence, file);
            std::printf("shot %s: %zu steps written to %s\n", p.shot_id.c_str(), p.prediction.size(),
                        file.string().c_str());
            if (p.confidence) std::printf("spearman(error, confidence) = %.4f\n", p.rank_correlation);
        } else if (*sweep) {
            const auto ax = cmd::parse_sweep_axis(axis);
            const auto rows = cmd::sweep(cfg, ax, out.empty() ? "sweep" : out);
            for (const auto& r : rows) print_report(axis + " " + std::to_string(r.value), r.report);
        } else if (*serve) {
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            cmd::serve_mock(cfg, host, port, g_stop, std::cout);
        } else if (*conf) {
            lpi::conformance::Mode m;
            if (mode == "exact") {
                m = lpi::conformance::Mode::exact;
            } else if (mode == "structural") {
                m = lpi::conformance::Mode::structural;
            } else {
                throw lpi::ArgumentError("unknown --mode '" + mode + "' (expected exact or structural)");
            }
            const auto outcomes = cmd::check_conformance(corpus, cfg.endpoint, m);
            int failed = 0;
            for (const auto& o : outcomes) {
                std::printf("%s %s%s%s\n", o.passed ? "PASS" : "FAIL", o.name.c_str(), o.detail.empty() ? "" : ": ",
                            o.detail.c_str());
                failed += !o.passed;
            }
            std::printf("%zu fixtures, %d failed\n", outcomes.size(), failed);
            if (failed) return 3;
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "lpi: %s\n", e.what());
        return lpi::cmd::exit_code(e);
    }
}
