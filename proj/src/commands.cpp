#include "lpi/commands.hpp"

#include "lpi/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace lpi::cmd {

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e) ||
        dynamic_cast<const ParseError*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
        dynamic_cast<const TemplateError*>(&e) || dynamic_cast<const StateError*>(&e)) {
        return 2;
    }
    if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const DeadlineError*>(&e) ||
        dynamic_cast<const CompatibilityError*>(&e) || dynamic_cast<const CapacityError*>(&e) ||
        dynamic_cast<const ServerError*>(&e) || dynamic_cast<const StartupError*>(&e)) {
        return 3;
    }
    if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const RankError*>(&e)) return 4;
    return 1;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path.string());
    return out;
}

struct Runtime {
    std::unique_ptr<ReservoirService> service;
    std::unique_ptr<Forecaster> model;
};

Runtime build(const ModelConfig& model, const RunConfig& cfg, const MockConfig& mock) {
    Runtime rt;
    if (model.kind == ReservoirKind::llm) rt.service = connect_service(cfg.endpoint, cfg.client, mock);
    rt.model = make_forecaster(model, rt.service.get());
    return rt;
}

// Model settings from the checkpoint, data and service settings from cfg.
struct Restored {
    RunConfig saved;
    Checkpoint ckpt;
};

Restored restore(const fs::path& path) {
    Restored r;
    r.ckpt = load_checkpoint(path);
    r.saved = parse_run_config(r.ckpt.config_text);
    r.saved.model.terms = r.ckpt.terms;
    r.saved.model.descriptors = r.ckpt.descriptors;
    return r;
}

RunConfig data_view(const RunConfig& cfg, const RunConfig& saved) {
    RunConfig d = saved;
    d.shots_path = cfg.shots_path;
    d.endpoint = cfg.endpoint;
    d.client = cfg.client;
    d.metric_floor = cfg.metric_floor;
    return d;
}

}  // namespace

Data prepare_data(const RunConfig& cfg, const Normalization* fixed) {
    const ShotSet all = load_shots(cfg.shots_path);
    if (all.empty()) throw ArgumentError("no shots in " + cfg.shots_path.string());
    SplitResult split = split_shots(all, cfg.split, cfg.split_seed);
    if (cfg.train_limit > 0) {
        if (static_cast<std::size_t>(cfg.train_limit) > split.train.size()) {
            throw ConfigError("data.train_limit " + std::to_string(cfg.train_limit) + " exceeds the " +
                              std::to_string(split.train.size()) + " training shots");
        }
        split.train.shots.resize(static_cast<std::size_t>(cfg.train_limit));
    }
    if (split.train.empty()) throw ArgumentError("training split is empty");
    Data d;
    d.normalization = fixed ? *fixed : fit_normalization(split.train);
    d.split.train = apply_normalization(split.train, d.normalization);
    d.split.val = apply_normalization(split.val, d.normalization);
    d.split.test = apply_normalization(split.test, d.normalization);
    return d;
}

ShotSet gen_data(const RunConfig& cfg, const fs::path& out) {
    const ShotSet set = synth_shots(cfg.generator);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_shots(set, out);
    return set;
}

TrainOutput train(const RunConfig& cfg, const fs::path& out_dir) {
    const Data data = prepare_data(cfg);
    Runtime rt = build(cfg.model, cfg, cfg.mock);
    TrainOutput out;
    out.fit = rt.model->fit(data.split.train.shots, data.split.val.shots);
    out.checkpoint = {format_run_config(cfg), cfg.model.terms, cfg.model.descriptors, data.normalization,
                      rt.model->tensors()};
    fs::create_directories(out_dir);
    out.checkpoint_path = out_dir / "checkpoint.json";
    save_checkpoint(out.checkpoint, out.checkpoint_path);

    auto trace = open_out(out_dir / "trace.tsv");
    trace << "epoch\ttrain_loss\tval_loss\n";
    for (std::size_t e = 0; e < out.fit.trace.train_loss.size(); ++e) {
        trace << e + 1 << "\t" << num(out.fit.trace.train_loss[e]) << "\t" << num(out.fit.trace.val_loss[e]) << "\n";
    }
    trace << "# final_train_loss=" << num(out.fit.train_loss) << " best_epoch=" << out.fit.trace.best_epoch << "\n";
    return out;
}

EvalOutput eval(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, std::optional<Baseline> baseline,
                const fs::path& out_dir) {
    EvalOutput out;
    std::vector<Shot> test;
    if (baseline) {
        const Data data = prepare_data(cfg);
        test = data.split.test.shots;
        out.predictions = baseline_predictions(*baseline, data.split.train.shots, test);
    } else {
        if (!checkpoint) throw ArgumentError("eval needs a checkpoint or a baseline");
        const Restored r = restore(*checkpoint);
        const RunConfig view = data_view(cfg, r.saved);
        const Data data = prepare_data(view, &r.ckpt.normalization);
        Runtime rt = build(r.saved.model, view, r.saved.mock);
        rt.model->load(r.ckpt.tensors);
        test = data.split.test.shots;
        for (const auto& s : test) out.predictions.push_back(rt.model->predict(s));
    }
    if (test.empty()) throw ArgumentError("test split is empty");
    for (const auto& s : test) {
        out.shot_ids.push_back(s.shot_id);
        out.truths.push_back(s.hxr);
    }
    out.report = evaluate_set(out.predictions, out.truths, cfg.metric_floor);

    fs::create_directories(out_dir);
    open_out(out_dir / "report.txt") << format_report(out.report);
    auto pred = open_out(out_dir / "predictions.tsv");
    pred << "shot_id\ttime_step\tground_truth\tprediction\terror\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        for (std::size_t t = 0; t < out.truths[i].size(); ++t) {
            const double g = out.truths[i][t], p = out.predictions[i][t];
            pred << out.shot_ids[i] << "\t" << t << "\t" << num(g) << "\t" << num(p) << "\t" << num(std::abs(p - g))
                 << "\n";
        }
    }
    return out;
}

SeedSummary eval_seeds(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds, const fs::path& out_dir) {
    if (seeds.empty()) throw ArgumentError("no seeds given");
    SeedSummary s;
    s.seeds = seeds;
    for (const auto seed : seeds) {
        RunConfig c = cfg;
        c.model.seed = seed;
        c.model.esn.seed = seed;
        const fs::path dir = out_dir / ("seed-" + std::to_string(seed));
        const TrainOutput t = train(c, dir);
        s.reports.push_back(eval(c, t.checkpoint_path, std::nullopt, dir).report);
    }
    const double n = static_cast<double>(s.reports.size());
    auto stat = [&](auto field, double& mean, double& sd) {
        mean = 0.0;
        for (const auto& r : s.reports) mean += r.*field;
        mean /= n;
        double ss = 0.0;
        for (const auto& r : s.reports) ss += (r.*field - mean) * (r.*field - mean);
        sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    };
    stat(&MetricReport::cae, s.mean.cae, s.std.cae);
    stat(&MetricReport::top1_mae, s.mean.top1_mae, s.std.top1_mae);
    stat(&MetricReport::top5_mae, s.mean.top5_mae, s.std.top5_mae);
    s.mean.n_shots = s.std.n_shots = s.reports.front().n_shots;
    s.mean.pooled_steps = s.std.pooled_steps = s.reports.front().pooled_steps;

    auto out = open_out(out_dir / "summary.txt");
    out << "seeds=";
    for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
    out << "\n";
    out << "cae_mean=" << num(s.mean.cae) << "\ncae_std=" << num(s.std.cae) << "\n";
    out << "top1_mae_mean=" << num(s.mean.top1_mae) << "\ntop1_mae_std=" << num(s.std.top1_mae) << "\n";
    out << "top5_mae_mean=" << num(s.mean.top5_mae) << "\ntop5_mae_std=" << num(s.std.top5_mae) << "\n";
    return s;
}

PredictOutput predict(const RunConfig& cfg, const fs::path& checkpoint, const std::optional<std::string>& shot_id,
                      bool with_confidence, const fs::path& out_path) {
    const Restored r = restore(checkpoint);
    const RunConfig view = data_view(cfg, r.saved);
    const Data data = prepare_data(view, &r.ckpt.normalization);

    const Shot* shot = nullptr;
    if (shot_id) {
        for (const ShotSet* set : {&data.split.train, &data.split.val, &data.split.test}) {
            for (const auto& s : set->shots) {
                if (s.shot_id == *shot_id) shot = &s;
            }
        }
        if (!shot) throw ArgumentError("no shot with id '" + *shot_id + "' in " + view.shots_path.string());
    } else {
        if (data.split.test.empty()) throw ArgumentError("test split is empty; pass a shot id");
        shot = &data.split.test.shots.front();
    }

    Runtime rt = build(r.saved.model, view, r.saved.mock);
    rt.model->load(r.ckpt.tensors);
    PredictOutput out;
    out.shot_id = shot->shot_id;
    out.truth = shot->hxr;
    out.prediction = rt.model->predict(*shot);
    std::vector<double> err(out.truth.size());
    for (std::size_t t = 0; t < err.size(); ++t) err[t] = std::abs(out.prediction[t] - out.truth[t]);
    if (with_confidence) {
        const auto scan = rt.model->scan(*shot);
        if (!scan) throw ConfigError("confidence scan needs the llm reservoir");
        out.confidence = std::vector<double>(scan->scores.data(), scan->scores.data() + scan->scores.size());
        out.rank_correlation = confidence::spearman(err, *out.confidence);
    }

    auto f = open_out(out_path);
    f << "# shot_id=" << out.shot_id << "\n";
    if (out.confidence) f << "# spearman_error_confidence=" << num(out.rank_correlation) << "\n";
    f << "time_step\tground_truth\tprediction\terror" << (out.confidence ? "\tconfidence" : "") << "\n";
    for (std::size_t t = 0; t < out.truth.size(); ++t) {
        f << t << "\t" << num(out.truth[t]) << "\t" << num(out.prediction[t]) << "\t" << num(err[t]);
        if (out.confidence) f << "\t" << num((*out.confidence)[t]);
        f << "\n";
    }
    return out;
}

SweepAxis parse_sweep_axis(const std::string& text) {
    if (text == "samples") return SweepAxis::samples;
    if (text == "epochs") return SweepAxis::epochs;
    throw ArgumentError("unknown sweep axis '" + text + "' (expected samples or epochs)");
}

std::vector<int> sweep_values(SweepAxis axis) {
    return axis == SweepAxis::samples ? std::vector<int>{80, 60, 40, 20} : std::vector<int>{100, 50, 20, 10};
}

RunConfig sweep_cell_config(const RunConfig& cfg, SweepAxis axis, int value) {
    RunConfig c = cfg;
    if (axis == SweepAxis::samples) {
        c.train_limit = value;
    } else {
        c.model.train.epochs = value;
    }
    return c;
}

std::vector<SweepRow> sweep(const RunConfig& cfg, SweepAxis axis, const fs::path& out_dir) {
    const std::string name = axis == SweepAxis::samples ? "samples" : "epochs";
    std::vector<SweepRow> rows;
    for (const int v : sweep_values(axis)) {
        const RunConfig c = sweep_cell_config(cfg, axis, v);
        const fs::path dir = out_dir / (name + "-" + std::to_string(v));
        const TrainOutput t = train(c, dir);
        rows.push_back({v, eval(c, t.checkpoint_path, std::nullopt, dir).report});
    }
    auto out = open_out(out_dir / "sweep.tsv");
    out << name << "\tcae\ttop1_mae\ttop5_mae\n";
    for (const auto& r : rows) {
        out << r.value << "\t" << num(r.report.cae) << "\t" << num(r.report.top1_mae) << "\t"
            << num(r.report.top5_mae) << "\n";
    }
    return rows;
}

void serve_mock(const RunConfig& cfg, const std::string& host, int port, const std::atomic<bool>& stop,
                std::ostream& log) {
    MockServer server(cfg.mock);
    const int bound = server.start(host, port);
    log << "mock reservoir " << cfg.mock.model_id << " listening on http://" << host << ":" << bound << std::endl;
    while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    log << "stopped after " << server.requests_served() << " requests" << std::endl;
}

std::vector<conformance::Outcome> check_conformance(const fs::path& corpus_dir, const std::string& endpoint,
                                                    conformance::Mode mode) {
    const auto corpus = conformance::load_corpus(corpus_dir);
    if (corpus.empty()) throw ArgumentError("no fixtures in " + corpus_dir.string());
    if (endpoint.empty() || endpoint == "inproc" || endpoint == "mock") {
        MockServer server;
        server.start();
        return conformance::run_corpus(corpus, server.endpoint(), mode);
    }
    return conformance::run_corpus(corpus, endpoint, mode);
}

}  // namespace lpi::cmd
