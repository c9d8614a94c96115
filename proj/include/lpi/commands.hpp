#pragma once

#include "lpi/checkpoint.hpp"
#include "lpi/config.hpp"
#include "lpi/conformance.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

// Library side of the `lpi` command line tool. Every command writes its
// outputs under an explicit directory and returns what it wrote.
namespace lpi::cmd {

namespace fs = std::filesystem;

// 0 ok, 2 config/argument/data, 3 service, 4 numeric, 1 anything else.
int exit_code(const std::exception& e);

struct Data {
    SplitResult split;  // normalized
    Normalization normalization;
};

// Loads, splits (and truncates the train split to train_limit), then
// normalizes with `fixed` or with statistics fitted on the train split.
Data prepare_data(const RunConfig& cfg, const Normalization* fixed = nullptr);

// Writes cfg.generator.n_shots synthetic shots to `out`.
ShotSet gen_data(const RunConfig& cfg, const fs::path& out);

struct TrainOutput {
    FitReport fit;
    Checkpoint checkpoint;
    fs::path checkpoint_path;
};

// Writes checkpoint.json and trace.tsv into out_dir.
TrainOutput train(const RunConfig& cfg, const fs::path& out_dir);

struct EvalOutput {
    MetricReport report;
    std::vector<std::string> shot_ids;
    std::vector<std::vector<double>> predictions, truths;
};

// Test-split metrics of a checkpoint (or of a baseline when one is given,
// in which case the checkpoint is not read). Writes report.txt and
// predictions.tsv. Model settings come from the checkpoint; data and
// service settings from cfg.
EvalOutput eval(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, std::optional<Baseline> baseline,
                const fs::path& out_dir);

struct SeedSummary {
    std::vector<std::uint64_t> seeds;
    std::vector<MetricReport> reports;
    MetricReport mean, std;  // sample standard deviation; zero for one seed
};

// Train + eval once per seed under out_dir/seed-<s>; the seed replaces both the
// model seed and the esn seed. Writes summary.txt.
SeedSummary eval_seeds(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds, const fs::path& out_dir);

struct PredictOutput {
    std::string shot_id;
    std::vector<double> truth, prediction;
    std::optional<std::vector<double>> confidence;
    double rank_correlation = 0.0;  // error vs confidence, when scanned
};

// One shot (by id, or the first test shot) in train-normalized units.
// Writes time_step/ground_truth/prediction/error[/confidence] columns to out.
PredictOutput predict(const RunConfig& cfg, const fs::path& checkpoint, const std::optional<std::string>& shot_id,
                      bool with_confidence, const fs::path& out);

enum class SweepAxis { samples, epochs };

SweepAxis parse_sweep_axis(const std::string& text);
std::vector<int> sweep_values(SweepAxis axis);
// The config a single sweep cell runs with.
RunConfig sweep_cell_config(const RunConfig& cfg, SweepAxis axis, int value);

struct SweepRow {
    int value;
    MetricReport report;
};

// One train + eval per cell under out_dir/<axis>-<value>; writes sweep.tsv.
std::vector<SweepRow> sweep(const RunConfig& cfg, SweepAxis axis, const fs::path& out_dir);

// Blocks until `stop` is set; returns after draining in-flight requests.
void serve_mock(const RunConfig& cfg, const std::string& host, int port, const std::atomic<bool>& stop,
                std::ostream& log);

std::vector<conformance::Outcome> check_conformance(const fs::path& corpus_dir, const std::string& endpoint,
                                                    conformance::Mode mode);

}  // namespace lpi::cmd
