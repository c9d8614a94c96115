#include "lpi/commands.hpp"

#include <doctest.h>

#include <csignal>
#include <cstdlib>
#include <fcntl.h>
#include <fstream>
#include <spawn.h>
#include <sstream>
#include <sys/wait.h>
#include <thread>

using namespace lpi;
namespace fs = std::filesystem;

extern char** environ;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out, err;
};

Run cli(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string("cd '") + dir.string() + "' && '" + LPI_CLI + "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir / "stdout.txt"), slurp(dir / "stderr.txt")};
}

// 20 shots keep the llm runs short.
RunConfig small_config(const fs::path& dir) {
    RunConfig c;
    c.generator.n_shots = 20;
    c.shots_path = dir / "shots.jsonl";
    c.model.train.epochs = 2;
    return c;
}

void write_shots(const RunConfig& c) { cmd::gen_data(c, c.shots_path); }

std::vector<std::vector<std::string>> read_table(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("exit codes by error class") {
    CHECK(cmd::exit_code(ConfigError("x")) == 2);
    CHECK(cmd::exit_code(ArgumentError("x")) == 2);
    CHECK(cmd::exit_code(ParseError("x")) == 2);
    CHECK(cmd::exit_code(SchemaError("x")) == 2);
    CHECK(cmd::exit_code(TransportError("x", 2)) == 3);
    CHECK(cmd::exit_code(DeadlineError("x")) == 3);
    CHECK(cmd::exit_code(CapacityError("x")) == 3);
    CHECK(cmd::exit_code(NumericError("x")) == 4);
    CHECK(cmd::exit_code(RankError("x")) == 4);
    CHECK(cmd::exit_code(std::runtime_error("x")) == 1);
}

TEST_CASE("gen-data writes 100 shots of 400 steps and is reproducible") {
    const fs::path dir = temp_dir("lpi_cmd_gen");
    Run r = cli("--out a.jsonl gen-data", dir);
    REQUIRE(r.code == 0);
    const ShotSet set = load_shots(dir / "a.jsonl");
    CHECK(set.size() == 100);
    for (const auto& s : set.shots) {
        CHECK(s.laser.size() == 400);
        CHECK(s.hxr.size() == 400);
    }
    REQUIRE(cli("--out b.jsonl gen-data", dir).code == 0);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));

    std::ofstream(dir / "zero.ini") << "[generator]\nn_shots = 0\n";
    r = cli("--config zero.ini --out c.jsonl gen-data", dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("n_shots") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "c.jsonl"));
    fs::remove_all(dir);
}

TEST_CASE("esn with zero ridge interpolates a single training shot") {
    const fs::path dir = temp_dir("lpi_cmd_esn");
    RunConfig c = small_config(dir);
    write_shots(c);
    c.model.kind = ReservoirKind::esn;
    c.model.esn.n_units = 500;
    c.model.esn.ridge = 0.0;
    c.model.esn.washout = 0;
    c.train_limit = 1;
    const auto t = cmd::train(c, dir / "run");
    CHECK(t.fit.train_loss < 1e-6);
    CHECK(fs::exists(dir / "run/checkpoint.json"));
    CHECK(fs::exists(dir / "run/trace.tsv"));
    fs::remove_all(dir);
}

TEST_CASE("missing data file exits 2 naming the path") {
    const fs::path dir = temp_dir("lpi_cmd_missing");
    const Run r = cli("--reservoir esn --shots no_such_file.jsonl train", dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("no_such_file.jsonl") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("config, transport and numeric failures map to exit codes 2, 3 and 4") {
    const fs::path dir = temp_dir("lpi_cmd_exit");
    REQUIRE(cli("--out shots.jsonl gen-data", dir).code == 0);

    std::ofstream(dir / "typo.ini") << "[train]\nepoch = 3\n";
    CHECK(cli("--config typo.ini train", dir).code == 2);
    CHECK(cli("--reservoir gru train", dir).code == 2);
    CHECK(cli("train --bogus-flag", dir).code == 2);
    CHECK(cli("", dir).code == 2);

    std::ofstream(dir / "remote.ini") << "[service]\nendpoint = http://127.0.0.1:1\nretries = 1\ndeadline_ms = 2000\n";
    const Run t = cli("--config remote.ini --shots shots.jsonl train", dir);
    CHECK(t.code == 3);
    CHECK(t.err.find("127.0.0.1:1") != std::string::npos);

    std::ofstream(dir / "flat.ini") << "[reservoir]\nkind = esn\n[esn]\ninput_scale = 0\nridge = 0\n";
    CHECK(cli("--config flat.ini --shots shots.jsonl train", dir).code == 4);
    fs::remove_all(dir);
}

TEST_CASE("llm backend trains against the mock and writes a checkpoint") {
    const fs::path dir = temp_dir("lpi_cmd_llm");
    RunConfig c = small_config(dir);
    write_shots(c);
    const auto t = cmd::train(c, dir / "run");
    CHECK(fs::exists(t.checkpoint_path));
    CHECK(std::isfinite(t.fit.train_loss));
    const auto trace = read_table(dir / "run/trace.tsv");
    REQUIRE(trace.size() == 3);
    CHECK(trace[0] == std::vector<std::string>{"epoch", "train_loss", "val_loss"});

    const Checkpoint ck = load_checkpoint(t.checkpoint_path);
    CHECK(ck.terms == c.model.terms);
    CHECK(ck.tensors.count("post.w2") == 1);

    // eval restores the model and its normalization from the checkpoint.
    const auto e = cmd::eval(c, t.checkpoint_path, std::nullopt, dir / "eval");
    CHECK(e.report.n_shots == 2);
    CHECK(e.predictions.size() == 2);

    const auto p1 = cmd::predict(c, t.checkpoint_path, std::nullopt, true, dir / "p1.tsv");
    const auto p2 = cmd::predict(c, t.checkpoint_path, std::nullopt, true, dir / "p2.tsv");
    CHECK(p1.truth.size() == 400);
    CHECK(p1.prediction.size() == 400);
    REQUIRE(p1.confidence.has_value());
    CHECK(p1.confidence->size() == 400);
    CHECK(slurp(dir / "p1.tsv") == slurp(dir / "p2.tsv"));
    CHECK(p1.prediction == e.predictions[0]);
    const auto rows = read_table(dir / "p1.tsv");
    REQUIRE(rows.size() == 401);
    CHECK(rows[0] == std::vector<std::string>{"time_step", "ground_truth", "prediction", "error", "confidence"});

    const auto p3 = cmd::predict(c, t.checkpoint_path, std::nullopt, false, dir / "p3.tsv");
    CHECK_FALSE(p3.confidence.has_value());
    const auto plain = read_table(dir / "p3.tsv");
    CHECK(plain[0] == std::vector<std::string>{"time_step", "ground_truth", "prediction", "error"});
    CHECK(slurp(dir / "p3.tsv").find("confidence") == std::string::npos);

    const std::string id = e.shot_ids[1];
    CHECK(cmd::predict(c, t.checkpoint_path, id, false, dir / "p4.tsv").prediction == e.predictions[1]);
    CHECK_THROWS_AS(cmd::predict(c, t.checkpoint_path, std::string("shot-9999"), false, dir / "p5.tsv"),
                    ArgumentError);
    fs::remove_all(dir);
}

TEST_CASE("cli predict toggles the confidence column") {
    const fs::path dir = temp_dir("lpi_cmd_cli_predict");
    std::ofstream(dir / "run.ini") << "[generator]\nn_shots = 20\n[data]\nshots = shots.jsonl\n[train]\nepochs = 1\n";
    REQUIRE(cli("--config run.ini gen-data", dir).code == 0);
    REQUIRE(cli("--config run.ini --out run train", dir).code == 0);
    Run r = cli("--config run.ini --out with.tsv predict --checkpoint run/checkpoint.json --confidence", dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("spearman") != std::string::npos);
    CHECK(read_table(dir / "with.tsv")[0].size() == 5);
    r = cli("--config run.ini --out without.tsv predict --checkpoint run/checkpoint.json", dir);
    REQUIRE(r.code == 0);
    CHECK(read_table(dir / "without.tsv")[0].size() == 4);
    CHECK(read_table(dir / "without.tsv").size() == 401);
    fs::remove_all(dir);
}

TEST_CASE("eval of ground truth gives an all-zero report") {
    const fs::path dir = temp_dir("lpi_cmd_truth");
    RunConfig c = small_config(dir);
    write_shots(c);
    const auto e = cmd::eval(c, std::nullopt, Baseline::truth, dir / "eval");
    CHECK(e.report.cae == 0.0);
    CHECK(e.report.top1_mae == 0.0);
    CHECK(e.report.top5_mae == 0.0);
    const MetricReport back = parse_report(slurp(dir / "eval/report.txt"));
    CHECK(back.cae == 0.0);
    CHECK(back.n_shots == 2);

    const auto m = cmd::eval(c, std::nullopt, Baseline::copy_laser, dir / "copy");
    const MetricReport direct = evaluate_set(m.predictions, m.truths, c.metric_floor);
    CHECK(m.report.cae == direct.cae);
    CHECK(m.report.top1_mae == direct.top1_mae);
    CHECK(m.report.top5_mae == direct.top5_mae);
    CHECK(m.report.pooled_steps == 800);
    CHECK(read_table(dir / "copy/predictions.tsv").size() == 801);

    CHECK_THROWS_AS(cmd::eval(c, std::nullopt, std::nullopt, dir / "none"), ArgumentError);
    fs::remove_all(dir);
}

TEST_CASE("multi-seed summary matches the per-seed reports") {
    const fs::path dir = temp_dir("lpi_cmd_seeds");
    RunConfig c = small_config(dir);
    write_shots(c);
    c.model.kind = ReservoirKind::esn;
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const auto s = cmd::eval_seeds(c, seeds, dir / "seeds");
    REQUIRE(s.reports.size() == 3);

    double mean = 0;
    for (const auto& r : s.reports) mean += r.cae;
    mean /= 3;
    double ss = 0;
    for (const auto& r : s.reports) ss += (r.cae - mean) * (r.cae - mean);
    CHECK(s.mean.cae == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.std.cae == doctest::Approx(std::sqrt(ss / 2)).epsilon(1e-12));
    CHECK(s.std.cae > 0);

    for (std::size_t i = 0; i < 3; ++i) {
        const fs::path run = dir / "seeds" / ("seed-" + std::to_string(seeds[i]));
        CHECK(parse_report(slurp(run / "report.txt")).cae == s.reports[i].cae);
    }
    const std::string summary = slurp(dir / "seeds/summary.txt");
    CHECK(summary.find("seeds=1,2,3") != std::string::npos);
    CHECK(summary.find("cae_mean=") != std::string::npos);
    CHECK(summary.find("cae_std=") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("sweep rows follow the axis values and match independent runs") {
    const fs::path dir = temp_dir("lpi_cmd_sweep");
    RunConfig c;
    c.shots_path = dir / "shots.jsonl";
    write_shots(c);
    c.model.kind = ReservoirKind::esn;
    CHECK(cmd::sweep_values(cmd::SweepAxis::samples) == std::vector<int>{80, 60, 40, 20});
    CHECK(cmd::sweep_values(cmd::SweepAxis::epochs) == std::vector<int>{100, 50, 20, 10});
    CHECK(cmd::sweep_cell_config(c, cmd::SweepAxis::epochs, 20).model.train.epochs == 20);
    CHECK(cmd::sweep_cell_config(c, cmd::SweepAxis::samples, 40).train_limit == 40);
    CHECK_THROWS_AS(cmd::parse_sweep_axis("lr"), ArgumentError);

    const auto rows = cmd::sweep(c, cmd::SweepAxis::samples, dir / "sweep");
    REQUIRE(rows.size() == 4);
    const auto table = read_table(dir / "sweep/sweep.tsv");
    REQUIRE(table.size() == 5);
    CHECK(table[0][0] == "samples");
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(rows[i].value == cmd::sweep_values(cmd::SweepAxis::samples)[i]);
        CHECK(table[i + 1][0] == std::to_string(rows[i].value));
        const RunConfig cell = cmd::sweep_cell_config(c, cmd::SweepAxis::samples, rows[i].value);
        const fs::path run = dir / ("solo-" + std::to_string(i));
        const auto t = cmd::train(cell, run);
        CHECK(cmd::eval(cell, t.checkpoint_path, std::nullopt, run).report.cae == rows[i].report.cae);
    }
    CHECK(rows[0].report.cae != rows[3].report.cae);

    RunConfig too_many = c;
    too_many.train_limit = 81;
    CHECK_THROWS_AS(cmd::prepare_data(too_many), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("serve-mock answers info, passes the corpus and drains on SIGTERM") {
    const fs::path dir = temp_dir("lpi_cmd_serve");
    const std::string log = (dir / "serve.log").string();
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    std::string bin = LPI_CLI;
    std::vector<std::string> args{bin, "serve-mock", "--port", "0"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    REQUIRE(posix_spawn(&pid, bin.c_str(), &actions, nullptr, argv.data(), environ) == 0);
    posix_spawn_file_actions_destroy(&actions);

    std::string endpoint;
    for (int i = 0; i < 100 && endpoint.empty(); ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        const std::string text = slurp(log);
        const auto pos = text.find("http://");
        if (pos != std::string::npos && text.find('\n', pos) != std::string::npos) {
            endpoint = text.substr(pos, text.find('\n', pos) - pos);
        }
    }
    REQUIRE_FALSE(endpoint.empty());

    HttpReservoirClient client(endpoint);
    const ServerInfo info = client.info();
    CHECK(info.hidden_dim == MockConfig{}.hidden_dim);
    CHECK(info.model_id == MockConfig{}.model_id);

    const auto outcomes = cmd::check_conformance(LPI_FIXTURE_DIR "/conformance", endpoint, conformance::Mode::exact);
    CHECK(outcomes.size() >= 10);
    for (const auto& o : outcomes) CHECK_MESSAGE(o.passed, o.name << ": " << o.detail);

    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(slurp(log).find("stopped after") != std::string::npos);
    fs::remove_all(dir);
}
