#include "lpi/config.hpp"
#include "lpi/prompt.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace lpi;
namespace fs = std::filesystem;

TEST_CASE("defaults carry the reference settings") {
    const RunConfig c;
    CHECK(c.metric_floor == 0.03);
    CHECK(c.model.k == 50);
    CHECK(c.model.train.epochs == 100);
    CHECK(c.model.train.batch_size == 5);
    CHECK(c.model.train.lr == 0.0004);
    CHECK(c.model.head_dim == 128);
    CHECK(c.split.train == 0.8);
    CHECK(c.split.val == 0.1);
    CHECK(c.split.test == 0.1);
    CHECK(c.generator.n_shots == 100);
    CHECK(c.generator.steps == 400);
    CHECK(c.model.patch.patch_size == 32);
    CHECK(c.model.patch.stride == 32);
    CHECK(c.model.kind == ReservoirKind::llm);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("empty config text gives the defaults") {
    CHECK(format_run_config(parse_run_config("")) == format_run_config(RunConfig{}));
}

TEST_CASE("format and parse round trip") {
    RunConfig c;
    c.model.kind = ReservoirKind::esn;
    c.model.esn.ridge = 0.0;
    c.model.train.lr = 1.0 / 3.0;
    c.model.seed = 18446744073709551615ull;
    c.train_limit = 7;
    c.endpoint = "http://127.0.0.1:9000";
    c.client.deadline = std::chrono::milliseconds(1234);
    c.mock.hidden_dim = 32;
    c.model.use_sdc = false;
    const std::string text = format_run_config(c);
    const RunConfig back = parse_run_config(text);
    CHECK(format_run_config(back) == text);
    CHECK(back.model.train.lr == 1.0 / 3.0);
    CHECK(back.model.seed == 18446744073709551615ull);
    CHECK(back.client.deadline.count() == 1234);
    CHECK_FALSE(back.model.use_sdc);
}

TEST_CASE("overrides apply per key") {
    const RunConfig c = parse_run_config(
        "[reservoir]\nkind = ngrc\nk = 12\n"
        "# comment\n; another\n"
        "[train]\nepochs = 3\nlr = 1e-3\n"
        "[metrics]\nfloor = 0.1\n");
    CHECK(c.model.kind == ReservoirKind::ngrc);
    CHECK(c.model.k == 12);
    CHECK(c.model.train.epochs == 3);
    CHECK(c.model.train.lr == 1e-3);
    CHECK(c.metric_floor == 0.1);
    CHECK(c.model.train.batch_size == 5);
}

TEST_CASE("invalid configs are rejected") {
    CHECK_THROWS_AS(parse_run_config("[train]\nepoch = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[trian]\nepochs = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("epochs = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[train]\nepochs = three\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[train]\nepochs = 3x\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[train]\nepochs = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[sdc]\nenabled = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[data]\nsplit_train = 0.9\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[data]\ntrain_limit = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[generator]\nn_shots = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[generator]\nsteps = 200\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[reservoir]\nkind = gru\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[sdc]\nstride = 16\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[service]\ndeadline_ms = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[metrics]\nfloor = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[train\nepochs = 3\n"), ConfigError);

    try {
        parse_run_config("[train]\nepoch = 3\n");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("train.epoch") != std::string::npos);
    }
}

TEST_CASE("relative paths resolve against the config directory") {
    const fs::path dir = fs::temp_directory_path() / "lpi_test_config";
    fs::create_directories(dir);
    std::ofstream(dir / "run.ini") << "[data]\nshots = shots.jsonl\n[prompt]\ntemplate_dir = /abs/prompts\n";
    const RunConfig c = load_run_config(dir / "run.ini");
    CHECK(c.shots_path == dir / "shots.jsonl");
    CHECK(c.template_dir == "/abs/prompts");
    CHECK_THROWS_AS(load_run_config(dir / "missing.ini"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("shipped default config matches the built-in defaults") {
    const fs::path root = LPI_SOURCE_DIR;
    RunConfig c = load_run_config(root / "configs/default.ini");
    CHECK(c.shots_path.lexically_normal() == (root / "data/shots.jsonl").lexically_normal());
    resolve_resources(c);
    CHECK(c.model.terms == sdc::default_terms());
    CHECK(c.model.descriptors == default_descriptors());

    RunConfig plain = c;
    plain.shots_path = RunConfig{}.shots_path;
    plain.terms_file.clear();
    plain.template_dir.clear();
    CHECK(format_run_config(plain) == format_run_config(RunConfig{}));
}
