#include "lpi/checkpoint.hpp"
#include "lpi/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace lpi;
namespace fs = std::filesystem;

namespace {

std::vector<Shot> make_shots(int n) {
    GeneratorConfig g;
    g.n_shots = n;
    auto set = normalize(synth_shots(g)).set;
    return set.shots;
}

ModelConfig small_llm() {
    ModelConfig m;
    m.train.epochs = 2;
    m.seed = 5;
    return m;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("reservoir kind names") {
    for (const auto k : {ReservoirKind::esn, ReservoirKind::ngrc, ReservoirKind::llm}) {
        CHECK(parse_reservoir_kind(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_reservoir_kind("lstm"), ConfigError);
    CHECK(parse_baseline("truth") == Baseline::truth);
    CHECK(parse_baseline("train-mean") == Baseline::train_mean);
    CHECK(parse_baseline("copy-laser") == Baseline::copy_laser);
    CHECK_THROWS_AS(parse_baseline("zero"), ArgumentError);
}

TEST_CASE("model config validation") {
    ModelConfig m;
    CHECK_NOTHROW(m.validate());
    m.patch.stride = 16;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m.kind = ReservoirKind::esn;
    CHECK_NOTHROW(m.validate());
    m = ModelConfig{};
    m.terms.clear();
    CHECK_THROWS_AS(m.validate(), ConfigError);
    CHECK_THROWS_AS(make_forecaster(ModelConfig{}, nullptr), ConfigError);
}

TEST_CASE("baselines") {
    const auto shots = make_shots(6);
    const std::vector<Shot> train(shots.begin(), shots.begin() + 4), test(shots.begin() + 4, shots.end());

    const auto truth = baseline_predictions(Baseline::truth, train, test);
    CHECK(truth[0] == test[0].hxr);

    const auto mean = train_mean_profile(train);
    REQUIRE(mean.size() == 400);
    for (std::size_t t : {0u, 200u, 399u}) {
        double s = 0;
        for (const auto& shot : train) s += shot.hxr[t];
        CHECK(mean[t] == doctest::Approx(s / 4).epsilon(1e-12));
    }
    CHECK(baseline_predictions(Baseline::train_mean, train, test)[1] == mean);

    std::vector<Shot> affine = train;
    for (auto& s : affine) {
        for (std::size_t t = 0; t < s.hxr.size(); ++t) s.hxr[t] = 2.5 * s.laser[t] - 0.25;
    }
    const CopyLaser fit = CopyLaser::fit(affine);
    CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(fit.intercept == doctest::Approx(-0.25).epsilon(1e-10));
    CHECK_THROWS_AS(CopyLaser::fit({}), ArgumentError);
    CHECK_THROWS_AS(train_mean_profile({}), ArgumentError);
}

TEST_CASE("llm forecaster shapes and prompt") {
    MockReservoir mock;
    LlmForecaster f(small_llm(), mock);
    const auto shots = make_shots(3);
    const Matrix w = f.windows(shots[0]);
    CHECK(w.rows() == 13);
    CHECK(w.cols() == f.head_config().conv_fan_in());
    CHECK(f.head_config().in_width == 33);
    CHECK(f.head_config().hidden_dim == mock.info().hidden_dim);
    const FusionPrompt p = f.prompt(shots[0]);
    CHECK(p.text.find("phase plate " + shots[0].phase_plate) != std::string::npos);
    const ReservoirOutput out = f.reservoir_output(shots[0]);
    CHECK(out.k() == 50);
    CHECK(f.predict(shots[0]).size() == 400);

    Shot short_shot = shots[0];
    short_shot.laser.resize(100);
    CHECK_THROWS_AS(f.windows(short_shot), ArgumentError);
}

TEST_CASE("llm forecaster trains deterministically and restores from tensors") {
    const auto shots = make_shots(8);
    const std::vector<Shot> train(shots.begin(), shots.begin() + 6), val(shots.begin() + 6, shots.end());
    MockReservoir mock;
    LlmForecaster a(small_llm(), mock), b(small_llm(), mock);
    const FitReport ra = a.fit(train, val);
    const FitReport rb = b.fit(train, val);
    CHECK(ra.trace.train_loss == rb.trace.train_loss);
    CHECK(ra.trace.train_loss.size() == 2);
    CHECK(std::isfinite(ra.train_loss));
    CHECK(a.predict(val[0]) == b.predict(val[0]));

    const TensorMap t = a.tensors();
    for (const char* name : {"conv.w", "conv.b", "bn.gamma", "bn.beta", "bn.running_mean", "bn.running_var", "post.w1",
                             "post.b1", "post.w2", "post.b2", "sdc.temporal.out_w", "sdc.temporal.out_b",
                             "sdc.spatial.key_w", "sdc.spatial.value_w", "sdc.terms"}) {
        CHECK_MESSAGE(t.count(name) == 1, name);
    }

    ModelConfig other = small_llm();
    other.seed = 99;
    LlmForecaster c(other, mock);
    CHECK(c.predict(val[0]) != a.predict(val[0]));
    c.load(t);
    CHECK(c.predict(val[0]) == a.predict(val[0]));

    const auto scan = a.scan(val[0]);
    REQUIRE(scan.has_value());
    CHECK(scan->scores.size() == 400);

    TensorMap broken = t;
    broken.erase("post.w2");
    CHECK_THROWS_AS(c.load(broken), SchemaError);
    broken = t;
    broken["post.w1"] = Matrix::Zero(3, 3);
    CHECK_THROWS_AS(c.load(broken), SchemaError);
}

TEST_CASE("classical forecasters restore from tensors") {
    const auto shots = make_shots(4);
    const std::vector<Shot> train(shots.begin(), shots.begin() + 3);
    for (const auto kind : {ReservoirKind::esn, ReservoirKind::ngrc}) {
        ModelConfig m;
        m.kind = kind;
        auto f = make_forecaster(m, nullptr);
        CHECK_THROWS_AS(f->predict(shots[3]), StateError);
        f->fit(train, {});
        auto g = make_forecaster(m, nullptr);
        g->load(f->tensors());
        CHECK(g->predict(shots[3]) == f->predict(shots[3]));
        CHECK_FALSE(f->scan(shots[3]).has_value());
    }
}

TEST_CASE("checkpoint round trip is lossless") {
    const fs::path dir = temp_dir("lpi_test_ckpt");
    Checkpoint c;
    c.config_text = "[train]\nepochs = 3\n";
    c.terms = {"pulse", "two words"};
    c.descriptors = {"ctx \"quoted\"", "task\n", "{min}"};
    c.normalization.laser = {2.0, 0.1};
    c.normalization.hxr = {1.0 / 3.0, -1e-300};
    Matrix m(2, 3);
    m << 1.0 / 7.0, -0.0, 1e-310, 3.0, -2.5e12, 0.1;
    c.tensors["a"] = m;
    c.tensors["empty"] = Matrix(0, 4);
    save_checkpoint(c, dir / "c.json");
    const Checkpoint back = load_checkpoint(dir / "c.json");
    CHECK(back.config_text == c.config_text);
    CHECK(back.terms == c.terms);
    CHECK(back.descriptors == c.descriptors);
    CHECK(back.normalization == c.normalization);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors.at("a") == m);
    CHECK(back.tensors.at("empty").cols() == 4);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint load errors") {
    const fs::path dir = temp_dir("lpi_test_ckpt_err");
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), ArgumentError);
    std::ofstream(dir / "bad.json") << "{not json";
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), ParseError);
    std::ofstream(dir / "other.json") << R"({"format":"something","version":1})";
    CHECK_THROWS_AS(load_checkpoint(dir / "other.json"), SchemaError);

    Checkpoint c;
    c.tensors["a"] = Matrix::Ones(2, 2);
    save_checkpoint(c, dir / "ok.json");
    std::ifstream in(dir / "ok.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto replace = [&](const std::string& from, const std::string& to) {
        std::string s = text;
        const auto pos = s.find(from);
        REQUIRE(pos != std::string::npos);
        s.replace(pos, from.size(), to);
        return s;
    };
    std::ofstream(dir / "v2.json") << replace("\"version\":1", "\"version\":2");
    CHECK_THROWS_AS(load_checkpoint(dir / "v2.json"), SchemaError);
    std::ofstream(dir / "shape.json") << replace("[2,2]", "[2,3]");
    CHECK_THROWS_AS(load_checkpoint(dir / "shape.json"), SchemaError);
    fs::remove_all(dir);
}
