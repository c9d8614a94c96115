#include "lpi/conformance.hpp"

#include "lpi/common.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lpi::conformance {

using wire::json;

std::vector<Fixture> load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ArgumentError("fixture directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Fixture> corpus;
    for (const auto& path : files) {
        std::ifstream in(path);
        std::stringstream buf;
        buf << in.rdbuf();
        json j;
        try {
            j = json::parse(buf.str());
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
        Fixture f;
        f.name = j.at("name").get<std::string>();
        f.method = j.at("method").get<std::string>();
        f.path = j.at("path").get<std::string>();
        f.request_body = j.at("request_body").get<std::string>();
        f.status = j.at("status").get<int>();
        f.response = j.at("response");
        corpus.push_back(std::move(f));
    }
    if (corpus.empty()) throw ArgumentError("no fixtures in " + dir.string());
    return corpus;
}

namespace {

std::string error_kind(const json& body) {
    if (body.is_object() && body.contains("error") && body["error"].is_object() && body["error"].contains("kind") &&
        body["error"]["kind"].is_string()) {
        return body["error"]["kind"].get<std::string>();
    }
    return {};
}

// Returns an empty string when `body` is a well-formed success response for
// the fixture's endpoint.
std::string structural_problem(const Fixture& f, const json& body, int vocab_size) {
    if (!body.is_object()) return "body is not an object";
    if (f.path == "/v1/info") {
        for (const char* key : {"hidden_dim", "vocab_size", "max_positions", "protocol_version"}) {
            if (!body.contains(key) || !body[key].is_number_integer()) return std::string("bad field ") + key;
        }
        if (!body.contains("model_id") || !body["model_id"].is_string()) return "bad field model_id";
        if (body["hidden_dim"].get<int>() < 1 || body["vocab_size"].get<int>() < 2) return "dimensions out of range";
        return {};
    }
    if (f.path == "/v1/reservoir") {
        if (!body.contains("states") || !body["states"].is_array()) return "missing states";
        if (!body.contains("entropies") || !body["entropies"].is_array()) return "missing entropies";
        if (!body.contains("positions") || !body["positions"].is_number_integer()) return "missing positions";
        const auto& states = body["states"];
        const auto& entropies = body["entropies"];
        if (states.size() != entropies.size()) return "states/entropies length mismatch";
        const json request = json::parse(f.request_body);
        const auto k = request.at("return_last_k").get<std::size_t>();
        const auto positions = body["positions"].get<std::size_t>();
        if (states.size() != std::min(k, positions)) return "state count != min(k, positions)";
        std::size_t width = 0;
        for (const auto& row : states) {
            if (!row.is_array() || row.empty()) return "state row is not a non-empty array";
            if (width == 0) width = row.size();
            if (row.size() != width) return "ragged states";
            for (const auto& v : row) {
                if (!v.is_number() || !std::isfinite(v.get<double>())) return "non-finite state";
            }
        }
        const double bound = std::log(static_cast<double>(vocab_size));
        for (const auto& h : entropies) {
            if (!h.is_number()) return "non-numeric entropy";
            const double v = h.get<double>();
            if (!(v >= 0.0 && v <= bound + 1e-9)) return "entropy outside [0, ln V]";
        }
        return {};
    }
    if (f.path == "/v1/embed_terms") {
        if (!body.contains("vectors") || !body["vectors"].is_array()) return "missing vectors";
        const json request = json::parse(f.request_body);
        if (body["vectors"].size() != request.at("terms").size()) return "vector count != term count";
        return {};
    }
    return "unknown path";
}

}  // namespace

Outcome check(const Fixture& f, int status, const std::string& body, Mode mode, int vocab_size) {
    Outcome o{f.name, false, {}};
    if (status != f.status) {
        o.detail = "status " + std::to_string(status) + " != recorded " + std::to_string(f.status);
        return o;
    }
    json got;
    try {
        got = json::parse(body);
    } catch (const json::parse_error& e) {
        o.detail = std::string("unparseable body: ") + e.what();
        return o;
    }
    if (mode == Mode::exact) {
        if (got != f.response) {
            o.detail = "body differs from recording";
            return o;
        }
        o.passed = true;
        return o;
    }
    if (f.status != 200) {
        if (error_kind(got) != error_kind(f.response)) {
            o.detail = "error kind '" + error_kind(got) + "' != '" + error_kind(f.response) + "'";
            return o;
        }
        o.passed = true;
        return o;
    }
    o.detail = structural_problem(f, got, vocab_size);
    o.passed = o.detail.empty();
    return o;
}

std::vector<Outcome> run_corpus(const std::vector<Fixture>& corpus, const std::string& endpoint, Mode mode) {
    httplib::Client cli(endpoint);
    cli.set_read_timeout(60, 0);
    int vocab_size = 2;
    if (auto info = cli.Get("/v1/info"); info && info->status == 200) {
        try {
            vocab_size = json::parse(info->body).at("vocab_size").get<int>();
        } catch (const std::exception&) {
        }
    }
    std::vector<Outcome> outcomes;
    for (const Fixture& f : corpus) {
        auto res = f.method == "GET" ? cli.Get(f.path) : cli.Post(f.path, f.request_body, "application/json");
        if (!res) {
            outcomes.push_back({f.name, false, "transport: " + httplib::to_string(res.error())});
            continue;
        }
        outcomes.push_back(check(f, res->status, res->body, mode, vocab_size));
    }
    return outcomes;
}

}  // namespace lpi::conformance
