// Records the protocol conformance corpus by replaying a fixed set of
// requests against a freshly started mock server.
//
//   record_fixtures <output-dir>

#include "lpi/service.hpp"

#include <httplib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

using lpi::wire::json;

namespace {

json vectors(int rows, int cols, double phase) {
    json out = json::array();
    for (int r = 0; r < rows; ++r) {
        json row = json::array();
        for (int c = 0; c < cols; ++c) row.push_back(0.5 * std::sin(0.37 * r + 0.11 * c + phase));
        out.push_back(row);
    }
    return out;
}

std::string words(int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string("token");
    return s;
}

struct Case {
    std::string name;
    std::string method;
    std::string path;
    json body;          // null for GET
    std::string raw;    // used instead of body when non-empty
};

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: record_fixtures <output-dir>\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);

    lpi::MockServer server;
    const int port = server.start();
    const int d = lpi::MockConfig{}.hidden_dim;
    const std::string prompt =
        "<|begin_of_text|><|start_header_id|>input<|end_header_id|>\n\nminimum 0.1, maximum 1.5<|eot_id|>";

    const std::vector<Case> cases = {
        {"info", "GET", "/v1/info", nullptr, ""},
        {"reservoir_basic", "POST", "/v1/reservoir",
         {{"protocol_version", 1}, {"prompt_text", prompt}, {"input_vectors", vectors(13, d, 0.0)}, {"return_last_k", 50}},
         ""},
        {"reservoir_k_capped", "POST", "/v1/reservoir",
         {{"protocol_version", 1}, {"prompt_text", words(40)}, {"input_vectors", vectors(13, d, 1.0)}, {"return_last_k", 60}},
         ""},
        {"reservoir_prompt_only", "POST", "/v1/reservoir",
         {{"prompt_text", prompt}, {"input_vectors", json::array()}, {"return_last_k", 5}},
         ""},
        {"reservoir_wrong_width", "POST", "/v1/reservoir",
         {{"protocol_version", 1}, {"prompt_text", prompt}, {"input_vectors", vectors(2, 3, 0.0)}, {"return_last_k", 5}},
         ""},
        {"reservoir_capacity", "POST", "/v1/reservoir",
         {{"protocol_version", 1}, {"prompt_text", words(2100)}, {"input_vectors", json::array()}, {"return_last_k", 5}},
         ""},
        {"reservoir_no_positions", "POST", "/v1/reservoir",
         {{"protocol_version", 1}, {"prompt_text", ""}, {"input_vectors", json::array()}, {"return_last_k", 5}},
         ""},
        {"reservoir_zero_k", "POST", "/v1/reservoir",
         {{"protocol_version", 1}, {"prompt_text", prompt}, {"input_vectors", json::array()}, {"return_last_k", 0}},
         ""},
        {"reservoir_version", "POST", "/v1/reservoir",
         {{"protocol_version", 99}, {"prompt_text", prompt}, {"input_vectors", json::array()}, {"return_last_k", 5}},
         ""},
        {"reservoir_malformed", "POST", "/v1/reservoir", nullptr, "{\"prompt_text\": "},
        {"embed_terms", "POST", "/v1/embed_terms",
         {{"protocol_version", 1}, {"terms", {"pulse", "peak", "trailing"}}}, ""},
        {"embed_terms_multi_token", "POST", "/v1/embed_terms",
         {{"protocol_version", 1}, {"terms", {"main drive peak"}}}, ""},
        {"embed_terms_empty_term", "POST", "/v1/embed_terms", {{"protocol_version", 1}, {"terms", {""}}}, ""},
    };

    httplib::Client cli("127.0.0.1", port);
    for (const Case& c : cases) {
        const std::string body = !c.raw.empty() ? c.raw : (c.body.is_null() ? "" : lpi::wire::dump(c.body));
        auto res = c.method == "GET" ? cli.Get(c.path) : cli.Post(c.path, body, "application/json");
        if (!res) {
            std::cerr << c.name << ": transport failure\n";
            return 3;
        }
        json fixture = {{"name", c.name}, {"method", c.method}, {"path", c.path}, {"request_body", body},
                        {"status", res->status}, {"response", json::parse(res->body)}};
        std::ofstream out(dir / (c.name + ".json"));
        out << lpi::wire::dump(fixture) << '\n';
        std::cout << c.name << " -> " << res->status << '\n';
    }
    server.stop();
    return 0;
}
