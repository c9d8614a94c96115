#pragma once

#include "lpi/wire.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lpi::conformance {

// A recorded request/response pair.
struct Fixture {
    std::string name;
    std::string method;
    std::string path;
    std::string request_body;
    int status = 0;
    wire::json response;
};

enum class Mode {
    exact,       // status and body must match the recording
    structural,  // status, error kind, schema, shapes and entropy bounds
};

struct Outcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

std::vector<Fixture> load_corpus(const std::filesystem::path& dir);

// Checks one live response against a fixture. `vocab_size` bounds the
// entropies in structural mode.
Outcome check(const Fixture& fixture, int status, const std::string& body, Mode mode, int vocab_size);

// Replays every fixture against `endpoint` (http://host:port).
std::vector<Outcome> run_corpus(const std::vector<Fixture>& corpus, const std::string& endpoint, Mode mode);

}  // namespace lpi::conformance
