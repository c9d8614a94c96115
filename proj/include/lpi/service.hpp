#pragma once

#include "lpi/common.hpp"
#include "lpi/wire.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace lpi {

inline constexpr int kProtocolVersion = 1;

struct ServerInfo {
    std::string model_id;
    int hidden_dim = 0;
    int vocab_size = 0;
    int max_positions = 0;
    int protocol_version = kProtocolVersion;
    bool operator==(const ServerInfo&) const = default;
};

// One reservoir pass: prompt tokens first, then the client's input vectors.
struct ReservoirRequest {
    std::string prompt_text;
    Matrix input_vectors;  // one row per vector, hidden_dim columns
    int return_last_k = 50;
};

// States and next-token entropies (nats) of the last positions, oldest first.
struct ReservoirOutput {
    Matrix states;
    Vector entropies;
    int positions = 0;  // total positions the service processed

    int k() const noexcept { return static_cast<int>(states.rows()); }
};

struct StartupError : Error { using Error::Error; };

// Message encoding shared by client, mock and fixtures.
namespace protocol {

using wire::json;

json encode(const ServerInfo& info);
ServerInfo decode_info(const json& j);

json encode(const ReservoirRequest& request);
ReservoirRequest decode_reservoir_request(const json& j);

json encode(const ReservoirOutput& output);
ReservoirOutput decode_reservoir_output(const json& j);

json encode_terms_request(const std::vector<std::string>& terms);
std::vector<std::string> decode_terms_request(const json& j);

json encode_vectors(const Matrix& vectors);
Matrix decode_vectors(const json& j);

// Error bodies: {"error":{"kind":...,"message":...}}.
json encode_error(const std::string& kind, const std::string& message);
int status_for_kind(const std::string& kind);
// Throws the exception that corresponds to an error response.
[[noreturn]] void raise_error(int status, const std::string& body);

// Checks the protocol_version carried by a request body, if present.
void check_request_version(const json& j);

}  // namespace protocol

// The hidden-state service seen by the pipeline.
class ReservoirService {
public:
    virtual ~ReservoirService() = default;
    virtual ServerInfo info() = 0;
    virtual ReservoirOutput run(const ReservoirRequest& request) = 0;
    // One hidden_dim row per term.
    virtual Matrix embed_terms(const std::vector<std::string>& terms) = 0;
};

struct MockConfig {
    std::string model_id = "mock-esn";
    int hidden_dim = 256;
    int vocab_size = 256;
    int max_positions = 2048;
    std::uint64_t seed = 0x5eed;
    double spectral_radius = 0.9;
    double input_scale = 5.0;
    int protocol_version = kProtocolVersion;
    int response_delay_ms = 0;  // artificial latency, for lifecycle tests
};

// Deterministic echo-state stand-in for an LLM: tokens are hashed to seeded
// embeddings and driven through s' = tanh(W s + U x + b); entropies are a
// smooth function of the state norm mapped into [0, ln V].
class MockReservoir final : public ReservoirService {
public:
    explicit MockReservoir(MockConfig config = {});

    ServerInfo info() override;
    ReservoirOutput run(const ReservoirRequest& request) override;
    Matrix embed_terms(const std::vector<std::string>& terms) override;

    const MockConfig& config() const noexcept { return config_; }
    const Matrix& recurrent_weights() const noexcept { return w_; }

    Vector token_embedding(const std::string& token) const;
    double entropy_of(const Vector& state) const;

private:
    MockConfig config_;
    Matrix w_;
    Matrix u_;
    Vector b_;
    double entropy_gain_ = 0;
    double entropy_shift_ = 0;
};

// Splits text into the mock's tokens: <|special|> markers whole, alphabetic
// runs, and every digit or punctuation character on its own.
std::vector<std::string> mock_tokenize(const std::string& text);

// Serves a ReservoirService over HTTP on a background thread.
class MockServer {
public:
    explicit MockServer(MockConfig config = {});
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    // Binds (port 0 picks a free port) and starts serving; returns the port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    // Stops accepting connections and waits for in-flight requests.
    void stop();
    bool running() const noexcept { return running_; }
    std::string endpoint() const;
    std::size_t requests_served() const noexcept { return served_; }

private:
    std::shared_ptr<MockReservoir> model_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::atomic<std::size_t> served_{0};
};

struct ClientOptions {
    std::chrono::milliseconds deadline{30000};
    int retries = 2;  // extra attempts after a connection failure
};

class HttpReservoirClient final : public ReservoirService {
public:
    explicit HttpReservoirClient(std::string endpoint, ClientOptions options = {});

    ServerInfo info() override;
    ReservoirOutput run(const ReservoirRequest& request) override;
    Matrix embed_terms(const std::vector<std::string>& terms) override;

    const std::string& endpoint() const noexcept { return endpoint_; }

private:
    std::string call(const std::string& method, const std::string& path, const std::string& body);

    std::string endpoint_;
    ClientOptions options_;
    std::atomic<std::uint64_t> next_id_{1};
};

// "inproc" (or "mock") gives an in-process MockReservoir; anything else is
// treated as an http:// endpoint.
std::unique_ptr<ReservoirService> connect_service(const std::string& endpoint, const ClientOptions& options = {},
                                                  const MockConfig& mock = {});

}  // namespace lpi
