#include "lpi/service.hpp"

#include "lpi/nn.hpp"

#include <httplib.h>

#include <Eigen/Eigenvalues>

#include <cctype>
#include <cmath>
#include <random>

namespace lpi {

// ---------------------------------------------------------------------------
// Protocol

namespace protocol {

namespace {

const json& member(const json& j, const char* name) {
    if (!j.is_object()) throw ParseError("protocol: body is not an object");
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("protocol: missing field '") + name + "'");
    return *it;
}

int int_member(const json& j, const char* name) {
    const json& v = member(j, name);
    if (!v.is_number_integer()) throw ParseError(std::string("protocol: field '") + name + "' must be an integer");
    return v.get<int>();
}

std::string string_member(const json& j, const char* name) {
    const json& v = member(j, name);
    if (!v.is_string()) throw ParseError(std::string("protocol: field '") + name + "' must be a string");
    return v.get<std::string>();
}

json encode_vector(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vector decode_vector(const json& j, const char* name) {
    if (!j.is_array()) throw ParseError(std::string("protocol: field '") + name + "' must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ParseError(std::string("protocol: field '") + name + "' has a non-number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

}  // namespace

json encode(const ServerInfo& info) {
    return {{"model_id", info.model_id},
            {"hidden_dim", info.hidden_dim},
            {"vocab_size", info.vocab_size},
            {"max_positions", info.max_positions},
            {"protocol_version", info.protocol_version}};
}

ServerInfo decode_info(const json& j) {
    ServerInfo info;
    info.model_id = string_member(j, "model_id");
    info.hidden_dim = int_member(j, "hidden_dim");
    info.vocab_size = int_member(j, "vocab_size");
    info.max_positions = int_member(j, "max_positions");
    info.protocol_version = int_member(j, "protocol_version");
    if (info.hidden_dim < 1 || info.vocab_size < 2 || info.max_positions < 1) {
        throw ParseError("protocol: server info out of range");
    }
    return info;
}

json encode_vectors(const Matrix& vectors) {
    json a = json::array();
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) a.push_back(encode_vector(vectors.row(r).transpose()));
    return a;
}

Matrix decode_vectors(const json& j) {
    if (!j.is_array()) throw ParseError("protocol: vector list must be an array");
    if (j.empty()) return Matrix(0, 0);
    Matrix m;
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Vector v = decode_vector(j[r], "vectors");
        if (r == 0) m.resize(static_cast<Eigen::Index>(j.size()), v.size());
        if (v.size() != m.cols()) throw ArgumentError("protocol: vectors have inconsistent widths");
        m.row(static_cast<Eigen::Index>(r)) = v.transpose();
    }
    return m;
}

json encode(const ReservoirRequest& request) {
    return {{"protocol_version", kProtocolVersion},
            {"prompt_text", request.prompt_text},
            {"input_vectors", encode_vectors(request.input_vectors)},
            {"return_last_k", request.return_last_k}};
}

ReservoirRequest decode_reservoir_request(const json& j) {
    ReservoirRequest r;
    r.prompt_text = string_member(j, "prompt_text");
    r.input_vectors = decode_vectors(member(j, "input_vectors"));
    r.return_last_k = int_member(j, "return_last_k");
    return r;
}

json encode(const ReservoirOutput& output) {
    return {{"states", encode_vectors(output.states)},
            {"entropies", encode_vector(output.entropies)},
            {"positions", output.positions}};
}

ReservoirOutput decode_reservoir_output(const json& j) {
    ReservoirOutput out;
    out.states = decode_vectors(member(j, "states"));
    out.entropies = decode_vector(member(j, "entropies"), "entropies");
    out.positions = int_member(j, "positions");
    if (out.states.rows() != out.entropies.size()) {
        throw ParseError("protocol: states and entropies differ in length");
    }
    return out;
}

json encode_terms_request(const std::vector<std::string>& terms) {
    return {{"protocol_version", kProtocolVersion}, {"terms", terms}};
}

std::vector<std::string> decode_terms_request(const json& j) {
    const json& t = member(j, "terms");
    if (!t.is_array()) throw ParseError("protocol: 'terms' must be an array");
    std::vector<std::string> terms;
    for (const auto& e : t) {
        if (!e.is_string()) throw ParseError("protocol: 'terms' must hold strings");
        terms.push_back(e.get<std::string>());
    }
    return terms;
}

json encode_error(const std::string& kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

int status_for_kind(const std::string& kind) {
    if (kind == "argument") return 400;
    if (kind == "capacity") return 413;
    if (kind == "version") return 426;
    return 500;
}

void raise_error(int status, const std::string& body) {
    std::string message = body;
    try {
        const json j = json::parse(body);
        message = j.at("error").at("message").get<std::string>();
    } catch (const std::exception&) {
    }
    const std::string what = "service returned " + std::to_string(status) + ": " + message;
    switch (status) {
        case 400: throw ArgumentError(what);
        case 413: throw CapacityError(what);
        case 426: throw CompatibilityError(what);
        default: throw ServerError(what);
    }
}

void check_request_version(const json& j) {
    if (j.is_object() && j.contains("protocol_version")) {
        const json& v = j["protocol_version"];
        if (!v.is_number_integer() || v.get<int>() != kProtocolVersion) {
            throw CompatibilityError("unsupported protocol_version");
        }
    }
}

}  // namespace protocol

// ---------------------------------------------------------------------------
// Mock reservoir

std::vector<std::string> mock_tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (text.compare(i, 2, "<|") == 0) {
            const std::size_t end = text.find("|>", i + 2);
            const std::size_t stop = end == std::string::npos ? n : end + 2;
            tokens.push_back(text.substr(i, stop - i));
            i = stop;
        } else if (std::isalpha(c) || c == '_') {
            std::size_t j = i;
            while (j < n && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
            tokens.push_back(text.substr(i, j - i));
            i = j;
        } else {
            tokens.emplace_back(1, text[i]);
            ++i;
        }
    }
    return tokens;
}

MockReservoir::MockReservoir(MockConfig config) : config_(std::move(config)) {
    if (config_.hidden_dim < 1 || config_.vocab_size < 2 || config_.max_positions < 1) {
        throw ConfigError("mock: invalid dimensions");
    }
    if (!(config_.spectral_radius > 0.0 && config_.spectral_radius < 1.0)) {
        throw ConfigError("mock: spectral_radius must lie in (0,1)");
    }
    const Eigen::Index d = config_.hidden_dim;
    std::mt19937_64 rng(mix64(config_.seed));
    w_ = nn::uniform(d, d, 1.0, rng);
    const double rho = Eigen::EigenSolver<Matrix>(w_, false).eigenvalues().cwiseAbs().maxCoeff();
    w_ *= config_.spectral_radius / rho;
    u_ = nn::uniform(d, d, config_.input_scale / std::sqrt(static_cast<double>(d)), rng);
    b_ = nn::uniform(d, 1, 0.1, rng);
    std::uniform_real_distribution<double> gain(2.0, 4.0), shift(0.5, 1.5);
    entropy_gain_ = gain(rng);
    entropy_shift_ = shift(rng);
}

ServerInfo MockReservoir::info() {
    return {config_.model_id, config_.hidden_dim, config_.vocab_size, config_.max_positions,
            config_.protocol_version};
}

Vector MockReservoir::token_embedding(const std::string& token) const {
    std::uint64_t h = mix64(config_.seed ^ fnv1a(token));
    Vector v(config_.hidden_dim);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        h = mix64(h);
        // 53 random bits mapped onto [-1, 1).
        v(i) = static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
    }
    return v;
}

double MockReservoir::entropy_of(const Vector& state) const {
    const double norm = state.norm() / std::sqrt(static_cast<double>(state.size()));
    const double z = entropy_gain_ * norm - entropy_shift_;
    return std::log(static_cast<double>(config_.vocab_size)) / (1.0 + std::exp(-z));
}

ReservoirOutput MockReservoir::run(const ReservoirRequest& request) {
    if (request.return_last_k < 1) throw ArgumentError("return_last_k must be positive");
    const Eigen::Index d = config_.hidden_dim;
    if (request.input_vectors.rows() > 0 && request.input_vectors.cols() != d) {
        throw ArgumentError("input vectors must have width " + std::to_string(d));
    }
    if (!request.input_vectors.allFinite()) throw ArgumentError("input vectors must be finite");
    const std::vector<std::string> tokens = mock_tokenize(request.prompt_text);
    const auto positions = static_cast<long>(tokens.size()) + request.input_vectors.rows();
    if (positions == 0) throw ArgumentError("request has no positions");
    if (positions > config_.max_positions) {
        throw CapacityError("request needs " + std::to_string(positions) + " positions, limit is " +
                            std::to_string(config_.max_positions));
    }

    const long k = std::min<long>(request.return_last_k, positions);
    ReservoirOutput out;
    out.positions = static_cast<int>(positions);
    out.states.resize(k, d);
    out.entropies.resize(k);

    Vector s = Vector::Zero(d);
    for (long p = 0; p < positions; ++p) {
        const long ti = static_cast<long>(tokens.size());
        const Vector x = p < ti ? token_embedding(tokens[static_cast<std::size_t>(p)])
                                : Vector(request.input_vectors.row(p - ti).transpose());
        s = (w_ * s + u_ * x + b_).array().tanh().matrix();
        const long slot = p - (positions - k);
        if (slot >= 0) {
            out.states.row(slot) = s.transpose();
            out.entropies(slot) = entropy_of(s);
        }
    }
    return out;
}

Matrix MockReservoir::embed_terms(const std::vector<std::string>& terms) {
    if (terms.empty()) throw ArgumentError("terms must not be empty");
    Matrix out(static_cast<Eigen::Index>(terms.size()), config_.hidden_dim);
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto tokens = mock_tokenize(terms[i]);
        if (tokens.empty()) throw ArgumentError("term " + std::to_string(i) + " is empty");
        Vector acc = Vector::Zero(config_.hidden_dim);
        for (const auto& t : tokens) acc += token_embedding(t);
        out.row(static_cast<Eigen::Index>(i)) = (acc / static_cast<double>(tokens.size())).transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP server

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kRequestId = "X-Request-Id";

void send_error(httplib::Response& res, const std::string& kind, const std::string& message) {
    res.status = protocol::status_for_kind(kind);
    res.set_content(wire::dump(protocol::encode_error(kind, message)), kJson);
}

template <typename Fn>
void guarded(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    if (req.has_header(kRequestId)) res.set_header(kRequestId, req.get_header_value(kRequestId));
    try {
        fn();
    } catch (const ParseError& e) {
        send_error(res, "argument", e.what());
    } catch (const wire::json::exception& e) {
        send_error(res, "argument", e.what());
    } catch (const ArgumentError& e) {
        send_error(res, "argument", e.what());
    } catch (const CapacityError& e) {
        send_error(res, "capacity", e.what());
    } catch (const CompatibilityError& e) {
        send_error(res, "version", e.what());
    } catch (const std::exception& e) {
        send_error(res, "server", e.what());
    }
}

}  // namespace

MockServer::MockServer(MockConfig config)
    : model_(std::make_shared<MockReservoir>(std::move(config))), server_(std::make_unique<httplib::Server>()) {
    // No SO_REUSEPORT: a second server on the same port must fail to bind.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    auto model = model_;
    const int delay = model_->config().response_delay_ms;
    auto pause = [delay] {
        if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    };

    server_->Get("/v1/info", [this, model, pause](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [&] {
            pause();
            res.set_content(wire::dump(protocol::encode(model->info())), kJson);
        });
        ++served_;
    });
    server_->Post("/v1/reservoir", [this, model, pause](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [&] {
            pause();
            const auto body = wire::json::parse(req.body);
            protocol::check_request_version(body);
            const auto request = protocol::decode_reservoir_request(body);
            res.set_content(wire::dump(protocol::encode(model->run(request))), kJson);
        });
        ++served_;
    });
    server_->Post("/v1/embed_terms", [this, model, pause](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [&] {
            pause();
            const auto body = wire::json::parse(req.body);
            protocol::check_request_version(body);
            const auto terms = protocol::decode_terms_request(body);
            const wire::json out = {{"vectors", protocol::encode_vectors(model->embed_terms(terms))}};
            res.set_content(wire::dump(out), kJson);
        });
        ++served_;
    });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
    if (running_) throw StartupError("mock server already running");
    host_ = host;
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ <= 0) throw StartupError("mock server: cannot bind " + host);
    } else {
        if (!server_->bind_to_port(host, port)) {
            throw StartupError("mock server: port " + std::to_string(port) + " is busy");
        }
        port_ = port;
    }
    running_ = true;
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void MockServer::stop() {
    if (!running_) return;
    server_->stop();
    if (thread_.joinable()) thread_.join();
    running_ = false;
}

std::string MockServer::endpoint() const { return "http://" + host_ + ":" + std::to_string(port_); }

// ---------------------------------------------------------------------------
// HTTP client

HttpReservoirClient::HttpReservoirClient(std::string endpoint, ClientOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
    if (endpoint_.rfind("http://", 0) != 0) {
        throw ConfigError("endpoint must start with http:// (got '" + endpoint_ + "')");
    }
}

std::string HttpReservoirClient::call(const std::string& method, const std::string& path, const std::string& body) {
    const std::string id = std::to_string(next_id_.fetch_add(1)) + "-" + std::to_string(fnv1a(body) & 0xffffff);
    const auto deadline = options_.deadline;
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(deadline);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(deadline - secs);

    int attempt = 0;
    for (;;) {
        // A fresh connection per call keeps the client safe to share across threads.
        httplib::Client cli(endpoint_);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());
        const httplib::Headers headers{{kRequestId, id}};

        const auto started = std::chrono::steady_clock::now();
        httplib::Result res = method == "GET" ? cli.Get(path, headers) : cli.Post(path, headers, body, kJson);
        const auto elapsed = std::chrono::steady_clock::now() - started;

        if (!res) {
            const auto err = res.error();
            if ((err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout ||
                 err == httplib::Error::Write) &&
                elapsed >= deadline * 9 / 10) {
                throw DeadlineError(method + " " + path + ": deadline of " + std::to_string(deadline.count()) +
                                    " ms expired");
            }
            if (attempt < options_.retries) {
                ++attempt;
                std::this_thread::sleep_for(std::chrono::milliseconds(20 * attempt));
                continue;
            }
            throw TransportError(method + " " + endpoint_ + path + " failed: " + httplib::to_string(err) +
                                     " (after " + std::to_string(attempt) + " retries)",
                                 attempt);
        }
        if (res->has_header(kRequestId) && res->get_header_value(kRequestId) != id) {
            throw TransportError("response correlation id mismatch", attempt);
        }
        if (res->status != 200) protocol::raise_error(res->status, res->body);
        return res->body;
    }
}

namespace {

wire::json parse_body(const std::string& body) {
    try {
        return wire::json::parse(body);
    } catch (const wire::json::parse_error& e) {
        throw ParseError(std::string("malformed response body: ") + e.what());
    }
}

}  // namespace

ServerInfo HttpReservoirClient::info() {
    const ServerInfo info = protocol::decode_info(parse_body(call("GET", "/v1/info", "")));
    if (info.protocol_version != kProtocolVersion) {
        throw CompatibilityError("server speaks protocol " + std::to_string(info.protocol_version) +
                                 ", client speaks " + std::to_string(kProtocolVersion));
    }
    return info;
}

ReservoirOutput HttpReservoirClient::run(const ReservoirRequest& request) {
    if (request.return_last_k < 1) throw ArgumentError("return_last_k must be positive");
    if (!request.input_vectors.allFinite()) throw ArgumentError("input vectors must be finite");
    return protocol::decode_reservoir_output(
        parse_body(call("POST", "/v1/reservoir", wire::dump(protocol::encode(request)))));
}

Matrix HttpReservoirClient::embed_terms(const std::vector<std::string>& terms) {
    if (terms.empty()) throw ArgumentError("terms must not be empty");
    for (const auto& t : terms) {
        if (t.empty()) throw ArgumentError("terms must not be empty strings");
    }
    const auto body = parse_body(call("POST", "/v1/embed_terms", wire::dump(protocol::encode_terms_request(terms))));
    if (!body.contains("vectors")) throw ParseError("embed_terms response lacks 'vectors'");
    Matrix out = protocol::decode_vectors(body["vectors"]);
    if (static_cast<std::size_t>(out.rows()) != terms.size()) throw ParseError("embed_terms returned wrong count");
    return out;
}

std::unique_ptr<ReservoirService> connect_service(const std::string& endpoint, const ClientOptions& options,
                                                  const MockConfig& mock) {
    if (endpoint.empty() || endpoint == "inproc" || endpoint == "mock") {
        return std::make_unique<MockReservoir>(mock);
    }
    return std::make_unique<HttpReservoirClient>(endpoint, options);
}

}  // namespace lpi
