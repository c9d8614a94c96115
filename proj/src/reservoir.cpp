#include "lpi/reservoir.hpp"

#include "lpi/nn.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <random>

namespace lpi::reservoir {

void EsnConfig::validate() const {
    if (n_units <= 0) throw ConfigError("esn: n_units must be positive");
    if (!(spectral_radius > 0.0 && spectral_radius < 1.0)) throw ConfigError("esn: spectral_radius must be in (0,1)");
    if (!(leak > 0.0 && leak <= 1.0)) throw ConfigError("esn: leak must be in (0,1]");
    if (!(density > 0.0 && density <= 1.0)) throw ConfigError("esn: density must be in (0,1]");
    if (!(ridge >= 0.0)) throw ConfigError("esn: ridge must be non-negative");
    if (washout < 0) throw ConfigError("esn: washout must be non-negative");
}

void NgrcConfig::validate() const {
    if (taps <= 0) throw ConfigError("ngrc: taps must be positive");
    if (degree != 1 && degree != 2) throw ConfigError("ngrc: degree must be 1 or 2");
    if (!(ridge >= 0.0)) throw ConfigError("ngrc: ridge must be non-negative");
}

Vector esn_step(const Vector& s, const Vector& u, const Matrix& w, const Matrix& w_in, const Vector& b, double leak) {
    if (s.size() != w.rows() || u.size() != w_in.cols() || b.size() != w.rows()) {
        throw ConfigError("esn_step: dimension mismatch");
    }
    if (!u.allFinite()) throw NumericError("esn_step: non-finite input");
    const Vector pre = w * s + w_in * u + b;
    return (1.0 - leak) * s + leak * pre.array().tanh().matrix();
}

double spectral_radius(const Matrix& w) {
    Eigen::EigenSolver<Matrix> es(w, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Esn::Esn(const EsnConfig& cfg, int n_inputs) : cfg_(cfg) {
    cfg_.validate();
    if (n_inputs <= 0) throw ConfigError("esn: needs at least one input");
    const int n = cfg_.n_units;
    std::mt19937_64 rng(cfg_.seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    w = Matrix::Zero(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const bool keep = coin(rng) < cfg_.density;
            const double v = unit(rng);
            if (keep) w(r, c) = v;
        }
    }
    double rho = spectral_radius(w);
    if (rho == 0.0) {
        // Too sparse to have a cycle; fall back to a dense draw.
        w = nn::uniform(n, n, 1.0, rng);
        rho = spectral_radius(w);
    }
    w *= cfg_.spectral_radius / rho;
    w_in = nn::uniform(n, n_inputs, cfg_.input_scale, rng);
    b = nn::uniform(n, 1, 0.1 * cfg_.input_scale, rng);
}

Vector Esn::step(const Vector& s, const Vector& u) const { return esn_step(s, u, w, w_in, b, cfg_.leak); }

Matrix Esn::run(const Matrix& inputs, const Vector& s0) const {
    Matrix states(inputs.rows(), cfg_.n_units);
    Vector s = s0;
    for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
        s = step(s, inputs.row(t).transpose());
        states.row(t) = s.transpose();
    }
    return states;
}

int ngrc_feature_len(int taps, int channels, int degree) {
    const int lin = taps * channels;
    return 1 + lin + (degree == 2 ? lin * (lin + 1) / 2 : 0);
}

Vector ngrc_features(const Matrix& window, int taps, int degree) {
    if (window.rows() < taps) {
        throw ArgumentError("ngrc_features: window has " + std::to_string(window.rows()) + " rows, needs " +
                            std::to_string(taps));
    }
    if (degree != 1 && degree != 2) throw ConfigError("ngrc_features: degree must be 1 or 2");
    const int m = static_cast<int>(window.cols());
    const int lin = taps * m;
    Vector f(ngrc_feature_len(taps, m, degree));
    f(0) = 1.0;
    for (int lag = 0; lag < taps; ++lag) {
        for (int c = 0; c < m; ++c) f(1 + lag * m + c) = window(lag, c);
    }
    if (degree == 2) {
        int at = 1 + lin;
        for (int i = 0; i < lin; ++i) {
            for (int j = i; j < lin; ++j) f(at++) = f(1 + i) * f(1 + j);
        }
    }
    return f;
}

Matrix ridge_fit(const Matrix& s, const Matrix& y, double lambda) {
    if (s.rows() != y.rows()) throw ArgumentError("ridge_fit: state and target row counts differ");
    if (!(lambda >= 0.0)) throw ArgumentError("ridge_fit: lambda must be non-negative");
    if (s.rows() == 0) throw ArgumentError("ridge_fit: no samples");
    if (!s.allFinite() || !y.allFinite()) throw NumericError("ridge_fit: non-finite input");
    const Eigen::Index n = s.rows(), p = s.cols();
    const double root = std::sqrt(lambda);

    if (n >= p) {
        Matrix a(n + p, p);
        a << s, root * Matrix::Identity(p, p);
        Matrix rhs = Matrix::Zero(n + p, y.cols());
        rhs.topRows(n) = y;
        Eigen::ColPivHouseholderQR<Matrix> qr(a);
        if (lambda == 0.0 && qr.rank() < p) throw RankError("ridge_fit: singular system with lambda = 0");
        return qr.solve(rhs);
    }

    // Fewer samples than features: W = S^T alpha with (S S^T + lambda I) alpha = Y.
    // With [S^T; sqrt(lambda) I] P = Q R this is W = Q_top R^-T P^T Y.
    Matrix a(p + n, n);
    a << s.transpose(), root * Matrix::Identity(n, n);
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    if (lambda == 0.0 && qr.rank() < n) throw RankError("ridge_fit: singular system with lambda = 0");
    const auto r = qr.matrixR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
    Matrix z = qr.colsPermutation().transpose() * y;
    r.transpose().solveInPlace(z);
    const Matrix q = qr.householderQ() * Matrix::Identity(p + n, n);
    return q.topRows(p) * z;
}

ReservoirOutput llm_reservoir_run(const FusionPrompt& prompt, const Matrix& projected, ReservoirService& service,
                                  int k) {
    const std::string ctx = "reservoir run (" + std::to_string(projected.rows()) + " input tokens, k=" +
                            std::to_string(k) + "): ";
    ReservoirRequest req{prompt.text, projected, k};
    try {
        return service.run(req);
    } catch (const TransportError& e) {
        throw TransportError(ctx + e.what(), e.retries);
    } catch (const DeadlineError& e) {
        throw DeadlineError(ctx + e.what());
    } catch (const CapacityError& e) {
        throw CapacityError(ctx + e.what());
    } catch (const ServerError& e) {
        throw ServerError(ctx + e.what());
    }
}

namespace {

Matrix column(std::span<const double> v) {
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i)) = v[i];
    return m;
}

void check_shots(const std::vector<Shot>& shots, const char* who) {
    if (shots.empty()) throw ArgumentError(std::string(who) + ": empty training set");
}

}  // namespace

EsnForecaster::EsnForecaster(EsnConfig cfg) : cfg_(cfg), esn_(cfg, 2) {}

Matrix EsnForecaster::features(const Matrix& inputs) const {
    const Matrix states = esn_.run(inputs, Vector::Zero(cfg_.n_units));
    Matrix f(inputs.rows(), 1 + inputs.cols() + states.cols());
    f << Matrix::Ones(inputs.rows(), 1), inputs, states;
    return f;
}

namespace {

Matrix teacher_inputs(const Shot& shot) {
    const auto t = static_cast<Eigen::Index>(shot.steps());
    Matrix u(t, 2);
    for (Eigen::Index i = 0; i < t; ++i) {
        u(i, 0) = shot.laser[i];
        u(i, 1) = i == 0 ? 0.0 : shot.hxr[i - 1];
    }
    return u;
}

}  // namespace

void EsnForecaster::fit(const std::vector<Shot>& shots) {
    check_shots(shots, "esn fit");
    std::vector<Matrix> blocks;
    std::vector<Matrix> targets;
    Eigen::Index rows = 0;
    for (const auto& shot : shots) {
        const auto t = static_cast<Eigen::Index>(shot.steps());
        const Eigen::Index skip = std::min<Eigen::Index>(cfg_.washout, t);
        blocks.push_back(features(teacher_inputs(shot)).bottomRows(t - skip));
        targets.push_back(column(shot.hxr).bottomRows(t - skip));
        rows += t - skip;
    }
    if (rows == 0) throw ArgumentError("esn fit: washout leaves no samples");
    Matrix s(rows, blocks.front().cols()), y(rows, 1);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        s.middleRows(at, blocks[i].rows()) = blocks[i];
        y.middleRows(at, blocks[i].rows()) = targets[i];
        at += blocks[i].rows();
    }
    readout_ = ridge_fit(s, y, cfg_.ridge);
}

void EsnForecaster::set_readout(Matrix readout) {
    if (readout.rows() != 3 + cfg_.n_units || readout.cols() != 1) throw ConfigError("esn readout has wrong shape");
    readout_ = std::move(readout);
}

std::vector<double> EsnForecaster::teacher_forced(const Shot& shot) const {
    if (!trained()) throw StateError("esn forecaster is not trained");
    const Matrix out = features(teacher_inputs(shot)) * readout_;
    return {out.data(), out.data() + out.size()};
}

std::vector<double> EsnForecaster::forecast(std::span<const double> laser) const {
    if (!trained()) throw StateError("esn forecaster is not trained");
    std::vector<double> out(laser.size());
    Vector s = Vector::Zero(cfg_.n_units);
    Vector u(2);
    Vector f(3 + cfg_.n_units);
    double prev = 0.0;
    for (std::size_t t = 0; t < laser.size(); ++t) {
        u << laser[t], prev;
        s = esn_.step(s, u);
        f << 1.0, u, s;
        prev = f.dot(readout_.col(0));
        out[t] = prev;
    }
    return out;
}

NgrcForecaster::NgrcForecaster(NgrcConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Matrix NgrcForecaster::features(std::span<const double> laser) const {
    const auto t = static_cast<Eigen::Index>(laser.size());
    if (t == 0) throw ArgumentError("ngrc: empty series");
    Matrix f(t, ngrc_feature_len(cfg_.taps, 1, cfg_.degree));
    Matrix window(cfg_.taps, 1);
    for (Eigen::Index i = 0; i < t; ++i) {
        for (int lag = 0; lag < cfg_.taps; ++lag) window(lag, 0) = laser[std::max<Eigen::Index>(i - lag, 0)];
        f.row(i) = ngrc_features(window, cfg_.taps, cfg_.degree).transpose();
    }
    return f;
}

void NgrcForecaster::fit(const std::vector<Shot>& shots) {
    check_shots(shots, "ngrc fit");
    Eigen::Index rows = 0;
    for (const auto& shot : shots) rows += static_cast<Eigen::Index>(shot.steps());
    Matrix s(rows, ngrc_feature_len(cfg_.taps, 1, cfg_.degree)), y(rows, 1);
    Eigen::Index at = 0;
    for (const auto& shot : shots) {
        const auto t = static_cast<Eigen::Index>(shot.steps());
        s.middleRows(at, t) = features(shot.laser);
        y.middleRows(at, t) = column(shot.hxr);
        at += t;
    }
    readout_ = ridge_fit(s, y, cfg_.ridge);
}

void NgrcForecaster::set_readout(Matrix readout) {
    if (readout.rows() != ngrc_feature_len(cfg_.taps, 1, cfg_.degree) || readout.cols() != 1) {
        throw ConfigError("ngrc readout has wrong shape");
    }
    readout_ = std::move(readout);
}

std::vector<double> NgrcForecaster::forecast(std::span<const double> laser) const {
    if (!trained()) throw StateError("ngrc forecaster is not trained");
    const Matrix out = features(laser) * readout_;
    return {out.data(), out.data() + out.size()};
}

}  // namespace lpi::reservoir
