#include "lpi/checkpoint.hpp"

#include "lpi/wire.hpp"

#include <fstream>
#include <sstream>

namespace lpi {

using wire::json;

namespace {

json encode(const AffineParams& a) { return {{"scale", a.scale}, {"offset", a.offset}}; }

AffineParams decode_affine(const json& j) { return {j.at("scale").get<double>(), j.at("offset").get<double>()}; }

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    json tensors = json::object();
    for (const auto& [name, m] : ckpt.tensors) {
        json data = json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
        }
        tensors[name] = {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
    }
    const json doc{{"format", "lpi-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"config", ckpt.config_text},
                   {"terms", ckpt.terms},
                   {"descriptors",
                    {{"context", ckpt.descriptors.context_text},
                     {"task", ckpt.descriptors.task_text},
                     {"input", ckpt.descriptors.input_template}}},
                   {"normalization", {{"laser", encode(ckpt.normalization.laser)}, {"hxr", encode(ckpt.normalization.hxr)}}},
                   {"tensors", std::move(tensors)}};
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write checkpoint " + path.string());
    out << wire::dump(doc) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open checkpoint " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format") != "lpi-checkpoint") throw SchemaError("not an lpi checkpoint: " + path.string());
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw SchemaError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
        }
        Checkpoint c;
        c.config_text = doc.at("config").get<std::string>();
        c.terms = doc.at("terms").get<std::vector<std::string>>();
        const auto& d = doc.at("descriptors");
        c.descriptors = {d.at("context").get<std::string>(), d.at("task").get<std::string>(),
                         d.at("input").get<std::string>()};
        c.normalization.laser = decode_affine(doc.at("normalization").at("laser"));
        c.normalization.hxr = decode_affine(doc.at("normalization").at("hxr"));
        for (const auto& [name, t] : doc.at("tensors").items()) {
            const auto rows = t.at("shape").at(0).get<Eigen::Index>();
            const auto cols = t.at("shape").at(1).get<Eigen::Index>();
            const auto& data = t.at("data");
            if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
                throw SchemaError("checkpoint tensor '" + name + "' data does not match its shape");
            }
            Matrix m(rows, cols);
            for (Eigen::Index i = 0; i < rows * cols; ++i) m(i / cols, i % cols) = data[i].get<double>();
            c.tensors.emplace(name, std::move(m));
        }
        return c;
    } catch (const json::exception& e) {
        throw SchemaError("checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace lpi
