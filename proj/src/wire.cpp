#include "lpi/wire.hpp"

#include "lpi/common.hpp"

#include <cmath>
#include <cstdio>

namespace lpi::wire {

void append_number(std::string& out, double v) {
    if (!std::isfinite(v)) throw NumericError("cannot serialize non-finite number");
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

namespace {

void write(std::string& out, const json& v) {
    switch (v.type()) {
        case json::value_t::object: {
            out.push_back('{');
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                out += json(it.key()).dump();
                out.push_back(':');
                write(out, it.value());
            }
            out.push_back('}');
            break;
        }
        case json::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& e : v) {
                if (!first) out.push_back(',');
                first = false;
                write(out, e);
            }
            out.push_back(']');
            break;
        }
        case json::value_t::number_float:
            append_number(out, v.get<double>());
            break;
        default:
            out += v.dump();
    }
}

}  // namespace

std::string dump(const json& value) {
    std::string out;
    write(out, value);
    return out;
}

}  // namespace lpi::wire
