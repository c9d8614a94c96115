// Records the temporal encoder's response to an all-zero 400-step series.
//
//   record_sdc_golden <output-file>

#include "lpi/sdc.hpp"
#include "lpi/wire.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: record_sdc_golden <output-file>\n";
        return 2;
    }
    const lpi::sdc::PatchConfig patch;
    const lpi::sdc::TemporalEncoder encoder;
    const auto patches = lpi::sdc::window_patch(lpi::Vector::Zero(400), patch);
    const lpi::Matrix tokens = encoder.encode(patches.values);

    lpi::wire::json rows = lpi::wire::json::array();
    for (Eigen::Index r = 0; r < tokens.rows(); ++r) {
        lpi::wire::json row = lpi::wire::json::array();
        for (Eigen::Index c = 0; c < tokens.cols(); ++c) row.push_back(tokens(r, c));
        rows.push_back(row);
    }
    const lpi::wire::json doc{{"steps", 400},
                              {"seed", encoder.config().seed},
                              {"d_model", encoder.config().d_model},
                              {"d_tmp", encoder.config().d_tmp},
                              {"tokens", rows}};
    std::ofstream out(argv[1]);
    out << lpi::wire::dump(doc) << "\n";
    std::cout << "wrote " << tokens.rows() << " tokens to " << argv[1] << "\n";
}
