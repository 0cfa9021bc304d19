#include "memcore/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "memcore/error.hpp"
#include "memcore/json_io.hpp"

namespace memcore::harness {

using nlohmann::json;

namespace {

std::string tile_file(std::size_t stage, std::size_t tile) {
    return "stage" + std::to_string(stage) + "_tile" + std::to_string(tile) + ".csv";
}

std::string mask_string(const std::vector<std::uint8_t>& mask) {
    std::string s(mask.size(), '0');
    for (std::size_t k = 0; k < mask.size(); ++k) {
        s[k] = mask[k] != 0 ? '1' : '0';
    }
    return s;
}

}  // namespace

void save_checkpoint(const train::NetworkCircuit& net, const device::DeviceParams& params,
                     const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json stages = json::array();
    for (std::size_t k = 0; k < net.stages.size(); ++k) {
        const auto& st = net.stages[k];
        json tiles = json::array();
        for (std::size_t t = 0; t < st.tiles.size(); ++t) {
            const auto& tile = st.tiles[t];
            const auto name = tile_file(k, t);
            std::ofstream os(dir / name);
            if (!os) {
                throw FormatError("harness", "cannot write " + (dir / name).string());
            }
            xbar::write_csv(tile.lc.xb, os);
            tiles.push_back({{"file", name},
                             {"in_idx", tile.in_idx},
                             {"out_idx", tile.out_idx},
                             {"mask", mask_string(tile.mask)},
                             {"rf", tile.lc.rf},
                             {"vdd", tile.lc.vdd},
                             {"vss", tile.lc.vss},
                             {"out_quant", jsonio::quantizer_to_json(tile.lc.out_quant)},
                             {"dp_quant", jsonio::quantizer_to_json(tile.lc.dp_quant)}});
        }
        stages.push_back({{"layer", st.layer},
                          {"n_in", st.n_in},
                          {"n_out", st.n_out},
                          {"tiles", tiles}});
    }
    const json j = {{"format", "memcore-checkpoint-1"},
                    {"topology", net.topology()},
                    {"logical_topology", net.logical_topology()},
                    {"device", jsonio::device_to_json(params)},
                    {"stages", stages}};
    std::ofstream os(dir / "network.json");
    if (!os) {
        throw FormatError("harness", "cannot write " + (dir / "network.json").string());
    }
    os << j.dump(2) << '\n';
}

train::NetworkCircuit load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream is(dir / "network.json");
    if (!is) {
        throw FormatError("harness", "missing " + (dir / "network.json").string());
    }
    try {
        const json j = json::parse(is);
        if (j.at("format") != "memcore-checkpoint-1") {
            throw FormatError("harness", "unknown checkpoint format");
        }
        const auto params = jsonio::device_from_json(j.at("device"));
        train::NetworkCircuit net;
        for (const auto& js : j.at("stages")) {
            train::Stage st;
            st.layer = js.at("layer").get<std::size_t>();
            st.n_in = js.at("n_in").get<std::size_t>();
            st.n_out = js.at("n_out").get<std::size_t>();
            for (const auto& jt : js.at("tiles")) {
                const auto path = dir / jt.at("file").get<std::string>();
                std::ifstream cs(path);
                if (!cs) {
                    throw FormatError("harness", "missing tile file " + path.string());
                }
                layer::LayerCircuit lc{xbar::read_csv(cs, params)};
                lc.rf = jt.at("rf").get<double>();
                lc.vdd = jt.at("vdd").get<double>();
                lc.vss = jt.at("vss").get<double>();
                lc.out_quant = jsonio::quantizer_from_json(jt.at("out_quant"));
                lc.dp_quant = jsonio::quantizer_from_json(jt.at("dp_quant"));
                train::Tile tile{std::move(lc), jt.at("in_idx").get<std::vector<std::size_t>>(),
                                 jt.at("out_idx").get<std::vector<std::size_t>>(), {}};
                for (char c : jt.at("mask").get<std::string>()) {
                    if (c != '0' && c != '1') {
                        throw FormatError("harness", "tile mask must be a 0/1 string");
                    }
                    tile.mask.push_back(c == '1' ? 1 : 0);
                }
                st.tiles.push_back(std::move(tile));
            }
            net.stages.push_back(std::move(st));
        }
        net.validate();
        return net;
    } catch (const json::exception& e) {
        throw FormatError("harness", std::string("bad checkpoint: ") + e.what());
    } catch (const InvalidInput& e) {
        throw FormatError("harness", std::string("inconsistent checkpoint: ") + e.what());
    }
}

}  // namespace memcore::harness
