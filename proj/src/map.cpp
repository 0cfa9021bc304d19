#include "memcore/map.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include <json.hpp>

#include "memcore/error.hpp"

namespace memcore::map {

void CoreLimits::validate() const {
    if (max_inputs < 2) {
        throw InvalidInput("map", "max_inputs must be >= 2 (one row is the bias)");
    }
    if (max_neurons < 1) {
        throw InvalidInput("map", "max_neurons must be >= 1");
    }
}

const char* to_string(UnitKind k) noexcept {
    switch (k) {
        case UnitKind::ordinary:
            return "ordinary";
        case UnitKind::partial:
            return "partial";
        case UnitKind::combining:
            return "combining";
    }
    return "ordinary";
}

std::size_t SplitPlan::transformed_depth() const {
    std::set<std::pair<std::size_t, std::size_t>> stages;
    for (const auto& u : units) {
        stages.emplace(u.layer, u.stage);
    }
    return stages.size();
}

bool SplitPlan::unchanged() const {
    if (units.size() + 1 != topology.size()) {
        return false;
    }
    return std::all_of(units.begin(), units.end(),
                       [](const SubLayer& u) { return u.kind == UnitKind::ordinary; });
}

namespace {

std::size_t overlap(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
    const std::size_t lo = std::max(a0, b0);
    const std::size_t hi = std::min(a1, b1);
    return hi > lo ? hi - lo : 0;
}

// Contiguous balanced partition of `count` items into `parts` blocks.
std::vector<std::pair<std::size_t, std::size_t>> balanced_blocks(std::size_t count,
                                                                 std::size_t parts) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t begin = 0;
    for (std::size_t b = 0; b < parts; ++b) {
        const std::size_t size = count / parts + (b < count % parts ? 1 : 0);
        out.emplace_back(begin, begin + size);
        begin += size;
    }
    return out;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

class Splitter {
public:
    Splitter(std::span<const std::size_t> topology, const CoreLimits& limits)
        : limits_(limits), rows_(limits.max_inputs - 1) {
        plan_.topology.assign(topology.begin(), topology.end());
        plan_.limits = limits;
    }

    SplitPlan run() {
        std::vector<std::size_t> prev_final;
        for (std::size_t k = 0; k + 1 < plan_.topology.size(); ++k) {
            prev_final = split_layer(k, prev_final);
        }
        return std::move(plan_);
    }

private:
    SubLayer& add(SubLayer u) {
        u.id = plan_.units.size();
        plan_.units.push_back(std::move(u));
        return plan_.units.back();
    }

    std::vector<std::size_t> split_layer(std::size_t k, const std::vector<std::size_t>& prev_final) {
        const std::size_t fan_in = plan_.topology[k];
        const std::size_t width = plan_.topology[k + 1];
        std::vector<std::size_t> made;

        const std::size_t blocks = ceil_div(fan_in, rows_);
        const auto parts = balanced_blocks(fan_in, blocks);
        for (std::size_t b = 0; b < blocks; ++b) {
            for (std::size_t n0 = 0; n0 < width; n0 += limits_.max_neurons) {
                SubLayer u;
                u.layer = k;
                u.kind = blocks == 1 ? UnitKind::ordinary : UnitKind::partial;
                u.block = b;
                u.blocks = blocks;
                u.neuron_begin = n0;
                u.neuron_end = std::min(width, n0 + limits_.max_neurons);
                u.input_begin = parts[b].first;
                u.input_end = parts[b].second;
                u.fan_in = u.input_end - u.input_begin;
                u.final = blocks == 1;
                for (std::size_t s : prev_final) {
                    const auto& src = plan_.units[s];
                    if (overlap(src.neuron_begin, src.neuron_end, u.input_begin, u.input_end) > 0) {
                        u.sources.push_back(s);
                    }
                }
                made.push_back(add(std::move(u)).id);
            }
        }

        // Combining stages: each neuron now has `per_neuron` inputs, one per
        // block of the stage below, not shared with other neurons.
        std::size_t per_neuron = blocks;
        std::size_t stage = 1;
        while (per_neuron > 1) {
            const std::size_t next_blocks = ceil_div(per_neuron, rows_);
            const auto groups = balanced_blocks(per_neuron, next_blocks);
            const std::vector<std::size_t> below = made;
            made.clear();
            for (std::size_t q = 0; q < next_blocks; ++q) {
                const std::size_t group = groups[q].second - groups[q].first;
                const std::size_t chunk = std::min(limits_.max_neurons, rows_ / group);
                for (std::size_t n0 = 0; n0 < width; n0 += chunk) {
                    SubLayer u;
                    u.layer = k;
                    u.kind = next_blocks == 1 ? UnitKind::combining : UnitKind::partial;
                    u.stage = stage;
                    u.block = q;
                    u.blocks = next_blocks;
                    u.neuron_begin = n0;
                    u.neuron_end = std::min(width, n0 + chunk);
                    u.input_begin = groups[q].first;
                    u.input_end = groups[q].second;
                    u.fan_in = u.width() * group;
                    u.final = next_blocks == 1;
                    for (std::size_t s : below) {
                        const auto& src = plan_.units[s];
                        if (src.block >= u.input_begin && src.block < u.input_end &&
                            overlap(src.neuron_begin, src.neuron_end, u.neuron_begin,
                                    u.neuron_end) > 0) {
                            u.sources.push_back(s);
                        }
                    }
                    made.push_back(add(std::move(u)).id);
                }
            }
            per_neuron = next_blocks;
            ++stage;
        }
        return made;
    }

    CoreLimits limits_;
    std::size_t rows_;
    SplitPlan plan_;
};

}  // namespace

SplitPlan split_network(std::span<const std::size_t> topology, const CoreLimits& limits) {
    limits.validate();
    if (topology.size() < 2) {
        throw InvalidInput("map", "topology needs at least an input and one layer");
    }
    if (std::any_of(topology.begin(), topology.end(), [](std::size_t w) { return w == 0; })) {
        throw InvalidInput("map", "topology widths must be >= 1");
    }
    return Splitter(topology, limits).run();
}

std::size_t manhattan(MeshPos a, MeshPos b) noexcept {
    const auto d = [](std::size_t x, std::size_t y) { return x > y ? x - y : y - x; };
    return d(a.row, b.row) + d(a.col, b.col);
}

std::size_t link_transfers(std::size_t neurons, unsigned output_bits, unsigned link_bits) noexcept {
    if (link_bits == 0) {
        return 0;
    }
    return ceil_div(neurons * output_bits, link_bits);
}

std::size_t CorePlan::link_bit_hops() const {
    std::size_t total = 0;
    for (const auto& r : routes) {
        total += r.transfers * link_bits * r.hops;
    }
    return total;
}

CorePlan pack_cores(const SplitPlan& plan, const MeshDims& mesh, unsigned output_bits,
                    unsigned link_bits) {
    plan.limits.validate();
    if (mesh.rows == 0 || mesh.cols == 0) {
        throw InvalidInput("map", "mesh dimensions must be >= 1");
    }
    if (output_bits == 0 || link_bits == 0) {
        throw InvalidInput("map", "output and link bit widths must be >= 1");
    }
    CorePlan cp;
    cp.split = plan;
    cp.mesh = mesh;
    cp.output_bits = output_bits;
    cp.link_bits = link_bits;
    cp.core_of.assign(plan.units.size(), 0);

    std::vector<std::size_t> used;
    for (const auto& u : plan.units) {
        if (u.fan_in > plan.limits.max_inputs || u.width() > plan.limits.max_neurons) {
            throw InvalidInput("map", "sub-layer " + std::to_string(u.id) +
                                          " exceeds core limits; split the network first");
        }
        std::size_t c = 0;
        while (c < cp.cores.size() && used[c] + u.width() > plan.limits.max_neurons) {
            ++c;
        }
        if (c == cp.cores.size()) {
            cp.cores.push_back(Core{c, {}, {}});
            used.push_back(0);
        }
        cp.cores[c].units.push_back(u.id);
        used[c] += u.width();
        cp.core_of[u.id] = c;
    }
    if (cp.cores.size() > mesh.capacity()) {
        throw CapacityError("map", "plan needs " + std::to_string(cp.cores.size()) +
                                       " cores but the mesh has " +
                                       std::to_string(mesh.capacity()) + " (short by " +
                                       std::to_string(cp.cores.size() - mesh.capacity()) + ")");
    }
    for (auto& core : cp.cores) {
        core.pos = {core.id / mesh.cols, core.id % mesh.cols};
    }
    return route_plan(std::move(cp));
}

CorePlan route_plan(CorePlan cp) {
    cp.routes.clear();
    for (const auto& u : cp.split.units) {
        for (std::size_t s : u.sources) {
            const auto& src = cp.split.units[s];
            Route r;
            r.src_unit = s;
            r.dst_unit = u.id;
            r.src_core = cp.core_of[s];
            r.dst_core = cp.core_of[u.id];
            if (u.stage == 0) {
                r.payload = overlap(src.neuron_begin, src.neuron_end, u.input_begin, u.input_end);
            } else {
                r.payload = overlap(src.neuron_begin, src.neuron_end, u.neuron_begin, u.neuron_end);
            }
            const MeshPos a = cp.cores[r.src_core].pos;
            const MeshPos b = cp.cores[r.dst_core].pos;
            r.hops = manhattan(a, b);
            r.transfers = link_transfers(r.payload, cp.output_bits, cp.link_bits);
            MeshPos p = a;
            r.path.push_back(p);
            while (p.col != b.col) {
                p.col = p.col < b.col ? p.col + 1 : p.col - 1;
                r.path.push_back(p);
            }
            while (p.row != b.row) {
                p.row = p.row < b.row ? p.row + 1 : p.row - 1;
                r.path.push_back(p);
            }
            cp.routes.push_back(std::move(r));
        }
    }
    return cp;
}

void check_plan(const CorePlan& cp) {
    const auto& lim = cp.split.limits;
    const auto fail = [](const std::string& what) { throw InvalidInput("map", what); };
    if (cp.cores.size() > cp.mesh.capacity()) {
        fail("core count exceeds mesh capacity");
    }
    std::vector<int> seen(cp.split.units.size(), 0);
    for (const auto& core : cp.cores) {
        std::size_t neurons = 0;
        for (std::size_t id : core.units) {
            const auto& u = cp.split.units.at(id);
            neurons += u.width();
            if (u.fan_in > lim.max_inputs - 1) {
                fail("unit " + std::to_string(id) + " fan-in exceeds max_inputs - 1");
            }
            ++seen[id];
            if (cp.core_of.at(id) != core.id) {
                fail("core_of disagrees with core " + std::to_string(core.id));
            }
        }
        if (neurons > lim.max_neurons) {
            fail("core " + std::to_string(core.id) + " holds more than max_neurons");
        }
    }
    for (std::size_t id = 0; id < seen.size(); ++id) {
        if (seen[id] != 1) {
            fail("unit " + std::to_string(id) + " is not placed exactly once");
        }
    }
    // Final units of every layer tile its neurons exactly once.
    for (std::size_t k = 0; k + 1 < cp.split.topology.size(); ++k) {
        std::vector<int> cover(cp.split.topology[k + 1], 0);
        for (const auto& u : cp.split.units) {
            if (u.layer == k && u.final) {
                for (std::size_t n = u.neuron_begin; n < u.neuron_end; ++n) {
                    ++cover[n];
                }
            }
        }
        if (std::any_of(cover.begin(), cover.end(), [](int c) { return c != 1; })) {
            fail("layer " + std::to_string(k) + " outputs are not covered exactly once");
        }
    }
    std::size_t edges = 0;
    for (const auto& u : cp.split.units) {
        edges += u.sources.size();
    }
    if (edges != cp.routes.size()) {
        fail("route count does not match transformed edge count");
    }
}

std::vector<double> evaluate_linear(std::span<const Matrix> weights, std::span<const double> input,
                                    double bias_v) {
    std::vector<double> x(input.begin(), input.end());
    for (const auto& w : weights) {
        if (w.rows() != x.size() + 1) {
            throw InvalidInput("map", "weight shape does not match layer input");
        }
        std::vector<double> y(w.cols(), 0.0);
        for (std::size_t j = 0; j < w.cols(); ++j) {
            double acc = w(x.size(), j) * bias_v;
            for (std::size_t i = 0; i < x.size(); ++i) {
                acc += w(i, j) * x[i];
            }
            y[j] = acc;
        }
        x = std::move(y);
    }
    return x;
}

std::vector<double> evaluate_linear(const CorePlan& cp, std::span<const Matrix> weights,
                                    std::span<const double> input, double bias_v) {
    const auto& plan = cp.split;
    if (weights.size() + 1 != plan.topology.size() || input.size() != plan.topology.front()) {
        throw InvalidInput("map", "weights/input do not match the plan topology");
    }
    std::vector<std::vector<double>> out(plan.units.size());
    std::vector<bool> placed(plan.units.size(), false);
    for (const auto& core : cp.cores) {
        for (std::size_t id : core.units) {
            placed[id] = true;
        }
    }
    std::vector<double> result(plan.topology.back(), 0.0);
    for (const auto& u : plan.units) {
        if (!placed[u.id]) {
            throw InvalidInput("map", "unit " + std::to_string(u.id) + " is not placed on a core");
        }
        const Matrix& w = weights[u.layer];
        const std::size_t fan_in = plan.topology[u.layer];
        if (w.rows() != fan_in + 1 || w.cols() != plan.topology[u.layer + 1]) {
            throw InvalidInput("map", "weight shape does not match layer " + std::to_string(u.layer));
        }
        auto& y = out[u.id];
        y.assign(u.width(), 0.0);
        if (u.stage == 0) {
            std::vector<double> x(u.input_end - u.input_begin, 0.0);
            if (u.layer == 0) {
                std::copy(input.begin() + static_cast<std::ptrdiff_t>(u.input_begin),
                          input.begin() + static_cast<std::ptrdiff_t>(u.input_end), x.begin());
            } else {
                for (std::size_t s : u.sources) {
                    const auto& src = plan.units[s];
                    for (std::size_t n = std::max(src.neuron_begin, u.input_begin);
                         n < std::min(src.neuron_end, u.input_end); ++n) {
                        x[n - u.input_begin] = out[s][n - src.neuron_begin];
                    }
                }
            }
            for (std::size_t n = u.neuron_begin; n < u.neuron_end; ++n) {
                double acc = u.block == 0 ? w(fan_in, n) * bias_v : 0.0;
                for (std::size_t i = u.input_begin; i < u.input_end; ++i) {
                    acc += w(i, n) * x[i - u.input_begin];
                }
                y[n - u.neuron_begin] = acc;
            }
        } else {
            for (std::size_t s : u.sources) {
                const auto& src = plan.units[s];
                for (std::size_t n = std::max(src.neuron_begin, u.neuron_begin);
                     n < std::min(src.neuron_end, u.neuron_end); ++n) {
                    y[n - u.neuron_begin] += out[s][n - src.neuron_begin];
                }
            }
        }
        if (u.final && u.layer + 2 == plan.topology.size()) {
            std::copy(y.begin(), y.end(),
                      result.begin() + static_cast<std::ptrdiff_t>(u.neuron_begin));
        }
    }
    return result;
}

namespace {

using nlohmann::json;

json unit_json(const SubLayer& u) {
    return {{"id", u.id},
            {"layer", u.layer},
            {"kind", to_string(u.kind)},
            {"stage", u.stage},
            {"block", u.block},
            {"blocks", u.blocks},
            {"neurons", {u.neuron_begin, u.neuron_end}},
            {"inputs", {u.input_begin, u.input_end}},
            {"fan_in", u.fan_in},
            {"final", u.final},
            {"sources", u.sources}};
}

UnitKind kind_from(const std::string& s) {
    if (s == "ordinary") {
        return UnitKind::ordinary;
    }
    if (s == "partial") {
        return UnitKind::partial;
    }
    if (s == "combining") {
        return UnitKind::combining;
    }
    throw FormatError("map", "unknown unit kind '" + s + "'");
}

}  // namespace

std::string to_json(const CorePlan& cp) {
    json units = json::array();
    for (const auto& u : cp.split.units) {
        units.push_back(unit_json(u));
    }
    json cores = json::array();
    for (const auto& c : cp.cores) {
        cores.push_back({{"id", c.id}, {"pos", {c.pos.row, c.pos.col}}, {"units", c.units}});
    }
    json routes = json::array();
    for (const auto& r : cp.routes) {
        json path = json::array();
        for (const auto& p : r.path) {
            path.push_back({p.row, p.col});
        }
        routes.push_back({{"src_unit", r.src_unit},
                          {"dst_unit", r.dst_unit},
                          {"src_core", r.src_core},
                          {"dst_core", r.dst_core},
                          {"payload", r.payload},
                          {"hops", r.hops},
                          {"transfers", r.transfers},
                          {"path", path}});
    }
    json j = {{"topology", cp.split.topology},
              {"limits",
               {{"max_inputs", cp.split.limits.max_inputs},
                {"max_neurons", cp.split.limits.max_neurons}}},
              {"mesh", {{"rows", cp.mesh.rows}, {"cols", cp.mesh.cols}}},
              {"output_bits", cp.output_bits},
              {"link_bits", cp.link_bits},
              {"core_count", cp.cores.size()},
              {"units", units},
              {"cores", cores},
              {"routes", routes}};
    return j.dump(2);
}

CorePlan plan_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        CorePlan cp;
        cp.split.topology = j.at("topology").get<std::vector<std::size_t>>();
        cp.split.limits.max_inputs = j.at("limits").at("max_inputs").get<std::size_t>();
        cp.split.limits.max_neurons = j.at("limits").at("max_neurons").get<std::size_t>();
        cp.mesh.rows = j.at("mesh").at("rows").get<std::size_t>();
        cp.mesh.cols = j.at("mesh").at("cols").get<std::size_t>();
        cp.output_bits = j.at("output_bits").get<unsigned>();
        cp.link_bits = j.at("link_bits").get<unsigned>();
        for (const auto& ju : j.at("units")) {
            SubLayer u;
            u.id = ju.at("id").get<std::size_t>();
            u.layer = ju.at("layer").get<std::size_t>();
            u.kind = kind_from(ju.at("kind").get<std::string>());
            u.stage = ju.at("stage").get<std::size_t>();
            u.block = ju.at("block").get<std::size_t>();
            u.blocks = ju.at("blocks").get<std::size_t>();
            u.neuron_begin = ju.at("neurons").at(0).get<std::size_t>();
            u.neuron_end = ju.at("neurons").at(1).get<std::size_t>();
            u.input_begin = ju.at("inputs").at(0).get<std::size_t>();
            u.input_end = ju.at("inputs").at(1).get<std::size_t>();
            u.fan_in = ju.at("fan_in").get<std::size_t>();
            u.final = ju.at("final").get<bool>();
            u.sources = ju.at("sources").get<std::vector<std::size_t>>();
            if (u.id != cp.split.units.size()) {
                throw FormatError("map", "unit ids must be dense and ordered");
            }
            cp.split.units.push_back(std::move(u));
        }
        cp.core_of.assign(cp.split.units.size(), 0);
        for (const auto& jc : j.at("cores")) {
            Core c;
            c.id = jc.at("id").get<std::size_t>();
            c.pos = {jc.at("pos").at(0).get<std::size_t>(), jc.at("pos").at(1).get<std::size_t>()};
            c.units = jc.at("units").get<std::vector<std::size_t>>();
            for (std::size_t id : c.units) {
                if (id >= cp.core_of.size()) {
                    throw FormatError("map", "core references unknown unit " + std::to_string(id));
                }
                cp.core_of[id] = c.id;
            }
            cp.cores.push_back(std::move(c));
        }
        for (const auto& jr : j.at("routes")) {
            Route r;
            r.src_unit = jr.at("src_unit").get<std::size_t>();
            r.dst_unit = jr.at("dst_unit").get<std::size_t>();
            r.src_core = jr.at("src_core").get<std::size_t>();
            r.dst_core = jr.at("dst_core").get<std::size_t>();
            r.payload = jr.at("payload").get<std::size_t>();
            r.hops = jr.at("hops").get<std::size_t>();
            r.transfers = jr.at("transfers").get<std::size_t>();
            for (const auto& p : jr.at("path")) {
                r.path.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
            }
            cp.routes.push_back(std::move(r));
        }
        return cp;
    } catch (const json::exception& e) {
        throw FormatError("map", std::string("bad plan JSON: ") + e.what());
    }
}

}  // namespace memcore::map
