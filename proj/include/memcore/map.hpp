#pragma once

// Mapping a logical network onto 400x100 neural cores on a 2-D mesh:
// neuron splitting for oversize fan-in, output splitting for oversize width,
// first-fit packing of the resulting sub-layers, and static XY routes.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "memcore/matrix.hpp"

namespace memcore::map {

struct CoreLimits {
    std::size_t max_inputs = 400;  // crossbar rows, one reserved for bias
    std::size_t max_neurons = 100;

    void validate() const;
    bool operator==(const CoreLimits&) const = default;
};

enum class UnitKind { ordinary, partial, combining };

[[nodiscard]] const char* to_string(UnitKind k) noexcept;

/// One transformed sub-layer.  `stage` 0 reads the previous layer's outputs;
/// stage s > 0 combines the stage s-1 partials of the same neurons.
struct SubLayer {
    std::size_t id = 0;
    std::size_t layer = 0;  // original layer k maps topology[k] -> topology[k+1]
    UnitKind kind = UnitKind::ordinary;
    std::size_t stage = 0;
    std::size_t block = 0;   // which input block this unit reads (0 for unsplit units)
    std::size_t blocks = 1;  // number of input blocks at this stage
    std::size_t neuron_begin = 0;  // original neurons covered: [begin, end)
    std::size_t neuron_end = 0;
    std::size_t input_begin = 0;  // stage 0: range of original inputs read;
    std::size_t input_end = 0;    // stage > 0: range of stage s-1 block indices read
    std::size_t fan_in = 0;       // crossbar data rows used, bias excluded
    bool final = false;           // produces the layer's outputs
    std::vector<std::size_t> sources;  // unit ids feeding this one; empty = network input

    [[nodiscard]] std::size_t width() const noexcept { return neuron_end - neuron_begin; }
    bool operator==(const SubLayer&) const = default;
};

struct SplitPlan {
    std::vector<std::size_t> topology;
    CoreLimits limits;
    std::vector<SubLayer> units;  // topological (pipeline) order

    /// Transformed layers: units grouped by (layer, stage), in order.
    [[nodiscard]] std::size_t transformed_depth() const;
    /// True when no unit is a partial or combining neuron and every layer is
    /// a single unit.
    [[nodiscard]] bool unchanged() const;
    bool operator==(const SplitPlan&) const = default;
};

/// Split layers whose fan-in exceeds max_inputs - 1 into contiguous,
/// size-balanced input blocks with combining neurons; split layers wider
/// than max_neurons by output blocks.  Throws InvalidInput on an empty or
/// zero-width topology.
[[nodiscard]] SplitPlan split_network(std::span<const std::size_t> topology,
                                      const CoreLimits& limits = {});

struct MeshDims {
    std::size_t rows = 24;
    std::size_t cols = 24;

    [[nodiscard]] std::size_t capacity() const noexcept { return rows * cols; }
    bool operator==(const MeshDims&) const = default;
};

struct MeshPos {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const MeshPos&) const = default;
};

struct Core {
    std::size_t id = 0;
    MeshPos pos;
    std::vector<std::size_t> units;  // sub-layer ids in pipeline order

    bool operator==(const Core&) const = default;
};

struct Route {
    std::size_t src_unit = 0;
    std::size_t dst_unit = 0;
    std::size_t src_core = 0;
    std::size_t dst_core = 0;
    std::size_t payload = 0;  // neuron outputs carried
    std::size_t hops = 0;     // 0: core-internal feedback
    std::size_t transfers = 0;  // link transfers of link_bits each
    std::vector<MeshPos> path;  // X-then-Y, both endpoints included

    bool operator==(const Route&) const = default;
};

struct CorePlan {
    SplitPlan split;
    MeshDims mesh;
    std::vector<Core> cores;
    std::vector<std::size_t> core_of;  // unit id -> core id
    std::vector<Route> routes;
    unsigned output_bits = 3;
    unsigned link_bits = 8;

    [[nodiscard]] std::size_t core_count() const noexcept { return cores.size(); }
    /// Bits moved over mesh links per input (sum of transfers * link_bits * hops).
    [[nodiscard]] std::size_t link_bit_hops() const;
    bool operator==(const CorePlan&) const = default;
};

/// First-fit packing in pipeline order: a unit goes into the first open core
/// whose neuron total stays within max_neurons, else a new core.  Cores are
/// placed row-major and routed.  Throws CapacityError when the mesh is too small.
[[nodiscard]] CorePlan pack_cores(const SplitPlan& plan, const MeshDims& mesh = {},
                                  unsigned output_bits = 3, unsigned link_bits = 8);

/// Populate X-then-Y routes for every transformed edge.
[[nodiscard]] CorePlan route_plan(CorePlan cp);

/// Throws InvalidInput naming the first violated invariant.
void check_plan(const CorePlan& cp);

[[nodiscard]] std::size_t manhattan(MeshPos a, MeshPos b) noexcept;
[[nodiscard]] std::size_t link_transfers(std::size_t neurons, unsigned output_bits,
                                         unsigned link_bits) noexcept;

/// Linear diagnostic: original network with identity activation.  weights[k]
/// is (topology[k] + 1) x topology[k+1], last row the bias weight.
[[nodiscard]] std::vector<double> evaluate_linear(std::span<const Matrix> weights,
                                                  std::span<const double> input, double bias_v);

/// The same network run unit by unit through the plan: partials carry the
/// original weights of their input block (bias on block 0), combining
/// neurons sum their partials with unit weights.
[[nodiscard]] std::vector<double> evaluate_linear(const CorePlan& cp,
                                                  std::span<const Matrix> weights,
                                                  std::span<const double> input, double bias_v);

[[nodiscard]] std::string to_json(const CorePlan& cp);
/// Throws FormatError on malformed input.
[[nodiscard]] CorePlan plan_from_json(const std::string& text);

}  // namespace memcore::map
