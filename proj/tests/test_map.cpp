#include <random>
#include <set>

#include <gtest/gtest.h>

#include "memcore/error.hpp"
#include "memcore/map.hpp"
#include "oracle.hpp"

using namespace memcore;
using namespace memcore::map;

namespace {

std::vector<Matrix> random_weights(std::span<const std::size_t> topo, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Matrix> w;
    for (std::size_t k = 0; k + 1 < topo.size(); ++k) {
        Matrix m(topo[k] + 1, topo[k + 1]);
        for (auto& v : m.data()) v = u(rng);
        w.push_back(std::move(m));
    }
    return w;
}

// Limits and coverage checked directly on the plan, independent of check_plan.
void expect_within_limits(const CorePlan& cp) {
    const auto& lim = cp.split.limits;
    std::set<std::size_t> seen;
    for (const auto& core : cp.cores) {
        std::size_t neurons = 0;
        for (std::size_t id : core.units) {
            const auto& u = cp.split.units.at(id);
            neurons += u.width();
            ASSERT_LE(u.fan_in + 1, lim.max_inputs);
            ASSERT_LE(u.width(), lim.max_neurons);
            ASSERT_TRUE(seen.insert(id).second);
        }
        ASSERT_LE(neurons, lim.max_neurons);
    }
    ASSERT_EQ(seen.size(), cp.split.units.size());
    // Final units cover each original layer's neurons exactly once.
    const auto& topo = cp.split.topology;
    for (std::size_t k = 0; k + 1 < topo.size(); ++k) {
        std::vector<int> hit(topo[k + 1], 0);
        for (const auto& u : cp.split.units)
            if (u.layer == k && u.final)
                for (std::size_t n = u.neuron_begin; n < u.neuron_end; ++n) ++hit[n];
        for (int h : hit) ASSERT_EQ(h, 1);
    }
}

}  // namespace

TEST(Map, KddUnchangedOnOneCore) {
    const std::vector<std::size_t> topo{41, 15, 41};
    const auto plan = split_network(topo);
    EXPECT_TRUE(plan.unchanged());
    EXPECT_EQ(plan.units.size(), 2u);
    const auto cp = pack_cores(plan);
    EXPECT_EQ(cp.core_count(), 1u);
    ASSERT_EQ(cp.routes.size(), 1u);
    EXPECT_EQ(cp.routes[0].hops, 0u);  // feedback through the core's own switch
    expect_within_limits(cp);
}

TEST(Map, FullCoreBoundary) {
    const std::vector<std::size_t> topo{399, 100};
    const auto cp = pack_cores(split_network(topo));
    EXPECT_TRUE(cp.split.unchanged());
    EXPECT_EQ(cp.core_count(), 1u);
    const std::vector<std::size_t> over{400, 100};
    EXPECT_FALSE(split_network(over).unchanged());
}

TEST(Map, SplitsWideFanInLayer) {
    const std::vector<std::size_t> topo{784, 300};
    const auto plan = split_network(topo);
    std::size_t partial = 0, combining = 0, partial_neurons = 0, combining_neurons = 0;
    std::set<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& u : plan.units) {
        if (u.kind == UnitKind::partial) {
            ++partial;
            partial_neurons += u.width();
            EXPECT_EQ(u.fan_in, 392u);
            ranges.insert({u.input_begin, u.input_end});
        } else if (u.kind == UnitKind::combining) {
            ++combining;
            combining_neurons += u.width();
            // Each neuron reads its own 2 partials; the unit uses 100 * 2 rows.
            EXPECT_EQ(u.input_end - u.input_begin, 2u);
            EXPECT_EQ(u.fan_in, 2 * u.width());
        }
    }
    EXPECT_EQ(ranges.size(), 2u);  // two contiguous input blocks
    EXPECT_EQ(partial_neurons, 600u);
    EXPECT_EQ(combining_neurons, 300u);
    EXPECT_EQ(partial, 6u);
    EXPECT_EQ(combining, 3u);
    EXPECT_EQ(plan.transformed_depth(), 2u);
    const auto cp = pack_cores(plan);
    EXPECT_EQ(cp.core_count(), 9u);
    expect_within_limits(cp);
}

TEST(Map, SplitIsIdempotentOnConformingTopologies) {
    const std::vector<std::size_t> topo{300, 80, 20, 5};
    const auto a = split_network(topo);
    EXPECT_TRUE(a.unchanged());
    EXPECT_EQ(a.units.size(), 3u);
    EXPECT_TRUE(split_network(topo) == a);
}

TEST(Map, RouteArithmetic) {
    EXPECT_EQ(manhattan({0, 0}, {2, 3}), 5u);
    EXPECT_EQ(manhattan({2, 3}, {0, 0}), 5u);
    EXPECT_EQ(link_transfers(100, 3, 8), 38u);
    EXPECT_EQ(link_transfers(8, 3, 8), 3u);
    EXPECT_EQ(link_transfers(0, 3, 8), 0u);
}

TEST(Map, RoutesAreXThenY) {
    const std::vector<std::size_t> topo{784, 300, 10};
    const auto cp = pack_cores(split_network(topo));
    for (const auto& r : cp.routes) {
        const auto a = cp.cores[r.src_core].pos, b = cp.cores[r.dst_core].pos;
        EXPECT_EQ(r.hops, manhattan(a, b));
        if (r.hops == 0) continue;
        ASSERT_EQ(r.path.size(), r.hops + 1);
        EXPECT_TRUE(r.path.front() == a);
        EXPECT_TRUE(r.path.back() == b);
        bool turned = false;
        for (std::size_t k = 1; k < r.path.size(); ++k) {
            const bool x_step = r.path[k].col != r.path[k - 1].col;
            EXPECT_EQ(manhattan(r.path[k], r.path[k - 1]), 1u);
            if (!x_step) turned = true;
            EXPECT_FALSE(turned && x_step);
        }
        EXPECT_EQ(r.transfers, link_transfers(r.payload, 3, 8));
    }
}

TEST(Map, RandomTopologiesRespectLimits) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> depth(2, 5), width(1, 5000);
    const MeshDims big{400, 400};
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::size_t> topo(depth(rng));
        for (auto& w : topo) w = width(rng);
        const auto cp = pack_cores(split_network(topo), big);
        expect_within_limits(cp);
        if (HasFatalFailure()) {
            ADD_FAILURE() << "trial " << trial;
            return;
        }
        EXPECT_NO_THROW(check_plan(cp));
    }
}

TEST(Map, SmallNetworksPackToOneCore) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> depth(2, 5), fan(1, 399);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> topo(depth(rng));
        topo[0] = fan(rng);
        std::size_t budget = 100;
        for (std::size_t k = 1; k < topo.size(); ++k) {
            const std::size_t left = topo.size() - k - 1;
            std::uniform_int_distribution<std::size_t> w(1, budget - left);
            topo[k] = w(rng);
            budget -= topo[k];
        }
        EXPECT_EQ(pack_cores(split_network(topo)).core_count(), 1u);
    }
}

TEST(Map, LinearDiagnosticPreserved) {
    std::mt19937_64 rng(3);
    for (const auto& topo : std::vector<std::vector<std::size_t>>{
             {41, 15, 41}, {784, 300, 10}, {1200, 250, 30}, {2000, 900, 5}}) {
        const auto w = random_weights(topo, rng);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        std::vector<double> in(topo[0]);
        for (auto& v : in) v = u(rng);
        const auto cp = pack_cores(split_network(topo), MeshDims{48, 48});
        const auto ref = evaluate_linear(w, in, 0.5);
        const auto got = evaluate_linear(cp, w, in, 0.5);
        EXPECT_LT(oracle::rel_diff(got, ref, 1e-6), 1e-9);
    }
}

TEST(Map, LinearDiagnosticMatchesHandProduct) {
    Matrix w(3, 1);
    w(0, 0) = 2.0;
    w(1, 0) = -1.0;
    w(2, 0) = 4.0;
    const std::vector<Matrix> ws{w};
    const auto y = evaluate_linear(ws, std::vector<double>{0.25, 0.5}, 0.5);
    EXPECT_DOUBLE_EQ(y[0], 0.5 - 0.5 + 2.0);
}

TEST(Map, DeterministicAndJsonRoundTrip) {
    const std::vector<std::size_t> topo{617, 2000, 1000, 26};
    const auto a = pack_cores(split_network(topo), MeshDims{48, 48});
    const auto b = pack_cores(split_network(topo), MeshDims{48, 48});
    EXPECT_TRUE(a == b);
    EXPECT_EQ(to_json(a), to_json(b));
    EXPECT_TRUE(plan_from_json(to_json(a)) == a);
    EXPECT_THROW((void)plan_from_json("{\"cores\": 3"), FormatError);
    EXPECT_THROW((void)plan_from_json("{}"), FormatError);
}

TEST(Map, CapacityErrorNamesShortfall) {
    const std::vector<std::size_t> topo{60000, 800, 1};
    try {
        (void)pack_cores(split_network(topo));
        FAIL() << "expected CapacityError";
    } catch (const CapacityError& e) {
        EXPECT_NE(std::string(e.what()).find("576"), std::string::npos) << e.what();
    }
    EXPECT_THROW((void)pack_cores(split_network(std::vector<std::size_t>{41, 15, 41}), MeshDims{0, 0}),
                 std::exception);
}

TEST(Map, InvalidTopologies) {
    EXPECT_THROW((void)split_network(std::vector<std::size_t>{}), InvalidInput);
    EXPECT_THROW((void)split_network(std::vector<std::size_t>{5, 0, 3}), InvalidInput);
    EXPECT_THROW((CoreLimits{1, 1}.validate()), InvalidInput);
}
