#include <gtest/gtest.h>

#include "clickmask/maxflow.hpp"
#include "fixtures.hpp"
#include "oracles/oracles.hpp"

using clickmask::MaxFlowGraph;

namespace {

struct RandomGraph {
    int n = 0;
    std::vector<std::array<std::int64_t, 2>> terminals;
    std::vector<std::tuple<int, int, std::int64_t, std::int64_t>> edges;
};

RandomGraph make_graph(fixtures::Rng& rng, int n, int degree) {
    RandomGraph g;
    g.n = n;
    for (int i = 0; i < n; ++i) {
        const std::int64_t s = rng.coin(0.3) ? rng.uniform_int(0, 40) : 0;
        const std::int64_t t = rng.coin(0.3) ? rng.uniform_int(0, 40) : 0;
        g.terminals.push_back({s, t});
    }
    for (int i = 0; i < n * degree / 2; ++i) {
        const int a = rng.uniform_int(0, n - 1);
        int b = rng.uniform_int(0, n - 1);
        if (a == b) b = (b + 1) % n;
        g.edges.emplace_back(a, b, rng.uniform_int(0, 20), rng.uniform_int(0, 20));
    }
    return g;
}

}  // namespace

TEST(MaxFlow, TinyHandGraph) {
    // s->0 (3), s->1 (2), 0->1 (1), 0->t (2), 1->t (3): max flow 5.
    MaxFlowGraph<int> g(2);
    g.add_terminal(0, 3, 2);
    g.add_terminal(1, 2, 3);
    g.add_edge(0, 1, 1, 0);
    EXPECT_EQ(g.solve(), 5);
}

TEST(MaxFlow, TerminalAccumulation) {
    MaxFlowGraph<int> g(1);
    g.add_terminal(0, 5, 0);
    g.add_terminal(0, 0, 3);
    EXPECT_EQ(g.solve(), 3);
    EXPECT_TRUE(g.in_source_set(0));
}

TEST(MaxFlow, RejectsBadInput) {
    MaxFlowGraph<int> g(2);
    EXPECT_THROW(g.add_edge(0, 0, 1, 1), clickmask::Error);
    EXPECT_THROW(g.add_edge(0, 2, 1, 1), clickmask::Error);
    EXPECT_THROW(g.add_edge(0, 1, -1, 1), clickmask::Error);
}

TEST(MaxFlow, MatchesEdmondsKarpOnRandomGraphs) {
    fixtures::Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = rng.uniform_int(2, 120);
        const auto graph = make_graph(rng, n, rng.uniform_int(1, 6));
        MaxFlowGraph<std::int64_t> bk(n);
        oracle::EdmondsKarp<std::int64_t> ek(n + 2);
        const int s = n, t = n + 1;
        for (int i = 0; i < n; ++i) {
            bk.add_terminal(i, graph.terminals[i][0], graph.terminals[i][1]);
            ek.add(s, i, graph.terminals[i][0]);
            ek.add(i, t, graph.terminals[i][1]);
        }
        for (const auto& [a, b, c, r] : graph.edges) {
            bk.add_edge(a, b, c, r);
            ek.add(a, b, c);
            ek.add(b, a, r);
        }
        const auto flow = bk.solve();
        ASSERT_EQ(flow, ek.max_flow(s, t)) << "trial " << trial;
        const auto side = ek.source_side(s);
        for (int i = 0; i < n; ++i) ASSERT_EQ(bk.in_source_set(i), side[i]) << "trial " << trial << " node " << i;
    }
}
