#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "clickmask/error.hpp"

namespace clickmask {

/// Boykov-Kolmogorov augmenting-path max-flow over a graph with two implicit
/// terminals. Capacities are accumulated with add_terminal/add_edge, then
/// solve() computes the max flow once. After solving, in_source_set() reports
/// the minimal source side of the min cut (nodes reachable from the source in
/// the residual graph).
template <class Cap>
class MaxFlowGraph {
public:
    using NodeId = int;

    explicit MaxFlowGraph(int node_count, std::size_t edge_hint = 0) : nodes_(node_count) {
        arcs_.reserve(edge_hint * 2);
    }

    int node_count() const noexcept { return static_cast<int>(nodes_.size()); }

    /// Adds capacity source->node and node->sink.
    void add_terminal(NodeId n, Cap source_cap, Cap sink_cap) {
        check_node(n);
        Cap delta = nodes_[n].tr_cap;
        if (delta > 0) source_cap += delta;
        else sink_cap -= delta;
        flow_ += std::min(source_cap, sink_cap);
        nodes_[n].tr_cap = source_cap - sink_cap;
    }

    /// Adds a directed pair a->b (cap) and b->a (reverse_cap).
    void add_edge(NodeId a, NodeId b, Cap cap, Cap reverse_cap) {
        check_node(a);
        check_node(b);
        if (a == b) throw Error(ErrorCode::InvalidArgument, "max-flow: self loop");
        if (cap < 0 || reverse_cap < 0) throw Error(ErrorCode::InvalidArgument, "max-flow: negative capacity");
        const int ab = static_cast<int>(arcs_.size());
        arcs_.push_back(Arc{b, nodes_[a].first, cap});
        nodes_[a].first = ab;
        arcs_.push_back(Arc{a, nodes_[b].first, reverse_cap});
        nodes_[b].first = ab + 1;
    }

    Cap solve();

    Cap flow() const noexcept { return flow_; }

    bool in_source_set(NodeId n) const {
        return nodes_[n].parent != kNone && !nodes_[n].is_sink;
    }

private:
    static constexpr int kNone = -1;
    static constexpr int kTerminal = -2;
    static constexpr int kOrphan = -3;
    static constexpr int kInfDist = std::numeric_limits<int>::max();

    struct Arc {
        int head;
        int next;
        Cap r_cap;
    };

    struct Node {
        int first = -1;
        int parent = -1;
        bool is_sink = false;
        bool active = false;
        int ts = 0;
        int dist = 0;
        Cap tr_cap = 0;
    };

    static int sister(int a) noexcept { return a ^ 1; }

    void check_node(NodeId n) const {
        if (n < 0 || n >= node_count()) throw Error(ErrorCode::OutOfRange, "max-flow: node id out of range");
    }

    void set_active(int n) {
        if (!nodes_[n].active) {
            nodes_[n].active = true;
            active_.push_back(n);
        }
    }

    int next_active() {
        while (!active_.empty()) {
            const int n = active_.front();
            active_.pop_front();
            nodes_[n].active = false;
            if (nodes_[n].parent != kNone) return n;
        }
        return kNone;
    }

    void augment(int middle);
    void process_source_orphan(int i);
    void process_sink_orphan(int i);

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::deque<int> active_;
    std::deque<int> orphans_;
    Cap flow_ = 0;
    int time_ = 0;
    bool solved_ = false;
};

template <class Cap>
Cap MaxFlowGraph<Cap>::solve() {
    if (solved_) return flow_;
    solved_ = true;

    for (int i = 0; i < node_count(); ++i) {
        Node& n = nodes_[i];
        n.ts = 0;
        if (n.tr_cap > 0) {
            n.is_sink = false;
            n.parent = kTerminal;
            n.dist = 1;
            set_active(i);
        } else if (n.tr_cap < 0) {
            n.is_sink = true;
            n.parent = kTerminal;
            n.dist = 1;
            set_active(i);
        } else {
            n.parent = kNone;
        }
    }

    int current = kNone;
    while (true) {
        int i = current;
        if (i != kNone && nodes_[i].parent == kNone) i = kNone;
        if (i == kNone) {
            i = next_active();
            if (i == kNone) break;
        }
        current = kNone;

        // Grow the tree containing i until it touches the other tree.
        int middle = kNone;
        Node& ni = nodes_[i];
        if (!ni.is_sink) {
            for (int a = ni.first; a != kNone; a = arcs_[a].next) {
                if (arcs_[a].r_cap == 0) continue;
                const int j = arcs_[a].head;
                Node& nj = nodes_[j];
                if (nj.parent == kNone) {
                    nj.is_sink = false;
                    nj.parent = sister(a);
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                    set_active(j);
                } else if (nj.is_sink) {
                    middle = a;
                    break;
                } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
                    nj.parent = sister(a);
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                }
            }
        } else {
            for (int a = ni.first; a != kNone; a = arcs_[a].next) {
                if (arcs_[sister(a)].r_cap == 0) continue;
                const int j = arcs_[a].head;
                Node& nj = nodes_[j];
                if (nj.parent == kNone) {
                    nj.is_sink = true;
                    nj.parent = sister(a);
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                    set_active(j);
                } else if (!nj.is_sink) {
                    middle = sister(a);
                    break;
                } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
                    nj.parent = sister(a);
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                }
            }
        }

        ++time_;
        if (middle == kNone) continue;

        // Keep growing from i after the augmentation if it survives.
        current = i;
        augment(middle);

        while (!orphans_.empty()) {
            const int o = orphans_.front();
            orphans_.pop_front();
            if (nodes_[o].is_sink) process_sink_orphan(o);
            else process_source_orphan(o);
        }
    }
    return flow_;
}

template <class Cap>
void MaxFlowGraph<Cap>::augment(int middle) {
    // middle goes from a source-tree node to a sink-tree node.
    Cap bottleneck = arcs_[middle].r_cap;
    for (int i = arcs_[sister(middle)].head;;) {
        const int a = nodes_[i].parent;
        if (a == kTerminal) break;
        bottleneck = std::min(bottleneck, arcs_[sister(a)].r_cap);
        i = arcs_[a].head;
    }
    {
        int i = arcs_[sister(middle)].head;
        while (nodes_[i].parent != kTerminal) i = arcs_[nodes_[i].parent].head;
        bottleneck = std::min(bottleneck, nodes_[i].tr_cap);
    }
    for (int i = arcs_[middle].head;;) {
        const int a = nodes_[i].parent;
        if (a == kTerminal) break;
        bottleneck = std::min(bottleneck, arcs_[a].r_cap);
        i = arcs_[a].head;
    }
    {
        int i = arcs_[middle].head;
        while (nodes_[i].parent != kTerminal) i = arcs_[nodes_[i].parent].head;
        bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);
    }

    arcs_[sister(middle)].r_cap += bottleneck;
    arcs_[middle].r_cap -= bottleneck;

    for (int i = arcs_[sister(middle)].head;;) {
        const int a = nodes_[i].parent;
        if (a == kTerminal) {
            nodes_[i].tr_cap -= bottleneck;
            if (nodes_[i].tr_cap == 0) {
                nodes_[i].parent = kOrphan;
                orphans_.push_front(i);
            }
            break;
        }
        arcs_[a].r_cap += bottleneck;
        arcs_[sister(a)].r_cap -= bottleneck;
        const int next = arcs_[a].head;
        if (arcs_[sister(a)].r_cap == 0) {
            nodes_[i].parent = kOrphan;
            orphans_.push_front(i);
        }
        i = next;
    }
    for (int i = arcs_[middle].head;;) {
        const int a = nodes_[i].parent;
        if (a == kTerminal) {
            nodes_[i].tr_cap += bottleneck;
            if (nodes_[i].tr_cap == 0) {
                nodes_[i].parent = kOrphan;
                orphans_.push_front(i);
            }
            break;
        }
        arcs_[sister(a)].r_cap += bottleneck;
        arcs_[a].r_cap -= bottleneck;
        const int next = arcs_[a].head;
        if (arcs_[a].r_cap == 0) {
            nodes_[i].parent = kOrphan;
            orphans_.push_front(i);
        }
        i = next;
    }
    flow_ += bottleneck;
}

template <class Cap>
void MaxFlowGraph<Cap>::process_source_orphan(int i) {
    int best_arc = kNone;
    int best_dist = kInfDist;

    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        if (arcs_[sister(a0)].r_cap == 0) continue;
        int j = arcs_[a0].head;
        if (nodes_[j].is_sink || nodes_[j].parent == kNone) continue;

        // Walk to the root to check that j still hangs from the source.
        int d = 0;
        while (true) {
            if (nodes_[j].ts == time_) {
                d += nodes_[j].dist;
                break;
            }
            const int a = nodes_[j].parent;
            ++d;
            if (a == kTerminal) {
                nodes_[j].ts = time_;
                nodes_[j].dist = 1;
                break;
            }
            if (a == kOrphan) {
                d = kInfDist;
                break;
            }
            j = arcs_[a].head;
        }
        if (d == kInfDist) continue;
        if (d < best_dist) {
            best_arc = a0;
            best_dist = d;
        }
        for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
            nodes_[j].ts = time_;
            nodes_[j].dist = d--;
        }
    }

    nodes_[i].parent = best_arc;
    if (best_arc != kNone) {
        nodes_[i].ts = time_;
        nodes_[i].dist = best_dist + 1;
        return;
    }

    nodes_[i].parent = kNone;
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        const int j = arcs_[a0].head;
        Node& nj = nodes_[j];
        if (nj.is_sink || nj.parent == kNone) continue;
        if (arcs_[sister(a0)].r_cap > 0) set_active(j);
        if (nj.parent != kTerminal && nj.parent != kOrphan && arcs_[nj.parent].head == i) {
            nj.parent = kOrphan;
            orphans_.push_back(j);
        }
    }
}

template <class Cap>
void MaxFlowGraph<Cap>::process_sink_orphan(int i) {
    int best_arc = kNone;
    int best_dist = kInfDist;

    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        if (arcs_[a0].r_cap == 0) continue;
        int j = arcs_[a0].head;
        if (!nodes_[j].is_sink || nodes_[j].parent == kNone) continue;

        int d = 0;
        while (true) {
            if (nodes_[j].ts == time_) {
                d += nodes_[j].dist;
                break;
            }
            const int a = nodes_[j].parent;
            ++d;
            if (a == kTerminal) {
                nodes_[j].ts = time_;
                nodes_[j].dist = 1;
                break;
            }
            if (a == kOrphan) {
                d = kInfDist;
                break;
            }
            j = arcs_[a].head;
        }
        if (d == kInfDist) continue;
        if (d < best_dist) {
            best_arc = a0;
            best_dist = d;
        }
        for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
            nodes_[j].ts = time_;
            nodes_[j].dist = d--;
        }
    }

    nodes_[i].parent = best_arc;
    if (best_arc != kNone) {
        nodes_[i].ts = time_;
        nodes_[i].dist = best_dist + 1;
        return;
    }

    nodes_[i].parent = kNone;
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        const int j = arcs_[a0].head;
        Node& nj = nodes_[j];
        if (!nj.is_sink || nj.parent == kNone) continue;
        if (arcs_[a0].r_cap > 0) set_active(j);
        if (nj.parent != kTerminal && nj.parent != kOrphan && arcs_[nj.parent].head == i) {
            nj.parent = kOrphan;
            orphans_.push_back(j);
        }
    }
}

}  // namespace clickmask
