#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <vector>

#include "sparse.hpp"

namespace rwc {

struct InducedGraph {
    std::vector<std::vector<std::size_t>> adjacency;

    std::size_t size() const { return adjacency.size(); }
    std::size_t degree(std::size_t i) const { return adjacency[i].size(); }

    std::size_t max_degree() const {
        std::size_t d = 0;
        for (const auto& a : adjacency) d = std::max(d, a.size());
        return d;
    }

    std::size_t edge_count() const {
        std::size_t c = 0;
        for (const auto& a : adjacency) c += a.size();
        return c / 2;
    }

    // Connected components as sorted node lists, ordered by smallest node.
    std::vector<std::vector<std::size_t>> components() const {
        std::vector<std::vector<std::size_t>> out;
        std::vector<char> seen(size(), 0);
        std::vector<std::size_t> stack;
        for (std::size_t s = 0; s < size(); ++s) {
            if (seen[s]) continue;
            std::vector<std::size_t> comp;
            stack.push_back(s);
            seen[s] = 1;
            while (!stack.empty()) {
                auto v = stack.back();
                stack.pop_back();
                comp.push_back(v);
                for (auto u : adjacency[v])
                    if (!seen[u]) {
                        seen[u] = 1;
                        stack.push_back(u);
                    }
            }
            std::sort(comp.begin(), comp.end());
            out.push_back(std::move(comp));
        }
        return out;
    }
};

inline InducedGraph induced_graph(const SparseSymMatrix& omega) {
    InducedGraph g;
    g.adjacency.resize(omega.dim());
    for (std::size_t i = 0; i < omega.dim(); ++i)
        for (const auto& e : omega.row(i)) g.adjacency[i].push_back(e.col);
    return g;
}

inline std::size_t sparsity_degree(const SparseSymMatrix& omega) { return omega.sparsity_degree(); }

struct Coloring {
    std::vector<std::size_t> color;
    std::size_t num_colors = 0;
};

// Smallest free color, nodes in natural order; uses at most max_degree + 1 colors.
inline Coloring greedy_coloring(const InducedGraph& g) {
    Coloring c;
    c.color.assign(g.size(), 0);
    std::vector<std::size_t> mark(g.max_degree() + 2, static_cast<std::size_t>(-1));
    for (std::size_t v = 0; v < g.size(); ++v) {
        for (auto u : g.adjacency[v])
            if (u < v) mark[c.color[u]] = v;
        std::size_t k = 0;
        while (mark[k] == v) ++k;
        c.color[v] = k;
        c.num_colors = std::max(c.num_colors, k + 1);
    }
    if (g.size() == 0) c.num_colors = 0;
    return c;
}

inline bool is_proper(const InducedGraph& g, const Coloring& c) {
    for (std::size_t v = 0; v < g.size(); ++v)
        for (auto u : g.adjacency[v])
            if (c.color[u] == c.color[v]) return false;
    return true;
}

inline void write_coloring_csv(std::ostream& os, const Coloring& c) {
    os << "node,color\n";
    for (std::size_t v = 0; v < c.color.size(); ++v) os << v << ',' << c.color[v] << '\n';
}

}  // namespace rwc
