// Graph-based outlier rejection.
//
// Correspondences are vertices; two are adjacent when they preserve the
// distance between their endpoints up to 2 * noise_bound. Inliers under a
// common rigid motion form a clique, so a large clique is kept.

#ifndef QUATRO_PRUNING_HPP
#define QUATRO_PRUNING_HPP

#include "quatro/config.hpp"
#include "quatro/core.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

namespace quatro {

class CompatGraph {
public:
    explicit CompatGraph(std::size_t num_vertices = 0) : adj_(num_vertices) {}

    std::size_t num_vertices() const { return adj_.size(); }

    std::size_t num_edges() const {
        std::size_t e = 0;
        for (const auto &a : adj_) e += a.size();
        return e / 2;
    }

    /// Adds u-v once; self loops and duplicates are ignored.
    void add_edge(std::size_t u, std::size_t v) {
        if (u == v || u >= adj_.size() || v >= adj_.size()) return;
        insert_sorted(adj_[u], v);
        insert_sorted(adj_[v], u);
    }

    bool has_edge(std::size_t u, std::size_t v) const {
        const auto &a = adj_[u];
        return std::binary_search(a.begin(), a.end(), v);
    }

    const std::vector<std::size_t> &neighbors(std::size_t v) const { return adj_[v]; }

    bool is_clique(const std::vector<std::size_t> &vertices) const {
        for (std::size_t a = 0; a < vertices.size(); ++a)
            for (std::size_t b = a + 1; b < vertices.size(); ++b)
                if (!has_edge(vertices[a], vertices[b])) return false;
        return true;
    }

    /// Appends without the sorted insert; call `finalize` afterwards.
    void append_edge_unsorted(std::size_t u, std::size_t v) {
        adj_[u].push_back(v);
        adj_[v].push_back(u);
    }

    void finalize() {
        for (auto &a : adj_) {
            if (!std::is_sorted(a.begin(), a.end())) std::sort(a.begin(), a.end());
            a.erase(std::unique(a.begin(), a.end()), a.end());
        }
    }

private:
    static void insert_sorted(std::vector<std::size_t> &v, std::size_t x) {
        auto it = std::lower_bound(v.begin(), v.end(), x);
        if (it == v.end() || *it != x) v.insert(it, x);
    }

    std::vector<std::vector<std::size_t>> adj_;
};

/// Edge iff | |p_i - p_i'| - |q_j - q_j'| | <= 2 * noise_bound.
inline CompatGraph build_compat_graph(const PointCloud &src, const PointCloud &tgt, const CorrespondenceSet &corr,
                                      double noise_bound) {
    corr.check_bounds(src.size(), tgt.size());
    const std::size_t n = corr.size();
    CompatGraph g(n);
    const double bound = 2.0 * noise_bound;
    std::vector<Point3> ps(n), qs(n);
    for (std::size_t a = 0; a < n; ++a) {
        ps[a] = src[corr[a].src_idx];
        qs[a] = tgt[corr[a].tgt_idx];
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double ds = (ps[b] - ps[a]).norm();
            const double dt = (qs[b] - qs[a]).norm();
            if (std::abs(ds - dt) <= bound) g.append_edge_unsorted(a, b);
        }
    }
    g.finalize();
    return g;
}

/// Stops the clique search after a wall-clock time and/or a number of node
/// expansions. An empty budget is unlimited.
struct SearchBudget {
    std::optional<double> time_ms;
    std::optional<std::uint64_t> max_expansions;

    static SearchBudget unlimited() { return {}; }
    static SearchBudget time(double ms) { return {ms, std::nullopt}; }
    static SearchBudget expansions(std::uint64_t n) { return {std::nullopt, n}; }
};

struct CliqueResult {
    std::vector<std::size_t> vertices;  // sorted
    bool exhausted = true;              // false when the budget cut the search short
    std::uint64_t expansions = 0;
};

namespace detail {

/// Core numbers and a degeneracy (smallest-last) ordering.
inline void core_decomposition(const CompatGraph &g, std::vector<int> &core, std::vector<std::size_t> &order) {
    const std::size_t n = g.num_vertices();
    std::vector<int> deg(n);
    int max_deg = 0;
    for (std::size_t v = 0; v < n; ++v) {
        deg[v] = static_cast<int>(g.neighbors(v).size());
        max_deg = std::max(max_deg, deg[v]);
    }
    std::vector<std::size_t> bin(static_cast<std::size_t>(max_deg) + 1, 0);
    for (std::size_t v = 0; v < n; ++v) ++bin[static_cast<std::size_t>(deg[v])];
    std::size_t start = 0;
    for (auto &b : bin) {
        const std::size_t c = b;
        b = start;
        start += c;
    }
    std::vector<std::size_t> pos(n), vert(n);
    for (std::size_t v = 0; v < n; ++v) {
        pos[v] = bin[static_cast<std::size_t>(deg[v])]++;
        vert[pos[v]] = v;
    }
    for (std::size_t d = bin.size() - 1; d > 0; --d) bin[d] = bin[d - 1];
    if (!bin.empty()) bin[0] = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t v = vert[i];
        for (std::size_t u : g.neighbors(v)) {
            if (deg[u] > deg[v]) {
                const auto du = static_cast<std::size_t>(deg[u]);
                const std::size_t pu = pos[u];
                const std::size_t pw = bin[du];
                const std::size_t w = vert[pw];
                if (u != w) {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                ++bin[du];
                --deg[u];
            }
        }
    }
    core = std::move(deg);
    order = std::move(vert);
}

class BitSet {
public:
    BitSet() = default;
    explicit BitSet(std::size_t n) : words_((n + 63) / 64, 0) {}
    void set(std::size_t i) { words_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
    void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    bool any() const {
        for (auto w : words_)
            if (w) return true;
        return false;
    }
    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
        return c;
    }
    void and_with(const BitSet &o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
    }
    template <typename F>
    void for_each(F &&f) const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t x = words_[w];
            while (x) {
                const int b = __builtin_ctzll(x);
                f(w * 64 + static_cast<std::size_t>(b));
                x &= x - 1;
            }
        }
    }

private:
    std::vector<std::uint64_t> words_;
};

/// Branch and bound over a local subgraph with greedy colouring bounds.
class CliqueSearch {
public:
    CliqueSearch(const CompatGraph &g, const SearchBudget &budget) : g_(g), budget_(budget) {
        if (budget_.time_ms)
            deadline_ = std::chrono::steady_clock::now() +
                        std::chrono::microseconds(static_cast<std::int64_t>(*budget_.time_ms * 1000.0));
    }

    CliqueResult run() {
        CliqueResult res;
        const std::size_t n = g_.num_vertices();
        if (n == 0) return res;

        std::vector<int> core;
        std::vector<std::size_t> order;
        core_decomposition(g_, core, order);
        local_pos_.assign(n, -1);
        std::vector<std::size_t> rank(n);
        for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;

        // Greedy seed in decreasing core order. A vertex is skipped once its
        // core number cannot beat the best clique strictly.
        best_ = {order.back()};
        std::vector<std::size_t> cand, next;
        std::vector<char> mark(n, 0);
        for (std::size_t i = n; i-- > 0;) {
            const std::size_t v = order[i];
            if (static_cast<std::size_t>(core[v]) + 1 <= best_.size()) continue;
            if (time_up()) {
                stopped_ = true;
                break;
            }
            std::vector<std::size_t> clique{v};
            cand.clear();
            for (std::size_t u : g_.neighbors(v))
                if (static_cast<std::size_t>(core[u]) >= best_.size()) cand.push_back(u);
            std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return core[a] > core[b]; });
            while (!cand.empty()) {
                const std::size_t u = cand.front();
                clique.push_back(u);
                for (std::size_t w : g_.neighbors(u)) mark[w] = 1;
                next.clear();
                for (std::size_t k = 1; k < cand.size(); ++k)
                    if (mark[cand[k]]) next.push_back(cand[k]);
                for (std::size_t w : g_.neighbors(u)) mark[w] = 0;
                cand.swap(next);
            }
            offer(clique);
        }
        // Exact search: each clique is enumerated from its lowest-ranked vertex.
        for (std::size_t i = n; i-- > 0 && !stopped_;) {
            const std::size_t v = order[i];
            if (static_cast<std::size_t>(core[v]) + 1 < best_.size()) continue;
            local_.clear();
            for (std::size_t u : g_.neighbors(v))
                if (rank[u] > rank[v] && static_cast<std::size_t>(core[u]) + 1 >= best_.size()) local_.push_back(u);
            if (local_.size() + 1 < best_.size()) continue;
            if (time_up()) {
                stopped_ = true;
                break;
            }
            std::sort(local_.begin(), local_.end());
            const std::size_t m = local_.size();
            local_adj_.assign(m, BitSet(m));
            for (std::size_t a = 0; a < m; ++a) local_pos_[local_[a]] = static_cast<std::int64_t>(a);
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t u : g_.neighbors(local_[a]))
                    if (local_pos_[u] >= 0) local_adj_[a].set(static_cast<std::size_t>(local_pos_[u]));
            for (std::size_t u : local_) local_pos_[u] = -1;
            BitSet p(m);
            for (std::size_t a = 0; a < m; ++a) p.set(a);
            current_ = {v};
            expand(p);
        }
        res.vertices = best_;
        res.exhausted = !stopped_;
        res.expansions = expansions_;
        return res;
    }

private:
    bool out_of_budget() {
        if (budget_.max_expansions && expansions_ >= *budget_.max_expansions) return true;
        return time_up();
    }

    bool time_up() const { return budget_.time_ms && std::chrono::steady_clock::now() >= deadline_; }

    /// Larger wins; equal sizes keep the lexicographically smaller sorted set.
    void offer(std::vector<std::size_t> clique) {
        std::sort(clique.begin(), clique.end());
        if (clique.size() > best_.size() || (clique.size() == best_.size() && clique < best_)) best_ = std::move(clique);
    }

    void expand(BitSet p) {
        if (stopped_) return;
        ++expansions_;
        if (out_of_budget()) {
            stopped_ = true;
            return;
        }
        if (!p.any()) {
            std::vector<std::size_t> clique;
            clique.reserve(current_.size());
            for (std::size_t k = 0; k < current_.size(); ++k)
                clique.push_back(k == 0 ? current_[0] : local_[current_[k]]);
            offer(std::move(clique));
            return;
        }
        // Only a clique spanning all of p can reach the best size.
        const std::size_t remaining = p.count();
        if (current_.size() + remaining < best_.size()) return;
        if (current_.size() + remaining == best_.size()) {
            bool complete = true;
            p.for_each([&](std::size_t x) {
                if (!complete) return;
                BitSet rest = p;
                rest.reset(x);
                BitSet both = rest;
                both.and_with(local_adj_[x]);
                complete = both.count() == rest.count();
            });
            if (!complete) return;
            std::vector<std::size_t> clique{current_[0]};
            for (std::size_t k = 1; k < current_.size(); ++k) clique.push_back(local_[current_[k]]);
            p.for_each([&](std::size_t x) { clique.push_back(local_[x]); });
            offer(std::move(clique));
            return;
        }
        // Greedy colouring gives an upper bound per vertex.
        std::vector<std::size_t> verts;
        std::vector<int> colors;
        {
            BitSet uncolored = p;
            int color = 0;
            while (uncolored.any()) {
                ++color;
                BitSet q = uncolored;
                while (q.any()) {
                    std::size_t first = 0;
                    bool found = false;
                    q.for_each([&](std::size_t x) {
                        if (!found) {
                            first = x;
                            found = true;
                        }
                    });
                    q.reset(first);
                    uncolored.reset(first);
                    verts.push_back(first);
                    colors.push_back(color);
                    q.for_each([&](std::size_t x) {
                        if (local_adj_[first].test(x)) q.reset(x);
                    });
                }
            }
        }
        for (std::size_t k = verts.size(); k-- > 0;) {
            if (current_.size() + static_cast<std::size_t>(colors[k]) < best_.size()) return;
            const std::size_t x = verts[k];
            BitSet np = p;
            np.and_with(local_adj_[x]);
            current_.push_back(x);
            expand(np);
            current_.pop_back();
            if (stopped_) return;
            p.reset(x);
        }
    }

    const CompatGraph &g_;
    SearchBudget budget_;
    std::chrono::steady_clock::time_point deadline_{};
    std::uint64_t expansions_ = 0;
    bool stopped_ = false;
    std::vector<std::size_t> best_;
    std::vector<std::size_t> current_;  // current_[0] is a global id, the rest index local_
    std::vector<std::size_t> local_;
    std::vector<BitSet> local_adj_;
    std::vector<std::int64_t> local_pos_;  // global id -> index in local_, or -1
};

}  // namespace detail

/// Largest clique found within the budget. The result is always a clique;
/// it is a maximum clique when `exhausted` is true.
inline CliqueResult max_clique_heuristic(const CompatGraph &graph, const SearchBudget &budget) {
    return detail::CliqueSearch(graph, budget).run();
}

inline SearchBudget clique_budget(const QuatroConfig &config) {
    if (config.deterministic) return SearchBudget::expansions(config.clique_node_budget);
    if (config.clique_time_budget <= 0.0) return SearchBudget::unlimited();
    return SearchBudget::time(config.clique_time_budget);
}

/// Keeps the correspondences of the selected clique, in their original order.
inline CorrespondenceSet prune(const CorrespondenceSet &raw, const PointCloud &src, const PointCloud &tgt,
                               const QuatroConfig &config) {
    if (raw.size() <= 1) return raw;
    const CompatGraph g = build_compat_graph(src, tgt, raw, config.noise_bound);
    const auto clique = max_clique_heuristic(g, clique_budget(config));
    std::vector<Correspondence> kept;
    kept.reserve(clique.vertices.size());
    for (std::size_t v : clique.vertices) kept.push_back(raw[v]);
    return CorrespondenceSet(std::move(kept));
}

}  // namespace quatro

#endif  // QUATRO_PRUNING_HPP
