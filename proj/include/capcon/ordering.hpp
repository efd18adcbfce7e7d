#pragma once

#include "capcon/sparse.hpp"

#include <cstddef>
#include <vector>

namespace capcon {

namespace detail {

class NestedDissection {
public:
    NestedDissection(const SparseMatrix& A, std::size_t leaf_size)
        : n_(A.rows()), leaf_(leaf_size), stamp_(A.rows(), 0), level_(A.rows(), 0)
    {
        adj_ptr_.assign(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
                if (A.col_idx()[k] != i)
                    adj_.push_back(A.col_idx()[k]);
            adj_ptr_[i + 1] = adj_.size();
        }
    }

    std::vector<std::size_t> run()
    {
        order_.reserve(n_);
        std::vector<std::size_t> all(n_);
        for (std::size_t i = 0; i < n_; ++i)
            all[i] = i;
        dissect(all);
        return order_;
    }

private:
    // Marks `part` with a fresh stamp so BFS stays inside the subgraph.
    unsigned mark(const std::vector<std::size_t>& part)
    {
        ++counter_;
        for (std::size_t v : part)
            stamp_[v] = counter_;
        return counter_;
    }

    // Level structure rooted at `root`; returns vertices in BFS order and fills level_.
    std::vector<std::size_t> bfs(std::size_t root, unsigned inside, unsigned visited)
    {
        std::vector<std::size_t> queue{root};
        stamp_[root] = visited;
        level_[root] = 0;
        for (std::size_t h = 0; h < queue.size(); ++h) {
            const std::size_t v = queue[h];
            for (std::size_t k = adj_ptr_[v]; k < adj_ptr_[v + 1]; ++k) {
                const std::size_t w = adj_[k];
                if (stamp_[w] == inside) {
                    stamp_[w] = visited;
                    level_[w] = level_[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        return queue;
    }

    void dissect(const std::vector<std::size_t>& part)
    {
        if (part.size() <= leaf_) {
            order_.insert(order_.end(), part.begin(), part.end());
            return;
        }
        unsigned inside = mark(part);
        std::size_t root = part.front();
        std::vector<std::size_t> reach;
        std::size_t depth = 0;
        for (int sweep = 0; sweep < 5; ++sweep) {
            const unsigned visited = ++counter_;
            reach = bfs(root, inside, visited);
            for (std::size_t v : reach)
                stamp_[v] = inside;
            const std::size_t far = reach.back();
            if (sweep > 0 && level_[far] <= depth)
                break;
            depth = level_[far];
            root = far;
        }
        reach = bfs(root, inside, ++counter_);
        depth = level_[reach.back()];

        if (reach.size() < part.size()) {
            // Disconnected: split off the reached component.
            const unsigned visited = stamp_[root];
            std::vector<std::size_t> rest;
            for (std::size_t v : part)
                if (stamp_[v] != visited)
                    rest.push_back(v);
            dissect(reach);
            dissect(rest);
            return;
        }
        if (depth < 2) {
            order_.insert(order_.end(), part.begin(), part.end());
            return;
        }

        std::vector<std::size_t> count(depth + 1, 0);
        for (std::size_t v : reach)
            ++count[level_[v]];
        const double total = static_cast<double>(reach.size());
        std::size_t best = 0;
        std::size_t below = count[0];
        std::size_t crossing = 0;
        for (std::size_t l = 1; l < depth; ++l) {
            const double frac = static_cast<double>(below) / total;
            if (crossing == 0 && static_cast<double>(below + count[l]) >= 0.5 * total)
                crossing = l;
            if (frac >= 0.3 && frac <= 0.6 && (best == 0 || count[l] < count[best]))
                best = l;
            below += count[l];
        }
        if (best == 0)
            best = crossing == 0 ? depth / 2 : crossing;

        std::vector<std::size_t> low, high, sep;
        for (std::size_t v : reach) {
            const std::size_t l = level_[v];
            if (l < best) {
                low.push_back(v);
            } else if (l > best) {
                high.push_back(v);
            } else {
                bool touches_high = false;
                for (std::size_t k = adj_ptr_[v]; k < adj_ptr_[v + 1] && !touches_high; ++k) {
                    const std::size_t w = adj_[k];
                    touches_high = level_[w] == best + 1 && in_part(w, reach);
                }
                (touches_high ? sep : low).push_back(v);
            }
        }
        dissect(low);
        dissect(high);
        order_.insert(order_.end(), sep.begin(), sep.end());
    }

    // After bfs all of `reach` carries the same stamp; level_ of outsiders may be stale.
    bool in_part(std::size_t w, const std::vector<std::size_t>& reach) const
    {
        return stamp_[w] == stamp_[reach.front()];
    }

    std::size_t n_;
    std::size_t leaf_;
    std::vector<std::size_t> adj_ptr_;
    std::vector<std::size_t> adj_;
    std::vector<unsigned> stamp_;
    std::vector<std::size_t> level_;
    std::vector<std::size_t> order_;
    unsigned counter_ = 0;
};

} // namespace detail

/// Fill-reducing permutation by recursive level-structure bisection.
/// Returns `perm` with perm[k] = original index eliminated k-th.
inline std::vector<std::size_t> nested_dissection(const SparseMatrix& A, std::size_t leaf_size = 48)
{
    require(A.rows() == A.cols(), "ordering: matrix not square");
    return detail::NestedDissection(A, leaf_size).run();
}

} // namespace capcon
