#include "deltagas/combinatorics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "deltagas/errors.hpp"

namespace deltagas {

namespace {
constexpr int kCompositionCap = 16;
} // namespace

ClusterComposition::ClusterComposition(int n, std::vector<int> parts)
    : n_(n), parts_(std::move(parts)) {
    if (n <= 0) throw invalid_argument("composition: n must be positive");
    if (parts_.empty() || static_cast<int>(parts_.size()) > n)
        throw invalid_argument("composition: need 1 <= M <= n parts");
    int sum = 0;
    for (int p : parts_) {
        if (p < 1) throw invalid_argument("composition: parts must be >= 1");
        sum += p;
    }
    if (sum != n) throw invalid_argument("composition: parts must sum to n");

    offsets_.resize(parts_.size());
    cluster_of_.resize(static_cast<std::size_t>(n));
    int off = 0;
    for (std::size_t j = 0; j < parts_.size(); ++j) {
        offsets_[j] = off;
        for (int s = 1; s <= parts_[j]; ++s) cluster_of_[static_cast<std::size_t>(off + s - 1)] = static_cast<int>(j);
        off += parts_[j];
    }
}

std::vector<std::vector<int>> ClusterComposition::clusters() const {
    std::vector<std::vector<int>> out(parts_.size());
    for (std::size_t j = 0; j < parts_.size(); ++j) {
        out[j].resize(static_cast<std::size_t>(parts_[j]));
        std::iota(out[j].begin(), out[j].end(), offsets_[j] + 1);
    }
    return out;
}

std::vector<int> ClusterComposition::rank_table() const {
    std::vector<int> r(static_cast<std::size_t>(n_));
    for (int a = 1; a <= n_; ++a) r[static_cast<std::size_t>(a - 1)] = rank(a);
    return r;
}

int ClusterPartition::down_rank(int a) const {
    for (const auto& block : blocks) {
        auto it = std::find(block.begin(), block.end(), a);
        if (it != block.end()) {
            // blocks are sorted ascending; rank counts down from the largest
            return static_cast<int>(block.size()) - 1 -
                   static_cast<int>(it - block.begin());
        }
    }
    throw invalid_argument("down_rank: element not in partition");
}

std::vector<ClusterComposition> enumerate_compositions(int n) {
    if (n <= 0) throw invalid_argument("enumerate_compositions: n must be positive");
    if (n > kCompositionCap)
        throw invalid_argument("enumerate_compositions: n exceeds cap " +
                               std::to_string(kCompositionCap));
    std::vector<ClusterComposition> out;
    // grouped by part count M, lexicographic in parts within each M
    std::vector<int> parts;
    auto rec = [&](auto&& self, int remaining, int slots) -> void {
        if (slots == 1) {
            parts.push_back(remaining);
            out.emplace_back(n, parts);
            parts.pop_back();
            return;
        }
        for (int v = 1; v <= remaining - (slots - 1); ++v) {
            parts.push_back(v);
            self(self, remaining - v, slots - 1);
            parts.pop_back();
        }
    };
    for (int M = 1; M <= n; ++M) rec(rec, n, M);
    return out;
}

std::vector<std::vector<int>> enumerate_restricted_permutations(
    const ClusterComposition& c, PermutationClassKind kind) {
    const int n = c.n();
    if (n > kEnumerationCap)
        throw resource_limit("enumerate_restricted_permutations: n exceeds cap " +
                             std::to_string(kEnumerationCap));
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 1);
    std::vector<std::vector<int>> out;
    do {
        const std::vector<int> inv = invert_permutation(p);
        bool ok = true;
        for (int j = 0; j < c.cluster_count() && ok; ++j) {
            const int off = c.offset(j);
            for (int s = 1; s < c.parts()[static_cast<std::size_t>(j)] && ok; ++s) {
                const int a = off + s, b = off + s + 1; // consecutive elements of the block
                const bool incr = inv[static_cast<std::size_t>(a - 1)] < inv[static_cast<std::size_t>(b - 1)];
                ok = (kind == PermutationClassKind::IncreasingWithinBlocks) ? incr : !incr;
            }
        }
        if (ok) out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

std::vector<ClusterPartition> enumerate_partitions(const ClusterComposition& c) {
    const int n = c.n();
    if (n > kEnumerationCap)
        throw resource_limit("enumerate_partitions: n exceeds cap " +
                             std::to_string(kEnumerationCap));
    const auto& parts = c.parts();
    const int M = c.cluster_count();

    std::vector<ClusterPartition> out;
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(M));
    std::vector<bool> used(static_cast<std::size_t>(n), false);

    // Assign a block to each slot in turn; slots with equal size must receive
    // blocks with increasing minima so each unordered partition appears once.
    auto rec = [&](auto&& self, int slot) -> void {
        if (slot == M) {
            out.push_back(ClusterPartition{c, blocks});
            return;
        }
        const int size = parts[static_cast<std::size_t>(slot)];
        // among slots of equal size, block minima must increase (equal-size
        // slots need not be adjacent in the composition)
        int min_allowed = 0;
        for (int prev = slot - 1; prev >= 0; --prev)
            if (parts[static_cast<std::size_t>(prev)] == size) {
                min_allowed = blocks[static_cast<std::size_t>(prev)].front();
                break;
            }

        // choose the block's minimum first, then the remaining elements above it
        for (int first = min_allowed + 1; first <= n; ++first) {
            if (used[static_cast<std::size_t>(first - 1)]) continue;
            std::vector<int> chosen{first};
            used[static_cast<std::size_t>(first - 1)] = true;
            auto pick = [&](auto&& pick_ref, int from, int need) -> void {
                if (need == 0) {
                    blocks[static_cast<std::size_t>(slot)] = chosen;
                    self(self, slot + 1);
                    return;
                }
                for (int e = from; e <= n; ++e) {
                    if (used[static_cast<std::size_t>(e - 1)]) continue;
                    chosen.push_back(e);
                    used[static_cast<std::size_t>(e - 1)] = true;
                    pick_ref(pick_ref, e + 1, need - 1);
                    used[static_cast<std::size_t>(e - 1)] = false;
                    chosen.pop_back();
                }
            };
            pick(pick, first + 1, size - 1);
            used[static_cast<std::size_t>(first - 1)] = false;
        }
    };
    rec(rec, 0);
    return out;
}

std::vector<int> partition_to_tau(const ClusterPartition& p) {
    const ClusterComposition& c = p.base;
    std::vector<int> tau(static_cast<std::size_t>(c.n()));
    for (int j = 0; j < c.cluster_count(); ++j) {
        const auto& block = p.blocks[static_cast<std::size_t>(j)];
        const int off = c.offset(j);
        // largest element of the block maps to the first slot of the cluster
        const int sz = static_cast<int>(block.size());
        for (int i = 0; i < sz; ++i) {
            const int a = block[static_cast<std::size_t>(sz - 1 - i)];
            tau[static_cast<std::size_t>(a - 1)] = off + 1 + i;
        }
    }
    return tau;
}

std::vector<int> block_reversal(const ClusterComposition& c) {
    std::vector<int> rev(static_cast<std::size_t>(c.n()));
    for (int a = 1; a <= c.n(); ++a) {
        const int j = c.cluster_of(a);
        const int nj = c.parts()[static_cast<std::size_t>(j)];
        rev[static_cast<std::size_t>(a - 1)] = c.offset(j) + (nj + 1 - c.rank(a));
    }
    return rev;
}

std::vector<int> invert_permutation(const std::vector<int>& p) {
    std::vector<int> inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        inv[static_cast<std::size_t>(p[i] - 1)] = static_cast<int>(i) + 1;
    return inv;
}

std::vector<int> compose_permutations(const std::vector<int>& p, const std::vector<int>& q) {
    std::vector<int> r(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        r[i] = p[static_cast<std::size_t>(q[i] - 1)];
    return r;
}

std::uint64_t multinomial(int n, const std::vector<int>& parts) {
    std::uint64_t result = 1;
    int filled = 0;
    for (int p : parts) {
        for (int i = 1; i <= p; ++i) {
            result = result * static_cast<std::uint64_t>(++filled) / static_cast<std::uint64_t>(i);
        }
    }
    (void)n;
    return result;
}

} // namespace deltagas
