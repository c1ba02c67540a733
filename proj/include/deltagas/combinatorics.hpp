#pragma once

#include <cstdint>
#include <vector>

namespace deltagas {

/// Ordered composition (n_1, ..., n_M) of n with positive parts. Carries the
/// derived consecutive index blocks and the within-block rank map.
class ClusterComposition {
public:
    ClusterComposition(int n, std::vector<int> parts);

    int n() const { return n_; }
    int cluster_count() const { return static_cast<int>(parts_.size()); }
    const std::vector<int>& parts() const { return parts_; }

    /// Block j as the half-open 1-based range [offset(j)+1, offset(j)+parts[j]].
    int offset(int j) const { return offsets_[static_cast<std::size_t>(j)]; }
    /// Cluster index j (0-based) containing the 1-based element a.
    int cluster_of(int a) const { return cluster_of_[static_cast<std::size_t>(a - 1)]; }
    /// Rank of a within its block, 1-based: r(offset(j)+s) = s.
    int rank(int a) const { return a - offset(cluster_of(a)); }

    /// Blocks as explicit element lists (1-based).
    std::vector<std::vector<int>> clusters() const;
    /// r(a) for a = 1..n.
    std::vector<int> rank_table() const;

private:
    int n_;
    std::vector<int> parts_;
    std::vector<int> offsets_;
    std::vector<int> cluster_of_;
};

/// Set partition of {1..n} with block sizes prescribed by a composition.
/// Blocks are stored in a caller-visible canonical order (sorted by minimum
/// among equal-size groups; sizes follow the composition slots).
struct ClusterPartition {
    ClusterComposition base;
    std::vector<std::vector<int>> blocks; // blocks[j] sorted ascending, |blocks[j]| = parts[j]
    /// Downward rank within the block: 0 for the largest element,
    /// |block|-1 for the smallest.
    int down_rank(int a) const;
};

enum class PermutationClassKind {
    IncreasingWithinBlocks, // sigma^-1 increasing on every block
    DecreasingWithinBlocks, // tau^-1 decreasing on every block
};

/// Full enumeration cap for permutation/partition listings (8! = 40320).
inline constexpr int kEnumerationCap = 8;

/// All compositions of n, grouped by part count and lexicographic in the
/// parts within each count. Total 2^(n-1).
std::vector<ClusterComposition> enumerate_compositions(int n);

/// Permutations of the requested class, one-line form p[i] = value at
/// position i (0-based storage of a 1-based permutation), lexicographic.
/// Count is the multinomial coefficient n!/(n_1!...n_M!).
std::vector<std::vector<int>> enumerate_restricted_permutations(
    const ClusterComposition& c, PermutationClassKind kind);

/// All set partitions of {1..n} whose block-size sequence matches the
/// composition slots, each unordered partition listed exactly once.
std::vector<ClusterPartition> enumerate_partitions(const ClusterComposition& c);

/// The permutation tau with decreasing one-line restriction to every block,
/// determined by blocks[j] = tau^-1(Omega_j) and 1 + down_rank(a) = r(tau(a)).
std::vector<int> partition_to_tau(const ClusterPartition& p);

/// Within-block reversal: exchanges a,b in the same block when
/// r(a) + r(b) = n_j + 1. Composing it with a decreasing-class permutation
/// yields an increasing-class one and vice versa.
std::vector<int> block_reversal(const ClusterComposition& c);

std::vector<int> invert_permutation(const std::vector<int>& p);
std::vector<int> compose_permutations(const std::vector<int>& p, const std::vector<int>& q);

std::uint64_t multinomial(int n, const std::vector<int>& parts);

} // namespace deltagas
