#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace cdc {

// Non-empty subset of workers {1..K}, bit (k-1) set iff worker k is a member.
// Canonical ordering everywhere = ascending bitmask integer.
struct WorkerSubset {
    uint32_t mask = 0;

    WorkerSubset() = default;
    explicit WorkerSubset(uint32_t m) : mask(m) {}

    int size() const { return std::popcount(mask); }
    bool contains(int worker) const { return (mask >> (worker - 1)) & 1u; }
    WorkerSubset without(int worker) const { return WorkerSubset(mask & ~(1u << (worker - 1))); }
    WorkerSubset with(int worker) const { return WorkerSubset(mask | (1u << (worker - 1))); }
    bool empty() const { return mask == 0; }

    // members in ascending worker index
    std::vector<int> members() const {
        std::vector<int> out;
        for (uint32_t m = mask; m; m &= m - 1) out.push_back(std::countr_zero(m) + 1);
        return out;
    }

    bool operator==(const WorkerSubset& o) const { return mask == o.mask; }
    bool operator!=(const WorkerSubset& o) const { return mask != o.mask; }
    bool operator<(const WorkerSubset& o) const { return mask < o.mask; }
};

// Non-empty demanded file set, bit (n-1) set iff file n is demanded.
struct JobDemand {
    uint32_t mask = 0;

    JobDemand() = default;
    explicit JobDemand(uint32_t m) : mask(m) {}

    int size() const { return std::popcount(mask); }
    bool contains(int file) const { return (mask >> (file - 1)) & 1u; }

    std::vector<int> files() const {
        std::vector<int> out;
        for (uint32_t m = mask; m; m &= m - 1) out.push_back(std::countr_zero(m) + 1);
        return out;
    }

    bool operator==(const JobDemand& o) const { return mask == o.mask; }
};

// All subsets of {1..K} with popcount >= min_size, ascending bitmask order.
inline std::vector<WorkerSubset> enumerate_worker_subsets(int num_workers, int min_size) {
    std::vector<WorkerSubset> out;
    uint32_t first = (min_size == 0) ? 0 : 1;
    for (uint32_t m = first; m < (1u << num_workers); ++m)
        if (std::popcount(m) >= min_size) out.push_back(WorkerSubset(m));
    return out;
}

}  // namespace cdc
