#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cdc/system.hpp"

namespace cdc {

// Exclusive file placement: file n is stored by exactly the workers in
// assignment[n-1] and by nobody else (t_{n,S} picks one subset per file).
struct Placement {
    std::vector<WorkerSubset> assignment;  // index n-1 -> S

    WorkerSubset of_file(int file) const { return assignment[file - 1]; }
    int num_files() const { return (int)assignment.size(); }

    // files stored at worker k, ascending
    std::vector<int> stored_files(int worker) const;

    // throws if exactly-one or capacity is violated
    void validate(const SystemConfig& config) const;

    bool operator==(const Placement& o) const { return assignment == o.assignment; }
};

// a_S^D per subset, indexed by subset mask; counts[S] = demanded files placed
// exactly at S.
struct SubsetFileCount {
    std::vector<int> counts;  // size 2^K, index = subset mask

    int at(WorkerSubset s) const { return counts[s.mask]; }
};

struct InfeasibleSplit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Two-group heuristic: files above the split get one single-worker copy each
// (round-robin), then every leftover capacity slot is filled by cycling
// through files 1..split; a file's assignment subset is the set of all
// workers that stored it.
Placement two_file_group_placement(const SystemConfig& config, int split);

// file n -> singleton {((n-1) mod K)+1}, advancing past exhausted workers
Placement round_robin_placement(const SystemConfig& config);

SubsetFileCount subset_file_counts(const Placement& placement, JobDemand demand,
                                   int num_workers);

// dense indicator family t[n-1][S mask]
std::vector<std::vector<int>> placement_to_indicators(const Placement& placement,
                                                      int num_workers);
Placement indicators_to_placement(const std::vector<std::vector<int>>& indicators);

// one line per file: "n: subset-mask" (decimal)
std::string serialize_placement(const Placement& placement);
Placement parse_placement(std::istream& in);

}  // namespace cdc
