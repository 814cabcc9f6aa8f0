#include "cdc/placement.hpp"

#include <istream>
#include <sstream>
#include <stdexcept>

namespace cdc {

std::vector<int> Placement::stored_files(int worker) const {
    std::vector<int> out;
    for (int n = 1; n <= num_files(); ++n)
        if (assignment[n - 1].contains(worker)) out.push_back(n);
    return out;
}

void Placement::validate(const SystemConfig& config) const {
    if ((int)assignment.size() != config.num_files)
        throw std::invalid_argument("placement: wrong number of files");
    for (int n = 1; n <= config.num_files; ++n) {
        WorkerSubset s = assignment[n - 1];
        if (s.empty() || s.mask >= (1u << config.num_workers))
            throw std::invalid_argument("placement: file " + std::to_string(n) +
                                        " has invalid subset");
    }
    for (int k = 1; k <= config.num_workers; ++k) {
        int stored = (int)stored_files(k).size();
        if (stored > config.mapping_loads[k - 1])
            throw std::invalid_argument("placement: worker " + std::to_string(k) +
                                        " over capacity");
    }
}

Placement two_file_group_placement(const SystemConfig& config, int split) {
    config.validate();
    int K = config.num_workers, N = config.num_files;
    if (split < 1 || split > N) throw std::invalid_argument("two_file_group: split out of range");

    std::vector<int> cap = config.mapping_loads;
    std::vector<std::vector<bool>> stores(K, std::vector<bool>(N + 1, false));

    // group 2: one singleton copy per file, round-robin from worker 1,
    // rescanning past exhausted workers
    int k = 0;
    for (int n = split + 1; n <= N; ++n) {
        bool placed = false;
        for (int probe = 0; probe < K; ++probe) {
            if (cap[k] > 0) {
                stores[k][n] = true;
                --cap[k];
                k = (k + 1) % K;
                placed = true;
                break;
            }
            k = (k + 1) % K;
        }
        if (!placed) throw InfeasibleSplit("two_file_group: no capacity for group-2 file");
    }

    // group 1: leftover slots cycle through files 1..split, cycle position
    // carried across workers
    int n_pos = 0;
    for (int kk = 0; kk < K; ++kk) {
        if (cap[kk] <= 0) continue;
        for (int m = 1; m <= cap[kk]; ++m) stores[kk][((n_pos + m - 1) % split) + 1] = true;
        n_pos = (cap[kk] + n_pos) % split;
    }

    Placement out;
    out.assignment.resize(N);
    for (int n = 1; n <= N; ++n) {
        uint32_t mask = 0;
        for (int kk = 0; kk < K; ++kk)
            if (stores[kk][n]) mask |= 1u << kk;
        if (mask == 0) throw InfeasibleSplit("two_file_group: group-1 file received no copy");
        out.assignment[n - 1] = WorkerSubset(mask);
    }
    out.validate(config);
    return out;
}

Placement round_robin_placement(const SystemConfig& config) {
    config.validate();
    int K = config.num_workers, N = config.num_files;
    std::vector<int> cap = config.mapping_loads;
    Placement out;
    out.assignment.resize(N);
    for (int n = 1; n <= N; ++n) {
        int w = (n - 1) % K;
        int probe = 0;
        while (cap[w] == 0) {
            w = (w + 1) % K;
            if (++probe > K) throw std::invalid_argument("round_robin: capacity exhausted");
        }
        --cap[w];
        out.assignment[n - 1] = WorkerSubset(1u << w);
    }
    out.validate(config);
    return out;
}

SubsetFileCount subset_file_counts(const Placement& placement, JobDemand demand,
                                   int num_workers) {
    SubsetFileCount out;
    out.counts.assign(size_t(1) << num_workers, 0);
    for (int n = 1; n <= placement.num_files(); ++n)
        if (demand.contains(n)) ++out.counts[placement.of_file(n).mask];
    return out;
}

std::vector<std::vector<int>> placement_to_indicators(const Placement& placement,
                                                      int num_workers) {
    std::vector<std::vector<int>> t(placement.num_files(),
                                    std::vector<int>(size_t(1) << num_workers, 0));
    for (int n = 1; n <= placement.num_files(); ++n) t[n - 1][placement.of_file(n).mask] = 1;
    return t;
}

Placement indicators_to_placement(const std::vector<std::vector<int>>& indicators) {
    Placement out;
    out.assignment.resize(indicators.size());
    for (size_t n = 0; n < indicators.size(); ++n) {
        int hits = 0;
        for (size_t mask = 1; mask < indicators[n].size(); ++mask) {
            if (indicators[n][mask]) {
                out.assignment[n] = WorkerSubset((uint32_t)mask);
                ++hits;
            }
        }
        if (hits != 1 || indicators[n][0] != 0)
            throw std::invalid_argument("indicators: file must pick exactly one subset");
    }
    return out;
}

std::string serialize_placement(const Placement& placement) {
    std::ostringstream out;
    for (int n = 1; n <= placement.num_files(); ++n)
        out << n << ": " << placement.of_file(n).mask << "\n";
    return out.str();
}

Placement parse_placement(std::istream& in) {
    Placement out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("placement parse: missing ':' in '" + line + "'");
        int file = std::stoi(line.substr(0, colon));
        uint32_t mask = (uint32_t)std::stoul(line.substr(colon + 1));
        if (file < 1 || mask == 0) throw std::invalid_argument("placement parse: bad entry");
        if ((int)out.assignment.size() < file) out.assignment.resize(file);
        out.assignment[file - 1] = WorkerSubset(mask);
    }
    for (const WorkerSubset& s : out.assignment)
        if (s.empty()) throw std::invalid_argument("placement parse: missing file line");
    return out;
}

}  // namespace cdc
