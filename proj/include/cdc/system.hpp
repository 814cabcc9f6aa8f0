#pragma once

#include <vector>

#include "cdc/rational.hpp"
#include "cdc/subsets.hpp"

namespace cdc {

// K workers, N files. All loads expressed in units of TQ bits; Q and T stay
// abstract here and are made concrete only by the simulator.
struct SystemConfig {
    int num_workers = 0;                  // K
    int num_files = 0;                    // N
    std::vector<int> mapping_loads;       // M_k, length K
    std::vector<Rational> reducing_loads; // W_k, length K, sums to 1 exactly
    std::vector<double> popularity;       // p_n, length N, non-increasing

    // exact view of the popularity vector used by all rational arithmetic
    std::vector<Rational> popularity_exact() const {
        std::vector<Rational> out;
        out.reserve(popularity.size());
        for (double p : popularity) out.push_back(rational_from_double(p));
        return out;
    }

    void validate() const;
};

// p_n = n^-theta / sum_i i^-theta
std::vector<double> zipf_popularity(int num_files, double theta);

// Independent-access job model: p_D = prod_{n in D} p_n * prod_{n not in D} (1-p_n),
// conditioned on D non-empty.
Rational job_probability(JobDemand demand, const std::vector<Rational>& popularity);

// All 2^N-1 values indexed by demand mask (index 0 unused, set to 0).
std::vector<Rational> all_job_probabilities(const std::vector<Rational>& popularity);
std::vector<double> all_job_probabilities(const std::vector<double>& popularity);

}  // namespace cdc
