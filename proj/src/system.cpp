#include "cdc/system.hpp"

#include <cmath>
#include <stdexcept>

namespace cdc {

void SystemConfig::validate() const {
    if (num_workers < 2) throw std::invalid_argument("config: need K >= 2");
    if (num_files < 1) throw std::invalid_argument("config: need N >= 1");
    if (num_workers > 16) throw std::invalid_argument("config: K > 16 unsupported");
    if (num_files > 28) throw std::invalid_argument("config: N > 28 unsupported");
    if ((int)mapping_loads.size() != num_workers || (int)reducing_loads.size() != num_workers)
        throw std::invalid_argument("config: M/W length mismatch");
    if ((int)popularity.size() != num_files)
        throw std::invalid_argument("config: popularity length mismatch");

    long long total_capacity = 0;
    for (int m : mapping_loads) {
        if (m < 1) throw std::invalid_argument("config: mapping loads must be positive");
        total_capacity += m;
    }
    if (total_capacity < num_files)
        throw std::invalid_argument("config: sum of mapping loads below N");

    Rational wsum = 0;
    for (const Rational& w : reducing_loads) {
        if (w <= 0) throw std::invalid_argument("config: reducing loads must be positive");
        wsum += w;
    }
    if (wsum != 1) throw std::invalid_argument("config: reducing loads must sum to 1 exactly");

    for (size_t n = 0; n < popularity.size(); ++n) {
        double p = popularity[n];
        if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("config: popularity outside (0,1]");
        if (n > 0 && p > popularity[n - 1] + 1e-15)
            throw std::invalid_argument("config: popularity must be non-increasing");
    }
}

std::vector<double> zipf_popularity(int num_files, double theta) {
    if (num_files < 1) throw std::invalid_argument("zipf: need at least one file");
    if (theta < 0) throw std::invalid_argument("zipf: theta must be non-negative");
    std::vector<double> weights(num_files);
    double sum = 0.0;
    for (int n = 1; n <= num_files; ++n) {
        weights[n - 1] = std::pow(static_cast<double>(n), -theta);
        sum += weights[n - 1];
    }
    for (double& w : weights) w /= sum;
    return weights;
}

namespace {

// shared core; conditioning denominator is 1 - prod(1 - p_n)
template <typename Num>
std::vector<Num> job_probabilities_impl(const std::vector<Num>& p) {
    int n_files = (int)p.size();
    if (n_files < 1) throw std::invalid_argument("job_probability: empty popularity");
    if (n_files > 24) throw std::invalid_argument("job_probability: N too large for enumeration");
    for (const Num& x : p)
        if (x < 0 || x > 1) throw std::invalid_argument("job_probability: popularity outside [0,1]");

    Num none = 1;
    for (const Num& x : p) none *= (Num(1) - x);
    Num denom = Num(1) - none;
    if (denom == 0) throw std::invalid_argument("job_probability: degenerate popularity (all zero)");

    size_t count = size_t(1) << n_files;
    std::vector<Num> out(count, Num(0));
    // out[mask] = prod over bits; build by dynamic programming over files
    out[0] = 1;
    for (int n = 0; n < n_files; ++n) {
        size_t half = size_t(1) << n;
        for (size_t mask = half; mask-- > 0;) {
            Num base = out[mask];
            out[mask | half] = base * p[n];
            out[mask] = base * (Num(1) - p[n]);
        }
    }
    out[0] = 0;
    for (size_t mask = 1; mask < count; ++mask) out[mask] /= denom;
    return out;
}

}  // namespace

Rational job_probability(JobDemand demand, const std::vector<Rational>& popularity) {
    if (demand.mask == 0) throw std::invalid_argument("job_probability: empty demand");
    int n_files = (int)popularity.size();
    if (demand.mask >= (1u << n_files))
        throw std::invalid_argument("job_probability: demand references unknown file");

    Rational in_prod = 1, none = 1;
    for (int n = 1; n <= n_files; ++n) {
        const Rational& pn = popularity[n - 1];
        if (pn < 0 || pn > 1) throw std::invalid_argument("job_probability: popularity outside [0,1]");
        none *= (Rational(1) - pn);
        in_prod *= demand.contains(n) ? pn : (Rational(1) - pn);
    }
    Rational denom = Rational(1) - none;
    if (denom == 0) throw std::invalid_argument("job_probability: degenerate popularity (all zero)");
    return in_prod / denom;
}

std::vector<Rational> all_job_probabilities(const std::vector<Rational>& popularity) {
    return job_probabilities_impl(popularity);
}

std::vector<double> all_job_probabilities(const std::vector<double>& popularity) {
    return job_probabilities_impl(popularity);
}

}  // namespace cdc
