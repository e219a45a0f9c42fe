#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsc/branching.hpp"
#include "tsc/markov.hpp"

namespace tsc {

// Quasi-stationary sampling of the upper invariant measure on a finite torus:
// start from all fully infected, burn in, then thin. lambda_scaled follows
// the high-dimensional convention: the per-neighbor infection rate of the
// simulated process is lambda_scaled / (2d).
struct NuSamplerConfig {
    int d = 4;
    int L = 3;
    double delta = 1.0;
    double gamma = 2.0;
    double lambda_scaled = 8.0;
    double burn_in = 30.0;
    double thin = 0.5;
    int samples_per_chain = 100;
    int chains = 4;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct NuSamples {
    NuSamplerConfig cfg;
    double per_neighbor_lambda = 0.0;
    std::vector<Configuration> configs;       // chains * samples_per_chain
    std::vector<double> chain_occupancy;      // mean site occupancy per chain
    double occupancy = 0.0;                   // P(eta(x) != 0) estimate
    double occupancy_se = 0.0;                // across-chain SE
    double occ_first_half = 0.0;              // stationarity gate halves
    double occ_second_half = 0.0;
    bool stationary = false;                  // halves agree within 2 SE
};

// Throws ExtinctionDuringSampling if any chain dies before its last sample.
NuSamples sample_nu(const NuSamplerConfig& cfg);

struct PiQuery {
    std::vector<Site> A;  // must avoid state 2
    std::vector<Site> B;  // must be state 0
};

// Fraction of samples with (no 2 on A) and (all 0 on B); SE across chains.
EstimateWithCI estimate_pi(const NuSamples& samples, const PiQuery& query);

struct ProductPrediction {
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
};
// The product-measure marginals at parameter lambda_scaled (> (1+d+g)/g).
ProductPrediction product_prediction(double lambda_scaled, double delta, double gamma);

struct GapRow {
    std::string family;
    int m = 0, n = 0;
    double estimate = 0.0;
    double se = 0.0;
    double prediction = 0.0;
    double gap = 0.0;
    bool feasible = true;  // false when the spread constraint cannot be met
};

// Declared set families standing in for the supremum over all (A,B):
// clustered (adjacent), spread (pairwise l1 >= 3), mixed.
std::vector<GapRow> product_gap(const NuSamples& samples,
                                const std::vector<std::pair<int, int>>& mn_pairs);

// Duality route: 1 - pi(A,B) equals on-off survival started from (B, A).
EstimateWithCI dual_pi(const PiQuery& query, int d, int L, double delta, double gamma,
                       double lambda_scaled, double horizon, std::int64_t replicas,
                       std::uint64_t seed, std::int64_t survivor_cap = 0, int workers = 1);

// Set builders used by the declared families. spread returns nullopt when
// the pairwise distance constraint cannot be met on this torus.
std::vector<Site> clustered_set(const TorusSpec& spec, int size, Site anchor);
std::optional<std::vector<Site>> spread_set(const TorusSpec& spec, int size, int min_dist,
                                            const std::vector<Site>& avoid);

struct SixParts {
    double p = 0.0;            // e^{-(1+delta)} (1 - e^{-gamma})
    double alpha_tilde = 0.0;  // exact binomial tail P(Bin(M,p) >= Mp/2)
    std::int64_t mu = 0;       // ceil(M p / 2)
    double occupancy_lower_bound = 0.0;  // asymptotic floor on the n-site occupancy
    double branching_factor = 0.0;  // closed form with lambda -> (2d-M)/(2d) lambda
    double b_tilde_estimate = 0.0;
    double composite = 0.0;  // branching_factor * alpha_tilde * b_tilde
};

// Throws ParameterError if M <= n + m.
SixParts six_bounds(std::int64_t M, std::int64_t n, std::int64_t m, int d, double delta,
                    double gamma, double lambda_scaled, double b_tilde_estimate);

// inf over the declared family of nu(eta != 0 somewhere on A), |A| = size.
struct BcTildeEstimate {
    double value = 0.0;
    double se = 0.0;
    bool spread_feasible = true;
};
BcTildeEstimate b_tilde_from_samples(const NuSamples& samples, int size);

}  // namespace tsc
