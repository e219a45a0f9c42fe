#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "tsc/offsets.hpp"
#include "tsc/stats.hpp"

namespace tsc {

// Hitting probability of the origin for the simple random walk on Z^d,
// solved on the canonical l1-ball of radius R. Three boundary treatments:
//   lower: absorbing 0 beyond the ball (true lower bound),
//   upper: absorbing 1 beyond the ball (true upper bound, loose for d >= 3
//          since its width equals the escape probability),
//   value: boundary set to the Green-function asymptote
//          a_d * |z|_2^{2-d} * (1 - Gamma(e1)), closed self-consistently in
//          Gamma(e1); this is the headline estimate.
struct SrwTable {
    int d = 0;
    int R = 0;
    bool recurrent = false;  // d <= 2: hitting probability is exactly 1

    double gamma_e1 = 1.0;
    double lower_e1 = 1.0;
    double upper_e1 = 1.0;
    double width_e1 = 0.0;  // |value - lower| at e1

    std::shared_ptr<CanonicalOffsets> idx;
    std::vector<double> value;
    std::vector<double> lower;
    std::vector<double> upper;

    // value-table lookup; the origin returns 1; offsets beyond the ball
    // return the asymptotic extension.
    double at(const std::vector<int>& offset) const;
    double lower_at(const std::vector<int>& offset) const;
    double width_at(const std::vector<int>& offset) const;

    // The asymptotic boundary form used by the value solve.
    double asymptotic(const std::vector<int>& offset) const;
};

SrwTable srw_hit_table(int d, int R);

// Return probability of the SRW from the origin (== Gamma(e1) by first-step
// symmetry), capped-walk Monte Carlo. Lower-biased: walks that exceed
// max_steps or leave the l1-ball escape_l1 count as misses.
EstimateWithCI srw_return_prob_mc(int d, std::int64_t walks, std::int64_t max_steps,
                                  std::int64_t escape_l1, std::uint64_t seed,
                                  int workers = 1);

// Kesten's two-term expansion 1/(2d) + 1/(2d^2).
inline double kesten_plugin(int d) {
    return 1.0 / (2.0 * d) + 1.0 / (2.0 * d * d);
}

// The walk on X4 \ {(O,3)} whose hitting probability of (O,1) builds the
// positive eigenvector. The default recursion set is lambda-free; a
// variant with +lambda terms in the denominators is kept only for
// comparison, since it breaks the kernel identity.
enum class ThetaVariant { LambdaFree, LambdaBearing };

struct ThetaTable {
    int d = 0;
    int R = 0;
    double delta = 0.0, gamma = 0.0, lambda = 0.0;
    ThetaVariant variant = ThetaVariant::LambdaFree;

    std::shared_ptr<CanonicalOffsets> idx;
    std::vector<double> u;        // Gamma(x,1) = Gamma(x,2), x != O
    std::vector<double> w;        // Gamma(x,3), x != O
    std::vector<double> u_lower;  // zero-boundary solves
    std::vector<double> w_lower;

    // comp in {1,2,3}; (O,1) -> 1, (O,2) -> Gamma(e1,1), (O,3) throws
    // DomainError (excluded state). Offsets beyond the ball return 0.
    double at(const std::vector<int>& offset, int comp) const;
    double lower_at(const std::vector<int>& offset, int comp) const;
    double gamma_e1_1() const;
    double gamma_O2() const { return gamma_e1_1(); }
    double gamma_e1_2() const { return gamma_e1_1(); }  // Gamma(x,1)=Gamma(x,2)
    double max_width() const;
};

// srw_bc: when non-null, the value solve uses srw_bc->at(z) as boundary data
// (Gamma(x,1) <= GammaTilde(x) makes it a natural cap); otherwise 0.
ThetaTable theta_hit_table(int d, double delta, double gamma, double lambda, int R,
                           ThetaVariant variant = ThetaVariant::LambdaFree,
                           const SrwTable* srw_bc = nullptr);

// Monte Carlo hitting estimate of (O,1) from (offset, comp).
EstimateWithCI theta_hit_mc(int d, double delta, double gamma, double lambda,
                            const std::vector<int>& offset, int comp, std::int64_t walks,
                            std::int64_t max_steps, std::int64_t escape_l1,
                            std::uint64_t seed, ThetaVariant variant = ThetaVariant::LambdaFree,
                            int workers = 1);

// h = (gamma[1 - 2 Gamma(O,2)] - 2 Gamma(e1,2) - b) / (gamma + 2 + b) with
// b = (1+delta+gamma)/(2 d lambda); lambda is the per-neighbor rate.
double h_lambda(double gammaO2, double gammaE12, double delta, double gamma, double lambda,
                int d);

// lambda-tilde = (1+delta+gamma) / (2d [gamma - (2gamma+2) GammaTilde(e1)]);
// throws DimensionTooSmall when the denominator is <= 0.
double lambda_tilde(int d, double delta, double gamma, double srw_e1);

}  // namespace tsc
