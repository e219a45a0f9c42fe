#include "tsc/walk_hitting.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "tsc/rng.hpp"

namespace tsc {

namespace {

double l2_norm(const std::vector<int>& v) {
    double s = 0.0;
    for (int c : v) s += static_cast<double>(c) * c;
    return std::sqrt(s);
}

// Leading Green-function constant: G(x) ~ a_d |x|_2^{2-d} for the SRW with
// step covariance I/d. a_3 = 3/(2 pi).
double green_amplitude(int d) {
    return 0.5 * d * std::tgamma(0.5 * d - 1.0) * std::pow(std::numbers::pi, -0.5 * d);
}

}  // namespace

double SrwTable::asymptotic(const std::vector<int>& offset) const {
    if (recurrent) return 1.0;
    std::vector<int> c = idx ? idx->canonicalize(offset) : offset;
    double r = l2_norm(c);
    if (r <= 0.0) return 1.0;
    double v = green_amplitude(d) * std::pow(r, 2.0 - d) * (1.0 - gamma_e1);
    return std::min(v, 1.0);
}

double SrwTable::at(const std::vector<int>& offset) const {
    if (recurrent) return 1.0;
    int i = idx->find_offset(offset);
    if (i < 0) return asymptotic(offset);
    return value[i];
}

double SrwTable::lower_at(const std::vector<int>& offset) const {
    if (recurrent) return 1.0;
    int i = idx->find_offset(offset);
    if (i < 0) return 0.0;
    return lower[i];
}

double SrwTable::width_at(const std::vector<int>& offset) const {
    if (recurrent) return 0.0;
    int i = idx->find_offset(offset);
    if (i < 0) return asymptotic(offset);
    return std::fabs(value[i] - lower[i]);
}

SrwTable srw_hit_table(int d, int R) {
    SrwTable t;
    t.d = d;
    t.R = R;
    if (d <= 2) {
        // Recurrent walk: hitting probability is 1 everywhere; a truncated
        // solve would misleadingly report the escape mass.
        t.recurrent = true;
        t.gamma_e1 = t.lower_e1 = t.upper_e1 = 1.0;
        t.width_e1 = 0.0;
        return t;
    }
    t.idx = std::make_shared<CanonicalOffsets>(d, R, CanonicalOffsets::Domain::Ball);
    const CanonicalOffsets& idx = *t.idx;
    const int n = idx.size();
    const int origin = idx.origin_index();

    // Unknowns: interior offsets except the origin.
    std::vector<int> unknown_of(n, -1);
    std::vector<int> offsets_of_unknown;
    for (int i = 0; i < n; ++i) {
        if (i == origin) continue;
        unknown_of[i] = static_cast<int>(offsets_of_unknown.size());
        offsets_of_unknown.push_back(i);
    }
    const int m = static_cast<int>(offsets_of_unknown.size());
    const double p = 1.0 / (2.0 * d);
    const double amp = green_amplitude(d);

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    Eigen::VectorXd rhs_zero = Eigen::VectorXd::Zero(m);   // boundary 0
    Eigen::VectorXd rhs_shape = Eigen::VectorXd::Zero(m);  // boundary a_d |z|^(2-d)
    Eigen::VectorXd rhs_one = Eigen::VectorXd::Zero(m);    // boundary 1

    for (int row = 0; row < m; ++row) {
        int i = offsets_of_unknown[row];
        trips.emplace_back(row, row, 1.0);
        idx.for_each_neighbor(i, [&](std::vector<int> nb) {
            int j = idx.find(nb);
            if (j == origin) {
                rhs_zero[row] += p;
                rhs_shape[row] += p;
                rhs_one[row] += p;
            } else if (j >= 0) {
                trips.emplace_back(row, unknown_of[j], -p);
            } else {
                double sh = amp * std::pow(l2_norm(nb), 2.0 - d);
                rhs_shape[row] += p * sh;
                rhs_one[row] += p;
            }
        });
    }

    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.analyzePattern(A);
    solver.factorize(A);
    if (solver.info() != Eigen::Success) {
        throw StepError("srw_hit_table: sparse factorization failed");
    }
    Eigen::VectorXd u0 = solver.solve(rhs_zero);
    Eigen::VectorXd us = solver.solve(rhs_shape);
    Eigen::VectorXd u1 = solver.solve(rhs_one);

    const int e1 = idx.e1_index();
    const int e1u = unknown_of[e1];
    // Self-consistent boundary amplitude: the boundary data is
    // shape * (1 - Gamma(e1)); solutions are affine in the scale, so
    // t = u0 + (1 - t) (us - u0) at e1 solves in closed form.
    const double a = u0[e1u];
    const double c = us[e1u] - u0[e1u];
    const double te1 = (a + c) / (1.0 + c);
    const double beta = 1.0 - te1;

    t.value.assign(n, 0.0);
    t.lower.assign(n, 0.0);
    t.upper.assign(n, 0.0);
    t.value[origin] = t.lower[origin] = t.upper[origin] = 1.0;
    for (int row = 0; row < m; ++row) {
        int i = offsets_of_unknown[row];
        t.lower[i] = u0[row];
        t.upper[i] = u1[row];
        t.value[i] = u0[row] + beta * (us[row] - u0[row]);
    }
    t.gamma_e1 = t.value[e1];
    t.lower_e1 = t.lower[e1];
    t.upper_e1 = t.upper[e1];
    t.width_e1 = std::fabs(t.gamma_e1 - t.lower_e1);
    return t;
}

EstimateWithCI srw_return_prob_mc(int d, std::int64_t walks, std::int64_t max_steps,
                                  std::int64_t escape_l1, std::uint64_t seed, int workers) {
    if (d <= 2) {
        throw DomainError(
            "srw_return_prob_mc: recurrence warning -- the value is 1 for d<=2 and a "
            "truncated Monte Carlo estimate would be misleading");
    }
    std::vector<std::int64_t> partial(std::max(1, workers), 0);
    int nw = std::max(1, workers);
    std::vector<std::thread> pool;
    auto run_block = [&](int w, std::int64_t lo, std::int64_t hi) {
        std::int64_t hits = 0;
        std::vector<int> pos(d);
        for (std::int64_t i = lo; i < hi; ++i) {
            Engine eng = make_engine(mix_seed(seed, static_cast<std::uint64_t>(i)));
            std::fill(pos.begin(), pos.end(), 0);
            pos[0] = 1;  // start at e1; equals the return probability from O
            std::int64_t l1 = 1;
            for (std::int64_t step = 0; step < max_steps; ++step) {
                std::uint64_t r = eng();
                int axis = static_cast<int>(r % static_cast<std::uint64_t>(d));
                int dir = ((r >> 32) & 1) ? +1 : -1;
                int before = std::abs(pos[axis]);
                pos[axis] += dir;
                l1 += std::abs(pos[axis]) - before;
                if (l1 == 0) {
                    ++hits;
                    break;
                }
                if (l1 > escape_l1) break;
            }
        }
        partial[w] = hits;
    };
    if (nw == 1) {
        run_block(0, 0, walks);
    } else {
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back(run_block, w, walks * w / nw, walks * (w + 1) / nw);
        }
        for (auto& th : pool) th.join();
    }
    std::int64_t hits = 0;
    for (auto h : partial) hits += h;
    return binomial_estimate(hits, walks, seed);
}

double ThetaTable::gamma_e1_1() const {
    std::vector<int> e1(d, 0);
    e1[0] = 1;
    int i = idx->find_offset(e1);
    return u[i];
}

double ThetaTable::at(const std::vector<int>& offset, int comp) const {
    std::vector<int> c = idx->canonicalize(offset);
    bool is_origin = true;
    for (int x : c) {
        if (x != 0) is_origin = false;
    }
    if (is_origin) {
        if (comp == 1) return 1.0;
        if (comp == 2) return gamma_e1_1();
        throw DomainError("theta table: (O,3) is excluded from the walk's state space");
    }
    int i = idx->find(c);
    if (i < 0) return 0.0;
    return comp == 3 ? w[i] : u[i];
}

double ThetaTable::lower_at(const std::vector<int>& offset, int comp) const {
    std::vector<int> c = idx->canonicalize(offset);
    bool is_origin = true;
    for (int x : c) {
        if (x != 0) is_origin = false;
    }
    if (is_origin) {
        if (comp == 1) return 1.0;
        if (comp == 2) {
            std::vector<int> e1(d, 0);
            e1[0] = 1;
            return u_lower[idx->find_offset(e1)];
        }
        throw DomainError("theta table: (O,3) is excluded from the walk's state space");
    }
    int i = idx->find(c);
    if (i < 0) return 0.0;
    return comp == 3 ? w_lower[i] : u_lower[i];
}

double ThetaTable::max_width() const {
    double mw = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        mw = std::max(mw, std::fabs(u[i] - u_lower[i]));
        mw = std::max(mw, std::fabs(w[i] - w_lower[i]));
    }
    return mw;
}

ThetaTable theta_hit_table(int d, double delta, double gamma, double lambda, int R,
                           ThetaVariant variant, const SrwTable* srw_bc) {
    ThetaTable t;
    t.d = d;
    t.R = R;
    t.delta = delta;
    t.gamma = gamma;
    t.lambda = lambda;
    t.variant = variant;
    t.idx = std::make_shared<CanonicalOffsets>(d, R, CanonicalOffsets::Domain::Ball);
    const CanonicalOffsets& idx = *t.idx;
    const int n = idx.size();
    const int origin = idx.origin_index();
    const int e1 = idx.e1_index();

    std::vector<int> unknown_of(n, -1);
    std::vector<int> offs;
    for (int i = 0; i < n; ++i) {
        if (i == origin) continue;
        unknown_of[i] = static_cast<int>(offs.size());
        offs.push_back(i);
    }
    const int m = static_cast<int>(offs.size());
    // Unknown layout: u-block [0, m), w-block [m, 2m).
    const double extra = variant == ThetaVariant::LambdaBearing ? lambda : 0.0;
    const double denom = 2.0 + delta + gamma + extra;
    const double p_w = 1.0 / denom;                                   // (x,2) -> (x,3)
    const double p_u = (1.0 + delta + gamma + extra) / (2.0 * d * denom);  // (x,2) -> (y,1)
    const double p3 = 1.0 / (2.0 * d);                                // (x,3) -> (y,2)

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    Eigen::VectorXd rhs0 = Eigen::VectorXd::Zero(2 * m);
    Eigen::VectorXd rhsb = Eigen::VectorXd::Zero(2 * m);

    for (int row = 0; row < m; ++row) {
        int i = offs[row];
        // u(x) = p_w w(x) + p_u sum_y U1(y), U1(O) = 1.
        trips.emplace_back(row, row, 1.0);
        trips.emplace_back(row, m + row, -p_w);
        idx.for_each_neighbor(i, [&](std::vector<int> nb) {
            int j = idx.find(nb);
            if (j == origin) {
                rhs0[row] += p_u;
                rhsb[row] += p_u;
            } else if (j >= 0) {
                trips.emplace_back(row, unknown_of[j], -p_u);
            } else if (srw_bc != nullptr) {
                rhsb[row] += p_u * srw_bc->at(nb);
            }
        });
        // w(x) = p3 sum_y U2(y), U2(O) = u(e1).
        trips.emplace_back(m + row, m + row, 1.0);
        idx.for_each_neighbor(i, [&](std::vector<int> nb) {
            int j = idx.find(nb);
            if (j == origin) {
                trips.emplace_back(m + row, unknown_of[e1], -p3);
            } else if (j >= 0) {
                trips.emplace_back(m + row, unknown_of[j], -p3);
            } else if (srw_bc != nullptr) {
                rhsb[m + row] += p3 * srw_bc->at(nb);
            }
        });
    }

    Eigen::SparseMatrix<double> A(2 * m, 2 * m);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.analyzePattern(A);
    solver.factorize(A);
    if (solver.info() != Eigen::Success) {
        throw StepError("theta_hit_table: sparse factorization failed");
    }
    Eigen::VectorXd sol0 = solver.solve(rhs0);
    Eigen::VectorXd solb = srw_bc != nullptr ? solver.solve(rhsb).eval() : sol0;

    t.u.assign(n, 0.0);
    t.w.assign(n, 0.0);
    t.u_lower.assign(n, 0.0);
    t.w_lower.assign(n, 0.0);
    for (int row = 0; row < m; ++row) {
        int i = offs[row];
        t.u_lower[i] = sol0[row];
        t.w_lower[i] = sol0[m + row];
        t.u[i] = solb[row];
        t.w[i] = solb[m + row];
    }
    // Origin slots stay unused; accessor handles (O, comp).
    return t;
}

EstimateWithCI theta_hit_mc(int d, double delta, double gamma, double lambda,
                            const std::vector<int>& offset, int comp, std::int64_t walks,
                            std::int64_t max_steps, std::int64_t escape_l1,
                            std::uint64_t seed, ThetaVariant variant, int workers) {
    const double extra = variant == ThetaVariant::LambdaBearing ? lambda : 0.0;
    const double denom = 2.0 + delta + gamma + extra;
    const double p_keep = 1.0 / denom;  // (x,2) -> (x,3)

    std::vector<std::int64_t> partial(std::max(1, workers), 0);
    int nw = std::max(1, workers);
    auto run_block = [&](int w, std::int64_t lo, std::int64_t hi) {
        std::int64_t hits = 0;
        std::vector<int> pos(d);
        for (std::int64_t i = lo; i < hi; ++i) {
            Engine eng = make_engine(mix_seed(seed, static_cast<std::uint64_t>(i), 77));
            pos.assign(offset.begin(), offset.end());
            int c = comp;
            bool hit = false;
            for (std::int64_t step = 0; step < max_steps; ++step) {
                bool at_origin = true;
                std::int64_t l1 = 0;
                for (int x : pos) {
                    l1 += std::abs(x);
                    if (x != 0) at_origin = false;
                }
                if (at_origin && c == 1) {
                    hit = true;
                    break;
                }
                if (l1 > escape_l1) break;
                if (at_origin) {
                    // (O,2) -> (e1,1); (O,3) unreachable
                    pos.assign(d, 0);
                    pos[0] = 1;
                    c = 1;
                    continue;
                }
                if (c == 1) {
                    c = 2;
                } else if (c == 2) {
                    if (uniform01(eng) < p_keep) {
                        c = 3;
                    } else {
                        std::uint64_t r = eng();
                        int axis = static_cast<int>(r % static_cast<std::uint64_t>(d));
                        int dir = ((r >> 32) & 1) ? +1 : -1;
                        pos[axis] += dir;
                        c = 1;
                    }
                } else {
                    std::uint64_t r = eng();
                    int axis = static_cast<int>(r % static_cast<std::uint64_t>(d));
                    int dir = ((r >> 32) & 1) ? +1 : -1;
                    pos[axis] += dir;
                    c = 2;
                }
            }
            hits += hit ? 1 : 0;
        }
        partial[w] = hits;
    };
    if (nw == 1) {
        run_block(0, 0, walks);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back(run_block, w, walks * w / nw, walks * (w + 1) / nw);
        }
        for (auto& th : pool) th.join();
    }
    std::int64_t hits = 0;
    for (auto h : partial) hits += h;
    return binomial_estimate(hits, walks, seed);
}

double h_lambda(double gammaO2, double gammaE12, double delta, double gamma, double lambda,
                int d) {
    const double b = (1.0 + delta + gamma) / (2.0 * d * lambda);
    return (gamma * (1.0 - 2.0 * gammaO2) - 2.0 * gammaE12 - b) / (gamma + 2.0 + b);
}

double lambda_tilde(int d, double delta, double gamma, double srw_e1) {
    const double denom = gamma - (2.0 * gamma + 2.0) * srw_e1;
    if (!(denom > 0.0)) {
        throw DimensionTooSmall(
            "lambda_tilde: gamma - (2 gamma + 2) GammaTilde(e1) <= 0 at d=" +
            std::to_string(d));
    }
    return (1.0 + delta + gamma) / (2.0 * d * denom);
}

}  // namespace tsc
