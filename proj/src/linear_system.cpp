#include "tsc/linear_system.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "tsc/rng.hpp"
#include "tsc/stats.hpp"

namespace tsc {

X4Space::X4Space(int d, int R, bool reduced) : d_(d), R_(R), reduced_(reduced) {
    if (R < 2) throw ParameterError("R: truncation radius must be >= 2");
    if (reduced) {
        canon_ = std::make_shared<CanonicalOffsets>(d, R, CanonicalOffsets::Domain::Torus);
        n_offsets_ = canon_->size();
        origin_ = canon_->origin_index();
        e1_ = canon_->e1_index();
    } else {
        torus_ = std::make_shared<TorusSpec>(d, 2 * R + 1);
        n_offsets_ = static_cast<int>(torus_->sites());
        origin_ = 0;
        std::vector<int> e1(d, 0);
        e1[0] = 1;
        e1_ = static_cast<int>(torus_->encode(e1));
    }
}

int X4Space::offset_id_of(std::span<const int> offset) const {
    std::vector<int> v(offset.begin(), offset.end());
    if (reduced_) return canon_->find(canon_->canonicalize(std::move(v)));
    return static_cast<int>(torus_->encode(v));
}

int X4Space::offset_l1(int offset_id) const {
    if (reduced_) return canon_->l1(offset_id);
    return torus_->l1(static_cast<Site>(offset_id), 0);
}

std::vector<int> X4Space::representative(int offset_id) const {
    if (reduced_) return canon_->rep(offset_id);
    std::vector<int> c = torus_->coords(static_cast<Site>(offset_id));
    for (int& x : c) {
        if (x > R_) x -= 2 * R_ + 1;  // center to [-R, R]
    }
    return c;
}

void X4Space::for_each_neighbor(int offset_id, const std::function<void(int)>& fn) const {
    if (reduced_) {
        canon_->for_each_neighbor(offset_id, [&](std::vector<int> nb) {
            fn(canon_->find(nb));
        });
    } else {
        for (int k = 0; k < d_; ++k) {
            fn(static_cast<int>(torus_->shift(offset_id, k, +1)));
            fn(static_cast<int>(torus_->shift(offset_id, k, -1)));
        }
    }
}

GOperator GOperator::build(const X4Space& space, const Rates& rates) {
    const double s = rates.sum();
    const double dd = space.d();
    const int O = space.origin_offset();
    const int e1 = space.e1_offset();

    std::vector<std::map<int, double>> rows(space.size());
    for (int x = 0; x < space.n_offsets(); ++x) {
        if (x == O) continue;
        // i = 1: dF(x,1) = -2 F(x,1) + 2 F(x,2)
        rows[space.flat(x, 1)][space.flat(x, 1)] += -2.0;
        rows[space.flat(x, 1)][space.flat(x, 2)] += 2.0;
        // i = 2: dF(x,2) = -(2+delta+gamma) F(x,2) + F(x,3) + s/(2d) sum F(y,1)
        rows[space.flat(x, 2)][space.flat(x, 2)] += -(2.0 + rates.delta + rates.gamma);
        rows[space.flat(x, 2)][space.flat(x, 3)] += 1.0;
        space.for_each_neighbor(x, [&](int y) {
            rows[space.flat(x, 2)][space.flat(y, 1)] += s / (2.0 * dd);
        });
        // i = 3: dF(x,3) = -2s F(x,3) + s/d sum F(y,2)
        rows[space.flat(x, 3)][space.flat(x, 3)] += -2.0 * s;
        space.for_each_neighbor(x, [&](int y) {
            rows[space.flat(x, 3)][space.flat(y, 2)] += s / dd;
        });
    }
    // Origin rows.
    rows[space.flat(O, 1)][space.flat(O, 1)] += -1.0;
    rows[space.flat(O, 1)][space.flat(O, 2)] += 2.0;
    rows[space.flat(O, 1)][space.flat(O, 3)] += 1.0 / rates.gamma;

    rows[space.flat(O, 2)][space.flat(O, 2)] += -s;
    rows[space.flat(O, 2)][space.flat(e1, 1)] += s;

    rows[space.flat(O, 3)][space.flat(O, 3)] += -s;
    rows[space.flat(O, 3)][space.flat(e1, 2)] += 2.0 * s;
    rows[space.flat(O, 3)][space.flat(O, 1)] += s * s / (2.0 * dd * rates.lambda);

    GOperator g;
    g.mat_ = SparseCsr::from_rows(rows);
    return g;
}

IntegrateResult integrate_moments(const GOperator& G, const X4Space& space, double t_end,
                                  double tol) {
    const int n = G.rows();
    std::vector<double> y(n, 1.0);

    IntegrateResult out;
    out.sup_F_O1 = 1.0;
    out.min_entry = 1.0;
    const int iO1 = space.flat(space.origin_offset(), 1);

    if (t_end <= 0.0) {
        out.F = std::move(y);
        return out;
    }

    // Dormand-Prince 5(4) embedded pair (autonomous system, no time nodes).
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1c = 71.0 / 57600, e3c = -71.0 / 16695, e4c = 71.0 / 1920,
                        e5c = -17253.0 / 339200, e6c = 22.0 / 525, e7c = -1.0 / 40;

    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);

    double t = 0.0;
    double h = std::min(0.01, t_end);
    const double h_min = t_end * 1e-14;

    auto axpy_into = [&](std::span<double> dst, std::span<const double> base,
                         std::initializer_list<std::pair<double, const std::vector<double>*>>
                             terms,
                         double scale) {
        for (int i = 0; i < n; ++i) {
            double acc = base[i];
            for (auto& [w, v] : terms) acc += scale * w * (*v)[i];
            dst[i] = acc;
        }
    };

    G.apply(y, k1);
    while (t < t_end) {
        if (t + h > t_end) h = t_end - t;

        axpy_into(tmp, y, {{a21, &k1}}, h);
        G.apply(tmp, k2);
        axpy_into(tmp, y, {{a31, &k1}, {a32, &k2}}, h);
        G.apply(tmp, k3);
        axpy_into(tmp, y, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, h);
        G.apply(tmp, k4);
        axpy_into(tmp, y, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, h);
        G.apply(tmp, k5);
        axpy_into(tmp, y, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, h);
        G.apply(tmp, k6);
        axpy_into(ynew, y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, h);
        G.apply(ynew, k7);

        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            double e = h * (e1c * k1[i] + e3c * k3[i] + e4c * k4[i] + e5c * k5[i] +
                            e6c * k6[i] + e7c * k7[i]);
            double sc = tol + tol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
            err = std::max(err, std::fabs(e) / sc);
        }
        if (err <= 1.0) {
            t += h;
            y.swap(ynew);
            k1.swap(k7);  // FSAL
            out.sup_F_O1 = std::max(out.sup_F_O1, y[iO1]);
            for (double v : y) out.min_entry = std::min(out.min_entry, v);
            ++out.steps;
        }
        double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        fac = std::clamp(fac, 0.2, 5.0);
        h *= fac;
        if (h < h_min) throw StepError("integrate_moments: step size collapsed");
    }
    out.F = std::move(y);
    return out;
}

std::vector<double> build_K(const X4Space& space, const ThetaTable& theta, double h,
                            double gamma) {
    std::vector<double> K(space.size(), 0.0);
    const int O = space.origin_offset();
    for (int x = 0; x < space.n_offsets(); ++x) {
        std::vector<int> rep = space.representative(x);
        for (int comp = 1; comp <= 3; ++comp) {
            if (x == O && comp == 3) {
                std::vector<int> e1(space.d(), 0);
                e1[0] = 1;
                K[space.flat(x, comp)] = gamma * (1.0 - 2.0 * theta.at(e1, 1) - h);
            } else {
                K[space.flat(x, comp)] = theta.at(rep, comp) + h;
            }
        }
    }
    double mn = K[0];
    for (double v : K) mn = std::min(mn, v);
    if (!(mn > 0.0)) {
        throw DomainError(
            "build_K: minimum entry <= 0 (lambda at or below lambda-tilde, or the "
            "hitting table radius is too small)");
    }
    return K;
}

ResidualReport eigen_identity_residual(const GOperator& G, const X4Space& space,
                                       std::span<const double> K) {
    std::vector<double> r(G.rows());
    G.apply(K, r);
    ResidualReport rep;
    for (int x = 0; x < space.n_offsets(); ++x) {
        for (int comp = 1; comp <= 3; ++comp) {
            double v = std::fabs(r[space.flat(x, comp)]);
            rep.all_rows = std::max(rep.all_rows, v);
            if (x == space.origin_offset()) {
                rep.origin_rows = std::max(rep.origin_rows, v);
            } else if (space.offset_l1(x) < space.R() - 1) {
                rep.interior_rows = std::max(rep.interior_rows, v);
            }
        }
    }
    return rep;
}

void simulate_linear_field(
    const TorusSpec& spec, const Rates& rates, const LinearFieldOptions& opt,
    const std::function<void(double, std::span<const std::pair<double, double>>)>&
        on_checkpoint) {
    if (!(opt.horizon > 0.0)) throw ParameterError("horizon: must be > 0");
    const std::int64_t n = spec.sites();
    const int d = spec.d();
    const double b = rates.b(d);
    const double site_rate = 1.0 + rates.delta + rates.gamma + 2.0 * d * rates.lambda;
    const double total = site_rate * static_cast<double>(n);

    std::vector<std::pair<double, double>> field(n, {1.0, 1.0});
    Engine eng = make_engine(opt.seed);

    double t = 0.0;
    std::size_t next_cp = 0;
    auto emit_until = [&](double tt) {
        while (next_cp < opt.checkpoint_times.size() && opt.checkpoint_times[next_cp] <= tt) {
            on_checkpoint(opt.checkpoint_times[next_cp], field);
            ++next_cp;
        }
    };

    for (;;) {
        t += exp_draw(eng, total);
        if (t > opt.horizon) break;
        emit_until(t);
        Site x = static_cast<Site>(eng() % static_cast<std::uint64_t>(n));
        double u = uniform01(eng) * site_rate;
        auto& zg = field[x];
        if (u < 1.0) {
            zg = {0.0, 0.0};
        } else if (u < 1.0 + rates.delta) {
            zg.second = 0.0;
        } else if (u < 1.0 + rates.delta + rates.gamma) {
            zg = {zg.first + zg.second / rates.gamma, 0.0};
        } else {
            int slot = static_cast<int>((u - (1.0 + rates.delta + rates.gamma)) / rates.lambda);
            if (slot >= 2 * d) slot = 2 * d - 1;  // guard against roundoff at the edge
            Site y = spec.shift(x, slot / 2, (slot % 2) == 0 ? +1 : -1);
            zg.second += b * field[y].first;
        }
    }
    emit_until(opt.horizon);
}

FieldMoments field_moments(const TorusSpec& spec, const Rates& rates,
                           std::span<const double> times, std::int64_t replicas,
                           std::uint64_t seed, int workers) {
    const std::size_t nt = times.size();
    const double horizon = times.empty() ? 0.0 : times.back();
    // accumulators per worker block, merged in index order
    struct Acc {
        std::vector<double> z, g, z2, zv, gv, z2v;
    };
    int nw = std::max(1, workers);
    std::vector<Acc> accs(nw);
    for (auto& a : accs) {
        a.z.assign(nt, 0.0);
        a.g.assign(nt, 0.0);
        a.z2.assign(nt, 0.0);
        a.zv.assign(nt, 0.0);
        a.gv.assign(nt, 0.0);
        a.z2v.assign(nt, 0.0);
    }

    auto run_block = [&](int w, std::int64_t lo, std::int64_t hi) {
        LinearFieldOptions opt;
        opt.horizon = horizon;
        opt.checkpoint_times.assign(times.begin(), times.end());
        const Site O = spec.origin();
        for (std::int64_t i = lo; i < hi; ++i) {
            opt.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
            std::size_t slot = 0;
            simulate_linear_field(
                spec, rates, opt,
                [&](double, std::span<const std::pair<double, double>> f) {
                    double z = f[O].first, g = f[O].second;
                    accs[w].z[slot] += z;
                    accs[w].g[slot] += g;
                    accs[w].z2[slot] += z * z;
                    accs[w].zv[slot] += z * z;
                    accs[w].gv[slot] += g * g;
                    accs[w].z2v[slot] += z * z * z * z;
                    ++slot;
                });
        }
    };
    if (nw == 1) {
        run_block(0, 0, replicas);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back(run_block, w, replicas * w / nw, replicas * (w + 1) / nw);
        }
        for (auto& th : pool) th.join();
    }

    FieldMoments out;
    out.times.assign(times.begin(), times.end());
    out.mean_zeta.resize(nt);
    out.se_zeta.resize(nt);
    out.mean_g.resize(nt);
    out.se_g.resize(nt);
    out.mean_zeta_sq.resize(nt);
    out.se_zeta_sq.resize(nt);
    const double N = static_cast<double>(replicas);
    for (std::size_t k = 0; k < nt; ++k) {
        double sz = 0, sg = 0, sz2 = 0, szv = 0, sgv = 0, sz2v = 0;
        for (auto& a : accs) {
            sz += a.z[k];
            sg += a.g[k];
            sz2 += a.z2[k];
            szv += a.zv[k];
            sgv += a.gv[k];
            sz2v += a.z2v[k];
        }
        double mz = sz / N, mg = sg / N, mz2 = sz2 / N;
        out.mean_zeta[k] = mz;
        out.mean_g[k] = mg;
        out.mean_zeta_sq[k] = mz2;
        out.se_zeta[k] = std::sqrt(std::max(0.0, szv / N - mz * mz) / N);
        out.se_g[k] = std::sqrt(std::max(0.0, sgv / N - mg * mg) / N);
        out.se_zeta_sq[k] = std::sqrt(std::max(0.0, sz2v / N - mz2 * mz2) / N);
    }
    return out;
}

}  // namespace tsc
