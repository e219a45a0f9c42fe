#include "tsc/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tsc/bounds.hpp"
#include "tsc/branching.hpp"
#include "tsc/csv.hpp"
#include "tsc/graphical.hpp"
#include "tsc/invariant.hpp"
#include "tsc/linear_system.hpp"
#include "tsc/markov.hpp"
#include "tsc/rng.hpp"
#include "tsc/walk_hitting.hpp"

#include <algorithm>

namespace tsc {

namespace {

constexpr const char* kVersion = "tsc-lab 1.0.0";

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Reads config keys with defaults, records the effective values for the
// normalized echo, and rejects unknown keys at the end.
class ConfigReader {
public:
    ConfigReader(const ExperimentConfig& cfg) : kind_(cfg.kind), kv_(cfg.kv) {}

    double number(const std::string& key, std::optional<double> def = {}) {
        auto raw = take(key);
        double v;
        if (raw) {
            try {
                std::size_t pos = 0;
                v = std::stod(*raw, &pos);
                if (pos != raw->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError(key + ": not a number: '" + *raw + "'");
            }
        } else if (def) {
            v = *def;
        } else {
            throw ConfigError(key + ": missing required key");
        }
        echo_[key] = format_double(v);
        return v;
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> def = {}) {
        auto raw = take(key);
        std::int64_t v;
        if (raw) {
            try {
                std::size_t pos = 0;
                v = std::stoll(*raw, &pos);
                if (pos != raw->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError(key + ": not an integer: '" + *raw + "'");
            }
        } else if (def) {
            v = *def;
        } else {
            throw ConfigError(key + ": missing required key");
        }
        echo_[key] = std::to_string(v);
        return v;
    }

    std::string str(const std::string& key, std::optional<std::string> def = {}) {
        auto raw = take(key);
        std::string v;
        if (raw) {
            v = *raw;
        } else if (def) {
            v = *def;
        } else {
            throw ConfigError(key + ": missing required key");
        }
        echo_[key] = v;
        return v;
    }

    std::vector<double> number_list(const std::string& key,
                                    std::optional<std::string> def = {}) {
        std::string raw = str(key, def);
        std::vector<double> out;
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError(key + ": not a number: '" + item + "'");
            }
        }
        std::string canon;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (i) canon += ',';
            canon += format_double(out[i]);
        }
        echo_[key] = canon;
        return out;
    }

    // "n:m,n:m" pair list
    std::vector<std::pair<int, int>> pair_list(const std::string& key,
                                               const std::string& def) {
        std::string raw = str(key, def);
        std::vector<std::pair<int, int>> out;
        std::stringstream ss(raw);
        std::string item;
        for (; std::getline(ss, item, ',');) {
            item = trim(item);
            if (item.empty()) continue;
            auto colon = item.find(':');
            if (colon == std::string::npos) {
                throw ConfigError(key + ": expected 'a:b' entries, got '" + item + "'");
            }
            try {
                out.emplace_back(std::stoi(item.substr(0, colon)),
                                 std::stoi(item.substr(colon + 1)));
            } catch (const std::exception&) {
                throw ConfigError(key + ": bad pair '" + item + "'");
            }
        }
        return out;
    }

    void finish() {
        for (const auto& [k, v] : kv_) {
            if (!consumed_.count(k)) {
                throw ConfigError(k + ": unknown key for experiment '" + kind_ + "'");
            }
        }
    }

    std::string echo() const {
        std::string out = "experiment = " + kind_ + "\n";
        for (const auto& [k, v] : echo_) out += k + " = " + v + "\n";
        return out;
    }

    const std::map<std::string, std::string>& echo_map() const { return echo_; }

private:
    std::optional<std::string> take(const std::string& key) {
        consumed_.insert(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        return it->second;
    }

    std::string kind_;
    std::map<std::string, std::string> kv_;
    std::map<std::string, std::string> echo_;
    std::set<std::string> consumed_;
};

struct Sink {
    std::string base;
    std::string format;  // csv | json
    nlohmann::json summary = nlohmann::json::object();
    std::vector<std::string> files;
    bool write_now_then_throw = false;  // gate failed; files are still written

    // Tabular data: header + rows of strings (already formatted).
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(const std::vector<std::string>& r) { rows.push_back(r); }

    void write() {
        if (format == "csv") {
            if (!header.empty()) {
                CsvWriter csv(base + ".csv");
                csv.row_strings(header);
                for (const auto& r : rows) csv.row_strings(r);
                files.push_back(base + ".csv");
            }
            std::ofstream js(base + ".summary.json", std::ios::binary);
            js << summary.dump(2) << "\n";
            files.push_back(base + ".summary.json");
        } else {
            nlohmann::json doc;
            if (!header.empty()) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& r : rows) {
                    nlohmann::json obj;
                    for (std::size_t i = 0; i < header.size() && i < r.size(); ++i) {
                        obj[header[i]] = r[i];
                    }
                    arr.push_back(obj);
                }
                doc["rows"] = arr;
            }
            doc["summary"] = summary;
            std::ofstream js(base + ".json", std::ios::binary);
            js << doc.dump(2) << "\n";
            files.push_back(base + ".json");
        }
    }
};

std::string fmt(double v) { return format_double(v); }

Configuration single_fully(const TorusSpec& spec) {
    Configuration c;
    c.fully.insert(spec.origin());
    return c;
}

// ---------------- experiments ----------------

void run_survival_sweep(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                        std::uint64_t seed, int workers) {
    int d = static_cast<int>(r.integer("d", 2));
    int L = static_cast<int>(r.integer("L", 5));
    double delta = r.number("delta", 1.0);
    double gamma = r.number("gamma", 2.0);
    std::vector<double> grid = r.number_list("lambda_grid");
    double horizon = r.number("horizon", 20.0);
    std::int64_t replicas = r.integer("replicas", 1000);
    double threshold = r.number("threshold", 0.02);
    std::int64_t cap = r.integer("survivor_cap", 300);
    std::int64_t budget = r.integer("max_total_replicas", 0);
    std::int64_t per_replica = r.integer("per_replica", 0);
    std::int64_t gate_horizon = r.integer("gate_horizon_x2", 0);
    r.finish();
    if (grid.empty()) throw ConfigError("lambda_grid: must be nonempty");
    if (dry) return;

    BracketBudget b;
    b.replicas = replicas;
    b.horizon = horizon;
    b.L = L;
    b.survivor_cap = cap;
    b.threshold = threshold;
    b.seed = seed;
    b.workers = workers;
    b.max_total_replicas = budget;
    McBracket bracket = bracket_critical(d, delta, gamma, grid, b);

    sink.header = {"lambda_per_neighbor", "survival", "std_error", "replicas", "survivors"};
    for (const auto& p : bracket.sweep) {
        sink.add_row({fmt(p.lambda), fmt(p.estimate.point), fmt(p.estimate.std_error),
                      std::to_string(p.estimate.replicas),
                      std::to_string(p.estimate.survivors)});
    }
    sink.summary["bracket_lambda_lo"] = bracket.lambda_lo;
    sink.summary["bracket_lambda_hi"] = bracket.lambda_hi;
    sink.summary["degenerate"] = bracket.degenerate;
    sink.summary["threshold"] = bracket.threshold;
    sink.summary["policy"] =
        bracket.sweep.empty() ? "" : bracket.sweep.front().estimate.policy;

    // Stability gate: doubling the horizon must not move the bracket by more
    // than one grid step. Failing the gate exits nonzero.
    if (gate_horizon != 0) {
        BracketBudget b2 = b;
        b2.horizon = 2.0 * horizon;
        b2.seed = mix_seed(seed, 0x6A7E);
        McBracket twice = bracket_critical(d, delta, gamma, grid, b2);
        sink.summary["gate_bracket_lambda_lo"] = twice.lambda_lo;
        sink.summary["gate_bracket_lambda_hi"] = twice.lambda_hi;
        std::size_t i1 = 0, i2 = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid[i] == bracket.lambda_lo) i1 = i;
            if (grid[i] == twice.lambda_lo) i2 = i;
        }
        bool ok = !bracket.degenerate && !twice.degenerate &&
                  (i1 > i2 ? i1 - i2 : i2 - i1) <= 1;
        sink.summary["gate_horizon_ok"] = ok;
        if (!ok) sink.write_now_then_throw = true;
    }

    // Per-replica rows (replica id, extinction time or CENSORED, final |C|,
    // |D|) for every grid point, on request.
    if (per_replica != 0) {
        CsvWriter csv(sink.base + ".replicas.csv");
        csv.header({"lambda_per_neighbor", "replica", "status", "time", "final_fully",
                    "final_semi"});
        TorusSpec spec(d, L);
        Configuration initial = single_fully(spec);
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            CtmcSimulator sim(ProcessKind::TwoStage, spec, Rates{grid[gi], delta, gamma});
            SimOptions so;
            so.horizon = horizon;
            so.survivor_cap = cap;
            for (std::int64_t i = 0; i < replicas; ++i) {
                so.seed = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(gi)),
                                   static_cast<std::uint64_t>(i));
                TrajectorySummary t = sim.run(initial, so);
                csv.field(grid[gi]);
                csv.field(i);
                if (t.extinct) {
                    csv.field(std::string("EXTINCT"));
                    csv.field(t.extinction_time);
                } else if (t.reached_cap) {
                    csv.field(std::string("CAPPED"));
                    csv.field(t.cap_time);
                } else {
                    csv.field(std::string("CENSORED"));
                    csv.field(horizon);
                }
                csv.field(t.final_fully);
                csv.field(t.final_semi);
                csv.end_row();
            }
        }
        sink.files.push_back(sink.base + ".replicas.csv");
    }
    (void)opts;
}

void run_duality_check(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                       std::uint64_t seed, int workers) {
    double lambda = r.number("lambda", 1.0);  // per-neighbor; both processes share it
    double delta = r.number("delta", 1.0);
    double gamma = r.number("gamma", 2.0);
    int exact_L = static_cast<int>(r.integer("exact_L", 3));
    std::int64_t n_checks = r.integer("exact_checks", 20);
    double t_max = r.number("t_max", 1.0);
    double tolerance = r.number("tolerance", 1e-10);
    std::int64_t mc_replicas = r.integer("mc_replicas", 10000);
    int mc_d = static_cast<int>(r.integer("mc_d", 2));
    int mc_L = static_cast<int>(r.integer("mc_L", 5));
    double mc_t = r.number("mc_t", 0.7);
    r.finish();
    if (dry) return;

    TorusSpec ring(1, exact_L);
    Rates rates{lambda, delta, gamma};
    Engine eng = make_engine(mix_seed(seed, 0xD0A1));

    sink.header = {"check", "t", "lhs", "rhs", "abs_diff"};
    double max_diff = 0.0;
    for (std::int64_t i = 0; i < n_checks; ++i) {
        // Random disjoint (A,B) and (C,D), random t in (0, t_max].
        std::vector<Site> A, B, C, D;
        for (Site s = 0; s < ring.sites(); ++s) {
            switch (eng() % 3) {
                case 1: A.push_back(s); break;
                case 2: B.push_back(s); break;
                default: break;
            }
            switch (eng() % 3) {
                case 1: C.push_back(s); break;
                case 2: D.push_back(s); break;
                default: break;
            }
        }
        double t = t_max * (0.1 + 0.9 * uniform01(eng));

        Configuration init_eta;
        for (Site s : C) init_eta.fully.insert(s);
        for (Site s : D) init_eta.semi.insert(s);
        ExactDistribution eta = exact_distribution(ProcessKind::TwoStage, ring, rates,
                                                   init_eta, t);
        double lhs = hit_event_probability(eta, A, B);

        Configuration init_xi;
        for (Site s : B) init_xi.fully.insert(s);
        for (Site s : A) init_xi.semi.insert(s);
        ExactDistribution xi = exact_distribution(ProcessKind::OnOff, ring, rates, init_xi, t);
        double rhs = hit_event_probability(xi, D, C);

        double diff = std::fabs(lhs - rhs);
        max_diff = std::max(max_diff, diff);
        sink.add_row({std::to_string(i), fmt(t), fmt(lhs), fmt(rhs), fmt(diff)});
    }
    sink.summary["max_abs_diff"] = max_diff;
    sink.summary["tolerance"] = tolerance;

    if (mc_replicas > 0) {
        TorusSpec torus(mc_d, mc_L);
        // Fixed representative sets for the Monte Carlo analogue.
        std::vector<Site> A{torus.origin()}, B{torus.shift(torus.origin(), 0, +1)};
        std::vector<Site> C{torus.shift(torus.origin(), 1, +1)},
            D{torus.shift(torus.origin(), 0, -1)};

        // lhs: P(eta_t^{(C,D)} hits {2 on A or !=0 on B}) estimated by replicas.
        Configuration init_eta;
        for (Site s : C) init_eta.fully.insert(s);
        for (Site s : D) init_eta.semi.insert(s);
        Configuration init_xi;
        for (Site s : B) init_xi.fully.insert(s);
        for (Site s : A) init_xi.semi.insert(s);

        std::int64_t lhs_hits = 0, rhs_hits = 0;
        {
            CtmcSimulator sim(ProcessKind::TwoStage, torus, rates);
            SimOptions so;
            so.horizon = mc_t;
            so.checkpoint_times = {mc_t};
            for (std::int64_t i = 0; i < mc_replicas; ++i) {
                so.seed = mix_seed(seed, 0xE7A, static_cast<std::uint64_t>(i));
                bool hit = false;
                sim.run_with_snapshots(init_eta, so,
                                       [&](double, const std::vector<std::uint8_t>& st) {
                                           for (Site s : A) hit |= st[s] == 2;
                                           for (Site s : B) hit |= st[s] != 0;
                                       });
                lhs_hits += hit ? 1 : 0;
            }
        }
        {
            CtmcSimulator sim(ProcessKind::OnOff, torus, rates);
            SimOptions so;
            so.horizon = mc_t;
            so.checkpoint_times = {mc_t};
            for (std::int64_t i = 0; i < mc_replicas; ++i) {
                so.seed = mix_seed(seed, 0x0FF, static_cast<std::uint64_t>(i));
                bool hit = false;
                sim.run_with_snapshots(init_xi, so,
                                       [&](double, const std::vector<std::uint8_t>& st) {
                                           for (Site s : D) hit |= st[s] == 2;
                                           for (Site s : C) hit |= st[s] != 0;
                                       });
                rhs_hits += hit ? 1 : 0;
            }
        }
        auto lhs_est = binomial_estimate(lhs_hits, mc_replicas, seed);
        auto rhs_est = binomial_estimate(rhs_hits, mc_replicas, seed);
        double cse = combined_se(lhs_est.std_error, rhs_est.std_error);
        sink.summary["mc_lhs"] = lhs_est.point;
        sink.summary["mc_rhs"] = rhs_est.point;
        sink.summary["mc_combined_se"] = cse;
        sink.summary["mc_pass"] = std::fabs(lhs_est.point - rhs_est.point) <= 3.0 * cse;
        if (std::fabs(lhs_est.point - rhs_est.point) > 3.0 * cse) {
            sink.write_now_then_throw = true;
        }
    }
    if (max_diff > tolerance) sink.write_now_then_throw = true;
    (void)opts;
    (void)workers;
}

void run_branching_verify(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                          std::uint64_t seed, int workers) {
    double lambda = r.number("lambda", 3.0);  // birth rate of the branching process
    double delta = r.number("delta", 1.0);
    double gamma = r.number("gamma", 2.0);
    std::int64_t replicas = r.integer("replicas", 100000);
    std::int64_t cap = r.integer("cap", 10000);
    std::int64_t oracle_K = r.integer("oracle_K", 400);
    auto pairs = r.pair_list("pairs", "1:0,0:1,1:1");
    r.finish();
    if (dry) return;

    sink.header = {"n", "m", "closed_form", "mc", "mc_se", "oracle_upper", "oracle_lower"};
    bool ok = true;
    for (auto [n, m] : pairs) {
        double cf = survival_closed_form(n, m, lambda, delta, gamma);
        BranchingState init{n, m};
        EstimateWithCI mc = estimate_branching_survival(
            init, lambda, delta, gamma, replicas, cap,
            mix_seed(seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(m)),
            workers);
        OracleBracket ob = truncated_survival_bracket(init, lambda, delta, gamma, oracle_K);
        sink.add_row({std::to_string(n), std::to_string(m), fmt(cf), fmt(mc.point),
                      fmt(mc.std_error), fmt(ob.upper), fmt(ob.lower)});
        ok &= std::fabs(cf - mc.point) <= 3.0 * mc.std_error + 1e-12;
        ok &= std::fabs(cf - ob.upper) <= 1e-3;
    }
    sink.summary["mean_offspring"] = mean_offspring(lambda, delta, gamma);
    sink.summary["pass"] = ok;
    if (!ok) sink.write_now_then_throw = true;
    (void)opts;
}

void run_moments(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                 std::uint64_t seed, int workers) {
    int d = static_cast<int>(r.integer("d", 2));
    int R = static_cast<int>(r.integer("R", 5));
    double delta = r.number("delta", 1.0);
    double gamma = r.number("gamma", 2.0);
    double lambda_scaled = r.number("lambda", 3.0);  // per-neighbor rate is lambda/(2d)
    std::int64_t replicas = r.integer("replicas", 100000);
    std::vector<double> times = r.number_list("times", std::string("0.5,1,2"));
    r.finish();
    if (dry) return;

    const double per_neighbor = lambda_scaled / (2.0 * d);
    TorusSpec spec(d, 2 * R + 1);
    Rates rates{per_neighbor, delta, gamma};
    validate(rates, spec);

    FieldMoments mom = field_moments(spec, rates, times, replicas, seed, workers);

    X4Space space(d, R, /*reduced=*/true);
    GOperator G = GOperator::build(space, rates);
    const int iO1 = space.flat(space.origin_offset(), 1);

    sink.header = {"t",      "mean_zeta", "se_zeta", "mean_g",       "se_g",
                   "mc_zeta_sq", "se_zeta_sq", "ode_F_O1"};
    bool ok = true;
    for (std::size_t k = 0; k < times.size(); ++k) {
        IntegrateResult ir = integrate_moments(G, space, times[k]);
        double F = ir.F[iO1];
        sink.add_row({fmt(times[k]), fmt(mom.mean_zeta[k]), fmt(mom.se_zeta[k]),
                      fmt(mom.mean_g[k]), fmt(mom.se_g[k]), fmt(mom.mean_zeta_sq[k]),
                      fmt(mom.se_zeta_sq[k]), fmt(F)});
        ok &= std::fabs(mom.mean_zeta[k] - 1.0) <= 3.0 * mom.se_zeta[k];
        ok &= std::fabs(mom.mean_g[k] - 1.0) <= 3.0 * mom.se_g[k];
        ok &= std::fabs(mom.mean_zeta_sq[k] - F) <= 3.0 * mom.se_zeta_sq[k];
    }
    sink.summary["lambda_per_neighbor"] = per_neighbor;
    sink.summary["pass"] = ok;

    // MomentVector serialization: F at the last requested time.
    if (!times.empty()) {
        IntegrateResult fin = integrate_moments(G, space, times.back());
        CsvWriter csv(sink.base + ".moment_vector.csv");
        csv.header({"offset", "component", "value"});
        for (int x = 0; x < space.n_offsets(); ++x) {
            std::vector<int> rep = space.representative(x);
            std::string off;
            for (std::size_t k = 0; k < rep.size(); ++k) {
                if (k) off += ':';
                off += std::to_string(rep[k]);
            }
            for (int comp = 1; comp <= 3; ++comp) {
                csv.field(off);
                csv.field(comp);
                csv.field(fin.F[space.flat(x, comp)]);
                csv.end_row();
            }
        }
        sink.files.push_back(sink.base + ".moment_vector.csv");
    }
    if (!ok) sink.write_now_then_throw = true;
    (void)opts;
}

void run_hitting_tables(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                        std::uint64_t seed, int workers) {
    int d = static_cast<int>(r.integer("d", 10));
    double delta = r.number("delta", 1.0);
    double gamma = r.number("gamma", 2.0);
    double lambda_scaled = r.number("lambda", 3.0);
    int R_srw = static_cast<int>(r.integer("R_srw", 8));
    int R_theta = static_cast<int>(r.integer("R_theta", 8));
    std::string variant_s = r.str("variant", std::string("lambda-free"));
    int R_torus = static_cast<int>(r.integer("R_torus", 4));
    r.finish();
    if (variant_s != "lambda-free" && variant_s != "lambda-bearing") {
        throw ConfigError("variant: must be 'lambda-free' or 'lambda-bearing'");
    }
    if (dry) return;

    const double per_neighbor = lambda_scaled / (2.0 * d);
    ThetaVariant variant = variant_s == "lambda-free" ? ThetaVariant::LambdaFree
                                                      : ThetaVariant::LambdaBearing;

    SrwTable srw = srw_hit_table(d, R_srw);
    ThetaTable theta = theta_hit_table(d, delta, gamma, per_neighbor, R_theta, variant, &srw);

    sink.header = {"table", "offset", "component", "value", "lower", "width"};
    auto offset_str = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ':';
            s += std::to_string(v[i]);
        }
        return s;
    };
    if (!srw.recurrent) {
        for (int i = 0; i < srw.idx->size(); ++i) {
            const auto& rep = srw.idx->rep(i);
            sink.add_row({"srw", offset_str(rep), "0", fmt(srw.value[i]), fmt(srw.lower[i]),
                          fmt(std::fabs(srw.value[i] - srw.lower[i]))});
        }
    }
    for (int i = 0; i < theta.idx->size(); ++i) {
        const auto& rep = theta.idx->rep(i);
        bool origin = theta.idx->l1(i) == 0;
        for (int comp = 1; comp <= 3; ++comp) {
            if (origin && comp == 3) continue;
            double v = theta.at(rep, comp);
            double lo = theta.lower_at(rep, comp);
            sink.add_row({"theta", offset_str(rep), std::to_string(comp), fmt(v), fmt(lo),
                          fmt(std::fabs(v - lo))});
        }
    }

    double h = h_lambda(theta.gamma_O2(), theta.gamma_e1_2(), delta, gamma, per_neighbor, d);
    if (R_torus > 0 && h > 0.0) {
        X4Space space(d, R_torus, /*reduced=*/true);
        GOperator G = GOperator::build(space, Rates{per_neighbor, delta, gamma});
        std::vector<double> K = build_K(space, theta, h, gamma);
        ResidualReport res = eigen_identity_residual(G, space, K);
        double minK = K[0];
        for (double v : K) minK = std::min(minK, v);
        sink.summary["eigen_residual_interior"] = res.interior_rows;
        sink.summary["eigen_residual_origin"] = res.origin_rows;
        sink.summary["min_K"] = minK;
    }
    sink.summary["gamma_e1"] = srw.gamma_e1;
    sink.summary["gamma_e1_width"] = srw.width_e1;
    sink.summary["kesten_plugin"] = kesten_plugin(d);
    sink.summary["h"] = h;
    sink.summary["lambda_per_neighbor"] = per_neighbor;
    try {
        sink.summary["lambda_tilde_solve"] = lambda_tilde(d, delta, gamma, srw.gamma_e1);
    } catch (const DimensionTooSmall&) {
        sink.summary["lambda_tilde_solve"] = nullptr;
    }
    try {
        sink.summary["lambda_tilde_kesten"] = lambda_tilde(d, delta, gamma, kesten_plugin(d));
    } catch (const DimensionTooSmall&) {
        sink.summary["lambda_tilde_kesten"] = nullptr;
    }
    (void)opts;
    (void)workers;
    (void)seed;
}

void run_bounds_report(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                       std::uint64_t seed, int workers) {
    double delta = r.number("delta", 1.0);
    double gamma = r.number("gamma", 2.0);
    std::vector<double> d_list = r.number_list("d_list", std::string("6,8,10,12,14"));
    int solve_R = static_cast<int>(r.integer("solve_R", 8));
    std::int64_t mc_enable = r.integer("mc_enable", 0);
    std::vector<double> mc_grid =
        r.number_list("mc_grid", std::string(""));
    int mc_d = static_cast<int>(r.integer("mc_d", 10));
    int mc_L = static_cast<int>(r.integer("mc_L", 3));
    std::int64_t mc_replicas = r.integer("mc_replicas", 400);
    double mc_horizon = r.number("mc_horizon", 20.0);
    std::int64_t mc_cap = r.integer("mc_cap", 300);
    double mc_threshold = r.number("mc_threshold", 0.02);
    r.finish();
    if (dry) return;

    auto [f1, f2] = f_constants(delta, gamma);
    const double s = 1.0 + delta + gamma;

    sink.header = {"d",  "lower_337", "lambda_tilde_kesten", "lambda_tilde_solve",
                   "scaled_gap_lower", "scaled_gap_upper_kesten"};
    for (double dv : d_list) {
        int d = static_cast<int>(dv);
        std::string lo_s = "", lt_k = "", lt_s = "", g_lo = "", g_hi = "";
        try {
            double lo = lower_bound_337(d, delta, gamma);
            lo_s = fmt(lo);
            g_lo = fmt(d * (2.0 * d * lo - s / gamma));
        } catch (const DimensionTooSmall&) {
        }
        try {
            double lt = lambda_tilde(d, delta, gamma, kesten_plugin(d));
            lt_k = fmt(lt);
            g_hi = fmt(d * (2.0 * d * lt - s / gamma));
        } catch (const DimensionTooSmall&) {
        }
        if (d <= 15) {
            try {
                SrwTable srw = srw_hit_table(d, solve_R);
                lt_s = fmt(lambda_tilde(d, delta, gamma, srw.gamma_e1));
            } catch (const DimensionTooSmall&) {
            }
        }
        sink.add_row({std::to_string(d), lo_s, lt_k, lt_s, g_lo, g_hi});
    }
    sink.summary["f1"] = f1;
    sink.summary["f2"] = f2;

    if (mc_enable != 0) {
        if (mc_grid.empty()) throw ConfigError("mc_grid: required when mc_enable = 1");
        BracketBudget b;
        b.replicas = mc_replicas;
        b.horizon = mc_horizon;
        b.L = mc_L;
        b.survivor_cap = mc_cap;
        b.threshold = mc_threshold;
        b.seed = seed;
        b.workers = workers;
        McBracket br = bracket_critical(mc_d, delta, gamma, mc_grid, b);
        sink.summary["mc_bracket_lambda_lo"] = br.lambda_lo;
        sink.summary["mc_bracket_lambda_hi"] = br.lambda_hi;
        sink.summary["mc_bracket_degenerate"] = br.degenerate;
    }
    (void)opts;
}

void run_invariant_gap(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                       std::uint64_t seed, int workers) {
    NuSamplerConfig cfg;
    cfg.d = static_cast<int>(r.integer("d", 4));
    cfg.L = static_cast<int>(r.integer("L", 3));
    cfg.delta = r.number("delta", 1.0);
    cfg.gamma = r.number("gamma", 2.0);
    cfg.lambda_scaled = r.number("lambda", 8.0);
    cfg.burn_in = r.number("burn_in", 30.0);
    cfg.thin = r.number("thin", 0.5);
    cfg.samples_per_chain = static_cast<int>(r.integer("samples", 100));
    cfg.chains = static_cast<int>(r.integer("chains", 4));
    auto pairs = r.pair_list("pairs", "1:0,0:1,1:1");  // m:n
    std::int64_t dual_replicas = r.integer("dual_replicas", 20000);
    double dual_horizon = r.number("dual_horizon", 30.0);
    std::int64_t dual_cap = r.integer("dual_cap", 400);
    r.finish();
    if (dry) return;
    cfg.seed = seed;
    cfg.workers = workers;

    NuSamples samples = sample_nu(cfg);
    std::vector<std::pair<int, int>> mn(pairs.begin(), pairs.end());
    std::vector<GapRow> rows = product_gap(samples, mn);

    sink.header = {"family", "m", "n", "estimate", "se", "prediction", "gap", "feasible"};
    for (const auto& g : rows) {
        sink.add_row({g.family, std::to_string(g.m), std::to_string(g.n), fmt(g.estimate),
                      fmt(g.se), fmt(g.prediction), fmt(g.gap), g.feasible ? "1" : "0"});
    }

    // Dual-vs-direct comparison on the clustered family.
    TorusSpec spec(cfg.d, cfg.L);
    nlohmann::json duals = nlohmann::json::array();
    bool agree = true;
    for (auto [m, n] : mn) {
        std::vector<Site> blob = clustered_set(spec, m + n, spec.origin());
        PiQuery q{std::vector<Site>(blob.begin(), blob.begin() + m),
                  std::vector<Site>(blob.begin() + m, blob.end())};
        EstimateWithCI direct = estimate_pi(samples, q);
        EstimateWithCI dual =
            dual_pi(q, cfg.d, cfg.L, cfg.delta, cfg.gamma, cfg.lambda_scaled, dual_horizon,
                    dual_replicas, mix_seed(seed, 0xD0A2, static_cast<std::uint64_t>(m * 16 + n)),
                    dual_cap, workers);
        double cse = combined_se(direct.std_error, dual.std_error);
        nlohmann::json e;
        e["m"] = m;
        e["n"] = n;
        e["direct"] = direct.point;
        e["dual"] = dual.point;
        e["combined_se"] = cse;
        duals.push_back(e);
        agree &= std::fabs(direct.point - dual.point) <= 3.0 * cse + 1e-12;
    }
    sink.summary["dual_direct"] = duals;
    sink.summary["dual_direct_agree"] = agree;
    sink.summary["occupancy"] = samples.occupancy;
    sink.summary["occupancy_se"] = samples.occupancy_se;
    sink.summary["stationary"] = samples.stationary;
    if (!samples.stationary) sink.write_now_then_throw = true;
    (void)opts;
}

void run_six_bounds(ConfigReader& r, const RunOptions& opts, bool dry, Sink& sink,
                    std::uint64_t seed, int workers) {
    NuSamplerConfig cfg;
    cfg.d = static_cast<int>(r.integer("d", 4));
    cfg.L = static_cast<int>(r.integer("L", 3));
    cfg.delta = r.number("delta", 1.0);
    cfg.gamma = r.number("gamma", 2.0);
    cfg.lambda_scaled = r.number("lambda", 8.0);
    cfg.burn_in = r.number("burn_in", 30.0);
    cfg.thin = r.number("thin", 0.5);
    cfg.samples_per_chain = static_cast<int>(r.integer("samples", 100));
    cfg.chains = static_cast<int>(r.integer("chains", 4));
    std::int64_t M = r.integer("M", 7);
    std::int64_t n = r.integer("n", 1);
    std::int64_t m = r.integer("m", 0);
    r.finish();
    if (dry) return;
    cfg.seed = seed;
    cfg.workers = workers;

    // mu decides the set size of the b-tilde infimum.
    double p = std::exp(-(1.0 + cfg.delta)) * (1.0 - std::exp(-cfg.gamma));
    std::int64_t mu = static_cast<std::int64_t>(std::ceil(M * p / 2.0));

    NuSamples samples = sample_nu(cfg);
    BcTildeEstimate bt = b_tilde_from_samples(samples, static_cast<int>(mu));
    SixParts parts =
        six_bounds(M, n, m, cfg.d, cfg.delta, cfg.gamma, cfg.lambda_scaled, bt.value);

    sink.summary["p"] = parts.p;
    sink.summary["alpha_tilde"] = parts.alpha_tilde;
    sink.summary["mu"] = parts.mu;
    sink.summary["occupancy_lower_bound"] = parts.occupancy_lower_bound;
    sink.summary["branching_factor"] = parts.branching_factor;
    sink.summary["b_tilde"] = parts.b_tilde_estimate;
    sink.summary["b_tilde_se"] = bt.se;
    sink.summary["b_tilde_spread_feasible"] = bt.spread_feasible;
    sink.summary["composite"] = parts.composite;
    sink.summary["occupancy"] = samples.occupancy;
    (void)opts;
    (void)workers;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        }
        if (key == "experiment") {
            cfg.kind = value;
        } else {
            if (cfg.kv.count(key)) throw ConfigError(key + ": duplicate key");
            cfg.kv[key] = value;
        }
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::vector<std::pair<std::string, std::string>> list_experiments() {
    return {
        {"survival-sweep",
         "survival probability over a per-neighbor lambda grid, with threshold bracket"},
        {"duality-check",
         "two-stage vs on-off duality: exact generator exponentiation plus Monte Carlo"},
        {"branching-verify",
         "branching survival: closed form vs simulation vs truncated linear solve"},
        {"moments", "linear-system first/second moments: simulation vs moment ODE"},
        {"hitting-tables", "random-walk hitting tables, h and lambda-tilde"},
        {"bounds-report", "closed-form critical-value bounds and scaled-gap sweep"},
        {"invariant-gap", "quasi-stationary sampling, product-measure gap, dual estimator"},
        {"six-bounds", "exact alpha/mu pieces and the composite lower bound"},
    };
}

namespace {

using ExperimentFn = void (*)(ConfigReader&, const RunOptions&, bool, Sink&, std::uint64_t,
                              int);

ExperimentFn find_experiment(const std::string& kind) {
    if (kind == "survival-sweep") return &run_survival_sweep;
    if (kind == "duality-check") return &run_duality_check;
    if (kind == "branching-verify") return &run_branching_verify;
    if (kind == "moments") return &run_moments;
    if (kind == "hitting-tables") return &run_hitting_tables;
    if (kind == "bounds-report") return &run_bounds_report;
    if (kind == "invariant-gap") return &run_invariant_gap;
    if (kind == "six-bounds") return &run_six_bounds;
    throw ConfigError("experiment: unknown kind '" + kind + "'");
}

}  // namespace

std::string validate_config(const ExperimentConfig& cfg) {
    ExperimentFn fn = find_experiment(cfg.kind);
    ConfigReader reader(cfg);
    // Common keys allowed in any config.
    std::uint64_t seed = static_cast<std::uint64_t>(reader.integer("seed", 1));
    (void)seed;
    reader.str("out", std::string(""));
    reader.str("format", std::string("csv"));
    Sink sink;
    RunOptions opts;
    fn(reader, opts, /*dry=*/true, sink, 0, 1);
    return reader.echo();
}

int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    auto started = std::chrono::steady_clock::now();
    try {
        ExperimentFn fn = find_experiment(cfg.kind);
        ConfigReader reader(cfg);
        std::uint64_t seed = static_cast<std::uint64_t>(reader.integer("seed", 1));
        std::string cfg_out = reader.str("out", std::string(""));
        std::string cfg_format = reader.str("format", std::string("csv"));
        if (opts.seed_override) {
            seed = *opts.seed_override;
        }
        Sink sink;
        sink.base = !opts.out_path.empty() ? opts.out_path
                    : !cfg_out.empty()     ? cfg_out
                                           : "out";
        sink.format = opts.format.empty() ? cfg_format : opts.format;
        if (sink.format != "csv" && sink.format != "json") {
            throw ConfigError("format: must be 'csv' or 'json'");
        }

        fn(reader, opts, /*dry=*/false, sink, seed, std::max(1, opts.workers));
        sink.write();

        // Manifest: config echo, derived seed, version, wall time. Not part
        // of the deterministic data section.
        nlohmann::json manifest;
        manifest["experiment"] = cfg.kind;
        manifest["config"] = reader.echo_map();
        manifest["seed"] = seed;
        manifest["version"] = kVersion;
        manifest["data_files"] = sink.files;
        manifest["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        std::ofstream mf(sink.base + ".manifest.json", std::ios::binary);
        mf << manifest.dump(2) << "\n";

        if (sink.write_now_then_throw) {
            std::cerr << "gate failure: see " << sink.base << " outputs\n";
            return 3;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const OverlapError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const GateFailure& e) {
        std::cerr << "gate failure: " << e.what() << "\n";
        return 3;
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << "\n";
        return 4;
    } catch (const ExtinctionDuringSampling& e) {
        std::cerr << "gate failure: " << e.what() << "\n";
        return 3;
    } catch (const SizeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const DimensionTooSmall& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const StepError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace tsc
