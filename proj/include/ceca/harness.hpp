#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ceca/consensus.hpp"
#include "ceca/csv.hpp"
#include "ceca/error.hpp"
#include "ceca/linalg.hpp"
#include "ceca/mixing.hpp"
#include "ceca/optimizer.hpp"
#include "ceca/problems.hpp"
#include "ceca/rng.hpp"
#include "ceca/schedule.hpp"
#include "ceca/topology.hpp"

namespace ceca {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Experiment { consensus, matrix_verify, lsq };
enum class Topology { ceca, ring, one_peer_exp };

inline std::string_view to_string(Experiment e) {
    switch (e) {
        case Experiment::consensus: return "consensus";
        case Experiment::matrix_verify: return "matrix-verify";
        case Experiment::lsq: return "lsq";
    }
    return "?";
}

inline std::string_view to_string(Topology t) {
    switch (t) {
        case Topology::ceca: return "ceca";
        case Topology::ring: return "ring";
        case Topology::one_peer_exp: return "one-peer-exp";
    }
    return "?";
}

/// gamma_k = initial / factor^floor(k / interval).
struct StepSizeSchedule {
    double initial = 0.02;
    double decay_factor = 1.5;
    int decay_interval = 20;

    double at(std::int64_t k) const {
        return initial / std::pow(decay_factor, static_cast<double>(k / decay_interval));
    }
};

struct RunConfig {
    Experiment experiment = Experiment::consensus;
    int n = 6;
    int d = 1;
    int N = 50;
    PortModel mode = PortModel::two_port;
    Topology topology = Topology::ceca;
    StepSizeSchedule gamma;
    int T = 30;
    std::uint64_t seed = 1;
    int seeds = 1;
    double sigma_s = 0.1;
    double sigma_n = 5.0;
    bool global_average = false;
    std::vector<int> sizes{2, 3, 5, 6, 10, 17, 32};
    std::string preset;
    std::string out;

    /// Human-readable label such as "ceca-2p" or "ring".
    std::string topology_label() const {
        if (topology == Topology::ceca) return "ceca-" + std::string(to_string(mode));
        return std::string(to_string(topology));
    }

    void validate() const {
        if (experiment == Experiment::matrix_verify) {
            if (sizes.empty()) throw ConfigError("matrix-verify needs at least one size");
            for (int s : sizes) {
                if (s < 2) throw ConfigError("matrix-verify sizes must be >= 2, got " + std::to_string(s));
            }
            return;
        }
        if (n < 2) throw ConfigError("n must be >= 2, got " + std::to_string(n));
        if (d < 1 || N < 1) throw ConfigError("d and N must be >= 1");
        if (T < 0) throw ConfigError("T must be >= 0");
        if (seeds < 1) throw ConfigError("seeds must be >= 1");
        if (!(gamma.decay_factor > 0.0) || gamma.decay_interval < 1) throw ConfigError("invalid step-size decay");
        if (sigma_s < 0.0 || sigma_n < 0.0) throw ConfigError("noise levels must be >= 0");
        if (topology == Topology::ceca && mode == PortModel::one_port && n % 2 != 0) {
            throw ConfigError("1-port CECA requires an even n, got " + std::to_string(n));
        }
        if (topology == Topology::one_peer_exp && (n & (n - 1)) != 0) {
            throw ConfigError("one-peer-exp requires n to be a power of 2, got " + std::to_string(n));
        }
    }
};

using Settings = std::map<std::string, std::string>;

/// Flat "key = value" file; '#' starts a comment, blank lines are skipped.
inline Settings parse_settings(std::istream& is) {
    Settings out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string{};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        out.insert_or_assign(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

inline Settings load_settings_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_settings(in);
}

namespace detail {

inline long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
    }
}

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) out.push_back(static_cast<int>(parse_int(key, cell)));
    }
    return out;
}

}  // namespace detail

inline Experiment parse_experiment(const std::string& v) {
    if (v == "consensus") return Experiment::consensus;
    if (v == "matrix-verify") return Experiment::matrix_verify;
    if (v == "lsq") return Experiment::lsq;
    throw ConfigError("unknown experiment '" + v + "'");
}

/// Applies a named preset. "paper": n=258, d=10, N=50, sigma_s=0.1, sigma_n=5,
/// gamma 0.02 decayed 1.5x every 20 iterations, T=200. "desk": n=16, d=5, N=20.
inline void apply_preset(RunConfig& cfg, const std::string& name) {
    const LeastSquaresSizes* sizes = nullptr;
    if (name == "paper") {
        sizes = &kPaperPreset;
        cfg.T = 200;
    } else if (name == "desk") {
        sizes = &kDeskPreset;
        cfg.T = 500;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
    }
    cfg.preset = name;
    cfg.n = sizes->n;
    cfg.N = sizes->N;
    cfg.d = sizes->d;
    cfg.sigma_s = sizes->sigma_s;
    cfg.sigma_n = sizes->sigma_n;
    cfg.gamma = StepSizeSchedule{0.02, 1.5, 20};
}

/// Builds a config from settings. A preset is applied first, then every other key,
/// so explicit values override preset values.
inline RunConfig resolve_config(const Settings& settings, RunConfig cfg = {}) {
    if (auto it = settings.find("preset"); it != settings.end() && !it->second.empty()) apply_preset(cfg, it->second);
    std::optional<PortModel> topology_mode;
    for (const auto& [key, v] : settings) {
        if (key == "preset") continue;
        if (key == "experiment") cfg.experiment = parse_experiment(v);
        else if (key == "n") cfg.n = static_cast<int>(detail::parse_int(key, v));
        else if (key == "d") cfg.d = static_cast<int>(detail::parse_int(key, v));
        else if (key == "N") cfg.N = static_cast<int>(detail::parse_int(key, v));
        else if (key == "mode") cfg.mode = parse_port_model(v);
        else if (key == "topology") {
            if (v == "ceca") cfg.topology = Topology::ceca;
            else if (v == "ceca-1p") { cfg.topology = Topology::ceca; topology_mode = PortModel::one_port; }
            else if (v == "ceca-2p") { cfg.topology = Topology::ceca; topology_mode = PortModel::two_port; }
            else if (v == "ring") cfg.topology = Topology::ring;
            else if (v == "one-peer-exp") cfg.topology = Topology::one_peer_exp;
            else throw ConfigError("unknown topology '" + v + "'");
        }
        else if (key == "gamma0") cfg.gamma.initial = detail::parse_real(key, v);
        else if (key == "gamma_decay") cfg.gamma.decay_factor = detail::parse_real(key, v);
        else if (key == "gamma_interval") cfg.gamma.decay_interval = static_cast<int>(detail::parse_int(key, v));
        else if (key == "T") cfg.T = static_cast<int>(detail::parse_int(key, v));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_int(key, v));
        else if (key == "seeds") cfg.seeds = static_cast<int>(detail::parse_int(key, v));
        else if (key == "sigma_s") cfg.sigma_s = detail::parse_real(key, v);
        else if (key == "sigma_n") cfg.sigma_n = detail::parse_real(key, v);
        else if (key == "global_average") cfg.global_average = detail::parse_bool(key, v);
        else if (key == "sizes") cfg.sizes = detail::parse_int_list(key, v);
        else if (key == "out") cfg.out = v;
        else throw ConfigError("unknown config key '" + key + "'");
    }
    if (topology_mode) {
        if (settings.count("mode") && parse_port_model(settings.at("mode")) != *topology_mode) {
            throw ConfigError("topology '" + settings.at("topology") + "' conflicts with mode '" + settings.at("mode") + "'");
        }
        cfg.mode = *topology_mode;
    }
    cfg.validate();
    return cfg;
}

/// Explicit path wins; otherwise $CECA_OUTPUT_DIR/<default_name> when the variable
/// is set; otherwise empty (caller writes to stdout).
inline std::string resolve_output_path(const std::string& explicit_path, const std::string& default_name) {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* dir = std::getenv("CECA_OUTPUT_DIR"); dir && *dir) {
        return (std::filesystem::path(dir) / default_name).string();
    }
    return {};
}

// ---------------------------------------------------------------------------
// Baseline topologies
// ---------------------------------------------------------------------------

/// Doubly stochastic gossip matrices of the comparison topologies.
/// ring: (I + S + S^T) / 3 with S the cyclic shift, static.
/// one-peer-exp: (I + S^(2^(r mod log2 n))) / 2, cycling; n must be a power of 2.
inline Eigen::MatrixXd baseline_gossip(Topology topology, int n, int r) {
    if (n < 2) throw ConfigError("baseline_gossip: n must be >= 2");
    const auto shift = [n](int s) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) m(i, ((i - s) % n + n) % n) = 1.0;
        return m;
    };
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    switch (topology) {
        case Topology::ring: {
            const Eigen::MatrixXd s = shift(1);
            return (eye + s + s.transpose()) / 3.0;
        }
        case Topology::one_peer_exp: {
            if ((n & (n - 1)) != 0) throw ConfigError("one-peer-exp requires n to be a power of 2");
            const int log2n = std::bit_width(static_cast<unsigned>(n)) - 1;
            return 0.5 * (eye + shift(1 << (r % log2n)));
        }
        case Topology::ceca:
            break;
    }
    throw ConfigError("baseline_gossip: CECA is not a gossip baseline");
}

/// Scalars each agent sends per iteration: one d-vector per out-neighbor.
inline long long scalars_sent_per_iteration(Topology topology, int d) {
    return topology == Topology::ring ? 2LL * d : static_cast<long long>(d);
}

// ---------------------------------------------------------------------------
// Consensus experiment
// ---------------------------------------------------------------------------

/// Initial agent vectors are i.i.d. standard normal under (seed, agent).
inline Eigen::MatrixXd random_agent_vectors(int n, int d, std::uint64_t seed, StreamTag tag) {
    Eigen::MatrixXd u(n, d);
    for (int i = 0; i < n; ++i) {
        CounterStream s(seed, tag, static_cast<std::uint32_t>(i + 1), 0);
        for (int j = 0; j < d; ++j) u(i, j) = s.normal(static_cast<std::uint64_t>(j));
    }
    return u;
}

/// sum_i ||x_i - target||.
inline double consensus_residue(const Eigen::MatrixXd& x, const Eigen::VectorXd& target) {
    return (x.rowwise() - target.transpose()).rowwise().norm().sum();
}

struct ConsensusRow {
    std::int64_t k = 0;
    double residue = 0.0;
    double relative_residue = 0.0;
    long long comm_scalars = 0;
};

struct ConsensusSeedRun {
    std::uint64_t seed = 0;
    std::vector<ConsensusRow> rows;
    std::optional<std::int64_t> exact_round;  // first k with relative residue <= 1e-10
};

struct ConsensusExperimentResult {
    std::vector<ConsensusSeedRun> runs;
    std::vector<ConsensusRow> mean;
};

inline constexpr double kExactConsensusTol = 1e-10;

/// Applies the configured topology's averaging for T rounds from random initial vectors.
/// CECA cycles its rounds r = k mod tau with y initialized to x.
inline ConsensusExperimentResult run_consensus_experiment(const RunConfig& cfg, const Eigen::MatrixXd* initial = nullptr) {
    RunConfig c = cfg;
    c.experiment = Experiment::consensus;
    c.validate();
    ConsensusExperimentResult result;
    const long long per_iter = scalars_sent_per_iteration(c.topology, c.d);

    std::optional<BinarySchedule> schedule;
    std::vector<CommMatrix> comms;
    if (c.topology == Topology::ceca) {
        schedule.emplace(c.n);
        for (int r = 0; r < schedule->rounds(); ++r) comms.push_back(comm_matrix(*schedule, r, c.mode));
    }

    for (int s = 0; s < c.seeds; ++s) {
        ConsensusSeedRun run;
        run.seed = c.seed + static_cast<std::uint64_t>(s);
        const Eigen::MatrixXd x0 = initial ? *initial : random_agent_vectors(c.n, c.d, run.seed, StreamTag::consensus_input);
        if (x0.rows() != c.n || x0.cols() != c.d) throw ArgumentError("initial vectors have the wrong shape");
        const Eigen::VectorXd target = x0.colwise().mean().transpose();
        const double r0 = consensus_residue(x0, target);

        auto record = [&](std::int64_t k, const Eigen::MatrixXd& x) {
            ConsensusRow row;
            row.k = k;
            row.residue = consensus_residue(x, target);
            row.relative_residue = r0 > 0.0 ? row.residue / r0 : 0.0;
            row.comm_scalars = per_iter * k;
            if (!run.exact_round && row.relative_residue <= kExactConsensusTol) run.exact_round = k;
            run.rows.push_back(row);
        };

        if (c.topology == Topology::ceca) {
            ConsensusState state{x0, x0, 0};
            record(0, state.I);
            for (int k = 0; k < c.T; ++k) {
                state = ceca_round(state, *schedule, comms[static_cast<std::size_t>(schedule->round_at(k))]);
                record(k + 1, state.I);
            }
        } else {
            Eigen::MatrixXd x = x0;
            record(0, x);
            for (int k = 0; k < c.T; ++k) {
                x = baseline_gossip(c.topology, c.n, k) * x;
                record(k + 1, x);
            }
        }
        result.runs.push_back(std::move(run));
    }

    for (std::size_t k = 0; k < result.runs.front().rows.size(); ++k) {
        ConsensusRow m = result.runs.front().rows[k];
        m.residue = m.relative_residue = 0.0;
        for (const auto& run : result.runs) {
            m.residue += run.rows[k].residue;
            m.relative_residue += run.rows[k].relative_residue;
        }
        m.residue /= static_cast<double>(result.runs.size());
        m.relative_residue /= static_cast<double>(result.runs.size());
        result.mean.push_back(m);
    }
    return result;
}

inline void write_consensus_csv(std::ostream& os, const RunConfig& cfg, const ConsensusExperimentResult& res) {
    os << "# experiment=consensus topology=" << cfg.topology_label() << " n=" << cfg.n << " d=" << cfg.d
       << " T=" << cfg.T << " seed=" << cfg.seed << " seeds=" << cfg.seeds << '\n';
    os << "# init=standard-normal\n";
    os << "seed,k,residue,relative_residue,comm_scalars\n";
    auto line = [&os](const std::string& seed, const ConsensusRow& r) {
        os << seed << ',' << r.k << ',' << format_double(r.residue) << ',' << format_double(r.relative_residue) << ','
           << r.comm_scalars << '\n';
    };
    for (const auto& run : res.runs) {
        for (const auto& r : run.rows) line(std::to_string(run.seed), r);
    }
    if (res.runs.size() > 1) {
        for (const auto& r : res.mean) line("mean", r);
    }
}

// ---------------------------------------------------------------------------
// Matrix lemma verification
// ---------------------------------------------------------------------------

using MixingBuilder = std::function<MixingPair(const BinarySchedule&, int, PortModel)>;

inline MixingBuilder default_mixing_builder() {
    return [](const BinarySchedule& s, int r, PortModel m) { return build_mixing(s, r, m); };
}

/// Negative-control fixture: the y self-weight for delta_r = 1 uses n_r / (2 n_r + 2)
/// instead of n_r / (2 n_r + 1).
inline MixingBuilder faulty_mixing_builder() {
    return [](const BinarySchedule& s, int r, PortModel m) {
        MixingPair pair = build_mixing(s, r, m);
        if (pair.delta_r == 1) {
            const int n = s.agents();
            const double nr = s.window(r);
            const double wrong = nr / (2.0 * nr + 2.0);
            pair.W.bottomRightCorner(n, n) = wrong * Eigen::MatrixXd::Identity(n, n);
        }
        return pair;
    };
}

enum class CheckStatus { pass, fail, skipped };

inline std::string_view to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::fail: return "FAIL";
        case CheckStatus::skipped: return "skipped";
    }
    return "?";
}

struct VerificationRow {
    int n = 0;
    PortModel mode = PortModel::two_port;
    std::string check;
    CheckStatus status = CheckStatus::pass;
    double worst = 0.0;  // worst residual; for "norm" the largest norm minus sqrt(2)
    std::string detail;
};

struct VerificationReport {
    std::vector<VerificationRow> rows;

    bool all_passed() const {
        return std::none_of(rows.begin(), rows.end(), [](const auto& r) { return r.status == CheckStatus::fail; });
    }
};

inline constexpr double kFamilyTol = 1e-12;
inline constexpr double kNormSlack = 1e-9;
inline constexpr double kProductTol = 1e-12;
inline constexpr double kCommutationTol = 1e-12;

/// Runs the family, norm, product-consensus, semigroup and commutation checks for
/// one (n, mode). Odd n in 1-port mode yields a single "skipped" row.
inline std::vector<VerificationRow> verify_lemmas(int n, PortModel mode, const MixingBuilder& builder) {
    std::vector<VerificationRow> rows;
    if (mode == PortModel::one_port && n % 2 != 0) {
        rows.push_back({n, mode, "all", CheckStatus::skipped, 0.0, "1-port requires even n"});
        return rows;
    }
    const BinarySchedule schedule(n);
    const int tau = schedule.rounds();
    std::vector<MixingPair> pairs;
    for (int r = 0; r < tau; ++r) pairs.push_back(builder(schedule, r, mode));
    const auto mixing_at = [&](int k) -> const MixingPair& { return pairs[static_cast<std::size_t>(k % tau)]; };

    auto add = [&](std::string check, bool ok, double worst, std::string detail = {}) {
        rows.push_back({n, mode, std::move(check), ok ? CheckStatus::pass : CheckStatus::fail, worst, std::move(detail)});
    };

    // Family structure of every W and Wg.
    {
        double worst = 0.0;
        std::string detail;
        for (const auto& p : pairs) {
            for (const auto* m : {&p.W, &p.Wg}) {
                const auto rep = verify_family(*m, kFamilyTol);
                worst = std::max(worst, rep.max_residual);
                if (!rep.passed() && detail.empty()) {
                    detail = std::string(m == &p.W ? "W" : "Wg") + " round " + std::to_string(p.r) + ": " + rep.failure;
                }
            }
        }
        add("family", worst <= kFamilyTol, worst, detail);
    }

    // Products W^(t) ... W^(0) for t up to max(3 tau, tau + 3).
    std::vector<Eigen::MatrixXd> prefix;
    {
        Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(2 * n, 2 * n);
        for (int k = 0; k <= std::max(3 * tau, tau + 3); ++k) {
            prod = mixing_at(k).W * prod;
            prefix.push_back(prod);
        }
    }

    // Operator norm of W, Wg and of the products.
    {
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& p : pairs) {
            worst = std::max({worst, operator_norm(p.W), operator_norm(p.Wg)});
        }
        for (const auto& m : prefix) worst = std::max(worst, operator_norm(m));
        worst -= std::sqrt(2.0);
        add("norm", worst <= kNormSlack, worst);
    }

    // Finite-time product consensus.
    {
        const double err = (prefix[static_cast<std::size_t>(tau - 1)] - *product_consensus_closed_form(n, tau, tau - 1))
                               .cwiseAbs()
                               .maxCoeff();
        add("consensus-tau-1", err <= kProductTol, err);
    }
    {
        double err = 0.0;
        for (int t : {tau, tau + 3, 3 * tau}) {
            err = std::max(err, (prefix[static_cast<std::size_t>(t)] - *product_consensus_closed_form(n, tau, t))
                                    .cwiseAbs()
                                    .maxCoeff());
        }
        add("consensus-t>=tau", err <= kProductTol, err);
    }

    // Closure under multiplication: consecutive pairs, mixed W/Wg pairs, and every prefix product.
    {
        double worst = 0.0;
        bool ok = true;
        auto check = [&](const Eigen::MatrixXd& m) {
            const auto rep = verify_family(m, kFamilyTol);
            worst = std::max(worst, rep.max_residual);
            ok = ok && rep.passed();
        };
        for (int r = 0; r < tau; ++r) {
            const auto& a = mixing_at(r + 1);
            const auto& b = mixing_at(r);
            check(a.W * b.W);
            check(a.Wg * b.W);
            check(a.W * b.Wg);
        }
        for (const auto& m : prefix) check(m);
        add("semigroup", ok, worst);
    }

    // Commutation with the block averaging matrix.
    {
        double worst = 0.0;
        for (const auto& p : pairs) worst = std::max({worst, commutation_check(p.W), commutation_check(p.Wg)});
        for (const auto& m : prefix) worst = std::max(worst, commutation_check(m));
        add("commutation", worst <= kCommutationTol, worst);
    }
    return rows;
}

inline VerificationReport run_matrix_verification(const RunConfig& cfg,
                                                  const MixingBuilder& builder = default_mixing_builder()) {
    RunConfig c = cfg;
    c.experiment = Experiment::matrix_verify;
    c.validate();
    VerificationReport report;
    for (PortModel mode : {PortModel::two_port, PortModel::one_port}) {
        for (int n : c.sizes) {
            auto rows = verify_lemmas(n, mode, builder);
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        }
    }
    return report;
}

inline void write_verification_table(std::ostream& os, const VerificationReport& report) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%5s %4s %-18s %-8s %14s  %s\n", "n", "mode", "check", "status", "worst", "detail");
    os << buf;
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%5d %4s %-18s %-8s %14.6e  ", r.n, std::string(to_string(r.mode)).c_str(),
                      r.check.c_str(), std::string(to_string(r.status)).c_str(), r.worst);
        os << buf << r.detail << '\n';
    }
    os << (report.all_passed() ? "ALL PASS\n" : "FAILURES PRESENT\n");
}

// ---------------------------------------------------------------------------
// Least-squares experiment
// ---------------------------------------------------------------------------

struct MetricsRow {
    std::int64_t k = 0;
    int r = 0;                   // round the next iteration uses
    int delta_r = -1;            // CECA bit of that round; -1 for gossip baselines
    double residue = 0.0;        // sum_i ||x_i - x_opt||
    double f_gap = 0.0;          // f(mean x) - f*
    double grad_norm2 = 0.0;     // ||grad f(mean x)||^2
    double consensus_dev = 0.0;  // ||x - 1 mean(x)^T||_F
    long long comm_scalars = 0;  // cumulative scalars sent per agent
};

struct LsqSeedRun {
    std::uint64_t seed = 0;
    std::vector<MetricsRow> rows;
    /// CECA only: max_k ||mean x - mean y||_inf and max_k ||mean x^(k+1) - (mean x^(k) - gamma mean e^(k))||_inf.
    double max_mean_gap = 0.0;
    double max_mean_step_error = 0.0;
    int max_gradient_evaluations = 0;  // per agent per iteration
};

struct LsqResult {
    std::vector<LsqSeedRun> runs;
    std::vector<MetricsRow> mean;
};

inline constexpr double kDivergenceResidue = 1e12;

inline MetricsRow lsq_metrics(const LeastSquaresProblem& p, const GlobalOptimum& opt, const Eigen::MatrixXd& x,
                              std::int64_t k, long long comm) {
    MetricsRow row;
    row.k = k;
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    row.residue = consensus_residue(x, opt.x_opt);
    row.f_gap = objective(p, mean) - opt.f_opt;
    row.grad_norm2 = global_gradient(p, mean).squaredNorm();
    row.consensus_dev = (x.rowwise() - mean.transpose()).norm();
    row.comm_scalars = comm;
    return row;
}

/// Runs DSGD-CECA (topology ceca) or adapt-then-combine DSGD x+ = W (x - gamma g)
/// over a gossip baseline for T iterations per seed. Seeds are seed, seed+1, ...
/// and each seed draws its own problem instance and initial models.
inline LsqResult run_lsq_experiment(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.experiment = Experiment::lsq;
    c.validate();
    LsqResult result;
    const long long per_iter = scalars_sent_per_iteration(c.topology, c.d);

    for (int s = 0; s < c.seeds; ++s) {
        LsqSeedRun run;
        run.seed = c.seed + static_cast<std::uint64_t>(s);
        const LeastSquaresProblem problem = make_least_squares(c.n, c.N, c.d, c.sigma_s, c.sigma_n, run.seed);
        const GlobalOptimum opt = global_optimum(problem);
        const Eigen::MatrixXd x0 = random_agent_vectors(c.n, c.d, run.seed, StreamTag::initial_models);
        auto oracle = [&problem](const Eigen::VectorXd& point, int agent, CounterStream& rng) {
            return stochastic_gradient(problem, agent, point, rng);
        };
        const std::optional<BinarySchedule> schedule =
            c.topology == Topology::ceca ? std::optional<BinarySchedule>(c.n) : std::nullopt;
        const int period = c.topology == Topology::one_peer_exp ? std::bit_width(static_cast<unsigned>(c.n)) - 1 : 1;
        auto record = [&](std::int64_t k, const Eigen::MatrixXd& x) {
            MetricsRow row = lsq_metrics(problem, opt, x, k, per_iter * k);
            if (schedule) {
                row.r = schedule->round_at(k);
                row.delta_r = schedule->delta(row.r);
            } else {
                row.r = static_cast<int>(k % period);
            }
            if (!std::isfinite(row.residue) || row.residue > kDivergenceResidue) {
                throw NumericalError("run diverged: seed " + std::to_string(run.seed) + ", iteration " + std::to_string(k) +
                                     ", residue " + format_double(row.residue) + ", gamma " +
                                     format_double(c.gamma.at(std::max<std::int64_t>(k - 1, 0))));
            }
            run.rows.push_back(row);
        };

        if (c.topology == Topology::ceca) {
            const DsgdCeca method(*schedule, c.mode, run.seed);
            OptimizerState state = make_optimizer_state(x0, c.gamma.at(0));
            if (c.global_average) state = initial_global_average(state);
            record(0, state.x);
            for (int k = 0; k < c.T; ++k) {
                state.gamma = c.gamma.at(k);
                StepTrace trace;
                const OptimizerState next = method.step(state, oracle, &trace);
                const Eigen::VectorXd xbar = state.x.colwise().mean().transpose();
                const Eigen::VectorXd ybar = state.y.colwise().mean().transpose();
                const Eigen::VectorXd ebar = trace.gradients.colwise().mean().transpose();
                const Eigen::VectorXd next_xbar = next.x.colwise().mean().transpose();
                const Eigen::VectorXd next_ybar = next.y.colwise().mean().transpose();
                run.max_mean_gap = std::max({run.max_mean_gap, (xbar - ybar).cwiseAbs().maxCoeff(),
                                             (next_xbar - next_ybar).cwiseAbs().maxCoeff()});
                run.max_mean_step_error =
                    std::max(run.max_mean_step_error, (next_xbar - (xbar - state.gamma * ebar)).cwiseAbs().maxCoeff());
                run.max_gradient_evaluations = std::max(run.max_gradient_evaluations, trace.gradient_evaluations / c.n);
                state = next;
                record(k + 1, state.x);
            }
        } else {
            Eigen::MatrixXd x = x0;
            record(0, x);
            for (int k = 0; k < c.T; ++k) {
                const double gamma = c.gamma.at(k);
                Eigen::MatrixXd g(c.n, c.d);
                for (int i = 0; i < c.n; ++i) {
                    CounterStream rng(run.seed, StreamTag::gradient_noise, static_cast<std::uint32_t>(i + 1),
                                      static_cast<std::uint32_t>(k));
                    g.row(i) = oracle(x.row(i).transpose(), i + 1, rng).transpose();
                }
                run.max_gradient_evaluations = 1;
                x = baseline_gossip(c.topology, c.n, k) * (x - gamma * g);
                record(k + 1, x);
            }
        }
        result.runs.push_back(std::move(run));
    }

    const auto& first = result.runs.front().rows;
    for (std::size_t k = 0; k < first.size(); ++k) {
        MetricsRow m = first[k];
        m.residue = m.f_gap = m.grad_norm2 = m.consensus_dev = 0.0;
        for (const auto& run : result.runs) {
            m.residue += run.rows[k].residue;
            m.f_gap += run.rows[k].f_gap;
            m.grad_norm2 += run.rows[k].grad_norm2;
            m.consensus_dev += run.rows[k].consensus_dev;
        }
        const auto count = static_cast<double>(result.runs.size());
        m.residue /= count;
        m.f_gap /= count;
        m.grad_norm2 /= count;
        m.consensus_dev /= count;
        result.mean.push_back(m);
    }
    return result;
}

inline void write_lsq_csv(std::ostream& os, const RunConfig& cfg, const LsqResult& res) {
    os << "# experiment=lsq topology=" << cfg.topology_label() << " n=" << cfg.n << " d=" << cfg.d << " N=" << cfg.N
       << " sigma_s=" << format_double(cfg.sigma_s) << " sigma_n=" << format_double(cfg.sigma_n)
       << " gamma0=" << format_double(cfg.gamma.initial) << " gamma_decay=" << format_double(cfg.gamma.decay_factor)
       << " gamma_interval=" << cfg.gamma.decay_interval << " T=" << cfg.T << " seed=" << cfg.seed
       << " seeds=" << cfg.seeds << " global_average=" << (cfg.global_average ? 1 : 0) << '\n';
    os << "# init=standard-normal\n";
    os << "seed,k,r,delta_r,residue,f_gap,grad_norm2,consensus_dev,comm_scalars\n";
    auto line = [&os](const std::string& seed, const MetricsRow& r) {
        os << seed << ',' << r.k << ',' << r.r << ',' << (r.delta_r < 0 ? std::string() : std::to_string(r.delta_r)) << ','
           << format_double(r.residue) << ',' << format_double(r.f_gap) << ','
           << format_double(r.grad_norm2) << ',' << format_double(r.consensus_dev) << ',' << r.comm_scalars << '\n';
    };
    for (const auto& run : res.runs) {
        for (const auto& r : run.rows) line(std::to_string(run.seed), r);
    }
    if (res.runs.size() > 1) {
        for (const auto& r : res.mean) line("mean", r);
    }
}

}  // namespace ceca
