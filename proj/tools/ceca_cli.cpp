// ceca: command-line driver for the consensus, matrix-verify and least-squares experiments.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "ceca/ceca.hpp"

namespace {

/// Collects the flags the user actually passed so they can override config-file values.
struct FlagSink {
    ceca::Settings values;

    template <class T>
    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values.insert_or_assign(key, v); },
                                              help);
    }
};

void add_common(CLI::App* app, FlagSink& sink) {
    sink.add<std::string>(app, "--config", "__config", "flat key = value config file (flags override it)");
    sink.add<std::string>(app, "--out", "out", "output path (default: $CECA_OUTPUT_DIR/<experiment>.csv, else stdout)");
    sink.add<std::string>(app, "--seed", "seed", "base seed");
    sink.add<std::string>(app, "--seeds", "seeds", "number of seeds (seed, seed+1, ...)");
}

ceca::RunConfig resolve(FlagSink& sink, ceca::Experiment experiment) {
    ceca::Settings merged;
    if (auto it = sink.values.find("__config"); it != sink.values.end()) {
        merged = ceca::load_settings_file(it->second);
        sink.values.erase(it);
    }
    for (const auto& [k, v] : sink.values) merged.insert_or_assign(k, v);
    merged.insert_or_assign("experiment", std::string(ceca::to_string(experiment)));
    return ceca::resolve_config(merged);
}

/// Writes to the resolved path, or stdout when there is none.
template <class Writer>
void emit(const std::string& explicit_path, const std::string& default_name, Writer&& write) {
    const std::string path = ceca::resolve_output_path(explicit_path, default_name);
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw ceca::ConfigError("cannot open output file " + path);
    write(out);
    std::cerr << "wrote " << path << '\n';
}

Eigen::MatrixXd parse_values(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    Eigen::MatrixXd u(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) u(static_cast<Eigen::Index>(i), 0) = values[i];
    return u;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Exact-consensus gossip (CECA-1P/2P) and DSGD-CECA experiments.\n"
        "Baselines: ring uses weights 1/3 on self and both neighbors; one-peer-exp uses 1/2 on self\n"
        "and the single neighbor 2^(k mod log2 n) hops away (n must be a power of 2)."};
    app.require_subcommand(1);

    FlagSink consensus_flags;
    auto* consensus = app.add_subcommand("consensus", "residue vs rounds of gossip averaging from random vectors");
    add_common(consensus, consensus_flags);
    consensus_flags.add<int>(consensus, "--n", "n", "agent count");
    consensus_flags.add<int>(consensus, "--d", "d", "vector dimension");
    consensus_flags.add<std::string>(consensus, "--mode", "mode", "1p or 2p (CECA port model)");
    consensus_flags.add<std::string>(consensus, "--topology", "topology", "ceca | ceca-1p | ceca-2p | ring | one-peer-exp");
    consensus_flags.add<int>(consensus, "--T", "T", "rounds to simulate");

    FlagSink verify_flags;
    auto* verify = app.add_subcommand("matrix-verify", "check the mixing-matrix lemmas; exit status 1 on any failure");
    verify_flags.add<std::string>(verify, "--config", "__config", "flat key = value config file");
    verify_flags.add<std::string>(verify, "--sizes", "sizes", "comma-separated agent counts");
    bool inject_fault = false;
    verify->add_flag("--inject-fault", inject_fault, "use a deliberately wrong W (negative control)")->group("");

    FlagSink lsq_flags;
    auto* lsq = app.add_subcommand("lsq", "distributed least squares with DSGD-CECA or a gossip baseline");
    add_common(lsq, lsq_flags);
    lsq_flags.add<std::string>(lsq, "--preset", "preset", "paper | desk");
    lsq_flags.add<std::string>(lsq, "--topology", "topology", "ceca | ceca-1p | ceca-2p | ring | one-peer-exp");
    lsq_flags.add<std::string>(lsq, "--mode", "mode", "1p or 2p");
    lsq_flags.add<int>(lsq, "--n", "n", "agent count");
    lsq_flags.add<int>(lsq, "--d", "d", "model dimension");
    lsq_flags.add<int>(lsq, "--N", "N", "rows per agent");
    lsq_flags.add<int>(lsq, "--T", "T", "iterations");
    lsq_flags.add<double>(lsq, "--gamma0", "gamma0", "initial step size");
    lsq_flags.add<double>(lsq, "--gamma-decay", "gamma_decay", "step-size decay factor");
    lsq_flags.add<int>(lsq, "--gamma-interval", "gamma_interval", "iterations between decays");
    lsq_flags.add<double>(lsq, "--sigma-s", "sigma_s", "measurement noise std");
    lsq_flags.add<double>(lsq, "--sigma-n", "sigma_n", "gradient noise std");
    lsq_flags.add<std::string>(lsq, "--global-average", "global_average", "average all models before the first step");

    int dump_n = 6;
    int dump_round = 0;
    std::string dump_mode = "2p";
    auto* dump = app.add_subcommand("dump-matrix", "print one round's communication matrix as a 0/1 CSV grid");
    dump->add_option("--n", dump_n, "agent count")->required();
    dump->add_option("--round", dump_round, "round index in [0, tau)")->required();
    dump->add_option("--mode", dump_mode, "1p or 2p");

    std::string trace_values;
    std::string trace_mode = "2p";
    auto* trace = app.add_subcommand("trace", "per-round (I, J) state dump of one consensus run");
    trace->add_option("--values", trace_values, "comma-separated scalar per agent")->required();
    trace->add_option("--mode", trace_mode, "1p or 2p");

    std::string problem_preset = "paper";
    std::uint64_t problem_seed = 1;
    std::string problem_out;
    auto* make_problem = app.add_subcommand("make-problem", "write a least-squares problem bundle for replay");
    make_problem->add_option("--preset", problem_preset, "paper | desk");
    make_problem->add_option("--seed", problem_seed, "seed");
    make_problem->add_option("--out", problem_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*consensus) {
            const auto cfg = resolve(consensus_flags, ceca::Experiment::consensus);
            const auto res = ceca::run_consensus_experiment(cfg);
            emit(cfg.out, "consensus.csv", [&](std::ostream& os) { ceca::write_consensus_csv(os, cfg, res); });
            for (const auto& run : res.runs) {
                std::cerr << "seed " << run.seed << ": exact consensus "
                          << (run.exact_round ? "at round " + std::to_string(*run.exact_round) : std::string("not reached"))
                          << '\n';
            }
        } else if (*verify) {
            const auto cfg = resolve(verify_flags, ceca::Experiment::matrix_verify);
            const auto report = ceca::run_matrix_verification(
                cfg, inject_fault ? ceca::faulty_mixing_builder() : ceca::default_mixing_builder());
            ceca::write_verification_table(std::cout, report);
            return report.all_passed() ? 0 : 1;
        } else if (*lsq) {
            const auto cfg = resolve(lsq_flags, ceca::Experiment::lsq);
            const auto res = ceca::run_lsq_experiment(cfg);
            emit(cfg.out, "lsq.csv", [&](std::ostream& os) { ceca::write_lsq_csv(os, cfg, res); });
            std::cerr << cfg.topology_label() << ": final mean residue " << ceca::format_double(res.mean.back().residue)
                      << '\n';
        } else if (*dump) {
            const ceca::BinarySchedule schedule(dump_n);
            ceca::comm_matrix(schedule, dump_round, ceca::parse_port_model(dump_mode)).write_csv(std::cout);
        } else if (*trace) {
            const Eigen::MatrixXd u = parse_values(trace_values);
            ceca::write_state_csv_header(std::cout);
            ceca::run_consensus(u, ceca::parse_port_model(trace_mode),
                                [](const ceca::ConsensusState& s) { ceca::write_state_csv(std::cout, s); });
        } else if (*make_problem) {
            ceca::RunConfig cfg;
            ceca::apply_preset(cfg, problem_preset);
            const auto problem = ceca::make_least_squares(cfg.n, cfg.N, cfg.d, cfg.sigma_s, cfg.sigma_n, problem_seed);
            emit(problem_out, "problem.csv", [&](std::ostream& os) { ceca::write_problem(os, problem); });
        }
    } catch (const ceca::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
