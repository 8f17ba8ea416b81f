#include "madpot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "madpot/csvio.hpp"
#include "madpot/errors.hpp"
#include "madpot/pipeline.hpp"

namespace madpot {

namespace {

namespace fs = std::filesystem;

fs::path resolve_manifest(const std::string& data) {
    fs::path p(data);
    if (fs::is_directory(p)) return p / "manifest.jsonl";
    return p;
}

struct GenOpts {
    std::string out;
    int normal = 16;
    int abnormal = 16;
    std::uint64_t seed = 1;
    int size = 64;
    bool no_masks = false;
    std::string config;
};

int cmd_gen_data(const GenOpts& o, bool size_set) {
    RunConfig cfg;
    if (!o.config.empty()) cfg = parse_config_file(o.config);
    if (size_set || o.config.empty()) {
        cfg.synth.image_side = o.size;
        cfg.model.image_side = o.size;
    }
    const Manifest m =
        generate_dataset(cfg.synth, o.normal, o.abnormal, o.seed, o.out, !o.no_masks);
    std::cout << (fs::path(o.out) / "manifest.jsonl").string() << "\n";
    (void)m;
    return 0;
}

struct TrainOpts {
    std::string data;
    std::string config;
    std::string out;
    std::string loss_csv;
    std::vector<std::pair<std::string, std::string>> overrides;  // config keys set via flags
};

int cmd_train(const TrainOpts& o) {
    RunConfig cfg;
    if (!o.config.empty()) cfg = parse_config_file(o.config);
    for (const auto& [key, value] : o.overrides) apply_config_value(cfg, key, value);

    const TrainResult result = run_training(cfg, resolve_manifest(o.data));
    save_params(o.out, result.params);
    const std::string loss_path = o.loss_csv.empty() ? o.out + ".loss.csv" : o.loss_csv;
    write_loss_csv(loss_path, result.epoch_mean_loss);
    std::cout << "params=" << o.out << " loss_csv=" << loss_path
              << " final_loss=" << format_double(result.epoch_mean_loss.back()) << "\n";
    return 0;
}

struct EvalOpts {
    std::string data, model, report;
};

int cmd_eval(const EvalOpts& o) {
    const ModelParams params = load_params(o.model);
    const EvalReport report = run_eval(params, resolve_manifest(o.data));
    std::ofstream out(o.report, std::ios::binary);
    if (!out) throw IoError("eval: cannot open report path " + o.report);
    out << report_to_json(report);
    if (!out) throw IoError("eval: write failed for " + o.report);
    std::cout << "ac_auc=" << format_double(report.ac_auc);
    if (report.as_auc) std::cout << " as_auc=" << format_double(*report.as_auc);
    std::cout << " report=" << o.report << "\n";
    return 0;
}

struct SolveOpts {
    std::string cost, alpha, beta;
    std::string mode = "ot";
    double lambda = 0.1;
    double frac = 0.8;
    int max_iter = 100;
    double tol = 1e-3;
};

int cmd_solve(const SolveOpts& o) {
    const Matrix c = read_csv_matrix(o.cost);
    const Histogram alpha{read_csv_vector(o.alpha)};
    const Histogram beta{read_csv_vector(o.beta)};
    SolverConfig cfg;
    cfg.lambda = o.lambda;
    cfg.frac = o.frac;
    cfg.max_iter = o.max_iter;
    cfg.early_stop_tol = o.tol;

    Matrix plan;
    double cost_value = 0.0;
    int iters = 0;
    double row_res = 0.0, col_res = 0.0;
    bool converged = false;
    if (o.mode == "lp") {
        const LpSolution sol = exact_lp_oracle(c, alpha, beta, o.frac);
        plan = sol.plan;
        cost_value = sol.cost;
        iters = sol.pivots;
        converged = true;
        for (int i = 0; i < plan.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < plan.cols; ++j) s += plan(i, j);
            const double d = s - alpha.weights[static_cast<std::size_t>(i)];
            row_res = std::max(row_res, o.frac < 1.0 ? std::max(0.0, d) : std::abs(d));
        }
        for (int j = 0; j < plan.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < plan.rows; ++i) s += plan(i, j);
            col_res = std::max(col_res, std::abs(s - beta.weights[static_cast<std::size_t>(j)]));
        }
    } else {
        const TransportPlan t = (o.mode == "pot") ? partial_ot(c, alpha, beta, cfg)
                                                  : sinkhorn(c, alpha, beta, cfg);
        plan = t.plan;
        cost_value = sum(transport_distance(c, t));
        iters = t.iterations;
        row_res = t.row_residual;
        col_res = t.col_residual;
        converged = t.converged;
    }
    write_csv_matrix(std::cout, plan);
    std::cout << "cost=" << format_double(cost_value) << " iters=" << iters
              << " row_res=" << format_double(row_res) << " col_res=" << format_double(col_res)
              << " converged=" << (converged ? "true" : "false") << "\n";
    return 0;
}

struct SweepOpts {
    std::string param;
    std::string values;
    std::string data;
    std::string eval_data;
    std::string config;
    std::string out;
};

std::vector<double> parse_value_list(const std::string& spec) {
    std::vector<double> values;
    if (spec.find(':') != std::string::npos) {
        double lo = 0.0, hi = 0.0, step = 0.0;
        const auto c1 = spec.find(':');
        const auto c2 = spec.find(':', c1 + 1);
        if (c2 == std::string::npos) throw ParseError("sweep: range must be lo:hi:step");
        try {
            lo = std::stod(spec.substr(0, c1));
            hi = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
            step = std::stod(spec.substr(c2 + 1));
        } catch (const std::exception&) {
            throw ParseError("sweep: malformed range '" + spec + "'");
        }
        if (!(step > 0.0)) throw ParseError("sweep: step must be positive");
        for (double v = lo; v <= hi + 1e-9; v += step) values.push_back(v);
    } else {
        std::size_t at = 0;
        while (at < spec.size()) {
            const std::size_t comma = spec.find(',', at);
            const std::string tok = spec.substr(at, comma == std::string::npos ? spec.npos : comma - at);
            if (!tok.empty()) {
                try {
                    values.push_back(std::stod(tok));
                } catch (const std::exception&) {
                    throw ParseError("sweep: malformed value '" + tok + "'");
                }
            }
            if (comma == std::string::npos) break;
            at = comma + 1;
        }
    }
    return values;
}

int cmd_sweep(const SweepOpts& o) {
    std::vector<double> values = parse_value_list(o.values);
    std::vector<double> unique;
    for (double v : values) {
        const bool dup = std::any_of(unique.begin(), unique.end(),
                                     [&](double u) { return std::abs(u - v) < 1e-12; });
        if (dup) {
            std::cerr << "warning: duplicate sweep value " << format_double(v) << " skipped\n";
            continue;
        }
        unique.push_back(v);
    }
    if (unique.empty()) {
        std::cerr << "sweep: empty value list\n";
        return 2;
    }

    RunConfig base;
    if (!o.config.empty()) base = parse_config_file(o.config);
    const fs::path train_manifest = resolve_manifest(o.data);
    const fs::path eval_manifest = resolve_manifest(o.eval_data.empty() ? o.data : o.eval_data);

    std::string csv = "value,ac_auc,as_auc\n";
    for (double v : unique) {
        RunConfig cfg = base;
        apply_config_value(cfg, o.param, format_double(v));
        const TrainResult result = run_training(cfg, train_manifest);
        const EvalReport report = run_eval(result.params, eval_manifest);
        csv += format_double(v);
        csv += ',';
        csv += format_double(report.ac_auc);
        csv += ',';
        if (report.as_auc) csv += format_double(*report.as_auc);
        csv += '\n';
    }
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(o.out, std::ios::binary);
        if (!out) throw IoError("sweep: cannot open " + o.out);
        out << csv;
        if (!out) throw IoError("sweep: write failed for " + o.out);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"madpot: few-shot anomaly detection with partial optimal transport"};
    app.require_subcommand(1);

    GenOpts gen;
    auto* cmd_gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    cmd_gen->add_option("--out", gen.out, "output directory")->required();
    cmd_gen->add_option("--normal", gen.normal, "number of normal samples");
    cmd_gen->add_option("--abnormal", gen.abnormal, "number of abnormal samples");
    cmd_gen->add_option("--seed", gen.seed, "generator seed");
    auto* size_opt = cmd_gen->add_option("--size", gen.size, "image side in pixels");
    cmd_gen->add_flag("--no-masks", gen.no_masks, "omit pixel masks (AC-only dataset)");
    cmd_gen->add_option("--config", gen.config, "config file for the synthetic spec");

    TrainOpts tr;
    auto* cmd_tr = app.add_subcommand("train", "train a model");
    cmd_tr->add_option("--data", tr.data, "training manifest or dataset directory")->required();
    cmd_tr->add_option("--config", tr.config, "config file");
    cmd_tr->add_option("--out", tr.out, "output params file")->required();
    cmd_tr->add_option("--loss-csv", tr.loss_csv, "per-epoch loss CSV path");
    // flag > config > default: remember only flags the user actually set
    std::vector<std::pair<std::string, CLI::Option*>> tr_overrides;
    std::map<std::string, std::string> tr_values;
    for (const char* key : {"variant", "vision", "seed", "lr", "epochs", "batch_size", "lambda",
                            "frac", "tau", "gamma", "max_iter", "early_stop_tol", "encoder_seed"}) {
        std::string flag = std::string("--") + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        tr_overrides.emplace_back(key, cmd_tr->add_option(flag, tr_values[key], key));
    }

    EvalOpts ev;
    auto* cmd_ev = app.add_subcommand("eval", "evaluate a trained model");
    cmd_ev->add_option("--data", ev.data, "eval manifest or dataset directory")->required();
    cmd_ev->add_option("--model", ev.model, "params file")->required();
    cmd_ev->add_option("--report", ev.report, "output report JSON")->required();

    SolveOpts so;
    auto* cmd_so = app.add_subcommand("solve", "solve a transport instance from CSV files");
    cmd_so->add_option("--cost", so.cost, "cost matrix CSV")->required();
    cmd_so->add_option("--alpha", so.alpha, "row marginal CSV")->required();
    cmd_so->add_option("--beta", so.beta, "column marginal CSV")->required();
    cmd_so->add_option("--mode", so.mode, "ot | pot | lp")
        ->check(CLI::IsMember({"ot", "pot", "lp"}));
    cmd_so->add_option("--lambda", so.lambda, "entropic weight");
    cmd_so->add_option("--frac", so.frac, "transported mass ratio");
    cmd_so->add_option("--max-iter", so.max_iter, "iteration cap");
    cmd_so->add_option("--tol", so.tol, "early-stop tolerance");

    SweepOpts sw;
    auto* cmd_sw = app.add_subcommand("sweep", "train+eval over a parameter grid");
    cmd_sw->add_option("--param", sw.param, "config key to sweep")->required();
    cmd_sw->add_option("--values", sw.values, "lo:hi:step or comma list")->required();
    cmd_sw->add_option("--data", sw.data, "training manifest or dataset directory")->required();
    cmd_sw->add_option("--eval-data", sw.eval_data, "eval manifest (default: --data)");
    cmd_sw->add_option("--config", sw.config, "config file");
    cmd_sw->add_option("--out", sw.out, "output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_gen->parsed()) return cmd_gen_data(gen, size_opt->count() > 0);
        if (cmd_tr->parsed()) {
            for (auto& [key, opt] : tr_overrides)
                if (opt->count() > 0) tr.overrides.emplace_back(key, tr_values[key]);
            return cmd_train(tr);
        }
        if (cmd_ev->parsed()) return cmd_eval(ev);
        if (cmd_so->parsed()) return cmd_solve(so);
        if (cmd_sw->parsed()) return cmd_sweep(sw);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {  // infeasible / numerical / shape / invalid input
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("madpot");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace madpot
