#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "glora/checkpoint.hpp"
#include "glora/eval.hpp"
#include "glora/flops.hpp"
#include "glora/reports.hpp"
#include "glora/surgery.hpp"
#include "glora/train.hpp"

namespace fs = std::filesystem;
using namespace glora;

namespace {

void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DataError("cannot write " + p.string());
    os << content;
}

std::string gates_csv(const std::vector<GateSnapshot>& gates) {
    std::string out = "site,score,active\n";
    char buf[96];
    for (const GateSnapshot& g : gates) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%d\n", to_string(g.site).c_str(), g.score, g.active ? 1 : 0);
        out += buf;
    }
    return out;
}

void save_run(const std::string& out_dir, const RunResult& result, const RunConfig& cfg) {
    checkpoint_save(out_dir, *result.best_model, cfg);
    write_file(fs::path(out_dir) / "metrics.csv", metrics_csv(result.timeline));
    if (!result.final_gates.empty()) {
        write_file(fs::path(out_dir) / "gates.csv", gates_csv(result.final_gates));
    }
}

int run(int argc, char** argv) {
    CLI::App app{"gated low-rank adapter toolkit"};
    app.require_subcommand(1);

    std::string cfg_path, out_path, init_path, ckpt_path, data_uri, train_data_uri, metric = "top1";
    std::string reg_kind, mode_str = "unmerged", runs_dir;
    double lambda_override = 0.0;
    int rank_override = 0, k = 20, n_active = 0;
    std::uint64_t seed_override = 0, baseline_seed = 1;
    std::int64_t tokens = 0;

    auto* pre = app.add_subcommand("pretrain", "supervised training of the full base model");
    pre->add_option("--config", cfg_path, "run config JSON")->required();
    pre->add_option("--out", out_path, "output checkpoint directory")->required();

    auto* ft = app.add_subcommand("finetune", "gated adapter fine-tuning from a pretrained trunk");
    ft->add_option("--config", cfg_path, "run config JSON")->required();
    ft->add_option("--init", init_path, "pretrained checkpoint directory");
    ft->add_option("--out", out_path, "output checkpoint directory")->required();
    ft->add_option("--lambda", lambda_override, "override reg.lambda");
    ft->add_option("--rank", rank_override, "override adapter.rank");
    ft->add_option("--reg", reg_kind, "override reg.kind (l1|l2|hinge)");
    ft->add_option("--seed", seed_override, "override seed");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ev->add_option("--ckpt", ckpt_path)->required();
    ev->add_option("--data", data_uri, "dataset URI (queries for knn)")->required();
    ev->add_option("--metric", metric, "top1|knn")->check(CLI::IsMember({"top1", "knn"}));
    ev->add_option("--k", k, "neighbor count for knn");
    ev->add_option("--train-data", train_data_uri, "database dataset URI (knn only)");

    auto* fl = app.add_subcommand("flops", "analytic cost report for a checkpoint");
    fl->add_option("--ckpt", ckpt_path)->required();
    fl->add_option("--mode", mode_str, "merged|unmerged");
    fl->add_option("--tokens", tokens, "token positions per linear (default: one image)");

    auto* mg = app.add_subcommand("merge", "fold active adapters into trunk weights");
    mg->add_option("--ckpt", ckpt_path)->required();
    mg->add_option("--out", out_path)->required();

    auto* pr = app.add_subcommand("prune", "drop inactive adapter blocks");
    pr->add_option("--ckpt", ckpt_path)->required();
    pr->add_option("--out", out_path)->required();

    auto* rep = app.add_subcommand("report", "analysis reports");
    auto* rep_act = rep->add_subcommand("activations", "per-site activation fractions over runs");
    rep_act->add_option("--runs", runs_dir, "directory of run checkpoints")->required();
    rep_act->add_option("--out", out_path, "output path (.csv, .svg, or prefix for both)")->required();
    rep->require_subcommand(1);

    auto* base = app.add_subcommand("baseline", "reference baselines");
    auto* base_rand = base->add_subcommand("random", "fixed random gate selection");
    base_rand->add_option("--n", n_active, "number of gates fixed on")->required();
    base_rand->add_option("--seed", baseline_seed, "selection + run seed");
    base_rand->add_option("--config", cfg_path, "run config JSON")->required();
    base_rand->add_option("--init", init_path, "pretrained checkpoint directory");
    base_rand->add_option("--out", out_path, "output checkpoint directory");
    base->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*pre) {
        const RunConfig cfg = RunConfig::from_json_file(cfg_path);
        const RunResult result = pretrain(cfg);
        save_run(out_path, result, cfg);
        std::cout << "pretrain done: best val " << result.best_val_acc << " at step " << result.best_step
                  << ", saved to " << out_path << "\n";
    } else if (*ft) {
        RunConfig cfg = RunConfig::from_json_file(cfg_path);
        if (ft->count("--lambda")) cfg.reg.lambda = lambda_override;
        if (ft->count("--rank")) {
            cfg.adapter.rank = rank_override;
            cfg.adapter.alpha = static_cast<double>(rank_override);
        }
        if (ft->count("--reg")) cfg.reg.kind = reg_kind_from(reg_kind);
        if (ft->count("--seed")) cfg.seed = seed_override;
        RunResult result;
        if (!init_path.empty()) {
            const LoadedModel init = checkpoint_load(init_path);
            result = finetune(cfg, &init.model);
        } else {
            result = finetune(cfg, nullptr);
        }
        save_run(out_path, result, cfg);
        std::cout << "finetune done: best val " << result.best_val_acc << " at step " << result.best_step
                  << ", active " << result.final_active_count << "/" << result.final_gates.size() << " ("
                  << result.final_active_pct << "%), saved to " << out_path << "\n";
    } else if (*ev) {
        LoadedModel loaded = checkpoint_load(ckpt_path);
        const Dataset test = load_dataset(data_uri);
        if (metric == "top1") {
            std::cout << "top1 " << evaluate_top1(loaded.model, test) << "\n";
        } else {
            if (train_data_uri.empty()) throw ConfigError("knn metric needs --train-data for the database set");
            const Dataset train = load_dataset(train_data_uri);
            const Tensor train_emb = embed_dataset(loaded.model, train);
            const Tensor test_emb = embed_dataset(loaded.model, test);
            std::cout << "knn " << knn_eval(train_emb, train.labels, test_emb, test.labels, k) << "\n";
        }
    } else if (*fl) {
        const ModelConfig mcfg = checkpoint_model_config(ckpt_path);
        const std::vector<AdapterRecord> records = checkpoint_adapter_records(ckpt_path);
        std::vector<GateSnapshot> gates;
        AdapterKind kind = AdapterKind::LoRA;
        int rank = 0;
        for (const AdapterRecord& r : records) {
            gates.push_back({r.site, r.score, r.active});
            kind = r.kind;
            rank = r.rank;
        }
        if (!fl->count("--tokens")) tokens = mcfg.tokens() + 1;
        const FlopsReport report = model_flops_report(mcfg, gates, kind, rank, flops_mode_from(mode_str), tokens);
        std::cout << report.str();
    } else if (*mg) {
        merge_checkpoint(ckpt_path, out_path);
        std::cout << "merged " << ckpt_path << " -> " << out_path << "\n";
    } else if (*rep_act && *rep) {
        std::vector<fs::path> run_dirs;
        for (const auto& entry : fs::directory_iterator(runs_dir)) {
            if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) run_dirs.push_back(entry.path());
        }
        std::sort(run_dirs.begin(), run_dirs.end());
        if (run_dirs.empty()) throw DataError("no run checkpoints under " + runs_dir);
        std::vector<std::vector<GateSnapshot>> snapshots;
        for (const fs::path& dir : run_dirs) {
            std::vector<GateSnapshot> snap;
            for (const AdapterRecord& r : checkpoint_adapter_records(dir.string())) {
                snap.push_back({r.site, r.score, r.active});
            }
            snapshots.push_back(std::move(snap));
        }
        const ActivationReport report = activation_report(snapshots);
        const fs::path out(out_path);
        if (out.extension() == ".csv") {
            write_file(out, report.csv());
            std::cout << "wrote " << out.string() << "\n";
        } else if (out.extension() == ".svg") {
            write_file(out, report.svg());
            std::cout << "wrote " << out.string() << "\n";
        } else {
            write_file(out_path + ".csv", report.csv());
            write_file(out_path + ".svg", report.svg());
            std::cout << "wrote " << out_path << ".csv and " << out_path << ".svg\n";
        }
    } else if (*pr) {
        prune_checkpoint(ckpt_path, out_path);
        std::cout << "pruned " << ckpt_path << " -> " << out_path << "\n";
    } else if (*base_rand && *base) {
        RunConfig cfg = RunConfig::from_json_file(cfg_path);
        if (base_rand->count("--seed")) cfg.seed = baseline_seed;
        RunResult result;
        if (!init_path.empty()) {
            const LoadedModel init = checkpoint_load(init_path);
            result = random_selection_baseline(n_active, baseline_seed, cfg, &init.model);
        } else {
            result = random_selection_baseline(n_active, baseline_seed, cfg, nullptr);
        }
        if (!out_path.empty()) save_run(out_path, result, cfg);
        std::cout << "baseline done: best val " << result.best_val_acc << " at step " << result.best_step
                  << ", active " << result.final_active_count << "/" << result.final_gates.size() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
