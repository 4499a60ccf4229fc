// Command-line front end: dataset generation, pretraining, finetuning,
// evaluation, mask ablations and the leakage diagnostic.

#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "mcva/config.hpp"
#include "mcva/errors.hpp"
#include "mcva/flow_viz.hpp"
#include "mcva/synthdata.hpp"
#include "mcva/trainer.hpp"

namespace {

int parse_size(const std::string& s, int& h, int& w) {
    const auto x = s.find('x');
    if (x == std::string::npos) return -1;
    try {
        h = std::stoi(s.substr(0, x));
        w = std::stoi(s.substr(x + 1));
    } catch (...) {
        return -1;
    }
    return (h > 0 && w > 0) ? 0 : -1;
}

void print_metrics(const mcva::FlowMetrics& m) {
    std::printf("aepe=%.6g\n", m.aepe);
    std::printf("f1_all=%.6g\n", m.f1_all);
    std::printf("pixels=%lld\n", static_cast<long long>(m.pixels));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"masked cost-volume autoencoding for optical flow"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    std::string gen_out, gen_size = "64x64";
    int gen_count = 16;
    std::uint64_t gen_seed = 42;
    bool gen_labeled = false;
    double gen_noise = 0.01;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "number of pairs")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--size", gen_size, "image size HxW (default 64x64)");
    gen->add_option("--noise", gen_noise, "frame2 Gaussian noise sigma");
    gen->add_flag("--labeled", gen_labeled, "write ground-truth flow.flo files");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "self-supervised cost-volume pretraining");
    std::string pre_config, pre_out;
    pre->add_option("--config", pre_config, "config file")->required();
    pre->add_option("--out", pre_out, "output checkpoint")->required();

    // finetune
    auto* fin = app.add_subcommand("finetune", "supervised flow finetuning");
    std::string fin_config, fin_out, fin_init;
    fin->add_option("--config", fin_config, "config file")->required();
    fin->add_option("--init", fin_init, "warm-start checkpoint");
    fin->add_option("--out", fin_out, "output checkpoint")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
    std::string ev_ckpt, ev_data, ev_report, ev_viz;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
    ev->add_option("--data", ev_data, "labeled dataset directory")->required();
    ev->add_option("--report", ev_report, "write key=value metrics report");
    ev->add_option("--viz", ev_viz, "write a flow-color PPM for the first pair");

    // ablate-mask
    auto* ab = app.add_subcommand("ablate-mask", "masking strategy/ratio/query sweep");
    std::string ab_config, ab_out;
    ab->add_option("--config", ab_config, "base config file")->required();
    ab->add_option("--out", ab_out, "output directory")->required();

    // leakage-report
    auto* lk = app.add_subcommand("leakage-report", "copy-oracle leakage: block vs random");
    std::string lk_data;
    double lk_ratio = 0.5;
    int lk_seeds = 3;
    lk->add_option("--data", lk_data, "dataset directory")->required();
    lk->add_option("--ratio", lk_ratio, "masking ratio")->check(CLI::Range(0.0, 1.0));
    lk->add_option("--seeds", lk_seeds, "number of seeds")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) {
            mcva::DatasetManifest m;
            int h = 0, w = 0;
            if (parse_size(gen_size, h, w) != 0) {
                std::fprintf(stderr, "error: --size expects HxW, got '%s'\n", gen_size.c_str());
                return 1;
            }
            m.height = h;
            m.width = w;
            m.count = gen_count;
            m.seed = gen_seed;
            m.noise = gen_noise;
            m.labeled = gen_labeled;
            mcva::generate_dataset(gen_out, m);
            std::printf("wrote %d pairs to %s\n", m.count, gen_out.c_str());
        } else if (pre->parsed()) {
            mcva::TrainConfig cfg = mcva::load_config(pre_config);
            if (cfg.phase != mcva::Phase::kPretrain) {
                throw mcva::ConfigError(pre_config + ": pretrain command requires phase = pretrain");
            }
            const auto out = mcva::run_pretraining(cfg, pre_out);
            std::printf("pretraining done: %zu steps, final loss %.6g, checkpoint %s\n",
                        out.losses.size(),
                        out.losses.empty() ? 0.0 : out.losses.back(), pre_out.c_str());
        } else if (fin->parsed()) {
            mcva::TrainConfig cfg = mcva::load_config(fin_config);
            if (cfg.phase != mcva::Phase::kFinetune) {
                throw mcva::ConfigError(fin_config + ": finetune command requires phase = finetune");
            }
            const std::string* init = fin_init.empty() ? nullptr : &fin_init;
            const auto out = mcva::run_finetuning(cfg, init, fin_out);
            std::printf("finetuning done: %zu steps, final loss %.6g, checkpoint %s\n",
                        out.losses.size(),
                        out.losses.empty() ? 0.0 : out.losses.back(), fin_out.c_str());
        } else if (ev->parsed()) {
            const std::string* report = ev_report.empty() ? nullptr : &ev_report;
            const auto m = mcva::evaluate(ev_ckpt, ev_data, report);
            print_metrics(m);
            if (!ev_viz.empty()) {
                mcva::Model model = mcva::model_from_checkpoint(ev_ckpt);
                const auto ds = mcva::open_dataset(ev_data);
                const auto flow = mcva::predict_flow_field(model, ds.load(0));
                mcva::write_ppm(ev_viz, mcva::flow_to_color(flow));
            }
        } else if (ab->parsed()) {
            mcva::TrainConfig cfg = mcva::load_config(ab_config);
            const auto rows = mcva::run_mask_ablation(cfg, ab_out);
            std::string table_text;
            std::printf("%-10s %-18s %s\n", "table", "case", "final_loss");
            for (const auto& r : rows) {
                std::printf("%-10s %-18s %.6g\n", r.table.c_str(), r.label.c_str(),
                            r.final_loss);
                table_text += r.table + " " + r.label + " " +
                              std::to_string(r.final_loss) + "\n";
            }
            std::ofstream f(ab_out + "/ablation.txt");
            f << table_text;
        } else if (lk->parsed()) {
            const auto rows = mcva::leakage_report(lk_data, lk_ratio, lk_seeds);
            std::printf("%-6s %-14s %-14s\n", "seed", "block_mse", "random_mse");
            for (const auto& r : rows) {
                std::printf("%-6llu %-14.6g %-14.6g\n",
                            static_cast<unsigned long long>(r.seed), r.block_mse,
                            r.random_mse);
            }
        }
    } catch (const mcva::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const mcva::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
