// rlihf: experiment runner and reproduction surface.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlihf/experiment.hpp"

namespace fs = std::filesystem;
using namespace rlihf;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

void print_issues(const ConfigValidationError& e) {
    std::cerr << "invalid configuration (" << e.issues().size() << " problem"
              << (e.issues().size() == 1 ? "" : "s") << "):\n";
    for (const auto& i : e.issues()) std::cerr << "  " << i.key << ": " << i.message << '\n';
}

std::ofstream open_out(const fs::path& p, bool binary = false) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, binary ? std::ios::binary : std::ios::out);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Implicit-feedback RL simulator: ErrP decoding, reward shaping and SAC training"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string output_dir;
    int subject = 0;
    int workers = 0;
    bool in_place = false;
    bool resume = false;
    std::vector<std::string> dirs;
    std::string plot_dir;

    auto* validate = app.add_subcommand("validate", "check a config file and print every problem");
    validate->add_option("config", config_path, "experiment config (JSON, comments allowed)")->required();

    auto* decoder = app.add_subcommand("decoder", "train or evaluate the error decoder");
    decoder->require_subcommand(1);
    auto* dec_train = decoder->add_subcommand("train", "train the LOSO decoder for one held-out subject");
    dec_train->add_option("--config", config_path)->required();
    dec_train->add_option("--subject", subject, "held-out subject id")->required();
    dec_train->add_option("--out", out_path, "model file")->required();
    auto* dec_loso = decoder->add_subcommand("loso", "leave-one-subject-out accuracy per subject");
    dec_loso->add_option("--config", config_path)->required();
    dec_loso->add_option("--out", out_path, "CSV path (stdout when omitted)");

    auto* run = app.add_subcommand("run", "execute the condition x subject x w_hf x seed grid");
    run->add_option("config", config_path)->required();
    run->add_option("--output", output_dir, "override output_dir");
    run->add_option("--workers", workers, "override worker count (RLIHF_WORKERS still wins)");
    run->add_flag("--in-place", in_place, "write directly into the output directory instead of a new vNNN");
    run->add_flag("--resume", resume, "with --in-place: keep cells already stored in the output directory");

    auto* compare = app.add_subcommand("compare", "merge result directories into one table and plots");
    compare->add_option("dirs", dirs, "result directories (each with manifest.json)")->required();
    compare->add_option("--out", out_path, "directory for the merged outputs")->required();

    auto* plot = app.add_subcommand("plot", "regenerate tables and plots from stored run summaries");
    plot->add_option("dir", plot_dir, "result directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*validate) {
            const auto cfg = load_config(config_path);
            std::cout << "ok " << config_hash(cfg) << '\n';
            return kOk;
        }
        if (*dec_train) {
            const auto cfg = load_config(config_path);
            const DecoderModel model = train_subject_decoder(cfg, subject);
            auto f = open_out(out_path, true);
            save_decoder(f, model);
            std::cout << "final loss " << model.final_loss << '\n';
            return kOk;
        }
        if (*dec_loso) {
            const auto cfg = load_config(config_path);
            const auto results = run_loso(cfg);
            if (out_path.empty()) {
                write_csv(std::cout, results);
            } else {
                auto f = open_out(out_path);
                write_csv(f, results);
            }
            double mean = 0.0;
            for (const auto& r : results) mean += r.pretrain_acc;
            std::cerr << "mean pretrain accuracy " << mean / static_cast<double>(results.size()) << '\n';
            return kOk;
        }
        if (*run) {
            auto cfg = load_config(config_path);
            if (!output_dir.empty()) cfg.output_dir = output_dir;
            if (workers > 0) cfg.workers = workers;
            ExperimentOptions opts;
            opts.versioned = !in_place;
            opts.resume = resume;
            opts.log = [](const std::string& m) { std::cerr << m << '\n'; };
            const auto result = run_experiment(cfg, opts);
            std::cout << result.directory.string() << '\n';
            if (!result.failures.empty()) {
                std::cerr << result.failures.size() << " grid cell(s) failed; see manifest.json\n";
                return kFailed;
            }
            return kOk;
        }
        if (*compare) {
            std::vector<fs::path> paths(dirs.begin(), dirs.end());
            const auto result = compare_conditions(paths, out_path);
            std::cout << format_phase_table(result.table);
            return kOk;
        }
        if (*plot) {
            write_reports(plot_dir, load_runs(plot_dir));
            return kOk;
        }
    } catch (const ConfigValidationError& e) {
        print_issues(e);
        return kInvalid;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kFailed;
    }
    return kOk;
}
