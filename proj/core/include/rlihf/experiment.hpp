#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rlihf/decoder.hpp"
#include "rlihf/envsim.hpp"
#include "rlihf/errors.hpp"
#include "rlihf/eval.hpp"
#include "rlihf/feedback.hpp"
#include "rlihf/sac.hpp"
#include "rlihf/signal.hpp"
#include "rlihf/training.hpp"

namespace rlihf {

struct ExperimentConfig {
    std::vector<std::string> conditions{"sparse", "dense", "rlihf"};
    std::vector<int> subjects{6};
    std::vector<double> w_hf{0.1};
    std::vector<int> seeds{0, 1, 2, 3, 4};
    std::uint64_t master_seed = 1;
    std::string output_dir = "results";
    int workers = 1;

    Layout layout = Layout::standard();
    EnvConfig env;
    RewardConfig rewards;
    SacConfig agent;
    TrainConfig train;
    FeedbackConfig feedback;  // w_hf inside is ignored; the grid supplies it
    SignalConfig signal;
    PreprocessConfig preprocess;
    DecoderHyper decoder;
    DatasetConfig dataset;
    std::vector<SubjectProfile> profiles = default_subject_profiles();

    const SubjectProfile& profile(int id) const;
};

struct ConfigIssue {
    std::string key;  // dotted path, e.g. "agent.gamma"
    std::string message;
};

class ConfigValidationError : public ConfigError {
public:
    explicit ConfigValidationError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

// Parses JSON (comments allowed). Missing keys keep defaults; unknown keys,
// wrong types and out-of-range values are all collected before throwing.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::vector<ConfigIssue> validate_config(const ExperimentConfig& cfg);

// Fully resolved config as canonical JSON text.
std::string config_to_json(const ExperimentConfig& cfg);
// Hex digest of the semantic fields (output_dir and workers excluded).
std::string config_hash(const ExperimentConfig& cfg);

// Seed of one grid cell: master seed hashed with every cell coordinate.
std::uint64_t derive_run_seed(std::uint64_t master, const std::string& condition, int subject, int seed_index,
                              double w_hf);

struct GridCell {
    RunSpec spec;
    std::string name;  // file stem
};

std::vector<GridCell> expand_grid(const ExperimentConfig& cfg);

// Worker count: RLIHF_WORKERS when set, otherwise cfg.workers.
int resolve_workers(const ExperimentConfig& cfg);

struct ExperimentResult {
    std::filesystem::path directory;
    std::vector<RunSummary> runs;
    std::vector<std::pair<std::string, std::string>> failures;  // cell name, message
    std::vector<double> cell_seconds;  // per grid cell; reused cells keep their original time when known
};

struct ExperimentOptions {
    bool versioned = true;  // write into a fresh <output_dir>/vNNN
    // Unversioned only: keep cells whose summary already exists in the
    // directory. Refuses a directory written under a different config hash.
    bool resume = false;
    std::function<void(const std::string&)> log;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts = {});

// LOSO decoder for one subject under the config's cohort settings.
DecoderModel train_subject_decoder(const ExperimentConfig& cfg, int subject_id);
std::vector<LosoResult> run_loso(const ExperimentConfig& cfg);

std::string run_to_json(const RunSummary& run);
RunSummary run_from_json(const std::string& text);
void write_eval_csv(std::ostream& out, const RunSummary& run);
void write_episode_csv(std::ostream& out, const RunSummary& run);

// Reads every stored RunSummary of a result directory.
std::vector<RunSummary> load_runs(const std::filesystem::path& dir);

// Tables and plots derived only from stored summaries.
void write_reports(const std::filesystem::path& dir, const std::vector<RunSummary>& runs);

struct ComparisonResult {
    PhaseTable table;
    std::vector<RunSummary> runs;
};

// Merges result directories; throws ConfigError listing every differing
// env/layout/rewards/train key when they are not comparable.
ComparisonResult compare_conditions(const std::vector<std::filesystem::path>& dirs,
                                    const std::filesystem::path& out_dir);

std::filesystem::path next_version_dir(const std::filesystem::path& root);

}  // namespace rlihf
