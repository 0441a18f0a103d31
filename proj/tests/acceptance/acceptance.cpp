// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion on stdout;
// progress goes to stderr. Training grids are cached under --cache so an
// interrupted run resumes where it stopped.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "rlihf/dsp.hpp"
#include "rlihf/experiment.hpp"
#include "support/oracles.hpp"

using namespace rlihf;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

void log(const std::string& m) { std::cerr << "  " << m << '\n'; }

// ---------------------------------------------------------------- 1

Verdict decoder_band(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run_loso(cfg);
    const double secs = seconds_since(t0);
    double mean = 0.0, worst = 1.0;
    for (const auto& r : res) {
        mean += r.pretrain_acc;
        worst = std::min(worst, r.pretrain_acc);
        log(fmt("subject %2d pretrain %.3f online %.3f", r.subject_id, r.pretrain_acc, r.online_acc));
    }
    mean /= static_cast<double>(res.size());
    const bool pass = res.size() == 12 && mean >= 0.70 && mean <= 0.90 && worst > 0.55 && secs < 120.0;
    return {pass, fmt("LOSO mean %.3f (band 0.70-0.90), worst subject %.3f (> 0.55), %zu subjects, %.1f s (< 120)",
                      mean, worst, res.size(), secs)};
}

// ---------------------------------------------------------------- grids

struct GridOutcome {
    std::vector<RunSummary> runs;
    std::size_t failures = 0;
    double cell_seconds = 0.0;  // summed single-worker training time
    std::size_t cells = 0;
};

GridOutcome run_grid(ExperimentConfig cfg, const fs::path& dir) {
    cfg.output_dir = dir.string();
    ExperimentOptions opts;
    opts.versioned = false;
    opts.resume = true;
    opts.log = [](const std::string& m) { log(m); };
    GridOutcome out;
    auto result = run_experiment(cfg, opts);
    out.runs = std::move(result.runs);
    out.failures = result.failures.size();
    out.cells = expand_grid(cfg).size();
    for (double s : result.cell_seconds) out.cell_seconds += s;
    return out;
}

std::optional<double> late(const PhaseTable& t, const std::string& cond, const std::string& metric) {
    const auto s = t.get(TrainingPhase::Late, cond, metric);
    if (!s) return std::nullopt;
    return s->mean;
}

std::string opt_str(std::optional<double> v) { return v ? fmt("%.3f", *v) : std::string("absent"); }

Verdict condition_ordering(const GridOutcome& g, const std::string& rlihf_key) {
    const auto t = aggregate_phases(g.runs);
    const auto sparse = late(t, "sparse", "success_rate");
    const auto rlihf = late(t, rlihf_key, "success_rate");
    const auto dense = late(t, "dense", "success_rate");
    const bool pass = g.failures == 0 && sparse && rlihf && dense && *rlihf >= *sparse + 0.15 && *dense >= *rlihf - 0.10;
    const double projected = g.cell_seconds / 8.0 / 60.0;
    return {pass, fmt("Late success sparse %s, rlihf %s, dense %s (need rlihf >= sparse + 0.15 and dense >= rlihf - "
                      "0.10); %zu runs, %zu failed; projected wall clock at 8 workers %.0f min (target 60)",
                      opt_str(sparse).c_str(), opt_str(rlihf).c_str(), opt_str(dense).c_str(), g.runs.size(),
                      g.failures, projected)};
}

Verdict deviation_ordering(const GridOutcome& g, const std::string& rlihf_key) {
    const auto t = aggregate_phases(g.runs);
    const auto sparse = late(t, "sparse", "path_deviation");
    const auto rlihf = late(t, rlihf_key, "path_deviation");
    const bool pass = g.failures == 0 && sparse && rlihf && *rlihf < *sparse;
    return {pass, fmt("Late path deviation rlihf %s vs sparse %s (need strictly lower)", opt_str(rlihf).c_str(),
                      opt_str(sparse).c_str())};
}

Verdict weight_ablation(const GridOutcome& g, const std::vector<double>& weights) {
    std::vector<std::optional<Stat>> ret;
    std::string trend;
    for (double w : weights) {
        RunSummary probe;
        probe.condition = "rlihf";
        probe.w_hf = w;
        ret.push_back(phase_return(g.runs, probe.condition_key(), TrainingPhase::Late));
        trend += fmt(" w=%s:%s", format_number(w).c_str(), ret.back() ? fmt("%.2f", ret.back()->mean).c_str() : "absent");
    }
    bool monotone = true;
    for (std::size_t i = 1; i < ret.size(); ++i) monotone = monotone && ret[i] && ret[i - 1] && ret[i]->mean >= ret[i - 1]->mean;
    const auto& lo = ret.front();
    const auto& hi = ret.back();
    const bool pass = g.failures == 0 && lo && hi && hi->mean >= lo->mean;
    return {pass, fmt("Late mean unified return%s (gate: w=%s >= w=%s); monotone trend %s (reported only)",
                      trend.c_str(), format_number(weights.back()).c_str(), format_number(weights.front()).c_str(),
                      monotone ? "yes" : "no")};
}

// ---------------------------------------------------------------- 5

Verdict reward_exactness(const ExperimentConfig& cfg) {
    Rng rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double p = u(rng);
        max_err = std::max(max_err, std::abs(errp_reward(p) - (1.0 - p)));
    }

    // Full seeded episode under a trained linear decoder, random actions.
    const Environment env(Layout::standard());
    const int subject = cfg.subjects.front();
    auto model = std::make_shared<const DecoderModel>(train_subject_decoder(cfg, subject));
    FeedbackConfig fb = cfg.feedback;
    fb.w_hf = 0.0;
    FeedbackChannel channel(cfg.profile(subject), std::make_shared<LinearErrorDecoder>(model, cfg.preprocess),
                            fb, cfg.rewards, cfg.signal, 11);
    Rng act(3);
    std::uniform_real_distribution<double> a(-1.0, 1.0);
    auto state = env.reset(5);
    int mismatches = 0, judged = 0;
    while (state.phase != Phase::Done && state.step_index < env.config().episode_length) {
        EnvEvents ev;
        state = env.step(std::move(state), Vec2(a(act), a(act)), ev);
        const auto b = channel.tick(ev, state.step_index);
        judged += b.judgment != Judgment::None;
        const double sparse = env_reward(ev, RewardMode::Sparse, cfg.rewards);
        mismatches += std::memcmp(&b.r_composite, &sparse, sizeof(double)) != 0;
    }
    const bool pass = max_err == 0.0 && mismatches == 0 && judged == 125;
    return {pass, fmt("max |r_errp - (1 - p)| = %g over 1000 draws; w_hf=0 composite vs sparse: %d of %d steps differ "
                      "(%d judged)",
                      max_err, mismatches, state.step_index, judged)};
}

// ---------------------------------------------------------------- 6

Verdict dsp_suite() {
    auto chain = [](const std::vector<double>& x) {
        EegEpoch e;
        e.rate = 1000.0;
        e.data = ChannelMatrix(1, static_cast<Eigen::Index>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i) e.data(0, static_cast<Eigen::Index>(i)) = x[i];
        const auto out = bandpass_filter(resample(e, 256.0), 1.0, 20.0);
        return std::vector<double>(out.data.row(0).begin(), out.data.row(0).end());
    };
    auto sine = [](double f, double rate, std::size_t n, double phase) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * f * i / rate + phase);
        return x;
    };
    const std::size_t n = 4000;  // 4 s at 1000 Hz, 1024 samples after resampling
    const std::size_t lo = 128, hi = 1024 - 128;

    const auto dc = chain(std::vector<double>(n, 1.0));
    double dc_peak = 0.0;
    for (std::size_t i = lo; i < hi; ++i) dc_peak = std::max(dc_peak, std::abs(dc[i]));
    const double dc_db = -20.0 * std::log10(std::max(dc_peak, 1e-300));

    const auto ten = chain(sine(10.0, 1000.0, n, 0.4));
    double ss = 0, cc = 0, sc = 0, ys = 0, yc = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double w = 2 * std::numbers::pi * 10.0 * i / 256.0 + 0.4;
        const double s = std::sin(w), c = std::cos(w);
        ss += s * s, cc += c * c, sc += s * c, ys += ten[i] * s, yc += ten[i] * c;
    }
    const double det = ss * cc - sc * sc;
    const double amp = std::hypot((ys * cc - yc * sc) / det, (yc * ss - ys * sc) / det);
    const double ripple = std::abs(amp - 1.0);

    const dsp::RationalResampler rs(1000, 256);
    const auto five = rs.apply(sine(5.0, 1000.0, 2000, 0.3));
    double worst = 0.0;
    for (std::size_t m = 26; m + 26 < five.size(); ++m) {
        worst = std::max(worst, std::abs(five[m] - std::sin(2 * std::numbers::pi * 5.0 * m / 256.0 + 0.3)));
    }
    const bool pass = dc_db >= 40.0 && ripple <= 0.05 && worst <= 0.01 && five.size() == 512;
    return {pass, fmt("DC rejection %.1f dB (>= 40), 10 Hz gain error %.2f%% (<= 5%%), 5 Hz resampled max error "
                      "%.1e of amplitude (<= 0.01)",
                      dc_db, 100 * ripple, worst)};
}

// ---------------------------------------------------------------- 7

Verdict gradient_suite() {
    using oracle::gaussian;
    using oracle::numeric_gradient;
    using oracle::relative_error;
    Rng rng(77);
    double dec_worst = 0, critic_worst = 0, actor_worst = 0, alpha_worst = 0;
    for (int k = 0; k < 10; ++k) {
        // Decoder: 2 x 5 weights and biases on 12 random standardized rows.
        const Eigen::MatrixXd x = gaussian(12, 5, rng);
        std::vector<std::uint8_t> labels(12);
        for (int i = 0; i < 12; ++i) labels[i] = static_cast<std::uint8_t>(i % 2);
        Eigen::VectorXd theta = gaussian(12, 1, rng).col(0);
        auto unpack = [](const Eigen::VectorXd& t) {
            Eigen::MatrixXd w = Eigen::Map<const Eigen::MatrixXd>(t.data(), 2, 5);
            return std::pair{w, Eigen::Vector2d(t[10], t[11])};
        };
        const auto [w, b] = unpack(theta);
        const auto g = decoder_objective(w, b, x, labels, 0.05);
        Eigen::VectorXd analytic(12);
        analytic << Eigen::Map<const Eigen::VectorXd>(g.grad_weights.data(), 10), g.grad_bias;
        const auto numeric = numeric_gradient(theta, [&] {
            const auto [wn, bn] = unpack(theta);
            return decoder_objective(wn, bn, x, labels, 0.05).value;
        });
        dec_worst = std::max(dec_worst, relative_error(analytic, numeric));

        ReplayBatch batch;
        batch.obs = gaussian(3, 6, rng);
        batch.action = gaussian(2, 6, rng).array().tanh().matrix();
        batch.reward = gaussian(6, 1, rng).col(0);
        batch.next_obs = gaussian(3, 6, rng);
        batch.done = Eigen::VectorXd::Zero(6);
        nn::Mlp critic({5, 6, 5, 1}, rng);
        const Eigen::VectorXd y = gaussian(6, 1, rng).col(0);
        const auto cl = critic_loss(critic, batch, y);
        critic_worst = std::max(critic_worst, relative_error(cl.grad, numeric_gradient(critic.params(), [&] {
                                                                 return critic_loss(critic, batch, y).value;
                                                             })));

        nn::Mlp actor({3, 6, 5, 4}, rng);
        nn::Mlp q1({5, 6, 5, 1}, rng), q2({5, 6, 5, 1}, rng);
        const Eigen::MatrixXd noise = gaussian(2, 6, rng);
        const double alpha = 0.1 + 0.05 * k;
        const auto al = actor_loss(actor, q1, q2, batch.obs, noise, alpha);
        actor_worst = std::max(actor_worst, relative_error(al.grad, numeric_gradient(actor.params(), [&] {
                                                               return actor_loss(actor, q1, q2, batch.obs, noise, alpha).value;
                                                           })));

        const double log_alpha = gaussian(1, 1, rng)(0, 0);
        const Eigen::VectorXd log_prob = gaussian(6, 1, rng).col(0);
        const double target = -2.0 + 0.3 * k;
        const double h = 1e-6;
        const double fd = (alpha_loss(log_alpha + h, log_prob, target).value -
                           alpha_loss(log_alpha - h, log_prob, target).value) /
                          (2 * h);
        alpha_worst = std::max(alpha_worst, std::abs(alpha_loss(log_alpha, log_prob, target).grad - fd) /
                                                std::max(std::abs(fd), 1e-12));
    }
    const double worst = std::max({dec_worst, critic_worst, actor_worst, alpha_worst});
    return {worst < 1e-4, fmt("max relative error over 10 points: decoder %.1e, critic %.1e, actor %.1e, alpha %.1e "
                              "(< 1e-4)",
                              dec_worst, critic_worst, actor_worst, alpha_worst)};
}

// ---------------------------------------------------------------- 8

std::vector<Layout> oracle_layouts() {
    std::vector<Layout> out{Layout::standard()};
    Layout one;
    one.obstacles.clear();
    one.obstacles = {{{0.7, 0.7}, 0.08}};
    one.start = {0.1, 0.5};
    one.target = {0.5, 0.9};
    one.goal = {0.9, 0.5};
    out.push_back(one);
    Rng rng(12);
    std::uniform_real_distribution<double> u(0.2, 0.8), r(0.04, 0.09);
    while (out.size() < 5) {
        Layout l;
        l.start = {0.08, 0.85};
        l.target = {0.1, 0.15};
        l.goal = {0.92, 0.5};
        l.obstacles.clear();
        for (int k = 0; k < 4; ++k) l.obstacles.push_back({{u(rng), u(rng)}, r(rng)});
        try {
            l.validate();
            ideal_path(l);
        } catch (const ConfigError&) {
            continue;
        }
        out.push_back(l);
    }
    return out;
}

Verdict geometry_suite() {
    double worst_gap = 0.0;
    for (const auto& l : oracle_layouts()) {
        const auto inflated = l.inflated_obstacles();
        const double ref = oracle::grid_path_length(l.start, l.target, inflated) +
                           oracle::grid_path_length(l.target, l.goal, inflated);
        worst_gap = std::max(worst_gap, std::abs(polyline_length(ideal_path(l)) - ref) / ref);
    }

    const Environment env(Layout::standard());
    Rng rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto s = env.reset(0);
    int inside = 0;
    for (int i = 0; i < 100000; ++i) {
        EnvEvents ev;
        s = env.step(std::move(s), Vec2(u(rng), u(rng)), ev);
        for (const auto& d : env.layout().obstacles) inside += (s.gripper - d.center).norm() < d.radius - 1e-12;
        inside += !env.layout().workspace.contains(s.gripper, 0.0);
        if (s.phase == Phase::Done || s.step_index == env.config().episode_length) s = env.reset(i);
    }

    Polyline arc;
    for (int i = 0; i <= 2000; ++i) {
        const double t = std::numbers::pi * (1.0 - i / 2000.0);
        arc.emplace_back(std::cos(t), std::sin(t));
    }
    const double eff_err = std::abs(path_efficiency(arc, Polyline{{-1, 0}, {1, 0}}) - 2.0 / std::numbers::pi);
    Polyline wave;
    for (int i = 0; i < 1000; ++i) wave.emplace_back(i / 1000.0, 0.3 * std::sin(2 * std::numbers::pi * i / 1000.0));
    const double dev_err =
        std::abs(path_deviation(wave, Polyline{{0, 0}, {1, 0}}) - 0.3 / std::numbers::sqrt2) / (0.3 / std::numbers::sqrt2);
    const bool pass = worst_gap < 0.02 && inside == 0 && eff_err < 1e-3 && dev_err < 0.01;
    return {pass, fmt("ideal path vs grid oracle worst %.2f%% (< 2%%) on 5 layouts; %d penetrations in 1e5 steps; "
                      "2/pi arc error %.1e (< 1e-3); sine RMSD error %.2f%% (< 1%%)",
                      100 * worst_gap, inside, eff_err, 100 * dev_err)};
}

// ---------------------------------------------------------------- 9

Verdict determinism(ExperimentConfig cfg, const fs::path& grid_dir, const fs::path& scratch) {
    // One rlihf cell: exercises decoder training, the feedback stream and SAC.
    cfg.conditions = {"rlihf"};
    cfg.subjects = {cfg.subjects.front()};
    cfg.w_hf = {cfg.w_hf.front()};
    cfg.seeds = {cfg.seeds.front()};
    fs::remove_all(scratch);
    cfg.output_dir = scratch.string();
    ExperimentOptions opts;
    opts.versioned = false;
    const auto result = run_experiment(cfg, opts);
    const std::string name = expand_grid(cfg).front().name;
    int compared = 0, differing = 0;
    for (const char* suffix : {"_evals.csv", "_episodes.csv"}) {
        const auto a = grid_dir / "runs" / (name + suffix);
        const auto b = scratch / "runs" / (name + suffix);
        if (!fs::exists(a) || !fs::exists(b)) {
            ++differing;
            continue;
        }
        ++compared;
        differing += read_file(a) != read_file(b);
    }
    const bool pass = result.failures.empty() && compared == 2 && differing == 0;
    return {pass, fmt("re-ran %s: %d of 2 metric CSVs byte-identical to the cached grid run", name.c_str(),
                      compared - differing)};
}

// Equal up to the grid lists and the output location.
bool same_setup(ExperimentConfig a, ExperimentConfig b) {
    for (auto* c : {&a, &b}) {
        c->conditions.clear();
        c->subjects.clear();
        c->w_hf.clear();
        c->seeds.clear();
        c->output_dir = "-";
        c->workers = 1;
    }
    return config_to_json(a) == config_to_json(b);
}

// Cells that appear in both grids are trained once.
void share_cells(const ExperimentConfig& from_cfg, const fs::path& from, const ExperimentConfig& to_cfg,
                 const fs::path& to) {
    if (!same_setup(from_cfg, to_cfg) || from_cfg.master_seed != to_cfg.master_seed) return;
    std::set<std::string> wanted;
    for (const auto& c : expand_grid(to_cfg)) wanted.insert(c.name);
    fs::create_directories(to / "runs");
    for (const auto& c : expand_grid(from_cfg)) {
        if (!wanted.count(c.name)) continue;
        for (const char* suffix : {".json", "_evals.csv", "_episodes.csv"}) {
            const auto src = from / "runs" / (c.name + suffix);
            const auto dst = to / "runs" / (c.name + suffix);
            if (fs::exists(src) && !fs::exists(dst)) fs::copy_file(src, dst);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string cache = "acceptance_cache";
    std::string config_dir = RLIHF_CONFIG_DIR;
    std::vector<int> only;
    app.add_option("--cache", cache, "directory for cached training grids");
    app.add_option("--configs", config_dir, "directory holding acceptance.jsonc and ablation.jsonc");
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
    std::vector<std::pair<int, Verdict>> verdicts;
    auto record = [&](int k, Verdict v) {
        std::cout << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << std::endl;
        verdicts.emplace_back(k, std::move(v));
    };
    auto guarded = [&](int k, const std::function<Verdict()>& f) {
        if (!wanted(k)) return;
        std::cerr << "[criterion " << k << "]\n";
        try {
            record(k, f());
        } catch (const std::exception& e) {
            record(k, {false, std::string("error: ") + e.what()});
        }
    };

    const fs::path root(cache);
    const auto grid_cfg = load_config(fs::path(config_dir) / "acceptance.jsonc");
    const auto ablation_cfg = load_config(fs::path(config_dir) / "ablation.jsonc");

    guarded(1, [&] { return decoder_band(load_config(fs::path(config_dir) / "default.jsonc")); });

    std::optional<GridOutcome> grid;
    auto need_grid = [&]() -> const GridOutcome& {
        if (!grid) grid = run_grid(grid_cfg, root / "grid");
        return *grid;
    };
    RunSummary probe;
    probe.condition = "rlihf";
    probe.w_hf = grid_cfg.w_hf.front();
    const std::string rlihf_key = probe.condition_key();
    guarded(2, [&] { return condition_ordering(need_grid(), rlihf_key); });
    guarded(3, [&] { return deviation_ordering(need_grid(), rlihf_key); });
    guarded(4, [&] {
        share_cells(grid_cfg, root / "grid", ablation_cfg, root / "ablation");
        return weight_ablation(run_grid(ablation_cfg, root / "ablation"), ablation_cfg.w_hf);
    });
    guarded(5, [&] { return reward_exactness(grid_cfg); });
    guarded(6, dsp_suite);
    guarded(7, gradient_suite);
    guarded(8, geometry_suite);
    guarded(9, [&] {
        need_grid();
        return determinism(grid_cfg, root / "grid", root / "determinism");
    });

    int failed = 0;
    for (const auto& [k, v] : verdicts) failed += !v.pass;
    std::cout << (failed ? "FAILED: " : "PASSED: ") << verdicts.size() - failed << " of " << verdicts.size()
              << " criteria pass" << std::endl;
    return failed ? 1 : 0;
}
