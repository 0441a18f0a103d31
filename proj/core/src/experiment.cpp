#include "rlihf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rlihf/svg.hpp"

namespace rlihf {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string join_issues(const std::vector<ConfigIssue>& issues) {
    std::string s = "invalid configuration:";
    for (const auto& i : issues) s += "\n  " + i.key + ": " + i.message;
    return s;
}

// Strict reader over one JSON object; records every problem instead of
// stopping at the first.
class Section {
public:
    Section(const json* node, std::string path, std::vector<ConfigIssue>& issues)
        : node_(node), path_(std::move(path)), issues_(issues) {
        if (node_ && !node_->is_object()) {
            issue("", "expected an object");
            node_ = nullptr;
        }
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    void issue(const std::string& k, const std::string& msg) { issues_.push_back({k.empty() ? path_ : key(k), msg}); }

    const json* find(const char* k) {
        seen_.insert(k);
        if (!node_) return nullptr;
        auto it = node_->find(k);
        return it == node_->end() ? nullptr : &*it;
    }

    void number(const char* k, double& out) {
        if (const json* v = find(k)) {
            if (v->is_number()) out = v->get<double>();
            else issue(k, "expected a number");
        }
    }
    template <class Int>
    void integer(const char* k, Int& out) {
        if (const json* v = find(k)) {
            if (v->is_number_integer()) out = v->get<Int>();
            else issue(k, "expected an integer");
        }
    }
    void boolean(const char* k, bool& out) {
        if (const json* v = find(k)) {
            if (v->is_boolean()) out = v->get<bool>();
            else issue(k, "expected true or false");
        }
    }
    void string(const char* k, std::string& out) {
        if (const json* v = find(k)) {
            if (v->is_string()) out = v->get<std::string>();
            else issue(k, "expected a string");
        }
    }
    void point(const char* k, Vec2& out) {
        if (const json* v = find(k)) {
            if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
                out = Vec2((*v)[0].get<double>(), (*v)[1].get<double>());
            } else {
                issue(k, "expected [x, y]");
            }
        }
    }
    template <class T, class Check>
    void list(const char* k, std::vector<T>& out, Check check, const char* what) {
        if (const json* v = find(k)) {
            if (!v->is_array()) {
                issue(k, std::string("expected a list of ") + what);
                return;
            }
            std::vector<T> tmp;
            for (const auto& e : *v) {
                if (!check(e)) {
                    issue(k, std::string("expected a list of ") + what);
                    return;
                }
                tmp.push_back(e.template get<T>());
            }
            out = std::move(tmp);
        }
    }
    Section child(const char* k) { return Section(find(k), key(k), issues_); }
    std::vector<ConfigIssue>& issues() { return issues_; }

    void finish() {
        if (!node_) return;
        for (auto it = node_->begin(); it != node_->end(); ++it) {
            if (!seen_.count(it.key())) issue(it.key(), "unknown key");
        }
    }

private:
    const json* node_;
    std::string path_;
    std::vector<ConfigIssue>& issues_;
    std::set<std::string> seen_;
};

bool is_int(const json& e) { return e.is_number_integer(); }
bool is_num(const json& e) { return e.is_number(); }
bool is_str(const json& e) { return e.is_string(); }

void read_components(Section& s, const char* k, std::vector<WaveComponent>& out) {
    const json* v = s.find(k);
    if (!v) return;
    if (!v->is_array()) {
        s.issue(k, "expected a list of components");
        return;
    }
    std::vector<WaveComponent> tmp;
    for (std::size_t i = 0; i < v->size(); ++i) {
        Section c(&(*v)[i], s.key(k) + "[" + std::to_string(i) + "]", s.issues());
        WaveComponent w;
        c.number("latency_ms", w.latency_ms);
        c.number("width_ms", w.width_ms);
        c.number("amplitude_uv", w.amplitude_uv);
        c.finish();
        tmp.push_back(w);
    }
    out = std::move(tmp);
}

json point_json(const Vec2& p) { return json::array({p.x(), p.y()}); }

json components_json(const std::vector<WaveComponent>& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back({{"latency_ms", c.latency_ms}, {"width_ms", c.width_ms}, {"amplitude_uv", c.amplitude_uv}});
    return a;
}

json config_json(const ExperimentConfig& c) {
    json j;
    j["conditions"] = c.conditions;
    j["subjects"] = c.subjects;
    j["w_hf"] = c.w_hf;
    j["seeds"] = c.seeds;
    j["master_seed"] = c.master_seed;
    j["output_dir"] = c.output_dir;
    j["workers"] = c.workers;
    json obstacles = json::array();
    for (const auto& d : c.layout.obstacles) obstacles.push_back({{"center", point_json(d.center)}, {"radius", d.radius}});
    j["layout"] = {{"start", point_json(c.layout.start)}, {"target", point_json(c.layout.target)},
                   {"goal", point_json(c.layout.goal)}, {"d_safe", c.layout.d_safe}, {"obstacles", obstacles}};
    j["env"] = {{"v_max", c.env.v_max}, {"eps_grasp", c.env.eps_grasp}, {"eps_place", c.env.eps_place},
                {"episode_length", c.env.episode_length}, {"start_jitter", c.env.start_jitter}};
    j["rewards"] = {{"r_success", c.rewards.r_success}, {"r_coll", c.rewards.r_coll}, {"c_prog", c.rewards.c_prog},
                    {"c_dev", c.rewards.c_dev}};
    j["agent"] = {{"gamma", c.agent.gamma}, {"tau", c.agent.tau}, {"lr", c.agent.lr}, {"batch", c.agent.batch},
                  {"buffer_capacity", c.agent.buffer_capacity}, {"warmup_steps", c.agent.warmup_steps},
                  {"hidden", c.agent.hidden}, {"auto_target_entropy", c.agent.auto_target_entropy},
                  {"target_entropy", c.agent.target_entropy}, {"init_alpha", c.agent.init_alpha},
                  {"updates_per_step", c.agent.updates_per_step}};
    j["train"] = {{"total_steps", c.train.total_steps}, {"eval_interval_episodes", c.train.eval_interval_episodes},
                  {"eval_rollouts", c.train.eval_rollouts}, {"eval_start_jitter", c.train.eval_start_jitter}};
    j["feedback"] = {{"cadence_k", c.feedback.observer.cadence_k}, {"regress_tol", c.feedback.observer.regress_tol},
                     {"center_errp", c.feedback.center_errp}, {"absorbing_tail", c.feedback.absorbing_tail},
                     {"ring_capacity", c.feedback.ring_capacity}};
    j["signal"] = {{"raw_rate", c.signal.raw_rate}, {"epoch_seconds", c.signal.epoch_seconds},
                   {"correlated_fraction", c.signal.correlated_fraction},
                   {"error_waveform", components_json(c.signal.waveform.error)},
                   {"baseline_waveform", components_json(c.signal.waveform.baseline)}};
    j["preprocess"] = {{"target_rate", c.preprocess.target_rate}, {"band_low", c.preprocess.band_low},
                       {"band_high", c.preprocess.band_high}, {"filter_order", c.preprocess.filter_order},
                       {"feature_bin", c.preprocess.feature_bin}};
    j["decoder"] = {{"l2", c.decoder.l2}, {"epochs", c.decoder.epochs}, {"lr", c.decoder.lr},
                    {"batch", c.decoder.batch}, {"seed", c.decoder.seed},
                    {"calibration_per_class", c.dataset.calibration_per_class},
                    {"online_per_class", c.dataset.online_per_class}, {"data_seed", c.dataset.seed}};
    json profiles = json::array();
    for (const auto& p : c.profiles) {
        profiles.push_back({{"id", p.id}, {"errp_gain", p.errp_gain}, {"noise_amp", p.noise_amp},
                            {"latency_jitter_ms", p.latency_jitter_ms}, {"n_channels", p.n_channels}});
    }
    j["profiles"] = profiles;
    return j;
}

std::string fnv_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
    }
    return s;
}

int condition_rank(const std::string& c) {
    if (c == "sparse") return 0;
    if (c == "dense") return 1;
    return 2;
}

std::vector<RunSummary> canonical_order(std::vector<RunSummary> runs) {
    std::stable_sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
        return std::make_tuple(condition_rank(a.condition), a.w_hf, a.subject_id, a.seed_index) <
               std::make_tuple(condition_rank(b.condition), b.w_hf, b.subject_id, b.seed_index);
    });
    return runs;
}

svg::Series curve_series(const std::string& label, const std::vector<CurvePoint>& curve) {
    svg::Series s;
    s.label = label;
    for (const auto& p : curve) {
        s.x.push_back(static_cast<double>(p.step));
        s.y.push_back(p.value.mean);
        s.band.push_back(p.value.std);
    }
    return s;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(*it, prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else {
        out[prefix] = j.dump();
    }
}

}  // namespace

ConfigValidationError::ConfigValidationError(std::vector<ConfigIssue> issues)
    : ConfigError(join_issues(issues)), issues_(std::move(issues)) {}

const SubjectProfile& ExperimentConfig::profile(int id) const {
    for (const auto& p : profiles) {
        if (p.id == id) return p;
    }
    throw ConfigError("unknown subject profile " + std::to_string(id));
}

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigValidationError(std::vector<ConfigIssue>{{"<file>", std::string("parse error: ") + e.what()}});
    }
    ExperimentConfig c;
    std::vector<ConfigIssue> issues;
    Section top(&root, "", issues);
    top.list("conditions", c.conditions, is_str, "strings");
    top.list("subjects", c.subjects, is_int, "integers");
    top.list("w_hf", c.w_hf, is_num, "numbers");
    top.list("seeds", c.seeds, is_int, "integers");
    top.integer("master_seed", c.master_seed);
    top.string("output_dir", c.output_dir);
    top.integer("workers", c.workers);
    {
        Section s = top.child("layout");
        s.point("start", c.layout.start);
        s.point("target", c.layout.target);
        s.point("goal", c.layout.goal);
        s.number("d_safe", c.layout.d_safe);
        if (const json* v = s.find("obstacles")) {
            if (!v->is_array()) {
                s.issue("obstacles", "expected a list of {center, radius}");
            } else {
                std::vector<Disc> discs;
                for (std::size_t i = 0; i < v->size(); ++i) {
                    Section d(&(*v)[i], s.key("obstacles") + "[" + std::to_string(i) + "]", issues);
                    Disc disc{Vec2::Zero(), 0.0};
                    d.point("center", disc.center);
                    d.number("radius", disc.radius);
                    d.finish();
                    discs.push_back(disc);
                }
                c.layout.obstacles = std::move(discs);
            }
        }
        s.finish();
    }
    {
        Section s = top.child("env");
        s.number("v_max", c.env.v_max);
        s.number("eps_grasp", c.env.eps_grasp);
        s.number("eps_place", c.env.eps_place);
        s.integer("episode_length", c.env.episode_length);
        s.number("start_jitter", c.env.start_jitter);
        s.finish();
    }
    {
        Section s = top.child("rewards");
        s.number("r_success", c.rewards.r_success);
        s.number("r_coll", c.rewards.r_coll);
        s.number("c_prog", c.rewards.c_prog);
        s.number("c_dev", c.rewards.c_dev);
        s.finish();
    }
    {
        Section s = top.child("agent");
        s.number("gamma", c.agent.gamma);
        s.number("tau", c.agent.tau);
        s.number("lr", c.agent.lr);
        s.integer("batch", c.agent.batch);
        s.integer("buffer_capacity", c.agent.buffer_capacity);
        s.integer("warmup_steps", c.agent.warmup_steps);
        s.list("hidden", c.agent.hidden, is_int, "integers");
        s.boolean("auto_target_entropy", c.agent.auto_target_entropy);
        s.number("target_entropy", c.agent.target_entropy);
        s.number("init_alpha", c.agent.init_alpha);
        s.integer("updates_per_step", c.agent.updates_per_step);
        s.finish();
    }
    {
        Section s = top.child("train");
        s.integer("total_steps", c.train.total_steps);
        s.integer("eval_interval_episodes", c.train.eval_interval_episodes);
        s.integer("eval_rollouts", c.train.eval_rollouts);
        s.number("eval_start_jitter", c.train.eval_start_jitter);
        s.finish();
    }
    {
        Section s = top.child("feedback");
        s.integer("cadence_k", c.feedback.observer.cadence_k);
        s.number("regress_tol", c.feedback.observer.regress_tol);
        s.boolean("center_errp", c.feedback.center_errp);
        s.boolean("absorbing_tail", c.feedback.absorbing_tail);
        s.integer("ring_capacity", c.feedback.ring_capacity);
        s.finish();
    }
    {
        Section s = top.child("signal");
        s.number("raw_rate", c.signal.raw_rate);
        s.number("epoch_seconds", c.signal.epoch_seconds);
        s.number("correlated_fraction", c.signal.correlated_fraction);
        read_components(s, "error_waveform", c.signal.waveform.error);
        read_components(s, "baseline_waveform", c.signal.waveform.baseline);
        s.finish();
    }
    {
        Section s = top.child("preprocess");
        s.number("target_rate", c.preprocess.target_rate);
        s.number("band_low", c.preprocess.band_low);
        s.number("band_high", c.preprocess.band_high);
        s.integer("filter_order", c.preprocess.filter_order);
        s.integer("feature_bin", c.preprocess.feature_bin);
        s.finish();
    }
    {
        Section s = top.child("decoder");
        s.number("l2", c.decoder.l2);
        s.integer("epochs", c.decoder.epochs);
        s.number("lr", c.decoder.lr);
        s.integer("batch", c.decoder.batch);
        s.integer("seed", c.decoder.seed);
        s.integer("calibration_per_class", c.dataset.calibration_per_class);
        s.integer("online_per_class", c.dataset.online_per_class);
        s.integer("data_seed", c.dataset.seed);
        s.finish();
    }
    if (const json* v = top.find("profiles")) {
        if (!v->is_array()) {
            top.issue("profiles", "expected a list of subject profiles");
        } else {
            std::vector<SubjectProfile> ps;
            for (std::size_t i = 0; i < v->size(); ++i) {
                Section p(&(*v)[i], "profiles[" + std::to_string(i) + "]", issues);
                SubjectProfile sp;
                p.integer("id", sp.id);
                p.number("errp_gain", sp.errp_gain);
                p.number("noise_amp", sp.noise_amp);
                p.number("latency_jitter_ms", sp.latency_jitter_ms);
                p.integer("n_channels", sp.n_channels);
                p.finish();
                ps.push_back(sp);
            }
            c.profiles = std::move(ps);
        }
    }
    top.finish();
    c.feedback.observer.d_safe = c.layout.d_safe;

    // Range checks too, skipping keys that already failed to parse.
    for (auto& issue : validate_config(c)) {
        const bool seen = std::any_of(issues.begin(), issues.end(), [&](const ConfigIssue& i) { return i.key == issue.key; });
        if (!seen) issues.push_back(std::move(issue));
    }
    if (!issues.empty()) throw ConfigValidationError(std::move(issues));
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigValidationError(std::vector<ConfigIssue>{{"<file>", "cannot open " + path.string()}});
    std::ostringstream s;
    s << f.rdbuf();
    return parse_config(s.str());
}

std::vector<ConfigIssue> validate_config(const ExperimentConfig& c) {
    std::vector<ConfigIssue> out;
    auto need = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) out.push_back({key, msg});
    };
    need(!c.conditions.empty(), "conditions", "must list at least one condition");
    for (const auto& cond : c.conditions) {
        need(cond == "sparse" || cond == "dense" || cond == "rlihf", "conditions",
             "unknown condition '" + cond + "' (expected sparse, dense or rlihf)");
    }
    need(!c.subjects.empty(), "subjects", "must list at least one subject");
    std::set<int> ids;
    for (const auto& p : c.profiles) {
        need(ids.insert(p.id).second, "profiles", "duplicate profile id " + std::to_string(p.id));
        try {
            p.validate();
        } catch (const std::exception& e) {
            out.push_back({"profiles", e.what()});
        }
    }
    for (int s : c.subjects) need(ids.count(s) > 0, "subjects", "no profile with id " + std::to_string(s));
    need(!c.w_hf.empty(), "w_hf", "must list at least one weight");
    for (double w : c.w_hf) need(std::isfinite(w) && w >= 0.0, "w_hf", "weights must be >= 0");
    need(!c.seeds.empty(), "seeds", "must list at least one seed");
    std::set<int> seen_seeds;
    for (int s : c.seeds) {
        need(s >= 0, "seeds", "seed indices must be >= 0");
        need(seen_seeds.insert(s).second, "seeds", "duplicate seed index " + std::to_string(s));
    }
    need(c.workers >= 1, "workers", "must be >= 1");
    need(!c.output_dir.empty(), "output_dir", "must not be empty");

    try {
        c.layout.validate();
    } catch (const std::exception& e) {
        out.push_back({"layout", e.what()});
    }
    need(c.env.v_max > 0.0, "env.v_max", "must be > 0");
    need(c.env.eps_grasp > 0.0, "env.eps_grasp", "must be > 0");
    need(c.env.eps_place > 0.0, "env.eps_place", "must be > 0");
    need(c.env.episode_length >= 1, "env.episode_length", "must be >= 1");
    need(c.env.start_jitter >= 0.0, "env.start_jitter", "must be >= 0");

    need(c.rewards.r_success >= 0.0, "rewards.r_success", "must be >= 0");
    need(c.rewards.r_coll >= 0.0, "rewards.r_coll", "must be >= 0");
    need(c.rewards.c_prog >= 0.0, "rewards.c_prog", "must be >= 0");
    need(c.rewards.c_dev >= 0.0, "rewards.c_dev", "must be >= 0");

    need(c.agent.gamma > 0.0 && c.agent.gamma < 1.0, "agent.gamma", "must be in (0, 1)");
    need(c.agent.tau > 0.0 && c.agent.tau <= 1.0, "agent.tau", "must be in (0, 1]");
    need(c.agent.lr > 0.0, "agent.lr", "must be > 0");
    need(c.agent.batch >= 1, "agent.batch", "must be >= 1");
    need(c.agent.buffer_capacity >= static_cast<std::size_t>(std::max(c.agent.batch, 1)), "agent.buffer_capacity",
         "must be >= agent.batch");
    need(c.agent.warmup_steps >= 0, "agent.warmup_steps", "must be >= 0");
    need(!c.agent.hidden.empty(), "agent.hidden", "must list at least one layer width");
    for (int h : c.agent.hidden) need(h >= 1, "agent.hidden", "layer widths must be >= 1");
    need(c.agent.init_alpha > 0.0, "agent.init_alpha", "must be > 0");
    need(c.agent.updates_per_step >= 1, "agent.updates_per_step", "must be >= 1");

    need(c.train.total_steps >= 1, "train.total_steps", "must be >= 1");
    need(c.train.eval_interval_episodes >= 1, "train.eval_interval_episodes", "must be >= 1");
    need(c.train.eval_rollouts >= 1, "train.eval_rollouts", "must be >= 1");
    need(c.train.eval_start_jitter >= 0.0, "train.eval_start_jitter", "must be >= 0");

    need(c.feedback.observer.cadence_k >= 1, "feedback.cadence_k", "must be >= 1");
    need(c.feedback.observer.regress_tol >= 0.0, "feedback.regress_tol", "must be >= 0");
    need(c.feedback.ring_capacity >= 1, "feedback.ring_capacity", "must be >= 1");

    need(c.signal.raw_rate > 0.0, "signal.raw_rate", "must be > 0");
    need(c.signal.epoch_seconds > 0.0, "signal.epoch_seconds", "must be > 0");
    need(c.signal.correlated_fraction >= 0.0 && c.signal.correlated_fraction <= 1.0, "signal.correlated_fraction",
         "must be in [0, 1]");
    for (const auto& w : c.signal.waveform.error) need(w.width_ms > 0.0, "signal.error_waveform", "width_ms must be > 0");
    for (const auto& w : c.signal.waveform.baseline) {
        need(w.width_ms > 0.0, "signal.baseline_waveform", "width_ms must be > 0");
    }

    need(c.preprocess.target_rate > 0.0 && c.preprocess.target_rate < c.signal.raw_rate, "preprocess.target_rate",
         "must be in (0, signal.raw_rate)");
    need(c.preprocess.band_low > 0.0 && c.preprocess.band_low < c.preprocess.band_high, "preprocess.band_low",
         "must satisfy 0 < band_low < band_high");
    need(c.preprocess.band_high < c.preprocess.target_rate / 2.0, "preprocess.band_high",
         "must be below half of preprocess.target_rate");
    need(c.preprocess.filter_order >= 1, "preprocess.filter_order", "must be >= 1");
    need(c.preprocess.feature_bin >= 1, "preprocess.feature_bin", "must be >= 1");

    need(c.decoder.l2 >= 0.0, "decoder.l2", "must be >= 0");
    need(c.decoder.epochs >= 1, "decoder.epochs", "must be >= 1");
    need(c.decoder.lr > 0.0, "decoder.lr", "must be > 0");
    need(c.decoder.batch >= 1, "decoder.batch", "must be >= 1");
    need(c.dataset.calibration_per_class >= 1, "decoder.calibration_per_class", "must be >= 1");
    need(c.dataset.online_per_class >= 1, "decoder.online_per_class", "must be >= 1");
    const bool needs_cohort = std::find(c.conditions.begin(), c.conditions.end(), "rlihf") != c.conditions.end();
    need(!needs_cohort || c.profiles.size() >= 2, "profiles", "rlihf needs at least 2 profiles for LOSO training");
    return out;
}

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) {
    json j = config_json(cfg);
    j.erase("output_dir");
    j.erase("workers");
    return fnv_hex(j.dump());
}

std::uint64_t derive_run_seed(std::uint64_t master, const std::string& condition, int subject, int seed_index,
                              double w_hf) {
    std::uint64_t h = hash_combine(master, std::string_view(condition));
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(subject)));
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(seed_index)));
    return hash_combine(h, w_hf);
}

std::vector<GridCell> expand_grid(const ExperimentConfig& cfg) {
    std::vector<GridCell> cells;
    for (const auto& cond : cfg.conditions) {
        const ConditionKind kind = parse_condition(cond);
        const std::vector<double> weights = kind == ConditionKind::Rlihf ? cfg.w_hf : std::vector<double>{0.0};
        for (double w : weights) {
            for (int subject : cfg.subjects) {
                for (int s : cfg.seeds) {
                    GridCell cell;
                    cell.spec = {kind, subject, w, s, derive_run_seed(cfg.master_seed, cond, subject, s, w)};
                    cell.name = cond + "_s" + std::to_string(subject);
                    if (kind == ConditionKind::Rlihf) cell.name += "_w" + sanitize(format_number(w));
                    cell.name += "_seed" + std::to_string(s);
                    cells.push_back(cell);
                }
            }
        }
    }
    return cells;
}

int resolve_workers(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("RLIHF_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
        throw ConfigValidationError(std::vector<ConfigIssue>{{"RLIHF_WORKERS", "must be a positive integer"}});
    }
    return cfg.workers;
}

fs::path next_version_dir(const fs::path& root) {
    fs::create_directories(root);
    for (int v = 1; v < 100000; ++v) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "v%03d", v);
        const fs::path p = root / buf;
        if (fs::create_directory(p)) return p;  // false when it already exists
    }
    throw std::runtime_error("no free version directory under " + root.string());
}

namespace {

std::vector<SubjectSplits> make_cohort(const ExperimentConfig& cfg) {
    const Preprocessor pre(cfg.preprocess, cfg.signal.raw_rate);
    return generate_cohort(cfg.profiles, cfg.dataset, pre, cfg.signal);
}

}  // namespace

DecoderModel train_subject_decoder(const ExperimentConfig& cfg, int subject_id) {
    cfg.profile(subject_id);
    const auto cohort = make_cohort(cfg);
    return train_loso_decoder(cohort, subject_id, cfg.decoder);
}

std::vector<LosoResult> run_loso(const ExperimentConfig& cfg) {
    if (cfg.profiles.size() < 2) throw ConfigError("LOSO needs at least 2 subject profiles");
    const auto cohort = make_cohort(cfg);
    return loso_evaluate(cohort, cfg.decoder);
}

std::string run_to_json(const RunSummary& run) {
    json j;
    j["condition"] = run.condition;
    j["subject_id"] = run.subject_id;
    j["w_hf"] = run.w_hf;
    j["seed_index"] = run.seed_index;
    j["seed"] = run.seed;
    j["total_steps"] = run.total_steps;
    json evals = json::array();
    for (const auto& e : run.evals) {
        json rs = json::array();
        for (const auto& r : e.rollouts) {
            rs.push_back({{"unified_return", r.unified_return},
                          {"success", r.success},
                          {"path_efficiency", r.path_efficiency ? json(*r.path_efficiency) : json(nullptr)},
                          {"path_deviation", r.path_deviation},
                          {"collisions", r.collisions},
                          {"steps", r.steps}});
        }
        evals.push_back({{"global_step", e.global_step}, {"episode", e.episode}, {"mean_return", e.mean_return},
                         {"std_return", e.std_return}, {"rollouts", rs}});
    }
    j["evals"] = evals;
    json eps = json::array();
    for (const auto& e : run.episodes) {
        eps.push_back({{"index", e.index}, {"step_begin", e.step_begin}, {"steps", e.steps},
                       {"train_return", e.train_return}, {"unified_return", e.unified_return},
                       {"success", e.success}, {"collisions", e.collisions}, {"judgments", e.judgments},
                       {"error_judgments", e.error_judgments}, {"decoded_correct", e.decoded_correct}});
    }
    j["episodes"] = eps;
    return j.dump() + "\n";
}

RunSummary run_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunSummary run;
    run.condition = j.at("condition").get<std::string>();
    run.subject_id = j.at("subject_id").get<int>();
    run.w_hf = j.at("w_hf").get<double>();
    run.seed_index = j.at("seed_index").get<int>();
    run.seed = j.at("seed").get<std::uint64_t>();
    run.total_steps = j.at("total_steps").get<std::int64_t>();
    for (const auto& e : j.at("evals")) {
        EvalPoint p;
        p.global_step = e.at("global_step").get<std::int64_t>();
        p.episode = e.at("episode").get<int>();
        p.mean_return = e.at("mean_return").get<double>();
        p.std_return = e.at("std_return").get<double>();
        for (const auto& r : e.at("rollouts")) {
            EvalRollout x;
            x.unified_return = r.at("unified_return").get<double>();
            x.success = r.at("success").get<bool>();
            if (!r.at("path_efficiency").is_null()) x.path_efficiency = r.at("path_efficiency").get<double>();
            x.path_deviation = r.at("path_deviation").get<double>();
            x.collisions = r.at("collisions").get<int>();
            x.steps = r.at("steps").get<int>();
            p.rollouts.push_back(x);
        }
        run.evals.push_back(std::move(p));
    }
    for (const auto& e : j.at("episodes")) {
        TrainEpisode t;
        t.index = e.at("index").get<int>();
        t.step_begin = e.at("step_begin").get<std::int64_t>();
        t.steps = e.at("steps").get<int>();
        t.train_return = e.at("train_return").get<double>();
        t.unified_return = e.at("unified_return").get<double>();
        t.success = e.at("success").get<bool>();
        t.collisions = e.at("collisions").get<int>();
        t.judgments = e.at("judgments").get<int>();
        t.error_judgments = e.at("error_judgments").get<int>();
        t.decoded_correct = e.at("decoded_correct").get<int>();
        run.episodes.push_back(t);
    }
    return run;
}

void write_eval_csv(std::ostream& out, const RunSummary& run) {
    out << "global_step,episode,rollout,unified_return,success,path_efficiency,path_deviation,collisions,steps\n";
    for (const auto& e : run.evals) {
        for (std::size_t k = 0; k < e.rollouts.size(); ++k) {
            const auto& r = e.rollouts[k];
            out << e.global_step << ',' << e.episode << ',' << k << ',' << format_number(r.unified_return) << ','
                << (r.success ? 1 : 0) << ',' << (r.path_efficiency ? format_number(*r.path_efficiency) : "") << ','
                << format_number(r.path_deviation) << ',' << r.collisions << ',' << r.steps << '\n';
        }
    }
}

void write_episode_csv(std::ostream& out, const RunSummary& run) {
    out << "episode,step_begin,steps,train_return,unified_return,success,collisions,judgments,error_judgments,"
           "decoded_correct\n";
    for (const auto& e : run.episodes) {
        out << e.index << ',' << e.step_begin << ',' << e.steps << ',' << format_number(e.train_return) << ','
            << format_number(e.unified_return) << ',' << (e.success ? 1 : 0) << ',' << e.collisions << ','
            << e.judgments << ',' << e.error_judgments << ',' << e.decoded_correct << '\n';
    }
}

std::vector<RunSummary> load_runs(const fs::path& dir) {
    const fs::path runs_dir = dir / "runs";
    if (!fs::is_directory(runs_dir)) throw ConfigError("no runs/ directory in " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(runs_dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunSummary> out;
    for (const auto& f : files) out.push_back(run_from_json(read_text(f)));
    return canonical_order(std::move(out));
}

void write_reports(const fs::path& dir, const std::vector<RunSummary>& unordered) {
    const auto runs = canonical_order(unordered);
    const PhaseTable table = aggregate_phases(runs);
    {
        std::ostringstream s;
        write_phase_csv(s, table);
        write_text(dir / "phase_table.csv", s.str());
        write_text(dir / "phase_table.txt", format_phase_table(table));
    }
    {
        std::ostringstream s;
        s << "phase,condition,mean_return,std_return,n\n";
        for (TrainingPhase p : {TrainingPhase::Early, TrainingPhase::Mid, TrainingPhase::Late}) {
            for (const auto& c : table.conditions) {
                s << to_string(p) << ',' << c << ',';
                if (const auto st = phase_return(runs, c, p)) {
                    s << format_number(st->mean) << ',' << format_number(st->std) << ',' << st->n << '\n';
                } else {
                    s << ",,0\n";
                }
            }
        }
        write_text(dir / "phase_returns.csv", s.str());
    }

    fs::create_directories(dir / "curves");
    svg::Panel all{"Evaluation return", "environment steps", "unified return", {}};
    for (const auto& c : table.conditions) {
        const auto curve = learning_curve(runs, c);
        std::ostringstream s;
        write_curve_csv(s, curve);
        write_text(dir / "curves" / (sanitize(c) + ".csv"), s.str());
        all.series.push_back(curve_series(c, curve));
    }
    write_text(dir / "learning_curves.svg", svg::line_plot(all));

    // One panel per subject, one line per condition.
    std::vector<int> subjects;
    for (const auto& r : runs) {
        if (std::find(subjects.begin(), subjects.end(), r.subject_id) == subjects.end()) subjects.push_back(r.subject_id);
    }
    std::sort(subjects.begin(), subjects.end());
    std::vector<svg::Panel> panels;
    for (int s : subjects) {
        std::vector<RunSummary> mine;
        for (const auto& r : runs) {
            if (r.subject_id == s) mine.push_back(r);
        }
        svg::Panel p{"Subject " + std::to_string(s), "environment steps", "unified return", {}};
        for (const auto& c : table.conditions) {
            const auto curve = learning_curve(mine, c);
            if (!curve.empty()) p.series.push_back(curve_series(c, curve));
        }
        panels.push_back(std::move(p));
    }
    write_text(dir / "curves_by_subject.svg", svg::panel_grid(panels, 3));

    // Feedback-weight overlay over every rlihf run.
    svg::Panel overlay{"Feedback weight", "environment steps", "unified return", {}};
    for (const auto& c : table.conditions) {
        if (c.rfind("rlihf", 0) != 0) continue;
        overlay.series.push_back(curve_series(c, learning_curve(runs, c)));
    }
    if (!overlay.series.empty()) write_text(dir / "whf_overlay.svg", svg::line_plot(overlay));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts) {
    if (auto issues = validate_config(cfg); !issues.empty()) throw ConfigValidationError(std::move(issues));
    const int workers = resolve_workers(cfg);
    std::mutex log_mutex;
    auto log = [&](const std::string& msg) {
        if (!opts.log) return;
        std::lock_guard lock(log_mutex);
        opts.log(msg);
    };

    const auto t0 = std::chrono::steady_clock::now();
    const std::time_t started = std::time(nullptr);
    ExperimentResult result;
    if (opts.resume && opts.versioned) throw ConfigError("resume needs an unversioned output directory");
    result.directory = opts.versioned ? next_version_dir(cfg.output_dir) : fs::path(cfg.output_dir);
    if (opts.resume && fs::exists(result.directory / "config.json")) {
        const auto previous = parse_config(read_text(result.directory / "config.json"));
        if (config_hash(previous) != config_hash(cfg)) {
            throw ConfigError(result.directory.string() + " holds results of config " + config_hash(previous) +
                              ", not " + config_hash(cfg));
        }
    }
    fs::create_directories(result.directory / "runs");
    write_text(result.directory / "config.json", config_to_json(cfg));
    log("writing to " + result.directory.string());

    const auto cells = expand_grid(cfg);
    std::vector<std::optional<RunSummary>> done(cells.size());
    std::vector<bool> reused(cells.size(), false);
    std::vector<double> seconds(cells.size(), 0.0);
    std::map<std::string, double> earlier_seconds;  // training time recorded by a previous invocation
    if (opts.resume && fs::exists(result.directory / "manifest.json")) {
        const json old = json::parse(read_text(result.directory / "manifest.json"), nullptr, false);
        if (old.is_object() && old.contains("cells")) {
            for (const auto& c : old["cells"]) {
                if (c.contains("name") && c.contains("wall_clock_s")) {
                    earlier_seconds[c["name"].get<std::string>()] = c["wall_clock_s"].get<double>();
                }
            }
        }
    }
    bool rlihf_pending = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const fs::path stored = result.directory / "runs" / (cells[i].name + ".json");
        if (opts.resume && fs::exists(stored)) {
            done[i] = run_from_json(read_text(stored));
            reused[i] = true;
            if (auto it = earlier_seconds.find(cells[i].name); it != earlier_seconds.end()) seconds[i] = it->second;
            log("kept " + cells[i].name);
        } else if (cells[i].spec.condition == ConditionKind::Rlihf) {
            rlihf_pending = true;
        }
    }

    // Frozen decoders, one per rlihf subject.
    std::map<int, std::shared_ptr<const LinearErrorDecoder>> decoders;
    std::map<int, std::string> decoder_digest;
    if (rlihf_pending) {
        fs::create_directories(result.directory / "decoders");
        const auto cohort = make_cohort(cfg);
        for (int s : cfg.subjects) {
            auto model = std::make_shared<const DecoderModel>(train_loso_decoder(cohort, s, cfg.decoder));
            const auto held = std::find_if(cohort.begin(), cohort.end(),
                                           [&](const SubjectSplits& x) { return x.calibration.subject_id == s; });
            char acc[96];
            std::snprintf(acc, sizeof acc, "decoder for subject %d: online accuracy %.3f", s,
                          accuracy(*model, held->online));
            log(acc);
            std::ofstream f(result.directory / "decoders" / ("subject_" + std::to_string(s) + ".bin"),
                            std::ios::binary);
            save_decoder(f, *model);
            decoder_digest[s] = decoder_bytes(*model);
            decoders[s] = std::make_shared<const LinearErrorDecoder>(model, cfg.preprocess, cfg.signal.raw_rate);
        }
    }

    const Environment env(cfg.layout, cfg.env);
    std::vector<std::string> errors(cells.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            if (done[i]) continue;
            const auto& cell = cells[i];
            const auto c0 = std::chrono::steady_clock::now();
            try {
                std::optional<FeedbackSetup> fb;
                if (cell.spec.condition == ConditionKind::Rlihf) {
                    fb = FeedbackSetup{cfg.profile(cell.spec.subject_id), decoders.at(cell.spec.subject_id),
                                       cfg.feedback, cfg.signal};
                }
                RunSummary run = train_run(env, cell.spec, cfg.rewards, cfg.agent, cfg.train, fb ? &*fb : nullptr);
                const fs::path base = result.directory / "runs" / cell.name;
                write_text(base.string() + ".json", run_to_json(run));
                std::ostringstream ev, ep;
                write_eval_csv(ev, run);
                write_episode_csv(ep, run);
                write_text(base.string() + "_evals.csv", ev.str());
                write_text(base.string() + "_episodes.csv", ep.str());
                done[i] = std::move(run);
                log("finished " + cell.name);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                log("FAILED " + cell.name + ": " + e.what());
            }
            seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
        }
    };
    {
        std::vector<std::jthread> pool;
        const int n = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
        for (int w = 0; w < n; ++w) pool.emplace_back(worker);
    }

    json manifest_cells = json::array();
    result.cell_seconds = seconds;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        json c = {{"name", cells[i].name}, {"seed", cells[i].spec.seed}, {"wall_clock_s", seconds[i]}};
        if (done[i]) {
            c["status"] = reused[i] ? "reused" : "ok";
            result.runs.push_back(*done[i]);
        } else {
            c["status"] = "failed";
            c["error"] = errors[i];
            result.failures.emplace_back(cells[i].name, errors[i]);
        }
        manifest_cells.push_back(c);
    }
    bool frozen = true;
    for (const auto& [s, d] : decoders) frozen = frozen && decoder_bytes(d->model()) == decoder_digest[s];

    if (!result.runs.empty()) write_reports(result.directory, result.runs);

    char when[32];
    std::strftime(when, sizeof when, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started));
    json manifest = {{"config_hash", config_hash(cfg)},
                     {"version", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"started_utc", when},
                     {"wall_clock_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                     {"workers", workers},
                     {"decoders_unchanged", frozen},
                     {"failures", result.failures.size()},
                     {"cells", manifest_cells}};
    write_text(result.directory / "manifest.json", manifest.dump(2) + "\n");
    return result;
}

ComparisonResult compare_conditions(const std::vector<fs::path>& dirs, const fs::path& out_dir) {
    if (dirs.empty()) throw ConfigError("compare needs at least one result directory");
    std::vector<std::map<std::string, std::string>> flat;
    ComparisonResult out;
    for (const auto& d : dirs) {
        if (!fs::exists(d / "manifest.json")) throw ConfigError("no manifest.json in " + d.string());
        const json cfg = json::parse(read_text(d / "config.json"));
        std::map<std::string, std::string> f;
        for (const char* block : {"env", "layout", "rewards", "train"}) {
            if (cfg.contains(block)) flatten(cfg.at(block), block, f);
        }
        flat.push_back(std::move(f));
        auto runs = load_runs(d);
        out.runs.insert(out.runs.end(), runs.begin(), runs.end());
    }
    std::vector<std::string> diffs;
    for (std::size_t i = 1; i < flat.size(); ++i) {
        std::set<std::string> keys;
        for (const auto& [k, v] : flat[0]) keys.insert(k);
        for (const auto& [k, v] : flat[i]) keys.insert(k);
        for (const auto& k : keys) {
            const auto a = flat[0].count(k) ? flat[0].at(k) : "<missing>";
            const auto b = flat[i].count(k) ? flat[i].at(k) : "<missing>";
            if (a != b) diffs.push_back(k + ": " + dirs[0].string() + "=" + a + " vs " + dirs[i].string() + "=" + b);
        }
    }
    if (!diffs.empty()) {
        std::string msg = "result directories are not comparable:";
        for (const auto& d : diffs) msg += "\n  " + d;
        throw ConfigError(msg);
    }
    out.runs = canonical_order(std::move(out.runs));
    fs::create_directories(out_dir);
    write_reports(out_dir, out.runs);
    out.table = aggregate_phases(out.runs);
    return out;
}

}  // namespace rlihf
