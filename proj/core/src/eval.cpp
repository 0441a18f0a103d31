#include "rlihf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>

#include "rlihf/errors.hpp"

namespace rlihf {

double success_rate(std::span<const EpisodeRecord> records) {
    if (records.empty()) throw ContractError("success_rate needs at least one record");
    std::size_t hits = 0;
    for (const auto& r : records) hits += r.success ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

double success_rate(std::span<const bool> outcomes) {
    if (outcomes.empty()) throw ContractError("success_rate needs at least one outcome");
    return static_cast<double>(std::count(outcomes.begin(), outcomes.end(), true)) /
           static_cast<double>(outcomes.size());
}

double path_efficiency(const Polyline& actual, const Polyline& ideal) {
    const double a = polyline_length(actual);
    if (!(a > 0.0)) throw ContractError("path_efficiency: actual trajectory has zero length");
    const double i = polyline_length(ideal);
    if (!(i > 0.0)) throw ContractError("path_efficiency: ideal path has zero length");
    return i / a;
}

double path_deviation(const Polyline& actual, const Polyline& ideal) {
    if (actual.empty() || ideal.empty()) throw ContractError("path_deviation needs non-empty polylines");
    double acc = 0.0;
    for (const auto& p : actual) {
        const double d = distance_to_polyline(ideal, p);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(actual.size()));
}

std::string RunSummary::condition_key() const {
    if (condition != "rlihf") return condition;
    return "rlihf w_hf=" + format_number(w_hf);
}

std::string to_string(TrainingPhase p) {
    switch (p) {
        case TrainingPhase::Early: return "Early";
        case TrainingPhase::Mid: return "Mid";
        case TrainingPhase::Late: return "Late";
    }
    return "?";
}

TrainingPhase phase_of(std::int64_t global_step, const PhaseBounds& bounds) {
    if (global_step < bounds.mid_start) return TrainingPhase::Early;
    if (global_step < bounds.late_start) return TrainingPhase::Mid;
    return TrainingPhase::Late;
}

Stat population_stat(std::span<const double> values) {
    Stat s;
    s.n = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n));
    return s;
}

std::optional<Stat> PhaseTable::get(TrainingPhase p, const std::string& condition, const std::string& metric) const {
    const auto it = cells.find({p, condition, metric});
    if (it == cells.end()) return std::nullopt;
    return it->second;
}

PhaseTable aggregate_phases(std::span<const RunSummary> runs, const PhaseBounds& bounds) {
    PhaseTable table;
    std::map<std::tuple<TrainingPhase, std::string, std::string>, std::vector<double>> values;
    for (const auto& run : runs) {
        const std::string key = run.condition_key();
        if (std::find(table.conditions.begin(), table.conditions.end(), key) == table.conditions.end()) {
            table.conditions.push_back(key);
        }
        for (const auto& point : run.evals) {
            const TrainingPhase p = phase_of(point.global_step, bounds);
            table.points[{p, key}] += 1;
            for (const auto& r : point.rollouts) {
                values[{p, key, "success_rate"}].push_back(r.success ? 1.0 : 0.0);
                if (r.path_efficiency) values[{p, key, "path_efficiency"}].push_back(*r.path_efficiency);
                values[{p, key, "path_deviation"}].push_back(r.path_deviation);
            }
        }
    }
    for (const auto& [k, v] : values) {
        if (!v.empty()) table.cells[k] = population_stat(v);
    }
    return table;
}

std::optional<Stat> phase_return(std::span<const RunSummary> runs, const std::string& condition_key,
                                 TrainingPhase phase, const PhaseBounds& bounds) {
    std::vector<double> v;
    for (const auto& run : runs) {
        if (run.condition_key() != condition_key) continue;
        for (const auto& point : run.evals) {
            if (phase_of(point.global_step, bounds) != phase) continue;
            for (const auto& r : point.rollouts) v.push_back(r.unified_return);
        }
    }
    if (v.empty()) return std::nullopt;
    return population_stat(v);
}

std::vector<CurvePoint> learning_curve(std::span<const RunSummary> runs, const std::string& condition_key) {
    std::map<std::int64_t, std::vector<double>> by_step;
    for (const auto& run : runs) {
        if (run.condition_key() != condition_key) continue;
        for (const auto& point : run.evals) by_step[point.global_step].push_back(point.mean_return);
    }
    std::vector<CurvePoint> out;
    for (const auto& [step, v] : by_step) out.push_back({step, population_stat(v)});
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    std::string s(buf);
    if (s == "-0") s = "0";
    return s;
}

void write_phase_csv(std::ostream& out, const PhaseTable& table) {
    out << "phase,condition,metric,mean,std,n\n";
    for (TrainingPhase p : {TrainingPhase::Early, TrainingPhase::Mid, TrainingPhase::Late}) {
        for (const auto& c : table.conditions) {
            for (const auto& m : phase_metrics()) {
                out << to_string(p) << ',' << c << ',' << m << ',';
                if (const auto s = table.get(p, c, m)) {
                    out << format_number(s->mean) << ',' << format_number(s->std) << ',' << s->n << '\n';
                } else {
                    out << ",,0\n";  // absent cell
                }
            }
        }
    }
}

std::string format_phase_table(const PhaseTable& table) {
    std::ostringstream out;
    auto cell = [&](TrainingPhase p, const std::string& c, const std::string& m) {
        const auto s = table.get(p, c, m);
        if (!s) return std::string("      --     ");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f +- %.2f", s->mean, s->std);
        return std::string(buf);
    };
    std::size_t width = 10;
    for (const auto& c : table.conditions) width = std::max(width, c.size());
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %-*s %-14s %-14s %-14s\n", "Phase", static_cast<int>(width), "Method",
                  "Success", "Path Eff.", "Path Dev.");
    out << line;
    for (TrainingPhase p : {TrainingPhase::Early, TrainingPhase::Mid, TrainingPhase::Late}) {
        for (const auto& c : table.conditions) {
            std::snprintf(line, sizeof line, "%-6s %-*s %-14s %-14s %-14s\n", to_string(p).c_str(),
                          static_cast<int>(width), c.c_str(), cell(p, c, "success_rate").c_str(),
                          cell(p, c, "path_efficiency").c_str(), cell(p, c, "path_deviation").c_str());
            out << line;
        }
    }
    return out.str();
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
    out << "step,mean_return,std_return\n";
    for (const auto& p : curve) {
        out << p.step << ',' << format_number(p.value.mean) << ',' << format_number(p.value.std) << '\n';
    }
}

}  // namespace rlihf
