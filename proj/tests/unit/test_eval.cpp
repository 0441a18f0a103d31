#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "rlihf/errors.hpp"
#include "rlihf/eval.hpp"
#include "rlihf/rng.hpp"

using namespace rlihf;

namespace {

Polyline semicircle(double r, int n) {
    Polyline p;
    for (int i = 0; i <= n; ++i) {
        const double t = std::numbers::pi * (1.0 - static_cast<double>(i) / n);
        p.emplace_back(r * std::cos(t), r * std::sin(t));
    }
    return p;
}

Polyline transform(const Polyline& line, double scale, double angle, const Vec2& shift) {
    const Eigen::Rotation2Dd rot(angle);
    Polyline out;
    for (const auto& v : line) out.push_back(rot * (scale * v) + shift);
    return out;
}

EvalRollout rollout(bool success, double ret, double eff, double dev) {
    EvalRollout r;
    r.success = success;
    r.unified_return = ret;
    r.path_efficiency = eff;
    r.path_deviation = dev;
    return r;
}

RunSummary run_with(const std::string& condition, std::vector<std::int64_t> steps, double ret) {
    RunSummary run;
    run.condition = condition;
    for (auto s : steps) {
        EvalPoint p;
        p.global_step = s;
        p.rollouts = {rollout(s >= 100000, ret, 0.8, 0.1)};
        p.mean_return = ret;
        run.evals.push_back(p);
    }
    return run;
}

}  // namespace

TEST_CASE("success rate") {
    const bool two_of_five[] = {true, false, true, false, false};
    CHECK(success_rate(std::span<const bool>(two_of_five)) == doctest::Approx(0.4));
    std::vector<EpisodeRecord> fails(3);
    CHECK(success_rate(std::span<const EpisodeRecord>(fails)) == 0.0);
    CHECK_THROWS_AS(success_rate(std::span<const bool>()), ContractError);
}

TEST_CASE("path efficiency") {
    const Polyline ideal{{0, 0}, {1, 0}};
    CHECK(path_efficiency(ideal, ideal) == 1.0);
    CHECK(path_efficiency(Polyline{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}, {1, 0}}, Polyline{{0, 0}, {2.5, 0}}) ==
          doctest::Approx(0.5));
    const Polyline chord{{-1, 0}, {1, 0}};
    CHECK(std::abs(path_efficiency(semicircle(1.0, 2000), chord) - 2.0 / std::numbers::pi) < 1e-3);
    CHECK_THROWS_AS(path_efficiency(Polyline{{0.3, 0.3}, {0.3, 0.3}}, ideal), ContractError);

    const auto arc = semicircle(1.0, 50);
    for (double s : {0.01, 3.0, 250.0}) {
        CHECK(std::abs(path_efficiency(transform(arc, s, 0, Vec2::Zero()), transform(chord, s, 0, Vec2::Zero())) -
                       path_efficiency(arc, chord)) < 1e-12);
    }
}

TEST_CASE("path deviation") {
    const Polyline ideal{{0, 0}, {0.5, 0}, {1, 0}};
    CHECK(path_deviation(ideal, ideal) == 0.0);
    Polyline offset;
    for (int i = 0; i <= 20; ++i) offset.emplace_back(i / 20.0, 0.07);
    CHECK(std::abs(path_deviation(offset, ideal) - 0.07) < 1e-9);

    const double amp = 0.3;
    Polyline sine;
    for (int i = 0; i < 1000; ++i) {
        const double x = i / 1000.0;
        sine.emplace_back(x, amp * std::sin(2 * std::numbers::pi * x));
    }
    CHECK(std::abs(path_deviation(sine, ideal) - amp / std::numbers::sqrt2) < 0.01 * amp / std::numbers::sqrt2);

    Rng rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    Polyline wiggle, path;
    for (int i = 0; i < 30; ++i) wiggle.emplace_back(u(rng), u(rng));
    for (int i = 0; i < 10; ++i) path.emplace_back(u(rng), u(rng));
    const double base = path_deviation(wiggle, path);
    for (int k = 0; k < 5; ++k) {
        const double angle = u(rng) * 3.0;
        const Vec2 shift(u(rng) * 10, u(rng) * 10);
        CHECK(std::abs(path_deviation(transform(wiggle, 1, angle, shift), transform(path, 1, angle, shift)) - base) <
              1e-9);
    }
}

TEST_CASE("phase boundaries") {
    CHECK(phase_of(0) == TrainingPhase::Early);
    CHECK(phase_of(49999) == TrainingPhase::Early);
    CHECK(phase_of(50000) == TrainingPhase::Mid);
    CHECK(phase_of(99999) == TrainingPhase::Mid);
    CHECK(phase_of(100000) == TrainingPhase::Late);
    CHECK(phase_of(150000) == TrainingPhase::Late);
    CHECK(to_string(TrainingPhase::Late) == "Late");
}

TEST_CASE("population statistics") {
    const std::vector<double> one{3.5};
    const auto s = population_stat(one);
    CHECK(s.mean == 3.5);
    CHECK(s.std == 0.0);
    CHECK(s.n == 1);
    const std::vector<double> two{1.0, 3.0};
    CHECK(population_stat(two).std == 1.0);
}

TEST_CASE("phase aggregation") {
    std::vector<RunSummary> runs{run_with("sparse", {5000, 49999, 50000, 100000, 150000}, -5.0),
                                 run_with("dense", {5000, 50000, 100000}, 7.0)};
    runs[1].evals[1].rollouts.front().path_efficiency.reset();
    const auto t = aggregate_phases(runs);
    CHECK(t.conditions == std::vector<std::string>{"sparse", "dense"});

    // Cells partition the evaluation points.
    std::size_t sparse_points = 0;
    for (auto p : {TrainingPhase::Early, TrainingPhase::Mid, TrainingPhase::Late}) sparse_points += t.points.at({p, "sparse"});
    CHECK(sparse_points == 5);
    CHECK(t.points.at({TrainingPhase::Early, "sparse"}) == 2);

    const auto late = t.get(TrainingPhase::Late, "sparse", "success_rate");
    REQUIRE(late);
    CHECK(late->mean == 1.0);
    CHECK(late->std == 0.0);
    CHECK(late->n == 2);
    CHECK(t.get(TrainingPhase::Early, "sparse", "success_rate")->mean == 0.0);
    // A cell with no data is absent, not zero.
    CHECK_FALSE(t.get(TrainingPhase::Mid, "dense", "path_efficiency"));
    CHECK(t.get(TrainingPhase::Mid, "dense", "path_deviation"));

    std::ostringstream csv;
    write_phase_csv(csv, t);
    CHECK(csv.str().rfind("phase,condition,metric,mean,std,n\n", 0) == 0);
    CHECK(csv.str().find("Mid,dense,path_efficiency,,,0") != std::string::npos);
    std::ostringstream again;
    write_phase_csv(again, aggregate_phases(runs));
    CHECK(csv.str() == again.str());
    CHECK(format_phase_table(t).find("Late") != std::string::npos);

    const auto r = phase_return(runs, "dense", TrainingPhase::Late);
    REQUIRE(r);
    CHECK(r->mean == 7.0);
    CHECK_FALSE(phase_return(runs, "rlihf w_hf=0.1", TrainingPhase::Late));
}

TEST_CASE("learning curve") {
    std::vector<RunSummary> runs{run_with("dense", {5000, 10000}, 1.0), run_with("dense", {5000, 10000}, 3.0)};
    const auto curve = learning_curve(runs, "dense");
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].step == 5000);
    CHECK(curve[0].value.mean == 2.0);
    CHECK(curve[0].value.std == 1.0);
    std::ostringstream out;
    write_curve_csv(out, curve);
    CHECK(out.str() == "step,mean_return,std_return\n5000,2,1\n10000,2,1\n");
}

TEST_CASE("condition keys and number format") {
    RunSummary r;
    r.condition = "rlihf";
    r.w_hf = 0.1;
    CHECK(r.condition_key() == "rlihf w_hf=0.1");
    r.condition = "dense";
    CHECK(r.condition_key() == "dense");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(0.25) == "0.25");
}
