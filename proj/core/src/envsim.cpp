#include "rlihf/envsim.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "rlihf/errors.hpp"
#include "rlihf/rng.hpp"

namespace rlihf {
namespace {

Polyline leg(const Layout& layout, const Vec2& a, const Vec2& b, double spacing) {
    const auto inflated = layout.inflated_obstacles();
    auto path = shortest_path_around_discs(a, b, inflated, layout.workspace);
    if (!path) throw ConfigError("no feasible ideal path between layout waypoints");
    return densify(*path, spacing);
}

}  // namespace

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::Reach: return "reach";
        case Phase::Transport: return "transport";
        case Phase::Done: return "done";
    }
    return "?";
}

Layout Layout::standard() {
    Layout l;
    l.obstacles = {
        {{0.40, 0.45}, 0.07},  // lemon
        {{0.55, 0.66}, 0.08},  // cereal box
        {{0.62, 0.27}, 0.07},  // green bottle
        {{0.33, 0.20}, 0.06},  // bread
    };
    return l;
}

double Layout::min_obstacle_gap() const {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        for (std::size_t j = i + 1; j < obstacles.size(); ++j) {
            gap = std::min(gap, (obstacles[i].center - obstacles[j].center).norm() - obstacles[i].radius -
                                    obstacles[j].radius);
        }
    }
    return gap;
}

std::vector<Disc> Layout::inflated_obstacles() const {
    std::vector<Disc> out = obstacles;
    for (auto& d : out) d.radius += d_safe;
    return out;
}

void Layout::validate() const {
    if (!(workspace.hi.array() > workspace.lo.array()).all()) throw ConfigError("workspace box is empty");
    for (const auto& [name, p] : {std::pair{"start", start}, std::pair{"target", target}, std::pair{"goal", goal}}) {
        if (!workspace.contains(p, 0.0)) throw ConfigError(std::string(name) + " lies outside the workspace");
        for (const auto& d : obstacles) {
            if (!(d.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
            if ((p - d.center).norm() <= d.radius) {
                throw ConfigError(std::string(name) + " overlaps an obstacle disc");
            }
        }
    }
    if (!(d_safe > 0.0)) throw ConfigError("d_safe must be positive");
    if (obstacles.size() > 1 && !(d_safe < min_obstacle_gap())) {
        throw ConfigError("d_safe must be smaller than the minimum obstacle gap");
    }
}

void EnvConfig::validate() const {
    if (!(v_max > 0.0)) throw ConfigError("v_max must be positive");
    if (!(eps_grasp > 0.0) || !(eps_place > 0.0)) throw ConfigError("grasp/place radii must be positive");
    if (episode_length < 1) throw ConfigError("episode_length must be >= 1");
    if (!(start_jitter >= 0.0)) throw ConfigError("start_jitter must be >= 0");
}

double env_reward(const EnvEvents& events, RewardMode mode, const RewardConfig& cfg) {
    double r = 0.0;
    if (events.success_event) r += cfg.r_success;
    if (events.collision) r -= cfg.r_coll;
    if (mode == RewardMode::Dense) r += cfg.c_prog * events.progress_delta - cfg.c_dev * events.deviation;
    return r;
}

Polyline ideal_path(const Layout& layout, double spacing) {
    layout.validate();
    Polyline out = leg(layout, layout.start, layout.target, spacing);
    const Polyline second = leg(layout, layout.target, layout.goal, spacing);
    out.insert(out.end(), second.begin() + 1, second.end());
    return out;
}

Environment::Environment(Layout layout, EnvConfig cfg) : layout_(std::move(layout)), cfg_(cfg) {
    layout_.validate();
    cfg_.validate();
    reach_leg_ = leg(layout_, layout_.start, layout_.target, 0.005);
    transport_leg_ = leg(layout_, layout_.target, layout_.goal, 0.005);
    reach_length_ = polyline_length(reach_leg_);
    transport_length_ = polyline_length(transport_leg_);
    ideal_ = reach_leg_;
    ideal_.insert(ideal_.end(), transport_leg_.begin() + 1, transport_leg_.end());
}

EnvState Environment::reset(std::uint64_t seed) const {
    EnvState s;
    s.gripper = layout_.start;
    if (cfg_.start_jitter > 0.0) {
        Rng rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const Vec2 offset(u(rng), u(rng));
            if (offset.squaredNorm() > 1.0) continue;
            const Vec2 p = layout_.start + cfg_.start_jitter * offset;
            if (layout_.workspace.contains(p, 0.0) && clearance(p) > 0.0) {
                s.gripper = p;
                break;
            }
        }
    }
    s.trajectory.reserve(static_cast<std::size_t>(cfg_.episode_length) + 1);
    s.trajectory.push_back(s.gripper);
    return s;
}

double Environment::clearance(const Vec2& p) const {
    double c = std::numeric_limits<double>::infinity();
    for (const auto& d : layout_.obstacles) c = std::min(c, (p - d.center).norm() - d.radius);
    return std::max(0.0, c);
}

namespace {

// Arc length of the foot point, continued linearly behind the start so that
// backing away reads as negative progress, and capped by the straight-line
// distance left to the leg end so that overshooting the end point regresses.
double leg_coordinate(const Polyline& leg, double length, const Vec2& p) {
    double arc = project_onto(leg, p).arc_length;
    if (leg.size() < 2) return arc;
    if (arc <= 0.0) {
        const Vec2 dir = (leg[1] - leg[0]).normalized();
        arc = std::min(0.0, (p - leg[0]).dot(dir));
    }
    return std::min(arc, length - (p - leg.back()).norm());
}

}  // namespace

double Environment::progress_coordinate(const Vec2& p, Phase phase) const {
    if (phase == Phase::Reach) return leg_coordinate(reach_leg_, reach_length_, p);
    return reach_length_ + leg_coordinate(transport_leg_, transport_length_, p);
}

double Environment::leg_distance(const Vec2& p, Phase phase) const {
    return distance_to_polyline(phase == Phase::Reach ? reach_leg_ : transport_leg_, p);
}

EnvState Environment::step(EnvState state, const Vec2& action, EnvEvents& events) const {
    if (state.phase == Phase::Done) throw ContractError("step() called after the episode finished");
    if (state.step_index >= cfg_.episode_length) throw ContractError("step() called past the episode length");
    if (!action.allFinite()) throw ContractError("non-finite action");

    events = EnvEvents{};
    const Phase old_phase = state.phase;
    const Vec2 old_pos = state.gripper;

    state.velocity = action.cwiseMax(-1.0).cwiseMin(1.0) * cfg_.v_max;
    Vec2 p = layout_.workspace.clamp(old_pos + state.velocity);

    // Resolve penetration by radial projection; a few passes settle contacts
    // involving two discs or a wall.
    for (int pass = 0; pass < 4; ++pass) {
        bool penetrated = false;
        for (const auto& d : layout_.obstacles) {
            const Vec2 rel = p - d.center;
            const double dist = rel.norm();
            if (dist < d.radius) {
                Vec2 dir = dist > 0.0 ? Vec2(rel / dist) : Vec2(-state.velocity.normalized());
                if (!dir.allFinite()) dir = Vec2::UnitX();
                p = d.center + d.radius * dir;
                events.collision = true;
                penetrated = true;
            }
        }
        p = layout_.workspace.clamp(p);
        if (!penetrated) break;
    }

    state.gripper = p;
    state.step_index += 1;
    state.trajectory.push_back(p);

    if (state.phase == Phase::Reach && (p - layout_.target).norm() <= cfg_.eps_grasp) {
        state.phase = Phase::Transport;
        state.grasped = true;
        events.grasp_event = true;
    } else if (state.phase == Phase::Transport && (p - layout_.goal).norm() <= cfg_.eps_place) {
        state.phase = Phase::Done;
        events.success_event = true;
    }

    const Phase leg_phase = state.phase == Phase::Done ? Phase::Transport : state.phase;
    events.clearance = clearance(p);
    events.progress_delta = progress_coordinate(p, leg_phase) - progress_coordinate(old_pos, old_phase);
    events.deviation = leg_distance(p, leg_phase);
    return state;
}

Observation Environment::observe(const EnvState& s) const {
    Observation o{};
    o[0] = s.gripper.x();
    o[1] = s.gripper.y();
    o[2] = s.velocity.x();
    o[3] = s.velocity.y();
    o[4] = layout_.target.x() - s.gripper.x();
    o[5] = layout_.target.y() - s.gripper.y();
    o[6] = layout_.goal.x() - s.gripper.x();
    o[7] = layout_.goal.y() - s.gripper.y();
    o[8] = s.grasped ? 1.0 : 0.0;

    // Nearest obstacle boundary; strict '<' keeps the lower index on ties.
    double best = std::numeric_limits<double>::infinity();
    Vec2 to_boundary = Vec2::Zero();
    for (const auto& d : layout_.obstacles) {
        const Vec2 rel = d.center - s.gripper;
        const double dist = rel.norm();
        const double gap = dist - d.radius;
        if (gap < best) {
            best = gap;
            to_boundary = dist > 0.0 ? Vec2(rel / dist * std::max(0.0, gap)) : Vec2::Zero();
        }
    }
    o[9] = to_boundary.x();
    o[10] = to_boundary.y();
    o[11] = std::isfinite(best) ? std::max(0.0, best) : 0.0;
    o[12] = s.phase == Phase::Reach ? 1.0 : 0.0;
    o[13] = s.phase == Phase::Transport ? 1.0 : 0.0;
    return o;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
    out << "step,x,y,phase,clearance,events\n";
    for (const auto& r : rows) {
        std::string ev;
        auto add = [&](bool on, const char* name) {
            if (!on) return;
            if (!ev.empty()) ev += '|';
            ev += name;
        };
        add(r.events.collision, "collision");
        add(r.events.grasp_event, "grasp");
        add(r.events.success_event, "success");
        out << r.step << ',' << r.position.x() << ',' << r.position.y() << ',' << to_string(r.phase) << ','
            << r.events.clearance << ',' << ev << '\n';
    }
}

}  // namespace rlihf
