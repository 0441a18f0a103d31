#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rlihf/geometry.hpp"

namespace rlihf {

struct Layout {
    Box workspace;
    Vec2 start{0.12, 0.80};
    Vec2 target{0.15, 0.40};
    Vec2 goal{0.85, 0.45};
    std::vector<Disc> obstacles;
    double d_safe = 0.05;

    // Fig.-3-like arrangement: target left, goal right, four obstacles between.
    static Layout standard();
    // Smallest boundary-to-boundary gap between two obstacles.
    double min_obstacle_gap() const;
    std::vector<Disc> inflated_obstacles() const;
    void validate() const;
};

struct EnvConfig {
    double v_max = 0.01;
    double eps_grasp = 0.03;
    double eps_place = 0.03;
    int episode_length = 1000;
    double start_jitter = 0.0;  // radius of uniform start perturbation

    void validate() const;
};

struct RewardConfig {
    double r_success = 10.0;
    double r_coll = 1.0;
    double c_prog = 1.0;
    double c_dev = 0.5;
};

enum class Phase : std::uint8_t { Reach = 0, Transport = 1, Done = 2 };
std::string to_string(Phase phase);

struct EnvState {
    Vec2 gripper = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();
    Phase phase = Phase::Reach;
    bool grasped = false;
    int step_index = 0;
    Polyline trajectory;
};

struct EnvEvents {
    bool collision = false;
    double clearance = 0.0;       // to the nearest obstacle boundary, >= 0
    bool grasp_event = false;
    bool success_event = false;
    double progress_delta = 0.0;  // along the ideal path
    double deviation = 0.0;       // distance to the active ideal-path leg
};

enum class RewardMode { Sparse, Dense };

double env_reward(const EnvEvents& events, RewardMode mode, const RewardConfig& cfg = {});

// Shortest start -> target -> goal path around obstacles inflated by d_safe,
// densified to `spacing`.
Polyline ideal_path(const Layout& layout, double spacing = 0.005);

inline constexpr int kObservationDim = 14;
using Observation = std::array<double, kObservationDim>;

class Environment {
public:
    explicit Environment(Layout layout, EnvConfig cfg = {});

    EnvState reset(std::uint64_t seed) const;
    // Advances one step; consumes `state` so the trajectory is not copied.
    EnvState step(EnvState state, const Vec2& action, EnvEvents& events) const;
    Observation observe(const EnvState& state) const;

    // Arc-length progress coordinate of `p` for the leg active in `phase`:
    // negative behind the start, never above length minus the distance left
    // to the leg end.
    double progress_coordinate(const Vec2& p, Phase phase) const;
    double leg_distance(const Vec2& p, Phase phase) const;
    double clearance(const Vec2& p) const;

    const Layout& layout() const { return layout_; }
    const EnvConfig& config() const { return cfg_; }
    const Polyline& ideal() const { return ideal_; }
    double ideal_length() const { return reach_length_ + transport_length_; }

private:
    Layout layout_;
    EnvConfig cfg_;
    Polyline reach_leg_;
    Polyline transport_leg_;
    Polyline ideal_;
    double reach_length_ = 0.0;
    double transport_length_ = 0.0;
};

// Trajectory export: step,x,y,phase,clearance,events
struct TrajectoryRow {
    int step = 0;
    Vec2 position = Vec2::Zero();
    Phase phase = Phase::Reach;
    EnvEvents events;
};
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

}  // namespace rlihf
