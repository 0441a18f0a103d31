#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace rlihf {

using Vec2 = Eigen::Vector2d;
using Polyline = std::vector<Vec2>;

struct Disc {
    Vec2 center = Vec2::Zero();
    double radius = 0.0;
};

struct Box {
    Vec2 lo = Vec2::Zero();
    Vec2 hi = Vec2::Ones();

    bool contains(const Vec2& p, double tol = 1e-12) const {
        return p.x() >= lo.x() - tol && p.y() >= lo.y() - tol && p.x() <= hi.x() + tol && p.y() <= hi.y() + tol;
    }
    Vec2 clamp(const Vec2& p) const { return p.cwiseMax(lo).cwiseMin(hi); }
};

double polyline_length(const Polyline& line);
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

struct PolylineProjection {
    double distance = 0.0;
    double arc_length = 0.0;  // along the polyline to the foot point
    Vec2 foot = Vec2::Zero();
};

// Closest point on the polyline; ties resolve to the smallest arc length.
PolylineProjection project_onto(const Polyline& line, const Vec2& p);
double distance_to_polyline(const Polyline& line, const Vec2& p);

// Inserts evenly spaced points so that no segment exceeds `max_spacing`.
Polyline densify(const Polyline& line, double max_spacing);

Polyline transformed(const Polyline& line, double scale, double angle, const Vec2& shift);

// Shortest path from `from` to `to` that stays inside `box` and out of every
// open disc, built on the tangent visibility graph (straight tangent segments
// plus boundary arcs). Arcs are emitted with chord spacing <= `arc_step`.
std::optional<Polyline> shortest_path_around_discs(const Vec2& from, const Vec2& to, std::span<const Disc> discs,
                                                   const Box& box = {}, double arc_step = 0.002);

}  // namespace rlihf
