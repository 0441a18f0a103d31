#include "rlihf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include <Eigen/Geometry>

namespace rlihf {
namespace {

constexpr double kTol = 1e-9;

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

double wrap_positive(double a) {
    a = std::fmod(a, 2.0 * std::numbers::pi);
    return a < 0.0 ? a + 2.0 * std::numbers::pi : a;
}

struct Node {
    Vec2 p;
    int disc = -1;  // -1 for free endpoints
    double angle = 0.0;
};

struct Edge {
    int to;
    double cost;
    int arc_disc;    // -1 for straight segments
    double sweep;    // signed arc sweep from the source node angle
};

bool point_free(const Vec2& p, std::span<const Disc> discs, const Box& box, int skip = -1) {
    if (!box.contains(p, kTol)) return false;
    for (int i = 0; i < static_cast<int>(discs.size()); ++i) {
        if (i == skip) continue;
        if ((p - discs[static_cast<std::size_t>(i)].center).norm() < discs[static_cast<std::size_t>(i)].radius - kTol) {
            return false;
        }
    }
    return true;
}

bool segment_free(const Vec2& a, const Vec2& b, std::span<const Disc> discs) {
    for (const auto& d : discs) {
        if (point_segment_distance(d.center, a, b) < d.radius - kTol) return false;
    }
    return true;
}

bool arc_free(const Disc& own, int own_idx, double a0, double sweep, std::span<const Disc> discs, const Box& box) {
    const int n = std::max(8, static_cast<int>(std::ceil(std::abs(sweep) * own.radius / 1e-3)));
    for (int k = 1; k < n; ++k) {
        const Vec2 p = own.center + own.radius * unit(a0 + sweep * k / n);
        if (!point_free(p, discs, box, own_idx)) return false;
    }
    return true;
}

}  // namespace

double polyline_length(const Polyline& line) {
    double total = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) total += (line[i] - line[i - 1]).norm();
    return total;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 <= 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

PolylineProjection project_onto(const Polyline& line, const Vec2& p) {
    PolylineProjection best;
    best.distance = std::numeric_limits<double>::infinity();
    if (line.empty()) return best;
    if (line.size() == 1) return {(p - line[0]).norm(), 0.0, line[0]};
    double walked = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        const Vec2& a = line[i - 1];
        const Vec2 ab = line[i] - a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const Vec2 foot = a + t * ab;
        const double dist = (p - foot).norm();
        if (dist < best.distance) best = {dist, walked + t * std::sqrt(len2), foot};
        walked += std::sqrt(len2);
    }
    return best;
}

double distance_to_polyline(const Polyline& line, const Vec2& p) { return project_onto(line, p).distance; }

Polyline densify(const Polyline& line, double max_spacing) {
    if (line.size() < 2) return line;
    Polyline out{line.front()};
    for (std::size_t i = 1; i < line.size(); ++i) {
        const Vec2 a = line[i - 1];
        const Vec2 b = line[i];
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / max_spacing - 1e-12)));
        for (int k = 1; k <= pieces; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / pieces));
    }
    return out;
}

Polyline transformed(const Polyline& line, double scale, double angle, const Vec2& shift) {
    const Eigen::Rotation2Dd rot(angle);
    Polyline out;
    out.reserve(line.size());
    for (const auto& p : line) out.push_back(rot * (scale * p) + shift);
    return out;
}

std::optional<Polyline> shortest_path_around_discs(const Vec2& from, const Vec2& to, std::span<const Disc> discs,
                                                   const Box& box, double arc_step) {
    if (!point_free(from, discs, box) || !point_free(to, discs, box)) return std::nullopt;

    std::vector<Node> nodes{{from}, {to}};
    auto add_tangent = [&](int disc, double angle) {
        const auto& d = discs[static_cast<std::size_t>(disc)];
        const Vec2 p = d.center + d.radius * unit(angle);
        if (!point_free(p, discs, box, disc)) return -1;
        nodes.push_back({p, disc, wrap_positive(angle)});
        return static_cast<int>(nodes.size()) - 1;
    };

    std::vector<std::vector<Edge>> adj;
    std::vector<std::pair<int, int>> segments;

    // Endpoint-to-disc tangents.
    for (int e = 0; e < 2; ++e) {
        for (int i = 0; i < static_cast<int>(discs.size()); ++i) {
            const auto& d = discs[static_cast<std::size_t>(i)];
            const Vec2 rel = nodes[static_cast<std::size_t>(e)].p - d.center;
            const double dist = rel.norm();
            if (dist <= d.radius + kTol) continue;
            const double phi = std::atan2(rel.y(), rel.x());
            const double alpha = std::acos(d.radius / dist);
            for (double s : {-1.0, 1.0}) {
                const int t = add_tangent(i, phi + s * alpha);
                if (t >= 0) segments.emplace_back(e, t);
            }
        }
    }
    // Disc-to-disc bitangents.
    for (int i = 0; i < static_cast<int>(discs.size()); ++i) {
        for (int j = i + 1; j < static_cast<int>(discs.size()); ++j) {
            const auto& a = discs[static_cast<std::size_t>(i)];
            const auto& b = discs[static_cast<std::size_t>(j)];
            const Vec2 rel = b.center - a.center;
            const double dist = rel.norm();
            const double theta = std::atan2(rel.y(), rel.x());
            if (dist > std::abs(a.radius - b.radius) + kTol) {
                const double alpha = std::acos((a.radius - b.radius) / dist);
                for (double s : {-1.0, 1.0}) {
                    const int ta = add_tangent(i, theta + s * alpha);
                    const int tb = add_tangent(j, theta + s * alpha);
                    if (ta >= 0 && tb >= 0) segments.emplace_back(ta, tb);
                }
            }
            if (dist > a.radius + b.radius + kTol) {
                const double alpha = std::acos((a.radius + b.radius) / dist);
                for (double s : {-1.0, 1.0}) {
                    const int ta = add_tangent(i, theta + s * alpha);
                    const int tb = add_tangent(j, theta + s * alpha + std::numbers::pi);
                    if (ta >= 0 && tb >= 0) segments.emplace_back(ta, tb);
                }
            }
        }
    }
    segments.emplace_back(0, 1);

    adj.resize(nodes.size());
    for (auto [u, v] : segments) {
        const Vec2& a = nodes[static_cast<std::size_t>(u)].p;
        const Vec2& b = nodes[static_cast<std::size_t>(v)].p;
        if (!segment_free(a, b, discs)) continue;
        const double len = (b - a).norm();
        adj[static_cast<std::size_t>(u)].push_back({v, len, -1, 0.0});
        adj[static_cast<std::size_t>(v)].push_back({u, len, -1, 0.0});
    }
    // Arcs between angularly consecutive tangent points on each disc.
    for (int i = 0; i < static_cast<int>(discs.size()); ++i) {
        std::vector<int> on;
        for (int k = 2; k < static_cast<int>(nodes.size()); ++k) {
            if (nodes[static_cast<std::size_t>(k)].disc == i) on.push_back(k);
        }
        std::sort(on.begin(), on.end(), [&](int x, int y) {
            return nodes[static_cast<std::size_t>(x)].angle < nodes[static_cast<std::size_t>(y)].angle;
        });
        const auto& d = discs[static_cast<std::size_t>(i)];
        auto add_arc = [&](int u, int v, double a0, double sweep) {
            if (!arc_free(d, i, a0, sweep, discs, box)) return;
            const double len = std::abs(sweep) * d.radius;
            adj[static_cast<std::size_t>(u)].push_back({v, len, i, sweep});
            adj[static_cast<std::size_t>(v)].push_back({u, len, i, -sweep});
        };
        const std::size_t m = on.size();
        if (m < 2) continue;
        // With two points both arcs join the same pair; otherwise consecutive
        // pairs already cover the circle.
        const std::size_t pairs = m == 2 ? 1 : m;
        for (std::size_t k = 0; k < pairs; ++k) {
            const int u = on[k];
            const int v = on[(k + 1) % m];
            const double a0 = nodes[static_cast<std::size_t>(u)].angle;
            const double sweep = wrap_positive(nodes[static_cast<std::size_t>(v)].angle - a0);
            add_arc(u, v, a0, sweep);
            if (m == 2) add_arc(u, v, a0, sweep - 2.0 * std::numbers::pi);
        }
    }

    // Dijkstra from node 0 to node 1.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(nodes.size(), inf);
    std::vector<int> prev(nodes.size(), -1);
    std::vector<Edge> via(nodes.size(), Edge{-1, 0.0, -1, 0.0});
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[0] = 0.0;
    pq.emplace(0.0, 0);
    while (!pq.empty()) {
        auto [du, u] = pq.top();
        pq.pop();
        if (du > dist[static_cast<std::size_t>(u)]) continue;
        if (u == 1) break;
        for (const auto& e : adj[static_cast<std::size_t>(u)]) {
            const double nd = du + e.cost;
            if (nd < dist[static_cast<std::size_t>(e.to)]) {
                dist[static_cast<std::size_t>(e.to)] = nd;
                prev[static_cast<std::size_t>(e.to)] = u;
                via[static_cast<std::size_t>(e.to)] = e;
                pq.emplace(nd, e.to);
            }
        }
    }
    if (!std::isfinite(dist[1])) return std::nullopt;

    std::vector<int> chain;
    for (int v = 1; v != -1; v = prev[static_cast<std::size_t>(v)]) chain.push_back(v);
    std::reverse(chain.begin(), chain.end());

    Polyline out{nodes[0].p};
    for (std::size_t k = 1; k < chain.size(); ++k) {
        const auto& e = via[static_cast<std::size_t>(chain[k])];
        const auto& src = nodes[static_cast<std::size_t>(chain[k - 1])];
        if (e.arc_disc >= 0) {
            const auto& d = discs[static_cast<std::size_t>(e.arc_disc)];
            const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(e.sweep) * d.radius / arc_step)));
            for (int s = 1; s < pieces; ++s) {
                out.push_back(d.center + d.radius * unit(src.angle + e.sweep * s / pieces));
            }
        }
        out.push_back(nodes[static_cast<std::size_t>(chain[k])].p);
    }
    return out;
}

}  // namespace rlihf
