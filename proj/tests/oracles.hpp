#pragma once

// Independent oracles used to freeze expected values: dense surface
// sampling for box distances, central finite differences for gradients and
// Jacobians, a standalone Dijkstra for path costs, and Monte-Carlo Gaussian
// conditioning for the prior denoiser. These deliberately avoid the code
// paths they are checking.

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <vector>

#include "smg/body_model.hpp"
#include "smg/geometry.hpp"
#include "smg/planner.hpp"
#include "smg/scene_compiler.hpp"

namespace oracles {

using smg::Vec3;

// Unsigned distance from p to the box surface by dense sampling of the six
// faces. Each face keeps its own best sample and gets local refinement
// passes, so a coarse mis-ranking between faces cannot bias the result.
inline double sampled_box_surface_distance(const Vec3& p, const smg::OrientedBox& box,
                                           int n = 32, int refine_levels = 2) {
    const Vec3 q = box.to_local(p);
    const Vec3& he = box.half_extents;

    auto face_point = [&](int axis, int sign, double u, double v) {
        Vec3 s;
        s[axis] = sign * he[axis];
        const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
        s[ua] = u;
        s[va] = v;
        return s;
    };

    double best = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
        const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
        for (int sign = -1; sign <= 1; sign += 2) {
            double face_best = std::numeric_limits<double>::infinity();
            double best_u = 0.0, best_v = 0.0;
            for (int iu = 0; iu < n; ++iu) {
                const double u = -he[ua] + 2.0 * he[ua] * iu / (n - 1);
                for (int iv = 0; iv < n; ++iv) {
                    const double v = -he[va] + 2.0 * he[va] * iv / (n - 1);
                    const double d = (q - face_point(axis, sign, u, v)).norm();
                    if (d < face_best) {
                        face_best = d;
                        best_u = u;
                        best_v = v;
                    }
                }
            }
            double span_u = 2.0 * he[ua] / (n - 1), span_v = 2.0 * he[va] / (n - 1);
            for (int level = 0; level < refine_levels; ++level) {
                const double u0 = best_u, v0 = best_v;
                for (int iu = 0; iu < n; ++iu) {
                    const double u =
                        std::clamp(u0 - span_u + 2.0 * span_u * iu / (n - 1), -he[ua], he[ua]);
                    for (int iv = 0; iv < n; ++iv) {
                        const double v =
                            std::clamp(v0 - span_v + 2.0 * span_v * iv / (n - 1), -he[va], he[va]);
                        const double d = (q - face_point(axis, sign, u, v)).norm();
                        if (d < face_best) {
                            face_best = d;
                            best_u = u;
                            best_v = v;
                        }
                    }
                }
                span_u = 2.0 * span_u / (n - 1);
                span_v = 2.0 * span_v / (n - 1);
            }
            best = std::min(best, face_best);
        }
    }
    return best;
}

// Exact unsigned surface distance via per-face rectangle clamping; a second
// independent route used to validate the sampler itself.
inline double clamped_box_surface_distance(const Vec3& p, const smg::OrientedBox& box) {
    const Vec3 q = box.to_local(p);
    const Vec3& he = box.half_extents;
    double best = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
        for (int sign = -1; sign <= 1; sign += 2) {
            Vec3 s;
            s[axis] = sign * he[axis];
            const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
            s[ua] = std::clamp(q[ua], -he[ua], he[ua]);
            s[va] = std::clamp(q[va], -he[va], he[va]);
            best = std::min(best, (q - s).norm());
        }
    }
    return best;
}

// Central finite differences of a scalar function of a flat vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd lo = x, hi = x;
        lo[i] -= h;
        hi[i] += h;
        g[i] = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

// Finite-difference FK Jacobian over the (3+3J)-parameter pose vector.
inline Eigen::MatrixXd fd_fk_jacobian(const smg::Pose& pose, const smg::SkeletonDef& skel,
                                      double h = 1e-5) {
    const int params = skel.param_count();
    const int joints = skel.joint_count();
    auto pose_from = [&](const Eigen::VectorXd& v) {
        smg::Pose p;
        p.root = v.segment<3>(0);
        p.rotations.resize(static_cast<std::size_t>(joints));
        for (int j = 0; j < joints; ++j) p.rotations[static_cast<std::size_t>(j)] = v.segment<3>(3 + 3 * j);
        return p;
    };
    Eigen::VectorXd x(params);
    x.segment<3>(0) = pose.root;
    for (int j = 0; j < joints; ++j) x.segment<3>(3 + 3 * j) = pose.rotations[static_cast<std::size_t>(j)];

    Eigen::MatrixXd jac(3 * joints, params);
    for (int c = 0; c < params; ++c) {
        Eigen::VectorXd lo = x, hi = x;
        lo[c] -= h;
        hi[c] += h;
        const auto p_lo = smg::fk(pose_from(lo), skel);
        const auto p_hi = smg::fk(pose_from(hi), skel);
        for (int j = 0; j < joints; ++j) {
            jac.block<3, 1>(3 * j, c) =
                (p_hi[static_cast<std::size_t>(j)] - p_lo[static_cast<std::size_t>(j)]) / (2.0 * h);
        }
    }
    return jac;
}

// Standalone Dijkstra over the road map (8-connected, FREE cells), returning
// the optimal cost to the nearest goal cell or infinity when unreachable.
inline double dijkstra_cost(const smg::RoadMap& rm, smg::GridCell start,
                            const std::function<bool(smg::GridCell)>& is_goal) {
    const int w = rm.width, h = rm.height;
    std::vector<double> dist(static_cast<std::size_t>(w) * h,
                             std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> open;
    dist[static_cast<std::size_t>(start.j) * w + start.i] = 0.0;
    open.push({0.0, start.j * w + start.i});
    const int di[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dj[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    while (!open.empty()) {
        const auto [d, idx] = open.top();
        open.pop();
        if (d > dist[static_cast<std::size_t>(idx)] + 1e-12) continue;
        const smg::GridCell cell{idx % w, idx / w};
        if (is_goal(cell)) return d;
        for (int n = 0; n < 8; ++n) {
            const int i = cell.i + di[n], j = cell.j + dj[n];
            if (!rm.in_bounds(i, j) || rm.at(i, j) != smg::CellState::Free) continue;
            const double nd = d + (n < 4 ? 1.0 : std::sqrt(2.0));
            if (nd < dist[static_cast<std::size_t>(j) * w + i] - 1e-12) {
                dist[static_cast<std::size_t>(j) * w + i] = nd;
                open.push({nd, j * w + i});
            }
        }
    }
    return std::numeric_limits<double>::infinity();
}

inline double path_cost(const std::vector<smg::GridCell>& path) {
    double cost = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const int di = std::abs(path[i].i - path[i - 1].i);
        const int dj = std::abs(path[i].j - path[i - 1].j);
        cost += (di + dj == 2) ? std::sqrt(2.0) : 1.0;
    }
    return cost;
}

// Monte-Carlo estimate of E[x0 | x_k] under x0 ~ N(mu, sigma^2) and
// x_k = sqrt(abar) x0 + sqrt(1-abar) eps, by importance weighting.
inline double mc_gaussian_posterior_mean(double x_k, double abar, double mu, double sigma,
                                         int samples = 400000, unsigned seed = 1234) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> prior(mu, sigma);
    const double noise_var = 1.0 - abar;
    double wsum = 0.0, xsum = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double x0 = prior(rng);
        const double r = x_k - std::sqrt(abar) * x0;
        const double w = std::exp(-0.5 * r * r / noise_var);
        wsum += w;
        xsum += w * x0;
    }
    return xsum / wsum;
}

}  // namespace oracles
