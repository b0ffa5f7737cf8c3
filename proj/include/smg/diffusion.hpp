#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "smg/body_model.hpp"
#include "smg/errors.hpp"
#include "smg/geometry.hpp"
#include "smg/guidance.hpp"

// Guided DDPM sampler over pose-parameter tensors: the reverse process with
// a pluggable clean-motion predictor, plus two inference-time modifications
// applied to each step's clean-motion estimate:
//   1. an alignment pull toward masked joint-position guidance, and
//   2. a penetration push out of the scene's signed distance field.

namespace smg {

using SampleTensor = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

struct DiffusionSchedule {
    std::vector<double> alphas;      // alpha_k for k = 1..K
    std::vector<double> alpha_bars;  // cumulative products

    int steps() const { return static_cast<int>(alphas.size()); }
    double alpha(int k) const { return alphas[static_cast<std::size_t>(k) - 1]; }
    // alpha_bar_0 is defined as 1 so the posterior mean is well-formed at k=1.
    double alpha_bar(int k) const {
        return k == 0 ? 1.0 : alpha_bars[static_cast<std::size_t>(k) - 1];
    }

    static DiffusionSchedule linear_beta(int steps, double beta_start, double beta_end) {
        if (steps < 1 || beta_start <= 0 || beta_end >= 1 || beta_end < beta_start) {
            throw Error("schedule: need 0 < beta_start <= beta_end < 1 and steps >= 1");
        }
        DiffusionSchedule s;
        s.alphas.resize(steps);
        s.alpha_bars.resize(steps);
        double prod = 1.0;
        for (int k = 0; k < steps; ++k) {
            const double beta =
                steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * k / (steps - 1.0);
            s.alphas[k] = 1.0 - beta;
            prod *= s.alphas[k];
            s.alpha_bars[k] = prod;
        }
        return s;
    }

    void validate() const {
        if (steps() < 1) throw Error("schedule: empty");
        double prev = 1.0;
        for (int k = 1; k <= steps(); ++k) {
            if (!(alpha(k) > 0.0 && alpha(k) < 1.0)) throw Error("schedule: alpha_k outside (0,1)");
            if (!(alpha_bar(k) < prev)) throw Error("schedule: alpha_bar must strictly decrease");
            prev = alpha_bar(k);
        }
    }
};

// K=100 with beta rising linearly to 0.1 drives alpha_bar_K below 0.01, so
// drawing x_K from a standard normal matches the forward marginal.
inline DiffusionSchedule default_schedule() { return DiffusionSchedule::linear_beta(100, 1e-4, 0.1); }

// ---------------------------------------------------------------------------
// Denoisers
// ---------------------------------------------------------------------------

// Predicts the clean sample x0 from a noisy x_k at step k.
class Denoiser {
  public:
    virtual ~Denoiser() = default;
    virtual SampleTensor predict(const SampleTensor& x_k, int k, const std::string& text) const = 0;
};

// Closed-form posterior mean under the prior x0 ~ N(mu, sigma^2 I) and the
// forward model x_k = sqrt(abar_k) x0 + sqrt(1-abar_k) eps. Ignores text.
class GaussianPriorDenoiser : public Denoiser {
  public:
    GaussianPriorDenoiser(SampleTensor mu, double sigma, DiffusionSchedule schedule)
        : mu_(std::move(mu)), sigma2_(sigma * sigma), schedule_(std::move(schedule)) {
        if (!(sigma > 0.0)) throw InvalidSigma("prior sigma must be positive");
    }

    SampleTensor predict(const SampleTensor& x_k, int k, const std::string&) const override {
        const double abar = schedule_.alpha_bar(k);
        const double denom = abar * sigma2_ + (1.0 - abar);
        SampleTensor mu = mu_;
        if (mu.size() != x_k.size()) {
            throw DimensionMismatch("gaussian prior dimension does not match sample");
        }
        return (sigma2_ * std::sqrt(abar) * x_k + (1.0 - abar) * mu) / denom;
    }

  private:
    SampleTensor mu_;
    double sigma2_;
    DiffusionSchedule schedule_;
};

// Two-layer perceptron loaded from a JSON weights file. The input is the
// noisy sample with alpha_bar_k appended as a conditioning feature.
class MlpDenoiser : public Denoiser {
  public:
    MlpDenoiser(Eigen::MatrixXd w1, Eigen::VectorXd b1, Eigen::MatrixXd w2, Eigen::VectorXd b2,
                std::string activation, DiffusionSchedule schedule)
        : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)),
          activation_(std::move(activation)), schedule_(std::move(schedule)) {
        if (w1_.rows() != b1_.size() || w2_.rows() != b2_.size() || w2_.cols() != w1_.rows()) {
            throw DimensionMismatch("mlp denoiser: inconsistent layer shapes");
        }
        if (activation_ != "tanh" && activation_ != "relu") {
            throw Error("mlp denoiser: unknown activation '" + activation_ + "'");
        }
    }

    static MlpDenoiser from_json(const nlohmann::json& doc, DiffusionSchedule schedule) {
        auto matrix = [](const nlohmann::json& rows) {
            Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                const auto& row = rows[static_cast<std::size_t>(r)];
                if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
                    throw Error("mlp denoiser: ragged weight matrix");
                }
                for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)];
            }
            return m;
        };
        auto vector = [](const nlohmann::json& vals) {
            Eigen::VectorXd v(vals.size());
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = vals[static_cast<std::size_t>(i)];
            return v;
        };
        return MlpDenoiser(matrix(doc.at("w1")), vector(doc.at("b1")), matrix(doc.at("w2")),
                           vector(doc.at("b2")), doc.value("activation", "tanh"),
                           std::move(schedule));
    }

    SampleTensor predict(const SampleTensor& x_k, int k, const std::string&) const override {
        if (w1_.cols() != x_k.size() + 1 || w2_.rows() != x_k.size()) {
            throw DimensionMismatch("mlp denoiser dimension does not match sample");
        }
        Eigen::VectorXd in(x_k.size() + 1);
        in << x_k, schedule_.alpha_bar(k);
        Eigen::VectorXd h = w1_ * in + b1_;
        if (activation_ == "tanh") {
            h = h.array().tanh();
        } else {
            h = h.cwiseMax(0.0);
        }
        return w2_ * h + b2_;
    }

  private:
    Eigen::MatrixXd w1_, w2_;
    Eigen::VectorXd b1_, b2_;
    std::string activation_;
    DiffusionSchedule schedule_;
};

// ---------------------------------------------------------------------------
// Pose-tensor packing
// ---------------------------------------------------------------------------

// Frame-major layout: [root(3), rot_0(3), ..., rot_{J-1}(3)] per frame.
inline int frame_dim(const SkeletonDef& skel) { return skel.param_count(); }

inline Pose pose_from_segment(const Eigen::Ref<const Eigen::VectorXd>& seg, const SkeletonDef& skel) {
    Pose p;
    p.root = seg.segment<3>(0);
    p.rotations.resize(skel.parents.size());
    for (int j = 0; j < skel.joint_count(); ++j) p.rotations[j] = seg.segment<3>(3 + 3 * j);
    return p;
}

inline SampleTensor pack_motion(const MotionSequence& motion, const SkeletonDef& skel) {
    const int dim = frame_dim(skel);
    SampleTensor x(static_cast<Eigen::Index>(motion.frames.size()) * dim);
    for (std::size_t f = 0; f < motion.frames.size(); ++f) {
        const Pose& p = motion.frames[f];
        check_pose(p, skel);
        auto seg = x.segment(static_cast<Eigen::Index>(f) * dim, dim);
        seg.segment<3>(0) = p.root;
        for (int j = 0; j < skel.joint_count(); ++j) seg.segment<3>(3 + 3 * j) = p.rotations[j];
    }
    return x;
}

inline MotionSequence unpack_motion(const SampleTensor& x, const SkeletonDef& skel, double fps) {
    const int dim = frame_dim(skel);
    if (x.size() % dim != 0) throw DimensionMismatch("sample tensor is not a whole number of frames");
    MotionSequence m;
    m.fps = fps;
    const int frames = static_cast<int>(x.size() / dim);
    m.frames.reserve(frames);
    for (int f = 0; f < frames; ++f) {
        m.frames.push_back(pose_from_segment(x.segment(static_cast<Eigen::Index>(f) * dim, dim), skel));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Guidance losses
// ---------------------------------------------------------------------------

struct GuidanceConfig {
    double lambda = 2.0;       // alignment strength
    double eta = 0.5;          // scene-overlap strength
    int samples_per_bone = 2;  // capsule surface resolution
};

// Loss value, its gradient, and the exact 1-D least-squares minimizer along
// the gradient direction, per frame (the losses are frame-separable), used
// to keep large strengths non-expansive.
struct GuidedLoss {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::VectorXd step_numer;  // one entry per frame
    Eigen::VectorXd step_denom;

    double line_min_step(int frame, double requested) const {
        if (step_denom[frame] <= 0.0) return requested;
        return std::min(requested, step_numer[frame] / step_denom[frame]);
    }
};

// Sum of squared distances between masked guidance positions and the
// forward-kinematics positions of the clean-motion estimate. The gradient
// flows through the analytic FK Jacobian; frames beyond the guidance range
// and unmasked entries contribute nothing.
inline GuidedLoss align_loss(const SampleTensor& x0, const GuidanceSpec& g, const SkeletonDef& skel) {
    if (g.n_joints != skel.joint_count()) {
        throw DimensionMismatch("guidance joint count does not match skeleton");
    }
    const int dim = frame_dim(skel);
    if (x0.size() % dim != 0) throw DimensionMismatch("sample tensor is not a whole number of frames");
    const int frames = static_cast<int>(x0.size() / dim);

    GuidedLoss out;
    out.grad = Eigen::VectorXd::Zero(x0.size());
    out.step_numer = Eigen::VectorXd::Zero(frames);
    out.step_denom = Eigen::VectorXd::Zero(frames);
    std::vector<Vec3> residuals(static_cast<std::size_t>(g.n_joints));

    for (int f = 0; f < std::min(frames, g.n_frames); ++f) {
        bool any = false;
        for (int j = 0; j < g.n_joints && !any; ++j) any = g.masked(f, j);
        if (!any) continue;

        const Pose pose = pose_from_segment(x0.segment(static_cast<Eigen::Index>(f) * dim, dim), skel);
        const Eigen::MatrixXd jac = fk_jacobian(pose, skel);
        const std::vector<Vec3> joints = fk(pose, skel);

        auto grad_f = out.grad.segment(static_cast<Eigen::Index>(f) * dim, dim);
        for (int j = 0; j < g.n_joints; ++j) {
            if (!g.masked(f, j)) continue;
            const Vec3 r = joints[static_cast<std::size_t>(j)] - g.at(f, j);
            residuals[static_cast<std::size_t>(j)] = r;
            out.value += r.squaredNorm();
            grad_f.noalias() += 2.0 * jac.middleRows<3>(3 * j).transpose() * r;
        }
        // Second pass: directional derivative of each masked residual along
        // the gradient, for the per-frame line-minimum step size.
        for (int j = 0; j < g.n_joints; ++j) {
            if (!g.masked(f, j)) continue;
            const Vec3 jg = jac.middleRows<3>(3 * j) * grad_f;
            out.step_numer[f] += jg.dot(residuals[static_cast<std::size_t>(j)]);
            out.step_denom[f] += jg.squaredNorm();
        }
    }
    return out;
}

// Total penetration depth of the capsule surface into the scene:
// sum over samples of max(0, -sdf). Samples at or outside the surface
// contribute nothing; gradients use the SDF gradient at each sample.
inline GuidedLoss scene_loss(const SampleTensor& x0, const SceneField& field,
                             const SkeletonDef& skel, const GuidanceConfig& cfg) {
    const int dim = frame_dim(skel);
    if (x0.size() % dim != 0) throw DimensionMismatch("sample tensor is not a whole number of frames");
    const int frames = static_cast<int>(x0.size() / dim);

    GuidedLoss out;
    out.grad = Eigen::VectorXd::Zero(x0.size());
    out.step_numer = Eigen::VectorXd::Zero(frames);
    out.step_denom = Eigen::VectorXd::Zero(frames);
    if (field.boxes.empty()) return out;

    std::vector<Eigen::RowVectorXd> depth_rows;
    std::vector<double> depths;
    for (int f = 0; f < frames; ++f) {
        const Pose pose = pose_from_segment(x0.segment(static_cast<Eigen::Index>(f) * dim, dim), skel);
        const auto samples = skin_capsules(pose, skel, cfg.samples_per_bone);

        depth_rows.clear();
        depths.clear();
        auto grad_f = out.grad.segment(static_cast<Eigen::Index>(f) * dim, dim);
        for (const auto& s : samples) {
            const double sdf = scene_sdf(s.point, field);
            if (sdf >= 0.0) continue;
            const Vec3 n = scene_sdf_grad(s.point, field);
            // depth = -sdf(point(pose)); d(depth)/d(pose) = -n^T J.
            depth_rows.emplace_back(-n.transpose() * s.jacobian);
            depths.push_back(-sdf);
            out.value += -sdf;
            grad_f.noalias() += depth_rows.back().transpose();
        }
        for (std::size_t i = 0; i < depths.size(); ++i) {
            const double dg = depth_rows[i].dot(grad_f);
            out.step_numer[f] += dg * depths[i];
            out.step_denom[f] += dg * dg;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reverse process
// ---------------------------------------------------------------------------

struct SamplerContext {
    const DiffusionSchedule& schedule;
    const Denoiser& denoiser;
    std::string text;
    const GuidanceSpec* guidance = nullptr;  // needs skel when set
    const SceneField* field = nullptr;       // needs skel when set
    const SkeletonDef* skel = nullptr;
    GuidanceConfig cfg;
};

// Posterior mean of x_{k-1} given the clean estimate and x_k. alpha_bar_0
// is 1, so at k=1 the x_k coefficient vanishes and the mean is x0 exactly.
inline SampleTensor posterior_mean(const DiffusionSchedule& sched, int k, const SampleTensor& x0,
                                   const SampleTensor& x_k) {
    const double a_k = sched.alpha(k);
    const double abar_k = sched.alpha_bar(k);
    const double abar_prev = sched.alpha_bar(k - 1);
    const double c0 = std::sqrt(abar_prev) * (1.0 - a_k) / (1.0 - abar_k);
    const double ck = std::sqrt(a_k) * (1.0 - abar_prev) / (1.0 - abar_k);
    return c0 * x0 + ck * x_k;
}

// One reverse step x_k -> x_{k-1}: predict the clean sample, apply the
// alignment and scene modifications to it, form the posterior mean, and add
// noise except at the final step. Guidance steps are clamped at the 1-D
// least-squares minimum along the gradient so strengths beyond it cannot
// overshoot the constraint set.
inline SampleTensor reverse_step(const SamplerContext& ctx, const SampleTensor& x_k, int k,
                                 std::mt19937_64& rng) {
    const DiffusionSchedule& sched = ctx.schedule;
    if (k < 1 || k > sched.steps()) throw Error("reverse_step: k out of range");

    SampleTensor x0 = ctx.denoiser.predict(x_k, k, ctx.text);
    if (x0.size() != x_k.size()) throw DimensionMismatch("denoiser changed sample dimension");

    const auto apply = [&x0](const GuidedLoss& loss, double strength) {
        const int dim = static_cast<int>(x0.size() / loss.step_numer.size());
        for (int f = 0; f < loss.step_numer.size(); ++f) {
            if (loss.step_denom[f] <= 0.0) continue;
            x0.segment(static_cast<Eigen::Index>(f) * dim, dim) -=
                loss.line_min_step(f, strength) *
                loss.grad.segment(static_cast<Eigen::Index>(f) * dim, dim);
        }
    };
    if (ctx.guidance && ctx.skel && ctx.cfg.lambda > 0.0) {
        apply(align_loss(x0, *ctx.guidance, *ctx.skel), ctx.cfg.lambda);
    }
    if (ctx.field && ctx.skel && ctx.cfg.eta > 0.0) {
        apply(scene_loss(x0, *ctx.field, *ctx.skel, ctx.cfg), ctx.cfg.eta);
    }

    const double a_k = sched.alpha(k);
    SampleTensor mean = posterior_mean(sched, k, x0, x_k);
    if (k == 1) return mean;

    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = std::sqrt(1.0 - a_k);
    for (Eigen::Index i = 0; i < mean.size(); ++i) mean[i] += sigma * normal(rng);
    return mean;
}

// Full reverse chain from x_K ~ N(0, I); deterministic given the seed.
inline SampleTensor sample_tensor(const SamplerContext& ctx, int dim, std::uint64_t seed) {
    ctx.schedule.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SampleTensor x(dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
    for (int k = ctx.schedule.steps(); k >= 1; --k) x = reverse_step(ctx, x, k, rng);
    return x;
}

// Samples a motion of g.n_frames frames guided by g (and pushed out of
// `field` when given), unpacked into poses at the guidance frame rate.
inline MotionSequence sample(const Denoiser& denoiser, const std::string& text,
                             const GuidanceSpec& g, const SceneField* field,
                             const DiffusionSchedule& schedule, const SkeletonDef& skel,
                             const GuidanceConfig& cfg, std::uint64_t seed) {
    SamplerContext ctx{schedule, denoiser, text, &g, field, &skel, cfg};
    const SampleTensor x0 = sample_tensor(ctx, g.n_frames * frame_dim(skel), seed);
    return unpack_motion(x0, skel, g.fps);
}

// Prior mean used by the default denoiser: the rest pose standing at the
// walking pelvis height, tiled over all frames.
inline SampleTensor rest_pose_prior(const SkeletonDef& skel, int frames) {
    MotionSequence m;
    m.frames.assign(static_cast<std::size_t>(frames),
                    Pose::rest(skel, Vec3(0, 0, kStandingPelvisHeight)));
    return pack_motion(m, skel);
}

}  // namespace smg
