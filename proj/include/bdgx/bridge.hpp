#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdgx/container.hpp"
#include "bdgx/dataset.hpp"
#include "bdgx/mlp.hpp"
#include "bdgx/optim.hpp"
#include "bdgx/rng.hpp"
#include "bdgx/serialize.hpp"
#include "bdgx/stats.hpp"
#include "bdgx/tensor.hpp"

namespace bdgx {

enum class TimeEmbedding { append_scalar, sinusoidal };

inline const char* to_string(TimeEmbedding e) {
    return e == TimeEmbedding::append_scalar ? "append_scalar" : "sinusoidal";
}
inline TimeEmbedding time_embedding_from_string(const std::string& s) {
    if (s == "append_scalar") return TimeEmbedding::append_scalar;
    if (s == "sinusoidal") return TimeEmbedding::sinusoidal;
    throw ConfigError("unknown time embedding '" + s + "'");
}

struct BridgeConfig {
    double sigma0 = 0.5;            // diffusion magnitude, in normalized units
    std::size_t steps = 30;         // K; integration uses dk = 1/K
    std::size_t outer_iters = 10;   // IMF rounds
    std::size_t inner_steps = 2000; // gradient steps per half-iteration
    std::size_t batch = 256;
    double lr = 1e-3;
    std::vector<std::size_t> hidden = {256, 256};
    std::size_t cache_size = 8192;
    // Bridge-time sampling interval during drift training; keeps the 1/k and
    // 1/(1-k) regression targets bounded.
    double k_min = 0.01;
    double k_max = 0.99;
    bool anchor_condition = true;
    TimeEmbedding time_embedding = TimeEmbedding::append_scalar;
    std::size_t sinusoidal_dims = 8;
    std::size_t diag_samples = 4096;
    // Exponential moving average of drift weights; integration and
    // checkpoints use the averaged net. 0 disables.
    double ema_decay = 0.999;

    void validate() const {
        // sigma0 == 0 degenerates to deterministic transport; the integrator
        // and several exactness checks rely on it, so only negatives are
        // rejected here. imf_fit itself insists on a positive value.
        if (sigma0 < 0.0) throw ConfigError("bridge: sigma0 must be >= 0");
        if (steps < 1) throw ConfigError("bridge: steps must be >= 1");
        if (outer_iters < 1) throw ConfigError("bridge: outer_iters must be >= 1");
        if (inner_steps < 1 || batch < 1 || cache_size < 1) {
            throw ConfigError("bridge: inner_steps, batch, cache_size must be >= 1");
        }
        if (!(0.0 < k_min && k_min < k_max && k_max < 1.0)) {
            throw ConfigError("bridge: need 0 < k_min < k_max < 1");
        }
        if (time_embedding == TimeEmbedding::sinusoidal &&
            (sinusoidal_dims < 2 || sinusoidal_dims % 2 != 0)) {
            throw ConfigError("bridge: sinusoidal_dims must be even and >= 2");
        }
        if (ema_decay < 0.0 || ema_decay >= 1.0) {
            throw ConfigError("bridge: ema_decay must be in [0,1)");
        }
    }

    std::size_t time_dim() const {
        return time_embedding == TimeEmbedding::append_scalar ? 1 : sinusoidal_dims;
    }
};

enum class Direction { forward, backward };

inline const char* to_string(Direction d) {
    return d == Direction::forward ? "forward" : "backward";
}

/// Time-conditioned velocity field. Each direction carries its own clock that
/// runs 0 -> 1 from the marginal it generates from: the forward model's clock
/// equals bridge time k, the backward model's clock equals 1 - k. Training and
/// integration both use the model's own clock, so the two directions share one
/// integrator.
struct DriftModel {
    Direction direction = Direction::forward;
    std::size_t data_dim = 0;
    TimeEmbedding time_embedding = TimeEmbedding::append_scalar;
    std::size_t time_dim = 1;
    Mlp net;      // online weights, updated by the optimizer
    Mlp ema_net;  // averaged weights; empty until training populates it

    /// Integration and translation read the averaged weights when present.
    const Mlp& inference_net() const { return ema_net.layer_count() > 0 ? ema_net : net; }

    static DriftModel create(Direction dir, std::size_t data_dim, const BridgeConfig& cfg,
                             Rng& rng) {
        DriftModel m;
        m.direction = dir;
        m.data_dim = data_dim;
        m.time_embedding = cfg.time_embedding;
        m.time_dim = cfg.time_dim();
        std::vector<std::size_t> sizes;
        sizes.push_back(m.time_dim + data_dim);
        for (std::size_t h : cfg.hidden) sizes.push_back(h);
        sizes.push_back(data_dim);
        m.net = Mlp::create(std::move(sizes), Activation::tanh, OutputActivation::identity, rng);
        return m;
    }

    double own_clock(double bridge_k) const {
        return direction == Direction::forward ? bridge_k : 1.0 - bridge_k;
    }

    void write_time_features(double t, double* dst) const {
        if (time_embedding == TimeEmbedding::append_scalar) {
            dst[0] = t;
            return;
        }
        const std::size_t pairs = time_dim / 2;
        double freq = M_PI;
        for (std::size_t i = 0; i < pairs; ++i) {
            dst[2 * i] = std::sin(freq * t);
            dst[2 * i + 1] = std::cos(freq * t);
            freq *= 2.0;
        }
    }

    /// Builds the [N, time_dim + data_dim] network input for points at a
    /// shared own-clock time t.
    Tensor assemble_input(const Tensor& points, double t) const {
        require_matrix(points, "drift input");
        if (points.shape[1] != data_dim) {
            throw DimensionError("drift model: point dim " + std::to_string(points.shape[1]) +
                                 " != " + std::to_string(data_dim));
        }
        Tensor x({points.shape[0], time_dim + data_dim});
        for (std::size_t i = 0; i < points.shape[0]; ++i) {
            double* r = x.row(i);
            write_time_features(t, r);
            std::copy_n(points.row(i), data_dim, r + time_dim);
        }
        return x;
    }

    /// Velocity field at shared time t for a batch of points.
    Tensor velocity(const Tensor& points, double t) const {
        return inference_net().forward(assemble_input(points, t));
    }
};

/// Endpoint pairs for one half-iteration of drift training. `starts` sit at
/// bridge time 0 (source side), `ends` at bridge time 1 (target side). The
/// generated member of the pair depends on the direction being trained.
struct CouplingCache {
    Tensor starts;
    Tensor ends;

    std::size_t size() const { return starts.rows(); }

    void validate() const {
        require_matrix(starts, "coupling starts");
        require_matrix(ends, "coupling ends");
        if (starts.shape != ends.shape) {
            throw DimensionError("coupling cache: start/end shape mismatch");
        }
        if (starts.rows() == 0) throw PrerequisiteError("coupling cache: empty");
    }
};

/// Brownian-bridge interpolant p_k = (1-k) p0 + k p1 + sigma0 sqrt(k(1-k)) z.
/// Exact at both endpoints.
inline std::vector<double> bridge_interpolate(std::span<const double> p0,
                                              std::span<const double> p1, double k,
                                              double sigma0, Rng& rng) {
    if (p0.size() != p1.size()) throw DimensionError("bridge_interpolate: endpoint dim mismatch");
    if (k < 0.0 || k > 1.0) {
        throw ConfigError("bridge_interpolate: k = " + std::to_string(k) + " outside [0,1]");
    }
    const double noise_scale = sigma0 * std::sqrt(k * (1.0 - k));
    std::vector<double> out(p0.size());
    for (std::size_t j = 0; j < p0.size(); ++j) {
        out[j] = (1.0 - k) * p0[j] + k * p1[j] + noise_scale * rng.normal();
    }
    return out;
}

/// Regression target for the drift at an interpolated point: the conditional
/// Brownian-bridge drift toward the relevant endpoint.
///   forward:  (p1 - p_k) / (1 - k), valid for k < 1
///   backward: (p0 - p_k) / k,       valid for k > 0
inline std::vector<double> bridge_drift_target(std::span<const double> endpoint,
                                               std::span<const double> p_k, double k,
                                               Direction direction) {
    if (endpoint.size() != p_k.size()) {
        throw DimensionError("bridge_drift_target: dim mismatch");
    }
    double denom;
    if (direction == Direction::forward) {
        if (k >= 1.0) throw ConfigError("bridge_drift_target: forward target needs k < 1");
        denom = 1.0 - k;
    } else {
        if (k <= 0.0) throw ConfigError("bridge_drift_target: backward target needs k > 0");
        denom = k;
    }
    std::vector<double> out(p_k.size());
    for (std::size_t j = 0; j < p_k.size(); ++j) out[j] = (endpoint[j] - p_k[j]) / denom;
    return out;
}

/// One half-iteration of Markovian fitting: inner_steps minibatch Adam steps
/// on the drift-matching MSE, with bridge time sampled uniformly in
/// [k_min, k_max] per sample. Returns the per-step loss trace.
inline std::vector<double> train_drift_half_iteration(DriftModel& model,
                                                      const CouplingCache& cache,
                                                      const BridgeConfig& cfg, Rng& rng) {
    cfg.validate();
    cache.validate();
    if (cache.starts.cols() != model.data_dim) {
        throw DimensionError("train_drift: cache dim " + std::to_string(cache.starts.cols()) +
                             " != model dim " + std::to_string(model.data_dim));
    }
    const std::size_t d = model.data_dim;
    const std::size_t b = cfg.batch;
    AdamState adam = AdamState::create(mlp_params_const(model.net), cfg.lr);
    std::vector<double> trace;
    trace.reserve(cfg.inner_steps);
    const bool use_ema = cfg.ema_decay > 0.0;
    if (use_ema && model.ema_net.layer_count() == 0) model.ema_net = model.net;

    Tensor input({b, model.time_dim + d});
    Tensor target({b, d});
    for (std::size_t step = 0; step < cfg.inner_steps; ++step) {
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t idx = rng.uniform_index(cache.size());
            const double* p0 = cache.starts.row(idx);
            const double* p1 = cache.ends.row(idx);
            const double k = rng.uniform(cfg.k_min, cfg.k_max);
            const double noise_scale = cfg.sigma0 * std::sqrt(k * (1.0 - k));
            double* xr = input.row(i);
            model.write_time_features(model.own_clock(k), xr);
            double* tr = target.row(i);
            const bool fwd = model.direction == Direction::forward;
            const double denom = fwd ? (1.0 - k) : k;
            for (std::size_t j = 0; j < d; ++j) {
                const double pk = (1.0 - k) * p0[j] + k * p1[j] + noise_scale * rng.normal();
                xr[model.time_dim + j] = pk;
                tr[j] = ((fwd ? p1[j] : p0[j]) - pk) / denom;
            }
        }
        MlpCache fwd_cache = model.net.forward_cached(input);
        const Tensor& pred = fwd_cache.output();
        double loss = 0.0;
        Tensor upstream({b, d});
        const double scale = 2.0 / static_cast<double>(b * d);
        for (std::size_t n = 0; n < pred.numel(); ++n) {
            const double diff = pred.data[n] - target.data[n];
            loss += diff * diff;
            upstream.data[n] = scale * diff;
        }
        loss /= static_cast<double>(b * d);
        if (!std::isfinite(loss)) {
            throw NumericalError("drift training diverged: non-finite loss at step " +
                                 std::to_string(step) + " (" + to_string(model.direction) +
                                 " model)");
        }
        trace.push_back(loss);
        MlpGrads grads = model.net.backward(fwd_cache, upstream);
        adam_step(adam, mlp_params(model.net), grad_views(grads));
        if (use_ema) {
            const double beta = cfg.ema_decay;
            for (std::size_t l = 0; l < model.net.layer_count(); ++l) {
                double* ew = model.ema_net.weights[l].data.data();
                const double* ow = model.net.weights[l].data.data();
                for (std::size_t n = 0; n < model.net.weights[l].numel(); ++n) {
                    ew[n] = beta * ew[n] + (1.0 - beta) * ow[n];
                }
                double* eb = model.ema_net.biases[l].data.data();
                const double* ob = model.net.biases[l].data.data();
                for (std::size_t n = 0; n < model.net.biases[l].numel(); ++n) {
                    eb[n] = beta * eb[n] + (1.0 - beta) * ob[n];
                }
            }
        }
    }
    return trace;
}

/// Euler-Maruyama integration of a batch of points through a drift model for
/// n_steps of size 1/cfg.steps, on the model's own clock:
///   p <- p + v(t, p) dk + sigma0 sqrt(dk) xi,   t = step * dk
/// Fresh noise per step and per sample, drawn from per-row child streams so
/// the result does not depend on how rows are batched. If anchor_dims > 0 the
/// leading anchor_dims components are reset to their starting values after
/// every update.
inline Tensor em_integrate_batch_steps(const Tensor& start, const DriftModel& model,
                                       const BridgeConfig& cfg, std::size_t n_steps, Rng& rng,
                                       std::size_t anchor_dims = 0) {
    require_matrix(start, "em_integrate start");
    if (start.cols() != model.data_dim) {
        throw DimensionError("em_integrate: point dim " + std::to_string(start.cols()) +
                             " != model dim " + std::to_string(model.data_dim));
    }
    if (anchor_dims > model.data_dim) throw DimensionError("em_integrate: anchor_dims too large");
    const double dk = 1.0 / static_cast<double>(cfg.steps);
    const double noise_scale = cfg.sigma0 * std::sqrt(dk);
    const std::size_t n = start.rows();
    const std::size_t d = model.data_dim;

    const Rng master = rng.child(rng.uniform_index(std::size_t(1) << 62));
    std::vector<Rng> streams;
    streams.reserve(n);
    for (std::size_t i = 0; i < n; ++i) streams.push_back(master.child(i));

    Tensor p = start;
    for (std::size_t step = 0; step < n_steps; ++step) {
        const double t = static_cast<double>(step) * dk;
        Tensor v = model.velocity(p, t);
        for (std::size_t i = 0; i < n; ++i) {
            double* pr = p.row(i);
            const double* vr = v.row(i);
            Rng& sr = streams[i];
            for (std::size_t j = 0; j < d; ++j) {
                pr[j] += vr[j] * dk + noise_scale * sr.normal();
            }
            for (std::size_t j = 0; j < anchor_dims; ++j) pr[j] = start(i, j);
            for (std::size_t j = 0; j < d; ++j) {
                if (!std::isfinite(pr[j])) {
                    throw NumericalError("em_integrate: non-finite state at step " +
                                         std::to_string(step));
                }
            }
        }
    }
    return p;
}

inline Tensor em_integrate_batch(const Tensor& start, const DriftModel& model,
                                 const BridgeConfig& cfg, Rng& rng,
                                 std::size_t anchor_dims = 0) {
    return em_integrate_batch_steps(start, model, cfg, cfg.steps, rng, anchor_dims);
}

/// Single-sample integration; optionally records the full path (n_steps + 1
/// rows including the start).
inline std::vector<double> em_integrate(std::span<const double> start, const DriftModel& model,
                                        const BridgeConfig& cfg, Rng& rng,
                                        std::size_t anchor_dims = 0,
                                        std::vector<std::vector<double>>* path = nullptr) {
    if (start.size() != model.data_dim) {
        throw DimensionError("em_integrate: point dim " + std::to_string(start.size()) +
                             " != model dim " + std::to_string(model.data_dim));
    }
    const double dk = 1.0 / static_cast<double>(cfg.steps);
    const double noise_scale = cfg.sigma0 * std::sqrt(dk);
    const std::size_t d = model.data_dim;
    Tensor p({1, d});
    std::copy(start.begin(), start.end(), p.data.begin());
    if (path) {
        path->clear();
        path->push_back(std::vector<double>(start.begin(), start.end()));
    }
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double t = static_cast<double>(step) * dk;
        Tensor v = model.velocity(p, t);
        for (std::size_t j = 0; j < d; ++j) {
            p.data[j] += v.data[j] * dk + noise_scale * rng.normal();
        }
        for (std::size_t j = 0; j < anchor_dims; ++j) p.data[j] = start[j];
        for (std::size_t j = 0; j < d; ++j) {
            if (!std::isfinite(p.data[j])) {
                throw NumericalError("em_integrate: non-finite state at step " +
                                     std::to_string(step));
            }
        }
        if (path) path->push_back(p.data);
    }
    return p.data;
}

/// Marginal-matching diagnostics recorded after each IMF round.
struct ImfRoundDiagnostics {
    std::size_t round = 0;
    double backward_final_loss = 0.0;
    double forward_final_loss = 0.0;
    // Distance between the mean/cov of forward-generated endpoints and the
    // real target marginal, and symmetrically for the backward direction.
    double forward_mean_distance = 0.0;
    double forward_cov_distance = 0.0;
    double backward_mean_distance = 0.0;
    double backward_cov_distance = 0.0;
};

struct ImfResult {
    DriftModel forward;
    DriftModel backward;
    std::vector<ImfRoundDiagnostics> rounds;
};

namespace bridge_detail {

inline Tensor sample_rows(const Tensor& data, std::size_t count, Rng& rng) {
    Tensor out({count, data.cols()});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = rng.uniform_index(data.rows());
        std::copy_n(data.row(idx), data.cols(), out.row(i));
    }
    return out;
}

}  // namespace bridge_detail

/// Iterative Markovian Fitting between two sets of (already normalized)
/// transition vectors. Round 0 warm-starts from the independent coupling;
/// each round then trains the backward drift on (real source, forward-generated
/// target) pairs and the forward drift on (backward-generated source, real
/// target) pairs. Models are refined across rounds rather than re-initialized.
inline ImfResult imf_fit(const Tensor& source_rows, const Tensor& target_rows,
                         const BridgeConfig& cfg, Rng& rng,
                         std::optional<ImfResult> warm_start = std::nullopt) {
    cfg.validate();
    if (cfg.sigma0 <= 0.0) throw ConfigError("imf_fit: sigma0 must be > 0");
    require_matrix(source_rows, "imf source");
    require_matrix(target_rows, "imf target");
    if (source_rows.rows() == 0 || target_rows.rows() == 0) {
        throw PrerequisiteError("imf_fit: both datasets must be nonempty");
    }
    if (source_rows.cols() != target_rows.cols()) {
        throw DimensionError("imf_fit: dataset dims " + std::to_string(source_rows.cols()) +
                             " vs " + std::to_string(target_rows.cols()));
    }
    const std::size_t d = source_rows.cols();

    ImfResult result;
    bool warm = warm_start.has_value();
    if (warm) {
        result = std::move(*warm_start);
        if (result.forward.data_dim != d || result.backward.data_dim != d) {
            throw DimensionError("imf_fit: warm-start model dim mismatch");
        }
    } else {
        result.forward = DriftModel::create(Direction::forward, d, cfg, rng);
        result.backward = DriftModel::create(Direction::backward, d, cfg, rng);
    }

    // Fixed evaluation draws and a fixed generation seed give common random
    // numbers across rounds, so the diagnostic sequence reflects model
    // movement rather than sampling noise.
    Rng diag_rng = rng.child(0xD1A6);
    const std::size_t n_eval = std::min(cfg.diag_samples, std::min(source_rows.rows(),
                                                                   target_rows.rows()));
    const Tensor eval_source = bridge_detail::sample_rows(source_rows, n_eval, diag_rng);
    const Tensor eval_target = bridge_detail::sample_rows(target_rows, n_eval, diag_rng);
    const std::vector<double> target_mean = column_means(eval_target);
    const Tensor target_cov = covariance_matrix(eval_target);
    const std::vector<double> source_mean = column_means(eval_source);
    const Tensor source_cov = covariance_matrix(eval_source);
    const std::uint64_t diag_gen_seed = diag_rng.child(1).seed();

    for (std::size_t round = 0; round < cfg.outer_iters; ++round) {
        // Backward half: pairs (real p0, generated-or-independent p1).
        CouplingCache backward_cache;
        backward_cache.starts = bridge_detail::sample_rows(source_rows, cfg.cache_size, rng);
        if (round == 0 && !warm) {
            backward_cache.ends = bridge_detail::sample_rows(target_rows, cfg.cache_size, rng);
        } else {
            backward_cache.ends =
                em_integrate_batch(backward_cache.starts, result.forward, cfg, rng);
        }
        const std::vector<double> btrace =
            train_drift_half_iteration(result.backward, backward_cache, cfg, rng);

        // Forward half: pairs (generated p0, real p1).
        CouplingCache forward_cache;
        forward_cache.ends = bridge_detail::sample_rows(target_rows, cfg.cache_size, rng);
        forward_cache.starts = em_integrate_batch(forward_cache.ends, result.backward, cfg, rng);
        const std::vector<double> ftrace =
            train_drift_half_iteration(result.forward, forward_cache, cfg, rng);

        ImfRoundDiagnostics diag;
        diag.round = result.rounds.size();
        diag.backward_final_loss = btrace.back();
        diag.forward_final_loss = ftrace.back();
        Rng gen_rng(diag_gen_seed);
        const Tensor gen_target = em_integrate_batch(eval_source, result.forward, cfg, gen_rng);
        diag.forward_mean_distance = euclidean_distance(column_means(gen_target), target_mean);
        diag.forward_cov_distance = frobenius_distance(covariance_matrix(gen_target), target_cov);
        const Tensor gen_source = em_integrate_batch(eval_target, result.backward, cfg, gen_rng);
        diag.backward_mean_distance = euclidean_distance(column_means(gen_source), source_mean);
        diag.backward_cov_distance = frobenius_distance(covariance_matrix(gen_source), source_cov);
        result.rounds.push_back(diag);
    }
    return result;
}

/// A fitted bridge bundled with everything translation needs.
struct BridgeModel {
    DriftModel forward;
    DriftModel backward;
    BridgeConfig config;
    Normalizer normalizer;
    SegmentLayout layout;

    void check_layout(const SegmentLayout& other) const {
        if (!(layout == other) || normalizer.dim() != layout.total_dim()) {
            throw PrerequisiteError(
                "bridge: checkpoint normalizer/layout does not match the dataset "
                "(state_dim " + std::to_string(layout.state_dim) + ", action_dim " +
                std::to_string(layout.action_dim) + " expected)");
        }
    }
};

namespace bridge_detail {

inline std::vector<double> translate_one(const BridgeModel& bridge, const DriftModel& model,
                                         std::span<const double> s, std::span<const double> a,
                                         std::span<const double> s_next, Rng& rng) {
    std::vector<double> p = pack(bridge.layout, s, a, s_next);
    bridge.normalizer.normalize_in_place(p);
    const std::size_t anchor =
        bridge.config.anchor_condition ? bridge.layout.state_dim + bridge.layout.action_dim : 0;
    std::vector<double> q = em_integrate(p, model, bridge.config, rng, anchor);
    bridge.normalizer.denormalize_in_place(q);
    UnpackedTransition t = unpack(bridge.layout, q);
    for (double v : t.s_next) {
        if (!std::isfinite(v)) throw NumericalError("translate: non-finite output");
    }
    return t.s_next;
}

}  // namespace bridge_detail

/// DSB_{S->T}: translate a source transition's next state into target style.
inline std::vector<double> translate_s_to_t(const BridgeModel& bridge, std::span<const double> s,
                                            std::span<const double> a,
                                            std::span<const double> s_next, Rng& rng) {
    return bridge_detail::translate_one(bridge, bridge.forward, s, a, s_next, rng);
}

/// DSB_{T->S}: the reverse translation operator.
inline std::vector<double> translate_t_to_s(const BridgeModel& bridge, std::span<const double> s,
                                            std::span<const double> a,
                                            std::span<const double> s_next, Rng& rng) {
    return bridge_detail::translate_one(bridge, bridge.backward, s, a, s_next, rng);
}

/// Batch translation of a whole dataset; (s, a) columns are carried through,
/// rewards are dropped (they no longer describe the translated transitions).
inline TransitionDataset translate_dataset(const BridgeModel& bridge,
                                           const TransitionDataset& data, Direction direction,
                                           Rng& rng) {
    bridge.check_layout(data.layout());
    TransitionDataset out(data.state_dim(), data.action_dim(), /*has_rewards=*/false);
    if (data.empty()) return out;
    Tensor rows = bridge.normalizer.normalize_rows(data.packed_matrix());
    const std::size_t anchor =
        bridge.config.anchor_condition ? bridge.layout.state_dim + bridge.layout.action_dim : 0;
    const DriftModel& model =
        direction == Direction::forward ? bridge.forward : bridge.backward;
    Tensor translated = em_integrate_batch(rows, model, bridge.config, rng, anchor);
    translated = bridge.normalizer.denormalize_rows(translated);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const UnpackedTransition t =
            unpack(bridge.layout, {translated.row(i), bridge.layout.total_dim()});
        out.append(data.state(i), data.action(i), t.s_next, 0.0, data.done(i));
    }
    return out;
}

inline nlohmann::json bridge_config_to_json(const BridgeConfig& cfg) {
    return {{"sigma0", cfg.sigma0},
            {"steps", cfg.steps},
            {"outer_iters", cfg.outer_iters},
            {"inner_steps", cfg.inner_steps},
            {"batch", cfg.batch},
            {"lr", cfg.lr},
            {"hidden", cfg.hidden},
            {"cache_size", cfg.cache_size},
            {"k_min", cfg.k_min},
            {"k_max", cfg.k_max},
            {"anchor_condition", cfg.anchor_condition},
            {"time_embedding", to_string(cfg.time_embedding)},
            {"sinusoidal_dims", cfg.sinusoidal_dims},
            {"diag_samples", cfg.diag_samples},
            {"ema_decay", cfg.ema_decay}};
}

inline BridgeConfig bridge_config_from_json(const nlohmann::json& j) {
    BridgeConfig cfg;
    cfg.sigma0 = j.value("sigma0", cfg.sigma0);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.outer_iters = j.value("outer_iters", cfg.outer_iters);
    cfg.inner_steps = j.value("inner_steps", cfg.inner_steps);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.cache_size = j.value("cache_size", cfg.cache_size);
    cfg.k_min = j.value("k_min", cfg.k_min);
    cfg.k_max = j.value("k_max", cfg.k_max);
    cfg.anchor_condition = j.value("anchor_condition", cfg.anchor_condition);
    cfg.time_embedding =
        time_embedding_from_string(j.value("time_embedding", std::string("append_scalar")));
    cfg.sinusoidal_dims = j.value("sinusoidal_dims", cfg.sinusoidal_dims);
    cfg.diag_samples = j.value("diag_samples", cfg.diag_samples);
    cfg.ema_decay = j.value("ema_decay", cfg.ema_decay);
    return cfg;
}

inline void save_bridge(const BridgeModel& bridge, const std::string& path) {
    Container c;
    c.kind = "bridge";
    c.meta["config"] = bridge_config_to_json(bridge.config);
    c.meta["state_dim"] = bridge.layout.state_dim;
    c.meta["action_dim"] = bridge.layout.action_dim;
    put_normalizer(c, "normalizer", bridge.normalizer);
    // Checkpoints carry the inference (averaged) weights.
    put_mlp(c, "forward", bridge.forward.inference_net());
    put_mlp(c, "backward", bridge.backward.inference_net());
    c.save(path);
}

inline BridgeModel load_bridge(const std::string& path) {
    Container c = Container::load(path);
    if (c.kind != "bridge") {
        throw FormatError("bridge: '" + path + "' is a '" + c.kind + "' artifact");
    }
    BridgeModel b;
    b.config = bridge_config_from_json(c.meta.at("config"));
    b.layout.state_dim = c.meta.at("state_dim").get<std::size_t>();
    b.layout.action_dim = c.meta.at("action_dim").get<std::size_t>();
    b.normalizer = get_normalizer(c, "normalizer");
    const std::size_t d = b.layout.total_dim();
    for (Direction dir : {Direction::forward, Direction::backward}) {
        DriftModel m;
        m.direction = dir;
        m.data_dim = d;
        m.time_embedding = b.config.time_embedding;
        m.time_dim = b.config.time_dim();
        m.net = get_mlp(c, dir == Direction::forward ? "forward" : "backward");
        if (m.net.input_dim() != m.time_dim + d || m.net.output_dim() != d) {
            throw FormatError("bridge: checkpoint net dims do not match layout");
        }
        (dir == Direction::forward ? b.forward : b.backward) = std::move(m);
    }
    return b;
}

}  // namespace bdgx
