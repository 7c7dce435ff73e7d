#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/field.hpp"
#include "srnet/image.hpp"
#include "srnet/labels.hpp"
#include "srnet/losses.hpp"
#include "srnet/warp.hpp"

namespace srnet {

struct NonFiniteLoss : Error {
    std::vector<LossReport> trace;
    NonFiniteLoss(const std::string& msg, std::vector<LossReport> t)
        : Error(msg), trace(std::move(t)) {}
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;
    double beta1 = 0.93;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-3;
};

inline AdamState make_adam(std::size_t size, double lr = 1e-3, double beta1 = 0.93,
                           double beta2 = 0.999, double eps = 1e-8) {
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw Error("adam: betas must lie in [0, 1)");
    AdamState st;
    st.m.assign(size, 0.0);
    st.v.assign(size, 0.0);
    st.lr = lr;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.eps = eps;
    return st;
}

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& st, std::vector<double>& params,
                      const std::vector<double>& grads) {
    if (params.size() != st.m.size() || grads.size() != st.m.size())
        throw ShapeMismatch("adam_step: parameter/gradient/state sizes differ");
    ++st.t;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

struct RegConfig {
    int levels = 4;
    int iters_per_level = 2000;
    double lr = 0.05;
    double beta1 = 0.93;
    double beta2 = 0.999;
    double eps = 1e-8;
    LossWeights weights;
    std::uint64_t seed = 0;
    int plateau_window = 50;
    double plateau_tol = 1e-6;
};

struct RegistrationResult {
    DisplacementField field;
    Image registered;
    std::vector<LossReport> loss_trace;
    std::vector<std::size_t> level_starts; // trace index where each level begins
    bool converged = false;
    int iterations_run = 0;
};

/// Coarse-to-fine direct minimization of the composite loss with Adam.
/// Within a level the best-so-far field is tracked and returned, and a
/// checkpoint evaluation of that field closes the level's trace, so logged
/// checkpoint totals never increase within a level. The trace opens with a
/// full-resolution zero-field evaluation, and the returned field never
/// scores worse than that baseline.
inline RegistrationResult register_pair(const Image& ref, const Image& flt,
                                        const SoftLabelMap& m_ref, const SoftLabelMap& m_flt,
                                        const RegConfig& cfg) {
    if (ref.width != flt.width || ref.height != flt.height)
        throw DimensionMismatch("register_pair: image dimensions differ");
    check_weights(cfg.weights);
    const bool use_seg = cfg.weights.lambda2 != 0.0;
    const bool use_lcc = cfg.weights.sim_mode != SimMode::mse;

    int levels = std::max(1, cfg.levels);
    const int min_dim_needed = std::max(use_lcc ? cfg.weights.lcc_window : 4, 4);
    while (levels > 1 &&
           (std::min(ref.width, ref.height) >> (levels - 1)) < min_dim_needed)
        --levels;

    std::vector<Image> refs{ref}, flts{flt};
    std::vector<SoftLabelMap> mrefs{m_ref}, mflts{m_flt};
    for (int l = 1; l < levels; ++l) {
        refs.push_back(downsample_half(refs.back()));
        flts.push_back(downsample_half(flts.back()));
        if (use_seg) {
            mrefs.push_back(downsample_half_soft(mrefs.back()));
            mflts.push_back(downsample_half_soft(mflts.back()));
        } else {
            mrefs.emplace_back();
            mflts.emplace_back();
        }
    }

    RegistrationResult res;
    DisplacementField field = make_field(refs[std::size_t(levels - 1)].width,
                                         refs[std::size_t(levels - 1)].height);
    bool plateau_finest = false;

    const DisplacementField zero_full = make_field(ref.width, ref.height);
    const LossReport baseline = loss_total(ref, flt, m_ref, m_flt, zero_full, cfg.weights);
    res.loss_trace.push_back(baseline);

    for (int lev = levels - 1; lev >= 0; --lev) {
        const Image& r = refs[std::size_t(lev)];
        const Image& f = flts[std::size_t(lev)];
        const SoftLabelMap& mr = mrefs[std::size_t(lev)];
        const SoftLabelMap& mf = mflts[std::size_t(lev)];

        res.level_starts.push_back(res.loss_trace.size());
        AdamState st = make_adam(field.u.size(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
        double best_total = std::numeric_limits<double>::infinity();
        std::vector<double> best_u = field.u;
        std::vector<double> best_history;
        bool plateaued = false;
        if (lev == 0 && baseline.total < best_total) {
            // never return a field scoring worse than the zero baseline
            best_total = baseline.total;
            best_u = zero_full.u;
        }

        for (int it = 0; it < cfg.iters_per_level; ++it) {
            LossGrad lg = grad_total(r, f, mr, mf, field, cfg.weights);
            if (!std::isfinite(lg.report.total))
                throw NonFiniteLoss("register_pair: non-finite loss, optimization diverged",
                                    res.loss_trace);
            res.loss_trace.push_back(lg.report);
            ++res.iterations_run;
            if (lg.report.total < best_total) {
                best_total = lg.report.total;
                best_u = field.u;
            }
            best_history.push_back(best_total);
            if (it >= cfg.plateau_window) {
                const double before = best_history[std::size_t(it - cfg.plateau_window)];
                if (before - best_total <
                    cfg.plateau_tol * std::max(std::abs(before), 1e-300)) {
                    plateaued = true;
                    break;
                }
            }
            adam_step(st, field.u, lg.grad.u);
        }

        field.u = best_u;
        res.loss_trace.push_back(loss_total(r, f, mr, mf, field, cfg.weights));
        if (lev == 0) {
            plateau_finest = plateaued;
        } else {
            field = resize_field(field, refs[std::size_t(lev - 1)].width,
                                 refs[std::size_t(lev - 1)].height, 2.0);
        }
    }

    res.field = std::move(field);
    res.registered = warp_image(flt, res.field);
    res.converged = plateau_finest;
    return res;
}

} // namespace srnet
