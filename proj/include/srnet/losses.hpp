#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/field.hpp"
#include "srnet/image.hpp"
#include "srnet/labels.hpp"
#include "srnet/parallel.hpp"
#include "srnet/warp.hpp"

namespace srnet {

enum class SimMode { mse, lcc, mse_plus_lcc };

inline std::string to_string(SimMode m) {
    switch (m) {
        case SimMode::mse: return "mse";
        case SimMode::lcc: return "lcc";
        default: return "mse_plus_lcc";
    }
}

inline SimMode sim_mode_from_string(const std::string& s) {
    if (s == "mse") return SimMode::mse;
    if (s == "lcc") return SimMode::lcc;
    if (s == "mse_plus_lcc") return SimMode::mse_plus_lcc;
    throw ConfigError("unknown sim_mode: " + s);
}

struct LossWeights {
    double lambda1 = 0.95; // smoothness
    double lambda2 = 1.05; // segmentation consistency
    SimMode sim_mode = SimMode::mse_plus_lcc;
    int lcc_window = 9;
};

inline void check_weights(const LossWeights& w) {
    if (w.lambda1 < 0.0 || w.lambda2 < 0.0)
        throw Error("loss weights must be non-negative");
    if (w.lcc_window < 3 || w.lcc_window % 2 == 0)
        throw Error("lcc_window must be odd and >= 3");
}

/// One evaluation of the composite loss. The smooth entry is the diffusion
/// sum divided by the pixel count, which keeps the decomposition identity
/// total = sim + lambda1 * smooth + lambda2 * seg comparable across pyramid
/// resolutions; loss_smooth() itself returns the raw sum.
struct LossReport {
    double total = 0.0;
    double sim = 0.0;
    double smooth = 0.0;
    double seg = 0.0;
};

// ---------------------------------------------------------------------------
// individual terms
// ---------------------------------------------------------------------------

inline double loss_mse(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("loss_mse: image dimensions differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / double(a.data.size());
}

namespace detail {

/// summed-area table with a zero border row/column
struct Integral {
    int width = 0, height = 0;
    std::vector<double> s; // (width+1) x (height+1)

    explicit Integral(const Image& img) : width(img.width), height(img.height) {
        s.assign(std::size_t(width + 1) * (height + 1), 0.0);
        for (int y = 0; y < height; ++y) {
            double row = 0.0;
            for (int x = 0; x < width; ++x) {
                row += img.at(x, y);
                at(x + 1, y + 1) = at(x + 1, y) + row;
            }
        }
    }

    double& at(int x, int y) { return s[std::size_t(y) * (width + 1) + x]; }
    double at(int x, int y) const { return s[std::size_t(y) * (width + 1) + x]; }

    /// inclusive rectangle sum, with coordinates clamped to the image
    double rect(int x0, int y0, int x1, int y1) const {
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, width - 1);
        y1 = std::min(y1, height - 1);
        if (x0 > x1 || y0 > y1) return 0.0;
        return at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
    }
};

inline Image product_image(const Image& a, const Image& b) {
    Image out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

/// Windowed squared normalized correlation via summed-area tables.
/// Returns 1 - mean(CC^2) over fully-interior window centers; optionally
/// accumulates dLoss/dB into grad_b. Windows whose per-pixel variance in
/// either image falls below 1e-10 contribute CC = 0.
inline double lcc_core(const Image& a, const Image& b, int window, Image* grad_b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("loss_lcc: image dimensions differ");
    if (window > std::min(a.width, a.height))
        throw WindowTooLarge("loss_lcc: window exceeds image size");
    const int r = window / 2;
    const int n = window * window;
    const double var_eps = 1e-10;

    const Integral ia(a), ib(b), ia2(product_image(a, a)), ib2(product_image(b, b)),
        iab(product_image(a, b));

    const int cw = a.width - 2 * r, ch = a.height - 2 * r;
    const double m_count = double(cw) * ch;

    // per-center coefficient fields for the gradient back-pass
    Image alpha, alpha_ma, gamma, gamma_mb;
    if (grad_b) {
        alpha = make_image(a.width, a.height);
        alpha_ma = make_image(a.width, a.height);
        gamma = make_image(a.width, a.height);
        gamma_mb = make_image(a.width, a.height);
    }

    double acc = 0.0;
    for (int cy = r; cy < a.height - r; ++cy) {
        for (int cx = r; cx < a.width - r; ++cx) {
            const double sa = ia.rect(cx - r, cy - r, cx + r, cy + r);
            const double sb = ib.rect(cx - r, cy - r, cx + r, cy + r);
            const double sa2 = ia2.rect(cx - r, cy - r, cx + r, cy + r);
            const double sb2 = ib2.rect(cx - r, cy - r, cx + r, cy + r);
            const double sab = iab.rect(cx - r, cy - r, cx + r, cy + r);
            const double cov = sab - sa * sb / n;
            const double va = sa2 - sa * sa / n;
            const double vb = sb2 - sb * sb / n;
            if (va / n <= var_eps || vb / n <= var_eps) continue; // CC := 0
            const double cc2 = (cov * cov) / (va * vb);
            acc += cc2;
            if (grad_b) {
                const double al = cov / (va * vb);
                const double ga = (cov * cov) / (va * vb * vb);
                alpha.at(cx, cy) = al;
                alpha_ma.at(cx, cy) = al * (sa / n);
                gamma.at(cx, cy) = ga;
                gamma_mb.at(cx, cy) = ga * (sb / n);
            }
        }
    }
    const double loss = 1.0 - acc / m_count;

    if (grad_b) {
        const Integral s_alpha(alpha), s_alpha_ma(alpha_ma), s_gamma(gamma), s_gamma_mb(gamma_mb);
        parallel_for(a.height, [&](std::int64_t y) {
            for (int x = 0; x < a.width; ++x) {
                const double sum_a = s_alpha.rect(x - r, int(y) - r, x + r, int(y) + r);
                const double sum_ama = s_alpha_ma.rect(x - r, int(y) - r, x + r, int(y) + r);
                const double sum_g = s_gamma.rect(x - r, int(y) - r, x + r, int(y) + r);
                const double sum_gmb = s_gamma_mb.rect(x - r, int(y) - r, x + r, int(y) + r);
                grad_b->at(x, int(y)) +=
                    -(2.0 / m_count) *
                    (a.at(x, int(y)) * sum_a - sum_ama - b.data[std::size_t(y) * a.width + x] * sum_g +
                     sum_gmb);
            }
        });
    }
    return loss;
}

} // namespace detail

inline double loss_lcc(const Image& a, const Image& b, int window) {
    if (window < 3 || window % 2 == 0)
        throw Error("loss_lcc: window must be odd and >= 3");
    return detail::lcc_core(a, b, window, nullptr);
}

/// Diffusion regularizer: sum over pixels of the squared forward differences
/// of both displacement components (positions without a forward neighbor
/// contribute nothing).
inline double loss_smooth(const DisplacementField& field) {
    if (field.width < 2 || field.height < 2)
        throw FieldTooSmall("loss_smooth: field must be at least 2x2");
    double acc = 0.0;
    for (int y = 0; y < field.height; ++y)
        for (int x = 0; x < field.width; ++x) {
            if (x + 1 < field.width) {
                const double dx = field.ux(x + 1, y) - field.ux(x, y);
                const double dy = field.uy(x + 1, y) - field.uy(x, y);
                acc += dx * dx + dy * dy;
            }
            if (y + 1 < field.height) {
                const double dx = field.ux(x, y + 1) - field.ux(x, y);
                const double dy = field.uy(x, y + 1) - field.uy(x, y);
                acc += dx * dx + dy * dy;
            }
        }
    return acc;
}

/// Mean squared difference between the reference soft map and the warped
/// floating soft map, over pixels and classes.
inline double loss_seg(const SoftLabelMap& m_ref, const SoftLabelMap& m_flt,
                       const DisplacementField& field) {
    if (m_ref.width != m_flt.width || m_ref.height != m_flt.height)
        throw DimensionMismatch("loss_seg: map dimensions differ");
    if (m_ref.k != m_flt.k)
        throw ClassCountMismatch("loss_seg: class counts differ");
    const SoftLabelMap warped = warp_soft_labels(m_flt, field);
    double acc = 0.0;
    for (std::size_t i = 0; i < m_ref.planes.size(); ++i) {
        const double d = m_ref.planes[i] - warped.planes[i];
        acc += d * d;
    }
    return acc / (double(m_ref.pixels()) * m_ref.k);
}

// ---------------------------------------------------------------------------
// composite loss and analytic gradient
// ---------------------------------------------------------------------------

struct LossGrad {
    LossReport report;
    DisplacementField grad;
};

namespace detail {

inline LossGrad eval_composite(const Image& ref, const Image& flt, const SoftLabelMap& m_ref,
                               const SoftLabelMap& m_flt, const DisplacementField& field,
                               const LossWeights& w, bool want_grad) {
    check_weights(w);
    if (ref.width != flt.width || ref.height != flt.height || ref.width != field.width ||
        ref.height != field.height)
        throw DimensionMismatch("loss_total: image and field dimensions differ");
    const bool use_seg = w.lambda2 != 0.0;
    if (use_seg) {
        if (m_ref.width != ref.width || m_ref.height != ref.height ||
            m_flt.width != ref.width || m_flt.height != ref.height)
            throw DimensionMismatch("loss_total: label map dimensions differ");
        if (m_ref.k != m_flt.k)
            throw ClassCountMismatch("loss_total: label map class counts differ");
    }
    const bool use_mse = w.sim_mode != SimMode::lcc;
    const bool use_lcc = w.sim_mode != SimMode::mse;
    if (use_lcc && w.lcc_window > std::min(ref.width, ref.height))
        throw WindowTooLarge("loss_total: lcc window exceeds image size");

    const int width = ref.width, height = ref.height;
    const std::size_t n = std::size_t(width) * height;
    const int k = m_ref.k;

    LossGrad out;
    out.grad = make_field(width, height);

    // warped image, sampler jacobian, and the MSE + seg terms in one pass
    Image warped = make_image(width, height);
    Image jac_x = make_image(width, height);
    Image jac_y = make_image(width, height);
    Image d_sim = make_image(width, height); // dL_sim / d(warped)

    const int chunks = std::min<int>(max_threads(), std::max(1, height));
    std::vector<double> mse_part(std::size_t(chunks), 0.0);
    std::vector<double> seg_part(std::size_t(chunks), 0.0);

    parallel_chunks(height, [&](int chunk, std::int64_t yb, std::int64_t ye) {
        double mse_acc = 0.0, seg_acc = 0.0;
        std::vector<double> planes(std::size_t(std::max(k, 1)));
        std::vector<double> errs(std::size_t(std::max(k, 1)));
        for (int y = int(yb); y < int(ye); ++y) {
            for (int x = 0; x < width; ++x) {
                const auto t = detail::make_tap(x + field.ux(x, y), y + field.uy(x, y), width, height);
                const double wv = detail::tap_sample(t, flt);
                warped.at(x, y) = wv;
                if (want_grad) {
                    double gx, gy;
                    detail::tap_gradient(t, flt, gx, gy);
                    jac_x.at(x, y) = gx;
                    jac_y.at(x, y) = gy;
                }
                if (use_mse) {
                    const double dres = wv - ref.at(x, y);
                    mse_acc += dres * dres;
                    if (want_grad) d_sim.at(x, y) = 2.0 * dres / double(n);
                }
                if (use_seg) {
                    double s = 0.0;
                    for (int c = 0; c < k; ++c) {
                        planes[std::size_t(c)] = detail::tap_sample_plane(t, m_flt, c);
                        s += planes[std::size_t(c)];
                    }
                    const double inv_s = s > 0.0 ? 1.0 / s : 0.0;
                    double cbar = 0.0;
                    for (int c = 0; c < k; ++c) {
                        const double m = planes[std::size_t(c)] * inv_s;
                        const double e = 2.0 * (m - m_ref.at(x, y, c)) / (double(n) * k);
                        seg_acc += (m - m_ref.at(x, y, c)) * (m - m_ref.at(x, y, c));
                        errs[std::size_t(c)] = e;
                        cbar += e * m;
                    }
                    if (want_grad) {
                        double gx_seg = 0.0, gy_seg = 0.0;
                        for (int c = 0; c < k; ++c) {
                            const double dldv = (errs[std::size_t(c)] - cbar) * inv_s;
                            double pgx, pgy;
                            detail::tap_plane_gradient(t, m_flt, c, pgx, pgy);
                            gx_seg += dldv * pgx;
                            gy_seg += dldv * pgy;
                        }
                        out.grad.ux(x, y) += w.lambda2 * gx_seg;
                        out.grad.uy(x, y) += w.lambda2 * gy_seg;
                    }
                }
            }
        }
        mse_part[std::size_t(chunk)] = mse_acc;
        seg_part[std::size_t(chunk)] = seg_acc;
    });

    double sim = 0.0;
    if (use_mse) {
        double mse = 0.0;
        for (double v : mse_part) mse += v;
        sim += mse / double(n);
    }
    if (use_seg) {
        double seg = 0.0;
        for (double v : seg_part) seg += v;
        out.report.seg = seg / (double(n) * k);
    }
    if (use_lcc)
        sim += detail::lcc_core(ref, warped, w.lcc_window, want_grad ? &d_sim : nullptr);
    out.report.sim = sim;

    // diffusion term, normalized per pixel inside the composite
    out.report.smooth = loss_smooth(field) / double(n);

    if (want_grad) {
        parallel_for(height, [&](std::int64_t y) {
            for (int x = 0; x < width; ++x) {
                // similarity terms through the sampler jacobian
                out.grad.ux(x, int(y)) += d_sim.at(x, int(y)) * jac_x.at(x, int(y));
                out.grad.uy(x, int(y)) += d_sim.at(x, int(y)) * jac_y.at(x, int(y));
                // adjoint of forward differencing (negative Laplacian stencil)
                for (int comp = 0; comp < 2; ++comp) {
                    const auto uc = [&](int xx, int yy) {
                        return field.u[2 * (std::size_t(yy) * width + xx) + comp];
                    };
                    double g = 0.0;
                    const double u0 = uc(x, int(y));
                    if (x + 1 < width) g += u0 - uc(x + 1, int(y));
                    if (x - 1 >= 0) g += u0 - uc(x - 1, int(y));
                    if (int(y) + 1 < height) g += u0 - uc(x, int(y) + 1);
                    if (int(y) - 1 >= 0) g += u0 - uc(x, int(y) - 1);
                    out.grad.u[2 * (std::size_t(y) * width + x) + comp] +=
                        w.lambda1 * 2.0 * g / double(n);
                }
            }
        });
    }

    out.report.total = out.report.sim + w.lambda1 * out.report.smooth + w.lambda2 * out.report.seg;
    return out;
}

} // namespace detail

inline LossReport loss_total(const Image& ref, const Image& flt, const SoftLabelMap& m_ref,
                             const SoftLabelMap& m_flt, const DisplacementField& field,
                             const LossWeights& w) {
    return detail::eval_composite(ref, flt, m_ref, m_flt, field, w, false).report;
}

inline LossGrad grad_total(const Image& ref, const Image& flt, const SoftLabelMap& m_ref,
                           const SoftLabelMap& m_flt, const DisplacementField& field,
                           const LossWeights& w) {
    return detail::eval_composite(ref, flt, m_ref, m_flt, field, w, true);
}

inline std::string loss_report_jsonl(int iter, const LossReport& r) {
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "{\"iter\":%d,\"total\":%.17g,\"sim\":%.17g,\"smooth\":%.17g,\"seg\":%.17g}", iter,
                  r.total, r.sim, r.smooth, r.seg);
    return buf;
}

} // namespace srnet
