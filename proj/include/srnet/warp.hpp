#pragma once

#include <algorithm>
#include <cmath>

#include "srnet/errors.hpp"
#include "srnet/field.hpp"
#include "srnet/image.hpp"
#include "srnet/labels.hpp"
#include "srnet/parallel.hpp"

namespace srnet {

namespace detail {

/// One bilinear sample site: clamped cell corners, fractional weights, and
/// whether the pre-clamp coordinate was inside the domain (the clamp has
/// zero derivative outside, so gradients vanish there).
struct BilinearTap {
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    double fx = 0.0, fy = 0.0;
    double dx_active = 1.0;
    double dy_active = 1.0;
};

inline BilinearTap make_tap(double sx, double sy, int w, int h) {
    BilinearTap t;
    t.dx_active = (sx >= 0.0 && sx <= double(w - 1)) ? 1.0 : 0.0;
    t.dy_active = (sy >= 0.0 && sy <= double(h - 1)) ? 1.0 : 0.0;
    const double cx = std::clamp(sx, 0.0, double(w - 1));
    const double cy = std::clamp(sy, 0.0, double(h - 1));
    t.x0 = std::min(int(std::floor(cx)), std::max(w - 2, 0));
    t.y0 = std::min(int(std::floor(cy)), std::max(h - 2, 0));
    t.x1 = std::min(t.x0 + 1, w - 1);
    t.y1 = std::min(t.y0 + 1, h - 1);
    t.fx = cx - t.x0;
    t.fy = cy - t.y0;
    return t;
}

inline double tap_sample(const BilinearTap& t, const Image& img) {
    return (1.0 - t.fx) * (1.0 - t.fy) * img.at(t.x0, t.y0) +
           t.fx * (1.0 - t.fy) * img.at(t.x1, t.y0) +
           (1.0 - t.fx) * t.fy * img.at(t.x0, t.y1) +
           t.fx * t.fy * img.at(t.x1, t.y1);
}

/// d(sample)/d(sx) and d(sample)/d(sy), including the clamp's dead zone.
inline void tap_gradient(const BilinearTap& t, const Image& img, double& gx, double& gy) {
    gx = t.dx_active * ((1.0 - t.fy) * (img.at(t.x1, t.y0) - img.at(t.x0, t.y0)) +
                       t.fy * (img.at(t.x1, t.y1) - img.at(t.x0, t.y1)));
    gy = t.dy_active * ((1.0 - t.fx) * (img.at(t.x0, t.y1) - img.at(t.x0, t.y0)) +
                       t.fx * (img.at(t.x1, t.y1) - img.at(t.x1, t.y0)));
}

/// Sample one plane of a soft label map through a tap.
inline double tap_sample_plane(const BilinearTap& t, const SoftLabelMap& m, int c) {
    return (1.0 - t.fx) * (1.0 - t.fy) * m.at(t.x0, t.y0, c) +
           t.fx * (1.0 - t.fy) * m.at(t.x1, t.y0, c) +
           (1.0 - t.fx) * t.fy * m.at(t.x0, t.y1, c) +
           t.fx * t.fy * m.at(t.x1, t.y1, c);
}

inline void tap_plane_gradient(const BilinearTap& t, const SoftLabelMap& m, int c,
                               double& gx, double& gy) {
    gx = t.dx_active * ((1.0 - t.fy) * (m.at(t.x1, t.y0, c) - m.at(t.x0, t.y0, c)) +
                       t.fy * (m.at(t.x1, t.y1, c) - m.at(t.x0, t.y1, c)));
    gy = t.dy_active * ((1.0 - t.fx) * (m.at(t.x0, t.y1, c) - m.at(t.x0, t.y0, c)) +
                       t.fx * (m.at(t.x1, t.y1, c) - m.at(t.x1, t.y0, c)));
}

} // namespace detail

/// Backward warp: output(p) = bilinear sample of img at p + u(p), with
/// sample coordinates clamped to the image rectangle.
inline Image warp_image(const Image& img, const DisplacementField& field) {
    if (img.width != field.width || img.height != field.height)
        throw DimensionMismatch("warp_image: image and field dimensions differ");
    Image out = make_image(img.width, img.height);
    parallel_for(img.height, [&](std::int64_t y) {
        for (int x = 0; x < img.width; ++x) {
            const auto t = detail::make_tap(x + field.ux(x, int(y)), y + field.uy(x, int(y)),
                                            img.width, img.height);
            out.at(x, int(y)) = detail::tap_sample(t, img);
        }
    });
    return out;
}

/// Per-pixel derivatives of the warped image with respect to ux and uy.
struct WarpJacobian {
    Image d_ux;
    Image d_uy;
};

inline WarpJacobian warp_jacobian(const Image& img, const DisplacementField& field) {
    if (img.width != field.width || img.height != field.height)
        throw DimensionMismatch("warp_jacobian: image and field dimensions differ");
    WarpJacobian jac{make_image(img.width, img.height), make_image(img.width, img.height)};
    parallel_for(img.height, [&](std::int64_t y) {
        for (int x = 0; x < img.width; ++x) {
            const auto t = detail::make_tap(x + field.ux(x, int(y)), y + field.uy(x, int(y)),
                                            img.width, img.height);
            double gx, gy;
            detail::tap_gradient(t, img, gx, gy);
            jac.d_ux.at(x, int(y)) = gx;
            jac.d_uy.at(x, int(y)) = gy;
        }
    });
    return jac;
}

/// Warp each class plane independently, then renormalize per pixel so the
/// probabilities sum to 1.
inline SoftLabelMap warp_soft_labels(const SoftLabelMap& labels, const DisplacementField& field) {
    if (labels.width != field.width || labels.height != field.height)
        throw DimensionMismatch("warp_soft_labels: label map and field dimensions differ");
    SoftLabelMap out = make_soft_label_map(labels.width, labels.height, labels.k);
    parallel_for(labels.height, [&](std::int64_t y) {
        for (int x = 0; x < labels.width; ++x) {
            const auto t = detail::make_tap(x + field.ux(x, int(y)), y + field.uy(x, int(y)),
                                            labels.width, labels.height);
            double sum = 0.0;
            for (int c = 0; c < labels.k; ++c) {
                const double v = detail::tap_sample_plane(t, labels, c);
                out.at(x, int(y), c) = v;
                sum += v;
            }
            if (sum > 0.0)
                for (int c = 0; c < labels.k; ++c)
                    out.at(x, int(y), c) /= sum;
        }
    });
    return out;
}

/// Nearest-neighbor label transfer: out(p) = labels at round(p + u(p)),
/// clamped to the grid. Used for hard masks, where interpolation would
/// invent classes.
inline LabelMap warp_labels_nearest(const LabelMap& labels, const DisplacementField& field) {
    if (labels.width != field.width || labels.height != field.height)
        throw DimensionMismatch("warp_labels_nearest: label map and field dimensions differ");
    LabelMap out = make_label_map(labels.width, labels.height, labels.k);
    for (int y = 0; y < labels.height; ++y)
        for (int x = 0; x < labels.width; ++x) {
            const int sx = std::clamp(int(std::lround(x + field.ux(x, y))), 0, labels.width - 1);
            const int sy = std::clamp(int(std::lround(y + field.uy(x, y))), 0, labels.height - 1);
            out.at(x, y) = labels.at(sx, sy);
        }
    return out;
}

/// Move each point by the field interpolated at the point; the frame flips
/// because p + u(p) expresses the reference-frame point in floating space.
inline LandmarkSet warp_points(const LandmarkSet& pts, const DisplacementField& field) {
    LandmarkSet out;
    out.frame = pts.frame == Frame::reference ? Frame::floating : Frame::reference;
    out.points.reserve(pts.points.size());
    for (const auto& p : pts.points) {
        if (p.x < 0.0 || p.x > field.width - 1 || p.y < 0.0 || p.y > field.height - 1)
            throw PointOutOfDomain("warp_points: point outside field domain");
        const auto t = detail::make_tap(p.x, p.y, field.width, field.height);
        const double w00 = (1.0 - t.fx) * (1.0 - t.fy), w10 = t.fx * (1.0 - t.fy);
        const double w01 = (1.0 - t.fx) * t.fy, w11 = t.fx * t.fy;
        const double ux = w00 * field.ux(t.x0, t.y0) + w10 * field.ux(t.x1, t.y0) +
                          w01 * field.ux(t.x0, t.y1) + w11 * field.ux(t.x1, t.y1);
        const double uy = w00 * field.uy(t.x0, t.y0) + w10 * field.uy(t.x1, t.y0) +
                          w01 * field.uy(t.x0, t.y1) + w11 * field.uy(t.x1, t.y1);
        out.points.push_back({p.x + ux, p.y + uy});
    }
    return out;
}

} // namespace srnet
