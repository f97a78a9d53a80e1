#include "fpm/post.hpp"

#include <algorithm>
#include <cmath>

namespace fpm::post {

void validate_trace(const ProbeTrace& trace)
{
    if (trace.t.size() != trace.v.size()) {
        fail(ErrorKind::Contract, "trace '" + trace.name + "' has mismatched time and value lengths");
    }
    if (trace.t.size() < 2) {
        return;
    }
    const double step = trace.t[1] - trace.t[0];
    for (std::size_t k = 1; k < trace.t.size(); ++k) {
        const double d = trace.t[k] - trace.t[k - 1];
        if (!(d > 0.0)) {
            fail(ErrorKind::Contract, "trace '" + trace.name + "' times are not strictly increasing");
        }
        if (std::abs(d - step) > 1e-9 * std::max(1.0, std::abs(trace.t[k]))) {
            fail(ErrorKind::Contract, "trace '" + trace.name + "' is not uniformly sampled");
        }
    }
}

double compute_lat(std::span<const double> t, std::span<const double> v, double threshold)
{
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k - 1] < threshold && v[k] >= threshold) {
            return t[k - 1] + (threshold - v[k - 1]) / (v[k] - v[k - 1]) * (t[k] - t[k - 1]);
        }
    }
    return kNaN;
}

double compute_lat(const ProbeTrace& trace, double threshold) { return compute_lat(trace.t, trace.v, threshold); }

double compute_apd90(std::span<const double> t, std::span<const double> v)
{
    if (v.size() < 3 || t.size() != v.size()) {
        return kNaN;
    }
    std::size_t up = 0;
    double best_slope = 0.0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
        const double slope = (v[k + 1] - v[k]) / (t[k + 1] - t[k]);
        if (slope > best_slope) {
            best_slope = slope;
            up = k;
        }
    }
    if (!(best_slope > 0.0)) {
        return kNaN;
    }
    const double activation = 0.5 * (t[up] + t[up + 1]);
    const double rest = *std::min_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(up) + 1);
    const auto peak_it = std::max_element(v.begin() + static_cast<std::ptrdiff_t>(up) + 1, v.end());
    const double peak = *peak_it;
    if (!(peak > rest)) {
        return kNaN;
    }
    const double level = peak - 0.9 * (peak - rest);
    for (auto k = static_cast<std::size_t>(peak_it - v.begin()) + 1; k < v.size(); ++k) {
        if (v[k - 1] > level && v[k] <= level) {
            const double crossing = t[k - 1] + (v[k - 1] - level) / (v[k - 1] - v[k]) * (t[k] - t[k - 1]);
            return crossing - activation;
        }
    }
    return kNaN;
}

double compute_apd90(const ProbeTrace& trace) { return compute_apd90(trace.t, trace.v); }

double compute_cv(double lat_a, double lat_b, double distance)
{
    if (std::isnan(lat_a) || std::isnan(lat_b)) {
        fail(ErrorKind::Domain, "conduction velocity needs both probes activated");
    }
    if (lat_a == lat_b) {
        fail(ErrorKind::Domain, "probes activated simultaneously");
    }
    return distance / (lat_b - lat_a);
}

double compute_cv(const ActivationMap& map, const geometry::PointCloud& points, Index a, Index b)
{
    const double distance = (points.positions[b] - points.positions[a]).norm();
    return compute_cv(map.lat[a], map.lat[b], distance);
}

double relative_error(double measured, double reference)
{
    if (reference == 0.0) {
        fail(ErrorKind::Domain, "relative error against a zero reference");
    }
    return (measured - reference) / reference;
}

std::pair<Index, Index> cv_probe_pair(const geometry::PointCloud& points, int axis, double lo_fraction,
                                      double hi_fraction)
{
    if (points.size() == 0 || axis < 0 || axis >= points.dim) {
        fail(ErrorKind::Contract, "invalid axis for conduction velocity probes");
    }
    Vec3 lo = points.positions.front();
    Vec3 hi = lo;
    for (const auto& p : points.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Vec3 a = 0.5 * (lo + hi);
    Vec3 b = a;
    a[axis] = lo[axis] + lo_fraction * (hi[axis] - lo[axis]);
    b[axis] = lo[axis] + hi_fraction * (hi[axis] - lo[axis]);
    return {geometry::nearest_point(points, a), geometry::nearest_point(points, b)};
}

ActivationTracker::ActivationTracker(const Eigen::VectorXd& v0, double t0, double threshold)
    : previous_(v0), t_previous_(t0)
{
    map_.threshold = threshold;
    map_.lat.assign(static_cast<std::size_t>(v0.size()), kNaN);
}

void ActivationTracker::update(double t, const Eigen::VectorXd& v)
{
    const double thr = map_.threshold;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::isnan(map_.lat[i]) && previous_[i] < thr && v[i] >= thr) {
            map_.lat[i] = t_previous_ + (thr - previous_[i]) / (v[i] - previous_[i]) * (t - t_previous_);
            ++activated_;
        }
    }
    previous_ = v;
    t_previous_ = t;
}

} // namespace fpm::post
