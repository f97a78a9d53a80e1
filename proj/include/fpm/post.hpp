#pragma once

#include "fpm/geometry.hpp"

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace fpm::post {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ProbeTrace {
    std::string name;
    Index node = kNone;
    Vec3 position = Vec3::Zero();
    std::vector<double> t; // ms
    std::vector<double> v; // mV
};

/// Throws Contract unless times are strictly increasing and uniformly
/// spaced (to 1e-9 relative).
void validate_trace(const ProbeTrace& trace);

struct ActivationMap {
    std::vector<double> lat; // ms, NaN where never activated
    double threshold = 0.0;  // mV
};

/// First upward crossing of `threshold`, linearly interpolated; NaN if the
/// trace never crosses.
double compute_lat(std::span<const double> t, std::span<const double> v, double threshold);
double compute_lat(const ProbeTrace& trace, double threshold);

/// Action potential duration at 90 % repolarization: from the time of the
/// steepest upstroke to the interpolated downward crossing of
/// V_peak - 0.9 (V_peak - V_rest), V_rest being the pre-upstroke minimum.
/// NaN for flat traces or incomplete repolarization.
double compute_apd90(std::span<const double> t, std::span<const double> v);
double compute_apd90(const ProbeTrace& trace);

/// distance / (lat_b - lat_a), cm/ms. Throws Domain if either LAT is NaN
/// or they coincide.
double compute_cv(double lat_a, double lat_b, double distance);
double compute_cv(const ActivationMap& map, const geometry::PointCloud& points, Index a, Index b);

/// (measured - reference) / reference. Throws Domain for a zero reference.
double relative_error(double measured, double reference);

/// Nodes nearest to the 25 % and 75 % positions along `axis`, on the line
/// through the center of the other axes of the bounding box.
std::pair<Index, Index> cv_probe_pair(const geometry::PointCloud& points, int axis, double lo_fraction = 0.25,
                                      double hi_fraction = 0.75);

/// Online LAT detection over a field history, one update per time step.
class ActivationTracker {
public:
    ActivationTracker() = default;
    ActivationTracker(const Eigen::VectorXd& v0, double t0, double threshold);

    void update(double t, const Eigen::VectorXd& v);
    const ActivationMap& map() const { return map_; }
    std::size_t activated() const { return activated_; }

private:
    ActivationMap map_;
    Eigen::VectorXd previous_;
    double t_previous_ = 0.0;
    std::size_t activated_ = 0;
};

} // namespace fpm::post
