#pragma once

#include "gazekit/types.hpp"

#include <Eigen/Core>

#include <span>

namespace gazekit {

/// Planar projective map, normalized so that H(2,2) == 1 when it is nonzero.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) {}
  /// Throws DegenerateError for a singular matrix.
  explicit Homography(const Eigen::Matrix3d& h);

  const Eigen::Matrix3d& matrix() const noexcept { return h_; }

  /// Throws DegenerateError("degenerate projection") when p maps to the line
  /// at infinity.
  Vec2 apply(const Vec2& p) const;
  Homography inverse() const;
  Homography operator*(const Homography& rhs) const;

  /// Reprojection RMS recorded by estimate_homography.
  double rms_error = 0.0;

 private:
  Eigen::Matrix3d h_;
};

/// Normalized DLT over all correspondences (src -> dst), solved by SVD.
/// Throws DegenerateError for fewer than 4 pairs, three collinear points in a
/// minimal set, or a rank-deficient system.
Homography estimate_homography(std::span<const Vec2> src, std::span<const Vec2> dst);

}  // namespace gazekit
