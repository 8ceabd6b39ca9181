#pragma once

#include "gazekit/types.hpp"

#include <Eigen/Core>

#include <span>

namespace gazekit {

/// General conic A x^2 + B xy + C y^2 + D x + E y + F = 0.
struct Conic {
  Eigen::Matrix<double, 6, 1> coeffs = Eigen::Matrix<double, 6, 1>::Zero();

  double eval(const Vec2& p) const;
  Vec2 gradient(const Vec2& p) const;
};

/// Conic of an ellipse, scaled so that the value at the center is -1.
Conic to_conic(const Ellipse& e);

/// Geometric parameters of an ellipse conic. Throws DegenerateError when the
/// conic is not a real ellipse.
Ellipse to_ellipse(const Conic& c);

/// Direct least-squares ellipse fit with the ellipse-specific constraint
/// 4AC - B^2 = 1, solved in the numerically stable reduced 3x3 form.
/// Points are centered and scaled before the solve.
/// Throws DegenerateError ("underdetermined") for fewer than 5 points or a
/// configuration without a unique ellipse solution.
Ellipse fit_ellipse(std::span<const Vec2> points);

/// Ramanujan's second approximation of the perimeter.
double circumference(const Ellipse& e);

/// First-order geometric distance |Q(p)| / |grad Q(p)|.
double sampson_distance(const Conic& c, const Vec2& p);

/// Root mean square Sampson distance of the points to the ellipse.
double rms_residual(const Ellipse& e, std::span<const Vec2> points);

/// Exact Euclidean distance from p to the ellipse curve.
double point_ellipse_distance(const Ellipse& e, const Vec2& p);

}  // namespace gazekit
