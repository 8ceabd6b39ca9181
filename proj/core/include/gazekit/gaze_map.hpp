#pragma once

#include "gazekit/timing.hpp"
#include "gazekit/types.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazekit {

struct CalibrationPair {
  Vec2 pupil = Vec2::Zero();   // normalized eye coordinates
  Vec2 target = Vec2::Zero();  // normalized scene coordinates
  double timestamp = 0.0;
};

/// Number of monomials x^i y^j with i + j <= degree.
constexpr int monomial_count(int degree) { return (degree + 1) * (degree + 2) / 2; }

/// Monomial values ordered by total degree, then by descending power of x:
/// 1, x, y, x^2, xy, y^2, x^3, ...
Eigen::VectorXd monomials(const Vec2& p, int degree);

/// Pupil-to-scene transfer function: one bivariate polynomial per scene axis.
struct CalibrationModel {
  int degree = 2;
  Eigen::VectorXd coeffs_x;
  Eigen::VectorXd coeffs_y;
  double rms_residual = 0.0;

  Vec2 evaluate(const Vec2& pupil) const;
  /// Jacobian d(scene)/d(pupil) at p.
  Eigen::Matrix2d jacobian(const Vec2& pupil) const;
  /// Upper bound on |f(p) - f(q)| / |p - q| over the unit square.
  double lipschitz_bound() const;
  void validate() const;

  static CalibrationModel identity();
};

inline constexpr int kDefaultCalibrationDegree = 2;

/// Least-squares fit of each scene coordinate as a polynomial of the pupil
/// coordinates, solved by column-pivoting Householder QR.
/// Throws DataError when there are fewer pairs than monomials and
/// DegenerateError("degenerate calibration geometry") for rank deficiency.
CalibrationModel calibrate(std::span<const CalibrationPair> pairs, int degree = kDefaultCalibrationDegree);

/// Evaluates the model at p.norm_pos; confidence and timestamp pass through.
GazeDatum map_gaze(const PupilDatum& p, const CalibrationModel& model);

std::string to_json(const CalibrationModel& model, int indent = 2);
CalibrationModel calibration_from_json(const std::string& text);
void save_calibration(const std::filesystem::path& path, const CalibrationModel& model);
CalibrationModel load_calibration(const std::filesystem::path& path);

/// One stationary marker position of a calibration or test script.
struct MarkerSite {
  int index = 0;
  Vec2 target = Vec2::Zero();  // normalized scene coordinates
  double start = 0.0;          // s, marker appears / jumps here
  double end = 0.0;            // s
};

/// Nine screen-marker sites on a 3x3 grid inset by `margin`.
std::vector<MarkerSite> nine_point_schedule(double start, double dwell, double margin = 0.1);

struct MarkerObservation {
  double timestamp = 0.0;
  Vec2 norm_pos = Vec2::Zero();
};

struct ScreenMarkerOptions {
  double settle = 0.3;          // s discarded after each marker jump
  double min_confidence = 0.6;
  double max_gap = kDefaultMaxGap;
};

/// Pairs every usable marker observation with the temporally nearest pupil
/// datum. Observations inside the settle window after a jump and pairs with
/// low pupil confidence are dropped. Throws DataError naming each site that
/// ended up without pairs.
std::vector<CalibrationPair> screen_marker_session(std::span<const MarkerSite> sites,
                                                   std::span<const PupilDatum> pupils,
                                                   std::span<const MarkerObservation> markers,
                                                   const ScreenMarkerOptions& options = {});

enum class MarkerKind { collect, stop };

struct ConcentricMarker {
  Vec2 center = Vec2::Zero();  // pixels
  MarkerKind kind = MarkerKind::collect;
  int rings = 0;
};

/// Finds a concentric ring marker. The center is the support-weighted mean of
/// concentric ellipse fits; the kind comes from the polarity of the center
/// (dark center: collect, bright center: stop).
std::optional<ConcentricMarker> detect_concentric_marker(const GrayFrame& frame);

}  // namespace gazekit
