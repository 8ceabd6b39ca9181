#pragma once

#include "gazekit/types.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gazekit {

/// One line of gaze.csv. All fields are 64-bit floats.
struct RecordRow {
  double gaze_x = 0.0;
  double gaze_y = 0.0;
  double pupil_x = 0.0;
  double pupil_y = 0.0;
  double timestamp = 0.0;
  double confidence = 0.0;

  friend bool operator==(const RecordRow&, const RecordRow&) = default;
};

inline constexpr std::string_view kGazeCsvHeader = "gaze x,gaze y,pupil x,pupil y,timestamp,confidence";
inline constexpr std::string_view kGazeCsvName = "gaze.csv";

/// Row as CSV without the line ending. Positions and confidence use six
/// significant digits (%.6g); the timestamp uses six decimals (%.6f).
std::string format_row(const RecordRow& row);

/// Parses one data line. `source` and `line` only label the ParseError.
RecordRow parse_row(std::string_view text, const std::string& source = "<row>", std::size_t line = 1);

/// Empty when the row can be written, otherwise the reason it is rejected.
std::string check_row(const RecordRow& row);

/// Gaze row with the timestamp taken relative to `epoch`.
RecordRow make_row(const GazeDatum& gaze, double epoch = 0.0);

/// Streams gaze rows into <dir>/gaze.csv. Rows with non-finite fields or a
/// confidence outside [0, 1] are skipped and reported in diagnostics().
class RecordingWriter {
 public:
  explicit RecordingWriter(const std::filesystem::path& dir);
  ~RecordingWriter();
  RecordingWriter(const RecordingWriter&) = delete;
  RecordingWriter& operator=(const RecordingWriter&) = delete;

  /// False when the row was rejected.
  bool write(const RecordRow& row);
  /// Writes <dir>/eye_timestamps.csv or <dir>/world_timestamps.csv.
  void write_timestamps(StreamId stream, std::span<const double> timestamps);
  /// Flushes and closes gaze.csv; throws IoError when the flush fails.
  void close();

  std::size_t rows_written() const noexcept { return written_; }
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::filesystem::path dir_;
  std::ofstream gaze_;
  std::size_t written_ = 0;
  std::size_t seen_ = 0;
  std::vector<std::string> diagnostics_;
};

struct WriteSummary {
  std::size_t written = 0;
  std::vector<std::string> diagnostics;
};

/// One-shot writer around RecordingWriter.
WriteSummary write_recording(const std::filesystem::path& dir, std::span<const RecordRow> rows,
                             std::span<const double> eye_timestamps = {},
                             std::span<const double> world_timestamps = {});

/// Reads <dir>/gaze.csv (or the file itself when `path` is a file). The header
/// must match exactly; a malformed line raises ParseError with its number.
std::vector<RecordRow> read_recording(const std::filesystem::path& path);

std::filesystem::path timestamps_path(const std::filesystem::path& dir, StreamId stream);
std::vector<double> read_timestamps(const std::filesystem::path& path);

/// Numeric CSV with a fixed header, used for datasets and sessions.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reads a CSV whose header equals `expected` and whose fields are all numbers.
/// With `trailing_columns`, extra columns after `expected` are parsed and kept.
CsvTable read_numeric_csv(const std::filesystem::path& path, std::span<const std::string> expected,
                          bool trailing_columns = false);
/// Writes values with %.17g so that they read back bit-identical.
void write_numeric_csv(const std::filesystem::path& path, std::span<const std::string> header,
                       std::span<const std::vector<double>> rows);

inline constexpr std::string_view kPupilCsvName = "pupil.csv";

/// Detector output, one row per frame: timestamp, confidence, norm_x, norm_y,
/// center_x, center_y, a, b, theta. Frames without a pupil carry confidence 0
/// and NaN geometry.
void write_pupil_csv(const std::filesystem::path& path, std::span<const PupilDatum> pupils);
/// Extra trailing columns (e.g. simulation truth) are ignored.
std::vector<PupilDatum> read_pupil_csv(const std::filesystem::path& path);
PupilDatum missing_pupil(double timestamp);

}  // namespace gazekit
