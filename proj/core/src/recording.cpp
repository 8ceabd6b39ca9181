#include "gazekit/recording.hpp"

#include "gazekit/error.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace gazekit {

namespace {

// std::from_chars for one CSV field; the whole field must be consumed.
bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Lines without their '\n'; a missing final newline is tolerated.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

const char* stream_file(StreamId s) { return s == StreamId::eye ? "eye_timestamps.csv" : "world_timestamps.csv"; }

}  // namespace

std::string format_row(const RecordRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g,%.6f,%.6g", r.gaze_x, r.gaze_y, r.pupil_x,
                r.pupil_y, r.timestamp, r.confidence);
  return buf;
}

RecordRow parse_row(std::string_view text, const std::string& source, std::size_t line) {
  if (!text.empty() && text.back() == '\r') throw ParseError(source, line, "CR line ending");
  const auto fields = split(text);
  if (fields.size() != 6)
    throw ParseError(source, line, "expected 6 fields, found " + std::to_string(fields.size()));
  double v[6];
  for (int i = 0; i < 6; ++i)
    if (!parse_double(fields[i], v[i]))
      throw ParseError(source, line, "field " + std::to_string(i + 1) + " is not a number: '" +
                                         std::string(fields[i]) + "'");
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

std::string check_row(const RecordRow& r) {
  const double v[6] = {r.gaze_x, r.gaze_y, r.pupil_x, r.pupil_y, r.timestamp, r.confidence};
  static const char* names[6] = {"gaze x", "gaze y", "pupil x", "pupil y", "timestamp", "confidence"};
  for (int i = 0; i < 6; ++i)
    if (!std::isfinite(v[i])) return std::string(names[i]) + " is not finite";
  if (r.confidence < 0.0 || r.confidence > 1.0) return "confidence outside [0, 1]";
  return {};
}

RecordRow make_row(const GazeDatum& g, double epoch) {
  return {g.norm_pos.x(), g.norm_pos.y(), g.base.norm_pos.x(), g.base.norm_pos.y(),
          g.timestamp - epoch, g.base.confidence};
}

RecordingWriter::RecordingWriter(const std::filesystem::path& dir) : dir_(dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  const auto path = dir / kGazeCsvName;
  gaze_.open(path, std::ios::binary | std::ios::trunc);
  if (!gaze_) throw IoError(path.string(), "cannot open for writing");
  gaze_ << kGazeCsvHeader << '\n';
}

RecordingWriter::~RecordingWriter() {
  if (gaze_.is_open()) gaze_.close();
}

bool RecordingWriter::write(const RecordRow& row) {
  ++seen_;
  if (auto why = check_row(row); !why.empty()) {
    diagnostics_.push_back("row " + std::to_string(seen_) + " rejected: " + why);
    return false;
  }
  gaze_ << format_row(row) << '\n';
  ++written_;
  return true;
}

void RecordingWriter::write_timestamps(StreamId stream, std::span<const double> ts) {
  const auto path = timestamps_path(dir_, stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << "timestamp\n";
  char buf[64];
  for (double t : ts) {
    std::snprintf(buf, sizeof buf, "%.6f\n", t);
    out << buf;
  }
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

void RecordingWriter::close() {
  if (!gaze_.is_open()) return;
  gaze_.flush();
  const bool ok = static_cast<bool>(gaze_);
  gaze_.close();
  if (!ok) throw IoError((dir_ / kGazeCsvName).string(), "write failed");
}

WriteSummary write_recording(const std::filesystem::path& dir, std::span<const RecordRow> rows,
                             std::span<const double> eye_ts, std::span<const double> world_ts) {
  RecordingWriter w(dir);
  for (const auto& r : rows) w.write(r);
  if (!eye_ts.empty()) w.write_timestamps(StreamId::eye, eye_ts);
  if (!world_ts.empty()) w.write_timestamps(StreamId::scene, world_ts);
  w.close();
  return {w.rows_written(), w.diagnostics()};
}

std::vector<RecordRow> read_recording(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / kGazeCsvName : path;
  const std::string text = slurp(file);
  const auto lines = lines_of(text);
  const std::string src = file.string();
  if (lines.empty()) throw ParseError(src, 1, "missing header");
  if (lines[0] != kGazeCsvHeader)
    throw ParseError(src, 1, "header must be '" + std::string(kGazeCsvHeader) + "'");
  std::vector<RecordRow> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) rows.push_back(parse_row(lines[i], src, i + 1));
  return rows;
}

std::filesystem::path timestamps_path(const std::filesystem::path& dir, StreamId stream) {
  return dir / stream_file(stream);
}

std::vector<double> read_timestamps(const std::filesystem::path& path) {
  static const std::vector<std::string> header{"timestamp"};
  const auto table = read_numeric_csv(path, header);
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) out.push_back(r[0]);
  return out;
}

CsvTable read_numeric_csv(const std::filesystem::path& path, std::span<const std::string> expected,
                          bool trailing_columns) {
  const std::string text = slurp(path);
  const auto lines = lines_of(text);
  const std::string src = path.string();
  if (lines.empty()) throw ParseError(src, 1, "missing header");
  CsvTable t;
  for (auto f : split(lines[0])) t.header.emplace_back(f);
  const bool header_ok = trailing_columns
                             ? t.header.size() >= expected.size() &&
                                   std::equal(expected.begin(), expected.end(), t.header.begin())
                             : std::equal(t.header.begin(), t.header.end(), expected.begin(), expected.end());
  if (!header_ok) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ParseError(src, 1, "header must be '" + want + "'");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i]);
    if (fields.size() != t.header.size())
      throw ParseError(src, i + 1, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                       std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
      if (!parse_double(fields[k], row[k]))
        throw ParseError(src, i + 1, "field '" + t.header[k] + "' is not a number");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_numeric_csv(const std::filesystem::path& path, std::span<const std::string> header,
                       std::span<const std::vector<double>> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  char buf[64];
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw DataError("CSV row width does not match header");
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

namespace {

const std::vector<std::string> kPupilHeader{"timestamp", "confidence", "norm_x", "norm_y", "center_x",
                                            "center_y",  "a",          "b",      "theta"};

}  // namespace

PupilDatum missing_pupil(double timestamp) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  PupilDatum p;
  p.ellipse.center = Vec2(nan, nan);
  p.ellipse.a = p.ellipse.b = p.ellipse.theta = nan;
  p.norm_pos = Vec2(nan, nan);
  p.confidence = 0.0;
  p.timestamp = timestamp;
  return p;
}

void write_pupil_csv(const std::filesystem::path& path, std::span<const PupilDatum> pupils) {
  std::vector<std::vector<double>> rows;
  rows.reserve(pupils.size());
  for (const auto& p : pupils)
    rows.push_back({p.timestamp, p.confidence, p.norm_pos.x(), p.norm_pos.y(), p.ellipse.center.x(),
                    p.ellipse.center.y(), p.ellipse.a, p.ellipse.b, p.ellipse.theta});
  write_numeric_csv(path, kPupilHeader, rows);
}

std::vector<PupilDatum> read_pupil_csv(const std::filesystem::path& path) {
  std::vector<PupilDatum> out;
  for (const auto& r : read_numeric_csv(path, kPupilHeader, true).rows) {
    PupilDatum p;
    p.timestamp = r[0];
    p.confidence = r[1];
    p.norm_pos = Vec2(r[2], r[3]);
    p.ellipse.center = Vec2(r[4], r[5]);
    p.ellipse.a = r[6];
    p.ellipse.b = r[7];
    p.ellipse.theta = r[8];
    out.push_back(p);
  }
  return out;
}

}  // namespace gazekit
