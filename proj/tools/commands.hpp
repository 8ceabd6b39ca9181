#pragma once

#include "gazekit/config.hpp"

#include <CLI11.hpp>

#include <functional>
#include <string>

namespace gazekit::cli {

/// Flags shared by every subcommand plus the action chosen during parsing.
struct Context {
  std::string config_path;
  bool json = false;
  int verbosity = 0;
  Config config;
  std::function<void()> action;
};

void add_synth(CLI::App& app, Context& ctx);
void add_detect(CLI::App& app, Context& ctx);
void add_calibrate(CLI::App& app, Context& ctx);
void add_map(CLI::App& app, Context& ctx);
void add_surface(CLI::App& app, Context& ctx);
void add_evaluate(CLI::App& app, Context& ctx);
void add_benchmark(CLI::App& app, Context& ctx);
void add_latency(CLI::App& app, Context& ctx);
void add_record(CLI::App& app, Context& ctx);
void add_stream(CLI::App& app, Context& ctx);

}  // namespace gazekit::cli
