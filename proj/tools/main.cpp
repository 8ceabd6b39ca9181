// gazekit command line: batch front end over the core library.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include "commands.hpp"

#include "gazekit/error.hpp"

#include <nlohmann/json.hpp>

#include <iostream>

namespace {

int report(const gazekit::cli::Context& ctx, const char* kind, const std::string& message, int code) {
  if (ctx.json)
    std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump()
              << '\n';
  else
    std::cerr << "gazekit: " << kind << " error: " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace gazekit;
  cli::Context ctx;
  CLI::App app{"Head-mounted eye tracking toolkit: pupil detection, gaze mapping, surfaces, evaluation."};
  app.name("gazekit");
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.add_option("-c,--config", ctx.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("--json", ctx.json, "Machine-readable output");
  app.add_flag("-v,--verbose", ctx.verbosity, "More diagnostics on stderr");

  cli::add_synth(app, ctx);
  cli::add_detect(app, ctx);
  cli::add_calibrate(app, ctx);
  cli::add_map(app, ctx);
  cli::add_surface(app, ctx);
  cli::add_evaluate(app, ctx);
  cli::add_benchmark(app, ctx);
  cli::add_latency(app, ctx);
  cli::add_record(app, ctx);
  cli::add_stream(app, ctx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "gazekit: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (!ctx.config_path.empty()) ctx.config = load_config(ctx.config_path);
    ctx.action();
    return 0;
  } catch (const DataError& e) {
    return report(ctx, "data", e.what(), 2);
  } catch (const InvariantError& e) {
    return report(ctx, "internal", e.what(), 3);
  } catch (const std::exception& e) {
    return report(ctx, "internal", e.what(), 3);
  }
}
