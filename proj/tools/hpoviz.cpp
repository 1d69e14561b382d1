#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hpoviz/converters.hpp"
#include "hpoviz/errors.hpp"
#include "hpoviz/plugins.hpp"
#include "hpoviz/service.hpp"

using namespace hpoviz;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

// "k=v": v is parsed as JSON when possible, otherwise taken as a string.
Json parse_params(const std::vector<std::string>& items) {
  Json params = Json::object();
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw_invalid("param", "expected key=value, got '" + item + "'");
    std::string key = item.substr(0, eq);
    std::string value = item.substr(eq + 1);
    Json parsed = Json::parse(value, nullptr, false);
    params[key] = parsed.is_discarded() ? Json(value) : parsed;
  }
  return params;
}

int cmd_serve(const ServiceOptions& options, const std::string& host, int port) {
  try {
    Service service(options);
    int bound = service.bind(host, port);
    std::cerr << "hpoviz: serving " << options.runs_dir.string() << " on http://" << host << ":" << bound << "\n";
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.run();
    g_service = nullptr;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "hpoviz serve: " << e.what() << "\n";
    return kUsage;
  }
}

int cmd_convert(const fs::path& in, const fs::path& out) {
  std::error_code ec;
  if (fs::exists(out) && !(fs::is_directory(out) && fs::is_empty(out, ec))) {
    std::cerr << "hpoviz convert: output '" << out.string() << "' exists and is not empty\n";
    return kUsage;
  }
  try {
    if (!fs::exists(in) || detect_format(in) == RunFormat::Unknown) {
      std::cerr << "hpoviz convert: unknown run format at '" << in.string() << "'\n";
      return kData;
    }
    Run run = load_tabular(in);
    write_tabular(run, out);
  } catch (const std::exception& e) {
    std::cerr << "hpoviz convert: " << in.string() << ": " << e.what() << "\n";
    return kData;
  }
  return 0;
}

int cmd_analyze(const std::string& plugin_id, const fs::path& run_dir, const std::vector<std::string>& items,
                const std::string& out) {
  auto plugin = parse_plugin(plugin_id);
  if (!plugin) {
    std::cerr << "hpoviz analyze: unknown plugin '" << plugin_id << "'\n";
    return kUsage;
  }
  RunPtr run;
  try {
    run = open_run(run_dir).run;
  } catch (const std::exception& e) {
    std::cerr << "hpoviz analyze: " << run_dir.string() << ": " << e.what() << "\n";
    return kData;
  }
  std::vector<RunPtr> runs{run};
  Json params;
  try {
    params = resolve_params(*plugin, runs, parse_params(items));
  } catch (const Error& e) {
    std::cerr << "hpoviz analyze: " << e.what() << "\n";
    if (e.code() == ErrorCode::NotFound) return kData;
    std::cerr << "valid parameters for " << plugin_id << ": " << valid_param_list(*plugin) << "\n";
    return kUsage;
  }
  std::string payload;
  try {
    payload = run_plugin(*plugin, runs, params);
  } catch (const std::exception& e) {
    std::cerr << "hpoviz analyze: " << e.what() << "\n";
    return kData;
  }
  if (out.empty() || out == "-") {
    std::cout << payload;
    std::cout.flush();
    return 0;
  }
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  file << payload;
  if (!file) {
    std::cerr << "hpoviz analyze: cannot write '" << out << "'\n";
    return kData;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hpoviz: analysis service and tools for hyperparameter optimization runs"};
  app.require_subcommand(1);

  ServiceOptions serve_opts;
  std::string host = "127.0.0.1";
  int port = 8050;
  double poll_secs = 2.0;
  std::string runs_dir, cache_dir, static_dir;
  auto* serve = app.add_subcommand("serve", "Start the HTTP API");
  serve->add_option("--runs-dir", runs_dir, "Directory with one subdirectory per run")->required();
  serve->add_option("--cache-dir", cache_dir, "Result cache directory")->default_val(".hpoviz-cache");
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--port", port, "Listen port, 0 picks a free one")->capture_default_str();
  serve->add_option("--workers", serve_opts.workers, "Worker threads (0: CPU count)")->capture_default_str();
  serve->add_option("--poll-interval-secs", poll_secs, "Live refresh interval")->capture_default_str();
  serve->add_option("--static-dir", static_dir, "Dashboard assets served at /");

  std::string in, out;
  auto* convert = app.add_subcommand("convert", "Convert a run to the tabular format");
  convert->add_option("--in", in, "Input run")->required();
  convert->add_option("--out", out, "Output directory")->required();

  std::string plugin, run_dir, out_file;
  std::vector<std::string> params;
  auto* analyze = app.add_subcommand("analyze", "Run a plugin and write its payload");
  analyze->add_option("plugin", plugin, "Plugin id")->required();
  analyze->add_option("--run", run_dir, "Run directory")->required();
  analyze->add_option("--param,-p", params, "Plugin parameter key=value (repeatable)");
  analyze->add_option("--out,-o", out_file, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  if (serve->parsed()) {
    if (!(poll_secs > 0.0)) {
      std::cerr << "hpoviz serve: --poll-interval-secs must be positive\n";
      return kUsage;
    }
    serve_opts.runs_dir = runs_dir;
    serve_opts.cache_dir = cache_dir;
    serve_opts.static_dir = static_dir;
    serve_opts.poll_interval = std::chrono::milliseconds(static_cast<long long>(poll_secs * 1000.0));
    return cmd_serve(serve_opts, host, port);
  }
  if (convert->parsed()) return cmd_convert(in, out);
  try {
    return cmd_analyze(plugin, run_dir, params, out_file);
  } catch (const std::exception& e) {
    std::cerr << "hpoviz analyze: " << e.what() << "\n";
    return kUsage;
  }
}
