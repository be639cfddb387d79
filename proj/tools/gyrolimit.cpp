#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gyrolimit/gyrolimit.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gyrolimit: strong-field charged-particle studies"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run one scenario file");
  std::string scenario_path, out_dir;
  bool check_only = false;
  unsigned threads = 0;
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");
  run->add_flag("--check", check_only, "validate the scenario and exit");
  run->add_option("--threads", threads, "worker threads (default: GYROLIMIT_THREADS or 1)");
  CLI11_PARSE(app, argc, argv);

  gyrolimit::Scenario sc;
  try {
    sc = gyrolimit::parse_scenario(read_file(scenario_path));
  } catch (const gyrolimit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (check_only) {
    std::cout << "ok: " << sc.kind << " scenario is valid\n";
    return 0;
  }
  gyrolimit::RunOptions opt;
  if (!out_dir.empty()) opt.output_dir = out_dir;
  opt.threads = gyrolimit::resolve_threads(threads ? std::optional<unsigned>(threads)
                                                   : std::nullopt);
  try {
    const gyrolimit::RunOutcome res = gyrolimit::run(sc, opt);
    std::cout << res.summary;
    if (res.exit_code == 1 && res.report.contains("error"))
      std::cerr << "error: " << res.report["error"]["message"].get<std::string>() << '\n';
    return res.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: [" << sc.kind << "] " << e.what() << '\n';
    return 1;
  }
}
