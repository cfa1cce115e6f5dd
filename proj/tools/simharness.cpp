#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "armguard/cloud/live.hpp"
#include "armguard/sim/harness.hpp"
#include "armguard/verify/network.hpp"

using namespace armguard;

namespace {

constexpr int kValidationExit = 2;

int fail(const Error& e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  switch (e.code()) {
    case ErrorCode::ValidationFailed:
    case ErrorCode::BadJson:
    case ErrorCode::Io:
    case ErrorCode::InvalidArgument:
    case ErrorCode::Malformed: return kValidationExit;
    default: return 1;
  }
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out, bool json_out) {
  const auto s = sim::load_scenario(path);
  const auto r = sim::run_scenario(s, {seed, std::nullopt});
  if (!out.empty()) sim::write_logdir(r, out);
  if (json_out) {
    std::cout << sim::to_json(r.report).dump(2) << "\n";
  } else {
    std::cout << "seed " << r.seed << "\n" << sim::format_table(r.report);
    if (!out.empty()) std::cout << "logs written to " << out << "\n";
  }
  return 0;
}

int cmd_metrics(const std::string& dir, bool json_out) {
  const auto rep = sim::metrics_from_logdir(dir);
  if (json_out) {
    std::cout << sim::to_json(rep).dump(2) << "\n";
  } else {
    std::cout << sim::format_table(rep);
  }
  return 0;
}

int cmd_compare(const std::string& path, std::optional<std::uint64_t> seed, std::size_t seeds, bool json_out) {
  const auto s = sim::load_scenario(path);
  if (seeds <= 1) {
    const auto c = sim::compare_momentum(s, seed);
    if (json_out) {
      std::cout << sim::to_json(c, s).dump(2) << "\n";
    } else {
      std::cout << "momentum on (seed " << c.on.seed << ")\n" << sim::format_table(c.on.report);
      std::cout << "\nmomentum off\n" << sim::format_table(c.off.report);
    }
    return 0;
  }
  const std::uint64_t base = seed.value_or(s.seed);
  json runs = json::array();
  std::size_t dominated = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    const auto c = sim::compare_momentum(s, base + i);
    const auto& on = c.on.report.counts;
    const auto& off = c.off.report.counts;
    dominated += on.fp <= off.fp ? 1 : 0;
    runs.push_back({{"seed", base + i},
                    {"on", sim::to_json(on)},
                    {"off", sim::to_json(off)},
                    {"per_device_fp_off", [&] {
                       json m = json::object();
                       for (const auto& [id, cc] : c.off.report.per_device) m[id] = cc.fp;
                       return m;
                     }()}});
    if (!json_out) {
      std::printf("seed %-8llu on  TP %llu FP %llu FN %llu TN %llu | off TP %llu FP %llu FN %llu TN %llu\n",
                  (unsigned long long)(base + i), (unsigned long long)on.tp, (unsigned long long)on.fp,
                  (unsigned long long)on.fn, (unsigned long long)on.tn, (unsigned long long)off.tp,
                  (unsigned long long)off.fp, (unsigned long long)off.fn, (unsigned long long)off.tn);
    }
  }
  if (json_out) {
    std::cout << json{{"runs", runs}, {"fp_on_le_fp_off", dominated}, {"seeds", seeds}}.dump(2) << "\n";
  } else {
    std::printf("FP(on) <= FP(off) in %zu of %zu runs\n", dominated, seeds);
  }
  return 0;
}

int cmd_gen_weights(std::uint64_t seed, const std::string& arch, const std::string& out) {
  const auto bytes = cloud::read_binary(arch);
  json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::BadJson, arch + " is not JSON");
  const auto spec = verify::NetworkSpec::from_json(j);
  const auto blob = verify::weight_file::serialize(verify::random_weights(spec, seed));
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!f) throw Error(ErrorCode::Io, "cannot write " + out);
  std::cout << "wrote " << blob.size() << " bytes to " << out << "\n";
  return 0;
}

struct ServeArgs {
  cloud::LiveOptions live;
  double stub_score = 0.9;
  std::string arch;
  std::string weights;
  std::optional<double> resample_fps;
  std::optional<double> resample_seconds;
  std::string static_dir;
};

int cmd_serve(ServeArgs a) {
  std::unique_ptr<cloud::Verifier> verifier;
  if (a.arch.empty() != a.weights.empty()) throw Error(ErrorCode::InvalidArgument, "--arch and --weights go together");
  if (a.resample_fps.has_value() != a.resample_seconds.has_value()) {
    throw Error(ErrorCode::InvalidArgument, "--resample-fps and --resample-seconds go together");
  }
  std::optional<verify::ResampleConfig> resample;
  if (a.resample_fps) resample = verify::ResampleConfig{*a.resample_fps, *a.resample_seconds};
  if (resample && !resample->valid()) throw Error(ErrorCode::InvalidArgument, "resample fps * seconds must be 30");
  if (!a.arch.empty()) {
    verifier = cloud::load_cnn_verifier(a.arch, a.weights, resample);
  } else {
    verifier = std::make_unique<cloud::StubVerifier>(a.stub_score);
  }
  if (!a.static_dir.empty()) a.live.static_dir = a.static_dir;

  // Block the stop signals before any thread exists so only sigwait sees them.
  sigset_t stop_set;
  sigemptyset(&stop_set);
  sigaddset(&stop_set, SIGINT);
  sigaddset(&stop_set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_set, nullptr);

  cloud::LiveCloud server(a.live, std::move(verifier));
  server.start();
  std::printf("devices on %s:%d, console on http://%s:%d, data in %s\n", a.live.host.c_str(), server.device_port(),
              a.live.host.c_str(), server.console_port(), a.live.data_dir.c_str());
  std::fflush(stdout);
  int sig = 0;
  sigwait(&stop_set, &sig);
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"armguard simulation harness"};
  app.require_subcommand(1);
  bool json_out = false;
  app.add_flag("--json", json_out, "print JSON instead of tables");

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "run a scenario and print its metrics");
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--out", out_dir, "write the log directory here");

  std::string log_dir;
  auto* metrics = app.add_subcommand("metrics", "recompute metrics from a log directory");
  metrics->add_option("logdir", log_dir, "directory written by run --out")->required();

  std::size_t seeds = 1;
  auto* compare = app.add_subcommand("compare-momentum", "run with and without the momentum trigger");
  compare->add_option("scenario", scenario_path, "scenario JSON")->required();
  compare->add_option("--seed", seed, "override the scenario seed (first seed with --seeds)");
  compare->add_option("--seeds", seeds, "repeat over this many consecutive seeds");

  std::uint64_t weight_seed = 0;
  std::string arch_path;
  std::string weights_out;
  auto* gen = app.add_subcommand("gen-weights", "write deterministic random verifier weights");
  gen->add_option("--seed", weight_seed, "generator seed")->required();
  gen->add_option("--arch", arch_path, "architecture JSON")->required();
  gen->add_option("--out", weights_out, "output weight file")->required();

  ServeArgs serve_args;
  std::string data_dir = "armguard-data";
  std::vector<std::string> webhooks;
  auto* serve = app.add_subcommand("serve", "run the cloud service on real sockets");
  serve->add_option("--host", serve_args.live.host, "IPv4 address to bind")->capture_default_str();
  serve->add_option("--device-port", serve_args.live.device_port, "TCP port for edge devices (0: any)")->capture_default_str();
  serve->add_option("--console-port", serve_args.live.console_port, "HTTP port for the console API (0: any)")
      ->capture_default_str();
  serve->add_option("--data-dir", data_dir, "event log and clip storage")->capture_default_str();
  serve->add_option("--stub-score", serve_args.stub_score, "fixed verifier score when no weights are given")
      ->capture_default_str();
  serve->add_option("--arch", serve_args.arch, "verifier architecture JSON");
  serve->add_option("--weights", serve_args.weights, "verifier weight file");
  serve->add_option("--resample-fps", serve_args.resample_fps, "resample clips at this rate before verifying");
  serve->add_option("--resample-seconds", serve_args.resample_seconds, "window covered by the resampled clip");
  serve->add_option("--verify-ms", serve_args.live.cloud.verify_ms, "minimum time a verification occupies the worker")
      ->capture_default_str();
  serve->add_option("--webhook", webhooks, "POST notifications to this http:// URL (repeatable)");
  serve->add_option("--static-dir", serve_args.static_dir, "serve these files under /console/");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (*run) return cmd_run(scenario_path, seed, out_dir, json_out);
    if (*metrics) return cmd_metrics(log_dir, json_out);
    if (*compare) return cmd_compare(scenario_path, seed, seeds, json_out);
    if (*gen) return cmd_gen_weights(weight_seed, arch_path, weights_out);
    if (*serve) {
      serve_args.live.data_dir = data_dir;
      serve_args.live.webhook_urls = webhooks;
      return cmd_serve(std::move(serve_args));
    }
  } catch (const Error& e) {
    return fail(e);
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidationExit;
  }
  return 1;
}
