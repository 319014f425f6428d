#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xva/cli.hpp"

namespace {

bool parse_probe(const std::string& text, xva::ProbeSpec& out) {
  bool have_spot = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) return false;
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size()) return false;
    if (key == "S") {
      out.spot = v;
      have_spot = true;
    } else if (key == "t") {
      out.t = v;
    } else {
      return false;
    }
    pos = comma + 1;
  }
  return have_spot;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"derivative pricer under bilateral counterparty risk"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  bool quiet = false;
  std::vector<std::string> probe_args;

  CLI::App* price = app.add_subcommand("price", "solve one problem and write artifacts");
  CLI::App* compare =
      app.add_subcommand("compare", "run every backend on one problem and tabulate gaps");
  for (CLI::App* sub : {price, compare}) {
    sub->add_option("config", config_path, "JSON run configuration")->required();
    sub->add_option("--out-dir", out_dir, "artifact directory (default: current)");
    sub->add_flag("--quiet", quiet, "suppress the headline printout");
  }
  price->add_option("--probe", probe_args, "extra price probe S=<spot>,t=<time>; repeatable");

  CLI11_PARSE(app, argc, argv);

  try {
    const xva::RunConfig cfg = xva::load_run_config(config_path);

    if (price->parsed()) {
      std::vector<xva::ProbeSpec> probes;
      for (const std::string& a : probe_args) {
        xva::ProbeSpec p;
        if (!parse_probe(a, p)) {
          std::fprintf(stderr, "probe: expected S=<spot>,t=<time>, got '%s'\n", a.c_str());
          return 2;
        }
        probes.push_back(p);
      }
      xva::PriceArtifacts art;
      try {
        art = xva::run_price(cfg, probes);
      } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
      }
      xva::write_price_artifacts(art, cfg, probes, out_dir);
      if (!quiet) {
        std::printf("price %.10g\n", art.headline);
        for (std::size_t i = 0; i < probes.size(); ++i) {
          std::printf("probe S=%g t=%g price %.10g\n", probes[i].spot, probes[i].t,
                      art.probe_values[i]);
        }
      }
      if (!art.report.converged) {
        std::fprintf(stderr, "iteration did not converge within max_iter=%d\n",
                     cfg.solver.max_iter);
        return 3;
      }
      return 0;
    }

    const xva::CompareArtifacts art = xva::run_compare(cfg);
    xva::write_compare_artifacts(art, cfg, out_dir);
    if (!quiet) {
      for (const xva::CompareColumn* c : {&art.kernel, &art.fd, &art.mc}) {
        std::printf("%-6s %.10g (%.1f ms)\n", c->name.c_str(), c->headline, c->runtime_ms);
      }
      std::printf("max rel gap kernel|fd %.3g kernel|mc %.3g fd|mc %.3g\n",
                  art.kernel_fd.max_rel, art.kernel_mc.max_rel, art.fd_mc.max_rel);
      std::printf("mc at the money z %.2f (pooled se %.3g)\n", art.atm_z, art.atm_pooled_se);
    }
    if (!(art.kernel.converged && art.fd.converged && art.mc.converged)) {
      std::fprintf(stderr, "at least one backend did not converge\n");
      return 3;
    }
    return 0;
  } catch (const xva::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const xva::IoError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
}
