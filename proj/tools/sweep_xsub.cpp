// Host-side wrapper speaking the submit/status/delete protocol over the
// fork backend:
//   sweep-xsub [--state-dir D] xsub <script> --work-dir W --params-json J
//   sweep-xsub [--state-dir D] xstat <job_id>
//   sweep-xsub [--state-dir D] xdel <job_id>

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "sweep/errors.hpp"
#include "sweep/scheduler.hpp"

namespace {

std::string default_state_dir() {
  if (const char* s = std::getenv("SWEEP_XSUB_STATE_DIR"); s && *s) return s;
  const char* home = std::getenv("HOME");
  return std::string(home && *home ? home : "/tmp") + "/.sweep-xsub";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fork-backend job wrapper"};
  app.require_subcommand(1);
  std::string state_dir = default_state_dir();
  app.add_option("--state-dir", state_dir, "Job table directory");

  std::string script, work_dir, params_json = "{}", job_id;
  auto* xsub = app.add_subcommand("xsub", "Submit a job script");
  xsub->add_option("script", script)->required();
  xsub->add_option("--work-dir", work_dir)->required();
  xsub->add_option("--params-json", params_json);
  auto* xstat = app.add_subcommand("xstat", "Report a job's state");
  xstat->add_option("job_id", job_id)->required();
  auto* xdel = app.add_subcommand("xdel", "Delete a job");
  xdel->add_option("job_id", job_id)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    sweep::ForkBackend backend(state_dir);
    if (xsub->parsed()) {
      auto params = sweep::json::parse(params_json, nullptr, false);
      if (params.is_discarded() || !params.is_object()) {
        std::cerr << "xsub: --params-json must be a JSON object\n";
        return 2;
      }
      auto id = backend.submit({script, params, work_dir});
      std::cout << sweep::format_submit_reply(id) << "\n" << std::flush;
    } else if (xstat->parsed()) {
      std::cout << sweep::format_status_reply(backend.status(job_id).state) << "\n" << std::flush;
    } else {
      backend.remove(job_id);
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
