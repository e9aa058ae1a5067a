#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "breakwater/csv.hpp"
#include "breakwater/wavesim.hpp"

namespace breakwater {

namespace {

namespace fs = std::filesystem;

void write_obstacles(const fs::path& path, const Mask& m) {
  std::ostringstream out;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (x) out << ' ';
      out << int(m.at(x, y));
    }
    out << '\n';
  }
  write_text_file(path.string(), out.str());
}

// Runs `command` through /bin/sh with `dir` as working directory, stderr
// captured to stderr.txt. Returns the exit status; throws on timeout.
int run_command(const std::string& command, const fs::path& dir,
                double timeout_sec) {
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("external adapter: fork failed");
  if (pid == 0) {
    if (chdir(dir.c_str()) != 0) _exit(127);
    if (!freopen("stderr.txt", "w", stderr)) _exit(127);
    execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
    _exit(127);
  }
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(timeout_sec);
  int status = 0;
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) throw std::runtime_error("external adapter: waitpid failed");
    if (std::chrono::steady_clock::now() > deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw std::runtime_error("external adapter: command timed out after " +
                               format_double(timeout_sec) + "s");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

std::string slurp_or_empty(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

WaveField external_simulate(const BreakwaterSystem& sys,
                            const DomainConfig& dom,
                            const ExternalAdapterConfig& adapter) {
  if (adapter.command.empty())
    throw std::runtime_error("external adapter: empty command");
  const fs::path dir(adapter.exchange_dir.empty() ? "."
                                                  : adapter.exchange_dir);
  fs::create_directories(dir);

  save_domain(dom, (dir / "domain.txt").string());
  const Mask candidate = rasterize(sys, dom.width, dom.height);
  const Mask obstacles = mask_union(candidate, dom.blocked_mask);
  write_obstacles(dir / "obstacles.txt", obstacles);

  const int code = run_command(adapter.command, dir, adapter.timeout_sec);
  if (code != 0) {
    std::string err = slurp_or_empty(dir / "stderr.txt");
    if (err.size() > 500) err = err.substr(0, 500) + "...";
    throw std::runtime_error("external adapter: command exited with code " +
                             std::to_string(code) +
                             (err.empty() ? "" : ("; stderr: " + err)));
  }

  std::ifstream in(dir / "waves.txt");
  if (!in)
    throw std::runtime_error("external adapter: command produced no waves.txt");
  WaveField field;
  field.provenance = Provenance::external_model;
  field.heights = Grid<float>(dom.width, dom.height, 0.f);
  for (int y = 0; y < dom.height; ++y) {
    for (int x = 0; x < dom.width; ++x) {
      double v;
      if (!(in >> v))
        throw std::runtime_error(
            "external adapter: waves.txt truncated or malformed at row " +
            std::to_string(y));
      if (!std::isfinite(v) || v < 0)
        throw std::runtime_error(
            "external adapter: invalid wave height " + format_double(v) +
            " at (" + std::to_string(x) + "," + std::to_string(y) + ")");
      field.heights.at(x, y) = float(v);
    }
  }
  double extra;
  if (in >> extra)
    throw std::runtime_error(
        "external adapter: waves.txt has more values than grid cells");

  // the adapter's land/obstacle handling may differ; enforce the invariant
  for (int y = 0; y < dom.height; ++y)
    for (int x = 0; x < dom.width; ++x)
      if (obstacles.at(x, y)) field.heights.at(x, y) = 0.f;
  return field;
}

}  // namespace breakwater
