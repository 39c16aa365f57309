#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>

#include "medex/bench.hpp"
#include "medex/errors.hpp"
#include "medex/io.hpp"

namespace medex::bench {

namespace {

namespace fs = std::filesystem;

enum class RunStatus { ok, timeout, failed };

RunStatus run_command(const std::string& command, double timeout_seconds,
                      std::string& diagnostic) {
  pid_t pid = fork();
  if (pid < 0) {
    diagnostic = std::strerror(errno);
    return RunStatus::failed;
  }
  if (pid == 0) {
    setpgid(0, 0);  // own process group, so a timeout kill reaps helpers too
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  int status = 0;
  while (true) {
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) {
      diagnostic = std::strerror(errno);
      return RunStatus::failed;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      return RunStatus::timeout;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return RunStatus::ok;
  diagnostic = WIFEXITED(status) ? "exit code " + std::to_string(WEXITSTATUS(status))
                                 : "terminated by signal";
  return RunStatus::failed;
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "medex-eval-XXXXXX").string();
    std::unique_ptr<char[]> buf(new char[templ.size() + 1]);
    std::memcpy(buf.get(), templ.c_str(), templ.size() + 1);
    if (!mkdtemp(buf.get())) throw std::runtime_error("mkdtemp failed");
    path = buf.get();
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

bool parse_cell(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::vector<Evaluation> parse_output(const std::string& text, std::size_t expected_rows, int q) {
  const auto rows = io::parse_csv(text);
  std::size_t start = 0;
  double probe;
  if (!rows.empty() && !parse_cell(rows[0][0], probe)) start = 1;  // header row
  if (rows.size() - start != expected_rows)
    throw FormatError("external evaluator returned " + std::to_string(rows.size() - start) +
                      " rows, expected " + std::to_string(expected_rows));

  std::vector<Evaluation> out(expected_rows);
  for (std::size_t i = 0; i < expected_rows; ++i) {
    const auto& cells = rows[start + i];
    if (cells.size() != static_cast<std::size_t>(q) + 1)
      throw FormatError("external evaluator row " + std::to_string(start + i + 1) + " has " +
                        std::to_string(cells.size()) + " columns, expected z,y1..y" +
                        std::to_string(q));
    double zv;
    if (!parse_cell(cells[0], zv) || (zv != 0.0 && zv != 1.0))
      throw FormatError("external evaluator feasibility flag must be 0 or 1, got '" + cells[0] +
                        "'");
    out[i].z = static_cast<int>(zv);
    if (out[i].z == 1) {
      out[i].y = Eigen::VectorXd(q);
      for (int j = 0; j < q; ++j) {
        double v;
        if (!parse_cell(cells[static_cast<std::size_t>(j) + 1], v))
          throw FormatError("external evaluator row " + std::to_string(start + i + 1) +
                            ": response " + std::to_string(j + 1) + " is not numeric");
        out[i].y(j) = v;
      }
    } else {
      // Failed runs have nothing to report; empty cells are fine, and numeric
      // placeholders are tolerated but ignored. Anything else is misaligned.
      for (int j = 0; j < q; ++j) {
        const auto& cell = cells[static_cast<std::size_t>(j) + 1];
        if (!cell.empty() && !parse_cell(cell, probe))
          throw FormatError("external evaluator row " + std::to_string(start + i + 1) +
                            ": unreadable cell '" + cell + "' on an infeasible row");
      }
    }
  }
  return out;
}

}  // namespace

Problem external_problem(const ExternalEvaluatorSpec& spec) {
  if (spec.command.empty()) throw std::invalid_argument("external_problem: empty command");
  if (spec.p < 1 || spec.q < 1)
    throw std::invalid_argument("external_problem: p and q must be positive");
  if (spec.targets.size() != spec.q || spec.weights.size() != spec.q)
    throw std::invalid_argument("external_problem: targets/weights must have length q");

  // One lock per problem instance; invocations are serialized unless the
  // command is declared batch-safe.
  auto lock = std::make_shared<std::mutex>();

  Problem prob;
  prob.name = "external";
  prob.p = spec.p;
  prob.q = spec.q;
  prob.targets = spec.targets;
  prob.weights = spec.weights;

  auto batch = [spec, lock](const Eigen::MatrixXd& X) {
    std::unique_lock<std::mutex> guard(*lock, std::defer_lock);
    if (!spec.batch_safe) guard.lock();

    TempDir dir;
    fs::path in_path = dir.path / "input.csv";
    fs::path out_path = dir.path / "output.csv";
    io::atomic_write(in_path, io::matrix_to_csv(X, "x", spec.write_header, 17));

    std::string cmd = spec.command + " " + in_path.string() + " " + out_path.string();
    std::string diagnostic;
    switch (run_command(cmd, spec.timeout_seconds, diagnostic)) {
      case RunStatus::timeout:
        // Non-convergence within the stopping time: the whole batch reads
        // as infeasible, not as a tool failure.
        return std::vector<Evaluation>(static_cast<std::size_t>(X.rows()));
      case RunStatus::failed:
        throw EvaluationError("external evaluator failed (" + diagnostic + "): " + cmd);
      case RunStatus::ok:
        break;
    }
    if (!fs::exists(out_path))
      throw FormatError("external evaluator wrote no output file: " + out_path.string());
    return parse_output(io::read_file(out_path), static_cast<std::size_t>(X.rows()), spec.q);
  };

  prob.batch_evaluator = batch;
  prob.evaluator = [batch](const Eigen::VectorXd& x) {
    Eigen::MatrixXd X(1, x.size());
    X.row(0) = x.transpose();
    return batch(X).front();
  };
  return prob;
}

}  // namespace medex::bench
