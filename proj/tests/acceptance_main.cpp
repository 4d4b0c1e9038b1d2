// Consolidated acceptance battery.  Runs the ten verification criteria and
// prints one pass/fail line per criterion as it completes, then a summary.
// Exit status is zero iff every requested criterion passes.
//
// Usage: acceptance [id...]   (no arguments runs all ten)

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "desclab/acceptance.hpp"

int main(int argc, char** argv) {
  desclab::AcceptanceOpts opts;
  for (int i = 1; i < argc; ++i) {
    char* end = nullptr;
    const long id = std::strtol(argv[i], &end, 10);
    if (end == argv[i] || *end != '\0' || id < 1 || id > 10) {
      std::fprintf(stderr, "usage: %s [criterion-id in 1..10]...\n", argv[0]);
      return 2;
    }
    opts.only.insert(static_cast<int>(id));
  }

  using clock = std::chrono::steady_clock;
  auto last = clock::now();
  const auto t0 = last;
  int passed = 0;
  const auto report = [&](const desclab::CriterionResult& r) {
    const auto now = clock::now();
    const double secs = std::chrono::duration<double>(now - last).count();
    last = now;
    if (r.pass) ++passed;
    std::printf("%s %2d %-26s %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str(), secs);
    std::fflush(stdout);
  };

  const std::vector<desclab::CriterionResult> results =
      desclab::run_acceptance(opts, report);
  const double total =
      std::chrono::duration<double>(clock::now() - t0).count();
  std::printf("acceptance: %d/%zu PASS (%.1fs)\n", passed, results.size(),
              total);
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
