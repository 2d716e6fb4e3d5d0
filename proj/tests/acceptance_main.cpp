// Acceptance runner: executes every acceptance criterion through the C API
// and prints one pass/fail line each. Exit code is the failure count.

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "hessfit.h"

namespace {

void print_line(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  int criterion = 0;
  if (argc > 1) criterion = std::atoi(argv[1]);
  if (criterion < 0 || criterion > 10) {
    std::fprintf(stderr, "usage: %s [criterion 1-10]\n", argv[0]);
    return 2;
  }

  int failures = 0;
  const hessfit_status st = hessfit_verify_run(criterion, print_line, nullptr, &failures);
  if (st != HESSFIT_OK) {
    std::fprintf(stderr, "acceptance runner error: %s (%s)\n", hessfit_status_string(st),
                 hessfit_last_error());
    return 2;
  }
  if (failures > 0) std::fprintf(stderr, "%d criterion(s) failed\n", failures);
  return failures;
}
