// Acceptance battery: one PASS/FAIL line per criterion, exit 1 on any FAIL.

#include <cstdio>
#include <cstdlib>

#include "ocpik/acceptance.hpp"

int main(int argc, char** argv) {
  const unsigned seed = argc > 1 ? static_cast<unsigned>(std::atoi(argv[1])) : 1;
  ocpik::acceptance::Battery battery(seed);
  int failures = 0;
  battery.run_all([&](const ocpik::acceptance::Outcome& o) {
    std::printf("%s\n", ocpik::acceptance::format_outcome(o).c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  });
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
