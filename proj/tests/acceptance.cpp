// Runs every acceptance criterion; exit status 0 only when all pass.
// Arguments are key=value overrides applied to every config, e.g.
//   inrlab_acceptance model.transform=none

#include <iostream>
#include <string>
#include <vector>

#include "inrlab/acceptance.hpp"
#include "inrlab/runtime.hpp"

int main(int argc, char** argv) {
  inrlab::tune_allocator();
  inrlab::AcceptanceOptions opts;
  for (int i = 1; i < argc; ++i) opts.overrides.emplace_back(argv[i]);
  return inrlab::run_acceptance(opts, std::cout) ? 0 : 1;
}
