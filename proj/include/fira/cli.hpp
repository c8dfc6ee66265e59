#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fira::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitIo = 4,
};

// Entry point shared by the `fira` executable and the tests. `args` excludes
// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace fira::cli
