#pragma once

#include <string>
#include <vector>

namespace feffect::cli {

// Exit codes: 0 success, 1 runtime error, 2 usage error. Every run writes its
// resolved configuration as run_config.json next to its outputs; passing that
// file back via --config reproduces the run.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, const char* const* argv);

}  // namespace feffect::cli
