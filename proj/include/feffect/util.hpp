#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace feffect {

// Fixed-point formatting used by all tabular output, so byte-identical
// reruns do not depend on stream state.
std::string fmt_fixed(double x, int precision);

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);  // ddof = 1; 0 when n < 2
double sample_variance(const std::vector<double>& v);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Units must be
// independent; callers keep determinism by writing to slot i only.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

std::vector<std::string> split_string(const std::string& s, char sep);

}  // namespace feffect
