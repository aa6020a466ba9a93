#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cooccur {

/// Non-fatal diagnostics accumulated by operations that can proceed despite
/// suspicious input (unknown species, dropped confusion-matrix rows, ...).
/// Callers that pass nullptr simply discard them.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

/// Default seed used by the CLI and anywhere a seed is optional, so that
/// runs are reproducible out of the box.
inline constexpr std::uint64_t kDefaultSeed = 1729;

/// Hard cap on the number of species: the latent state space has 2^S
/// configurations and is enumerated exactly.
inline constexpr int kMaxSpecies = 20;

}  // namespace cooccur
