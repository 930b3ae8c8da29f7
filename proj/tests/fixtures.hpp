#pragma once

// Shared, quickly trained artefacts for tests that need a working policy.

#include <filesystem>

#include "rmnav/gridworld.hpp"
#include "rmnav/policy.hpp"

namespace fixture {

/// Goal-conditioned K=5 ensemble on L=10, trained once per process.
const rmnav::EnsemblePolicy& smallPolicy();

rmnav::Grid scenario(const std::string& name);
std::filesystem::path scenarioPath(const std::string& name);

/// Fresh empty directory under the system temp dir.
std::filesystem::path tempDir(const std::string& tag);

}  // namespace fixture
