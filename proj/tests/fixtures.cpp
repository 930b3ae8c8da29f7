#include "fixtures.hpp"

#include <random>

#include "rmnav/expert.hpp"

namespace fixture {

const rmnav::EnsemblePolicy& smallPolicy() {
  static const rmnav::EnsemblePolicy policy = [] {
    rmnav::DemoParams p;
    p.L = 10;
    rmnav::TrainHyper h;
    h.epochs = 20;
    return rmnav::trainEnsemble(rmnav::generateDemos(500, p, 1), 5, 2, h);
  }();
  return policy;
}

std::filesystem::path scenarioPath(const std::string& name) {
  return std::filesystem::path(RMNAV_SCENARIO_DIR) / (name + ".txt");
}

rmnav::Grid scenario(const std::string& name) { return rmnav::Grid::build(rmnav::loadScenario(scenarioPath(name))); }

std::filesystem::path tempDir(const std::string& tag) {
  std::random_device rd;
  const auto dir = std::filesystem::temp_directory_path() / ("rmnav-" + tag + "-" + std::to_string(rd()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
