#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rmnav/expert.hpp"
#include "rmnav/feedback.hpp"
#include "rmnav/gridworld.hpp"
#include "rmnav/policy.hpp"
#include "rmnav/runner.hpp"
#include "rmnav/service.hpp"

namespace fs = std::filesystem;
using namespace rmnav;

namespace {

volatile std::sig_atomic_t stopRequested = 0;

void onSignal(int) { stopRequested = 1; }

std::ofstream openOut(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string renderAscii(const Grid& grid) {
  std::string s;
  for (int r = 0; r < grid.side(); ++r) {
    for (int c = 0; c < grid.side(); ++c) {
      const Cell cell{r, c};
      char ch = '.';
      switch (grid.at(cell)) {
        case CellKind::Wall: ch = '#'; break;
        case CellKind::SolidObstacle: ch = 'S'; break;
        case CellKind::PliableObstacle: ch = 'P'; break;
        case CellKind::DeceptiveObstacle: ch = 'D'; break;
        case CellKind::Goal: ch = 'G'; break;
        case CellKind::Empty: break;
      }
      if (cell == grid.start()) ch = 'A';
      s += ch;
    }
    s += '\n';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware grid navigation with language feedback"};
  app.require_subcommand(1);

  // gen-demos
  auto* gen = app.add_subcommand("gen-demos", "Generate expert demonstrations on obstacle-free grids");
  int genN = 1000, genL = 10, genPatch = 5;
  std::uint64_t genSeed = 1;
  std::string genObs = "goal";
  fs::path genOut;
  gen->add_option("-n,--count", genN, "Number of demonstrations")->check(CLI::PositiveNumber);
  gen->add_option("--L", genL, "Central grid size")->check(CLI::Range(3, 100));
  gen->add_option("--obs", genObs, "Observation kind: global|goal|partial|visual");
  gen->add_option("--patch", genPatch, "Local patch size (odd)");
  gen->add_option("--seed", genSeed, "Seed");
  gen->add_option("-o,--out", genOut, "Output file")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a policy ensemble from demonstrations");
  fs::path trainDemos, trainOut;
  int trainK = 10, trainEpochs = 40, trainBatch = 32, trainDropoutM = 0;
  double trainLr = 0.05, trainDropout = 0.0;
  std::vector<int> trainHidden{64, 64};
  std::uint64_t trainSeed = 2;
  train->add_option("--demos", trainDemos, "Demonstration file")->required()->check(CLI::ExistingFile);
  train->add_option("-K,--members", trainK, "Ensemble size")->check(CLI::PositiveNumber);
  train->add_option("--epochs", trainEpochs, "Training epochs")->check(CLI::PositiveNumber);
  train->add_option("--batch", trainBatch, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--lr", trainLr, "Learning rate");
  train->add_option("--hidden", trainHidden, "Hidden layer widths");
  train->add_option("--dropout", trainDropout, "Dropout rate");
  train->add_option("--mc-dropout", trainDropoutM, "Train one dropout network sampled M times instead of an ensemble");
  train->add_option("--seed", trainSeed, "Seed");
  train->add_option("-o,--out", trainOut, "Output policy file")->required();

  // interpret
  auto* interp = app.add_subcommand("interpret", "Turn an instruction into an action sequence");
  std::string interpText, llmEndpoint, llmModel = "gpt-3.5-turbo";
  bool forceModel = false;
  interp->add_option("--text", interpText, "Instruction text")->required();
  interp->add_option("--llm", llmEndpoint, "Chat-completions endpoint used when the grammar cannot parse the text");
  interp->add_option("--model", llmModel, "Model name sent to the endpoint");
  interp->add_flag("--force-model", forceModel, "Skip the grammar and always ask the model");

  // run-suite
  auto* suite = app.add_subcommand("run-suite", "Run every scenario x method x trial in a config");
  fs::path suiteConfig, suiteOut, suiteStore;
  bool suiteSerial = false;
  suite->add_option("-c,--config", suiteConfig, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  suite->add_option("-o,--out", suiteOut, "Output directory")->required();
  suite->add_option("--store", suiteStore, "Also append episodes to this store directory");
  suite->add_flag("--serial", suiteSerial, "Run trials on one thread");

  // render
  auto* render = app.add_subcommand("render", "Print a scenario, optionally as a PGM image");
  fs::path renderScenario, renderPgm;
  render->add_option("scenario", renderScenario, "Scenario file")->required()->check(CLI::ExistingFile);
  render->add_option("--pgm", renderPgm, "Write the rendered image here");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve operator sessions over HTTP");
  std::string serveHost = "127.0.0.1";
  int servePort = 8080, serveDelay = 150;
  fs::path serveStore = "episodes", serveBase = ".";
  serve->add_option("--host", serveHost, "Bind address");
  serve->add_option("--port", servePort, "Port (0 picks one)");
  serve->add_option("--store", serveStore, "Episode store directory");
  serve->add_option("--base-dir", serveBase, "Directory relative paths in session configs resolve against");
  serve->add_option("--step-delay", serveDelay, "Default per-step delay in milliseconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DemoParams params;
      params.L = genL;
      params.observation.kind = parseKind(genObs);
      params.observation.patch = genPatch;
      const DemonstrationSet demos = generateDemos(genN, params, genSeed);
      saveDemos(demos, genOut);
      std::cout << "wrote " << demos.trajectories.size() << " demonstrations (" << demos.sampleCount()
                << " samples) to " << genOut.string() << "\n";
    } else if (*train) {
      const DemonstrationSet demos = loadDemos(trainDemos);
      TrainHyper hyper;
      hyper.epochs = trainEpochs;
      hyper.batchSize = trainBatch;
      hyper.learningRate = trainLr;
      hyper.arch.hidden = trainHidden;
      hyper.arch.dropout = trainDropout;
      hyper.arch.poolVisual = demos.kind == ObservationKind::Visual;
      const EnsemblePolicy policy = trainDropoutM > 0 ? trainDropoutPolicy(demos, trainDropoutM, trainSeed, hyper)
                                                      : trainEnsemble(demos, trainK, trainSeed, hyper);
      savePolicy(policy, trainOut);
      for (std::size_t i = 0; i < policy.reports.size(); ++i)
        std::cout << "member " << i << ": nll " << policy.reports[i].initialNll << " -> " << policy.reports[i].finalNll
                  << "\n";
      std::cout << "wrote " << trainOut.string() << "\n";
    } else if (*interp) {
      std::shared_ptr<LanguageModelClient> client;
      if (!llmEndpoint.empty()) {
        LlmConfig cfg;
        cfg.endpoint = llmEndpoint;
        cfg.model = llmModel;
        client = std::make_shared<HttpChatClient>(cfg);
      }
      const Interpreter interpreter(PromptTemplate::defaults(), client, !forceModel);
      try {
        const ActionSequence seq = interpreter.interpret(Instruction(interpText, InstructionSource::Operator));
        std::cout << nlohmann::json{{"actions", seq.codes()}, {"provenance", provenanceName(seq.provenance())}}.dump()
                  << "\n";
      } catch (const Unparseable& e) {
        std::cerr << "unparseable at " << e.position() << ": " << e.what() << "\n";
        return 2;
      }
    } else if (*suite) {
      const RunConfigFile config = loadRunConfig(suiteConfig);
      const SuiteSpec spec = suiteFromConfig(config);
      const EnsemblePolicy policy = loadPolicy(config.policy);
      const SuiteReport report = suiteSerial ? runSuiteSerial(spec, policy) : runSuite(spec, policy);
      fs::create_directories(suiteOut);
      auto jsonl = openOut(suiteOut / "episodes.jsonl");
      writeEpisodesJsonl(report, jsonl);
      auto csv = openOut(suiteOut / "summary.csv");
      writeSuiteCsv(report, csv);
      auto table = openOut(suiteOut / "summary.txt");
      writeSuiteTable(report, table);
      writeSuiteTable(report, std::cout);
      if (!suiteStore.empty()) {
        EpisodeStore store(suiteStore);
        const std::string name = suiteConfig.stem().string();
        for (const auto& log : report.episodes) store.append(log, name);
        std::cout << "appended " << report.episodes.size() << " episodes to " << suiteStore.string() << "\n";
      }
    } else if (*render) {
      const Grid grid = Grid::build(loadScenario(renderScenario));
      std::cout << renderAscii(grid);
      if (!renderPgm.empty()) {
        auto out = openOut(renderPgm);
        writePgm(renderImage(grid, AgentState{grid.start(), 0}), out);
      }
    } else if (*serve) {
      ServiceOptions options;
      options.storeDir = serveStore;
      options.baseDir = fs::absolute(serveBase);
      options.defaultStepDelayMs = serveDelay;
      HttpService service(options);
      std::signal(SIGINT, onSignal);
      std::signal(SIGTERM, onSignal);
      const int port = service.start(serveHost, servePort);
      std::cout << "listening on http://" << serveHost << ":" << port << std::endl;
      while (!stopRequested) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      service.stop();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
