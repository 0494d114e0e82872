// sot-align: entity alignment with dangling-entity detection.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sotead/config.hpp"
#include "sotead/pipeline.hpp"
#include "sotead/synth.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kStageFailure = 3;
constexpr int kNodeBudget = 4;

struct StageArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string rankings;  // eval only
};

void add_stage_options(CLI::App* cmd, StageArgs& a) {
  cmd->add_option("--config", a.config, "flat key = value config file");
  cmd->add_option("--set", a.sets, "override a config key (key=value), repeatable");
  cmd->add_option("--out", a.out, "artifact directory")->required();
}

sotead::StageContext make_context(const StageArgs& a) {
  std::optional<std::filesystem::path> file;
  if (!a.config.empty()) file = a.config;
  return {sotead::load_config(file, a.sets), a.out, &std::cerr};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-constraint optimal transport entity alignment"};
  app.require_subcommand(1);

  StageArgs args;
  struct Stage {
    const char* name;
    const char* help;
  };
  const std::vector<Stage> stages{
      {"pipeline", "run every stage in order"},
      {"embed", "name embeddings from word vectors"},
      {"pairs", "pseudo pairs and top-N candidates"},
      {"train", "train the structure encoder"},
      {"cost", "sparse cost matrices at K_grid and K"},
      {"gridsearch", "choose the virtual costs alpha and beta"},
      {"solve", "solve the semi-constraint transport"},
      {"eval", "alignment and dangling detection metrics"},
  };
  std::vector<CLI::App*> stage_cmds;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_stage_options(cmd, args);
    stage_cmds.push_back(cmd);
  }
  stage_cmds.back()->add_option("--rankings", args.rankings,
                                "score a ranking file (source<TAB>candidates) instead of the embeddings");

  sotead::SynthParams synth;
  std::string synth_out;
  auto* syn = app.add_subcommand("synthesize", "write a synthetic KG pair with gold files");
  syn->add_option("--out", synth_out, "output directory")->required();
  syn->add_option("--matchable", synth.matchable, "entities present in both KGs");
  syn->add_option("--dangling1", synth.dangling1, "extra entities of KG1");
  syn->add_option("--dangling2", synth.dangling2, "extra entities of KG2");
  syn->add_option("--dim", synth.dim, "word vector dimension");
  syn->add_option("--degree", synth.degree, "mean degree of the shared graph");
  syn->add_option("--edge-keep", synth.edge_keep, "probability a shared edge survives in each KG");
  syn->add_option("--sigma", synth.sigma, "name noise scale");
  syn->add_option("--topics", synth.topics, "number of latent topic centres");
  syn->add_option("--topic-spread", synth.topic_spread, "spread of entities around their topic centre");
  syn->add_option("--split-dangling-topics", synth.split_dangling_topics,
                  "draw each side's dangling entities from its own half of the topics");
  syn->add_option("--train-fraction", synth.train_fraction, "share of gold pairs used for supervision");
  syn->add_option("--seed", synth.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (syn->parsed()) {
      const auto files = sotead::synthesize(synth, synth_out);
      std::cout << files.config.string() << '\n';
      return kOk;
    }
    const auto ctx = make_context(args);
    std::filesystem::create_directories(ctx.out);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "pipeline") {
      if (auto m = sotead::run_pipeline(ctx)) std::cout << sotead::to_json(*m).dump(2) << '\n';
    } else if (name == "embed") {
      sotead::run_stage(name, [&] { sotead::stage_embed(ctx); });
    } else if (name == "pairs") {
      sotead::run_stage(name, [&] { sotead::stage_pairs(ctx); });
    } else if (name == "train") {
      sotead::run_stage(name, [&] { sotead::stage_train(ctx); });
    } else if (name == "cost") {
      sotead::run_stage(name, [&] { sotead::stage_cost(ctx); });
    } else if (name == "gridsearch") {
      sotead::run_stage(name, [&] { sotead::stage_gridsearch(ctx); });
    } else if (name == "solve") {
      sotead::run_stage(name, [&] { sotead::stage_solve(ctx); });
    } else if (name == "eval") {
      std::optional<std::filesystem::path> rankings;
      if (!args.rankings.empty()) rankings = args.rankings;
      const auto m = sotead::run_stage(name, [&] { return sotead::stage_eval(ctx, rankings); });
      std::cout << sotead::to_json(m).dump(2) << '\n';
    }
    return kOk;
  } catch (const sotead::NodeBudgetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNodeBudget;
  } catch (const sotead::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.input_error() ? kInputError : kStageFailure;
  } catch (const sotead::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const sotead::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const sotead::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageFailure;
  }
}
