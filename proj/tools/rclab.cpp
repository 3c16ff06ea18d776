#include <iostream>

#include "CLI11.hpp"
#include "rclab/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace rclab::cli;
  CLI::App app{"Conditional diffusion distillation lab"};
  app.require_subcommand(1);

  std::string manifest;
  std::uint64_t seed = 0;
  std::string out;
  const std::pair<const char*, const char*> commands[] = {
      {"train-teacher", "Train a conditional teacher on the manifest dataset"},
      {"gen-cache", "Sample a generation cache from a teacher"},
      {"distill", "Distill a student from a teacher and a cache or dataset"},
      {"eval", "Condition fidelity (and optional Frechet distance) of a model"},
      {"swap-exp", "Condition-swap phase table for a model"},
      {"overlap", "Closed-form overlap of two noised Toy2D conditions"},
      {"report", "Collect eval reports into seen/unseen summary tables"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--manifest", manifest, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the manifest seed");
    sub->add_option("--out", out, "Override the output directory");
  }
  std::string template_command;
  auto* tmpl = app.add_subcommand("template", "Print a manifest with every field at its default");
  tmpl->add_option("command", template_command)->required();

  CLI11_PARSE(app, argc, argv);

  auto* sub = app.get_subcommands().front();
  if (sub == tmpl) {
    const auto c = parse_command(template_command);
    if (!c) {
      std::cerr << "error: unknown command '" << template_command << "'\n";
      return kExitManifest;
    }
    RunManifest m;
    m.command = *c;
    for (const auto& name : required_inputs(*c)) m.inputs[name] = {name + ".path", ""};
    std::cout << manifest_text(m);
    return kExitOk;
  }
  Overrides overrides;
  if (sub->count("--seed")) overrides.seed = seed;
  if (sub->count("--out")) overrides.out = out;
  return run_command(sub->get_name(), manifest, overrides, std::cerr, std::cerr);
}
