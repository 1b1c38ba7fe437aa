#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hfw/commands.hpp"
#include "hfw/config.hpp"

namespace {

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

void print_schema() {
  for (const auto& e : hfw::config_schema()) {
    std::cout << e.key << " (" << e.type << ", default " << e.default_value << "): " << e.description << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hfwave: wave trains of reaction-diffusion systems and their modulations"};
  app.require_subcommand(0, 1);
  bool schema = false;
  app.add_flag("--schema", schema, "print every configuration key with its default");

  hfw::CommandOptions opt;
  opt.command_line = joined_args(argc, argv);
  std::vector<std::string> sets;
  std::string command;

  for (const auto& name : hfw::command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
    sub->add_option("--config", opt.config_path, "configuration file (key = value, or a manifest.json)");
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { opt.out_dir = v; },
                                          "output directory");
    sub->add_option_function<std::string>("--epsilon", [&](const std::string& v) { opt.epsilon = v; },
                                          "comma separated eps list");
    sub->add_option_function<int>("--order", [&](const int& v) { opt.order = v; }, "expansion order m");
    sub->add_option_function<long long>("--seed", [&](const long long& v) { opt.seed = v; }, "random seed");
    sub->add_option("--set", sets, "override one key: --set key=value (repeatable)");
    sub->add_flag("--force", opt.force, "run even when the stability guard refuses");
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hfw::kExitConfig;
  }
  if (schema) {
    print_schema();
    return 0;
  }
  if (command.empty()) {
    std::cout << app.help();
    return hfw::kExitConfig;
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "config error: --set expects key=value, got '" << s << "'\n";
      return hfw::kExitConfig;
    }
    opt.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return hfw::run_command(command, opt);
}
