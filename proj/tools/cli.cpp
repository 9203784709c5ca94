#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <functional>
#include <memory>

#include "commands.hpp"
#include "modsensor/errors.hpp"

namespace modsensor::cli {

namespace {

struct OutputOptions {
  std::string path;
  std::string format = "csv";
};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

// Registers one flag per config key and remembers how to copy a given value back into JSON.
class FlagBinder {
 public:
  FlagBinder(CLI::App& app, const Json& defaults) {
    for (const auto& [key, value] : defaults.items()) bind(app, key, value);
  }

  Json explicit_values() const {
    Json j = Json::object();
    for (const auto& w : writers_) w(j);
    return j;
  }

 private:
  template <class T>
  void bind_value(CLI::App& app, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app.add_option(flag_name(key), *value, help);
    writers_.push_back([opt, value, key](Json& j) {
      if (opt->count() > 0) j[key] = *value;
    });
  }

  void bind(CLI::App& app, const std::string& key, const Json& value) {
    const std::string help = "default: " + value.dump();
    if (value.is_boolean()) {
      auto flag = std::make_shared<bool>(false);
      CLI::Option* opt = app.add_flag(flag_name(key), *flag, help);
      writers_.push_back([opt, flag, key](Json& j) {
        if (opt->count() > 0) j[key] = *flag;
      });
    } else if (key == "seed") {
      bind_value<std::uint64_t>(app, key, help);
    } else if (value.is_number_integer()) {
      bind_value<long long>(app, key, help);
    } else if (value.is_number()) {
      bind_value<double>(app, key, help);
    } else if (value.is_string()) {
      bind_value<std::string>(app, key, help);
    } else if (value.is_array()) {
      auto list = std::make_shared<std::vector<double>>();
      CLI::Option* opt = app.add_option(flag_name(key), *list, "two values; default: random per trial")->expected(2);
      writers_.push_back([opt, list, key](Json& j) {
        if (opt->count() > 0) j[key] = *list;
      });
    }
  }

  std::vector<std::function<void(Json&)>> writers_;
};

Json table_as_json(const CsvTable& t) {
  Json data = Json::array();
  for (const auto& row : t.rows) {
    Json r = Json::array();
    for (const auto& field : row) r.push_back(rounded(parse_number(field, "table")));
    data.push_back(std::move(r));
  }
  return {{"columns", t.header}, {"data", std::move(data)}};
}

Json sidecar(const Command& cmd, const Json& config) {
  return {{"tool_version", tool_version()}, {"subcommand", cmd.name}, {"seed", config.at("seed")},
          {"config_echo", config}};
}

void execute(const Command& cmd, const Json& config, const OutputOptions& o, std::ostream& out) {
  if (o.format != "csv" && o.format != "json") throw ValidationError("format must be 'csv' or 'json'");
  CommandOutput result = cmd.run(config);
  if (!result.table) {
    if (o.path.empty()) {
      out << result.summary.dump(2) << '\n';
    } else {
      write_text(o.path, result.summary.dump(2) + "\n");
    }
    return;
  }
  if (o.path.empty()) {
    result.summary["table"] = table_as_json(*result.table);
  } else {
    if (o.format == "csv") {
      write_text(o.path, result.table->render());
    } else {
      Json doc = sidecar(cmd, config);
      doc["table"] = table_as_json(*result.table);
      write_text(o.path, doc.dump(2) + "\n");
    }
    write_text(o.path + ".config.json", sidecar(cmd, config).dump(2) + "\n");
    result.summary["output"] = o.path;
  }
  out << result.summary.dump(2) << '\n';
}

// A saved output or sidecar carries config_echo; a hand-written config file is the bare object.
Json config_payload(const Json& file, const std::string& expected, const std::string& source) {
  if (!file.is_object()) throw ValidationError(source + " must be a JSON object");
  if (!file.contains("config_echo")) return file;
  if (file.contains("subcommand") && file.at("subcommand") != expected) {
    throw ValidationError(source + " was written by '" + file.at("subcommand").get<std::string>() + "', not '" +
                          expected + "'");
  }
  return file.at("config_echo");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Modular quantum sensing toolkit: states, QPE, Fisher analysis, pulse checks"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  struct Bound {
    const Command* cmd;
    CLI::App* sub;
    std::unique_ptr<FlagBinder> flags;
    std::string config_file;
    OutputOptions output;
  };
  std::vector<Bound> bound;
  bound.reserve(commands().size());
  for (const auto& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    bound.push_back({&cmd, sub, nullptr, {}, {}});
    Bound& b = bound.back();
    b.flags = std::make_unique<FlagBinder>(*sub, cmd.defaults);
    sub->add_option("--config", b.config_file, "JSON config file; explicit flags override it");
    sub->add_option("--output", b.output.path, "output file; tables also get <output>.config.json");
    sub->add_option("--format", b.output.format, "table format: csv or json");
  }

  std::string replay_file;
  OutputOptions replay_output;
  std::uint64_t replay_seed = 0;
  bool allow_mismatch = false;
  CLI::App* replay = app.add_subcommand("replay", "Re-run a recorded configuration");
  replay->add_option("--config", replay_file, "sidecar or JSON output of an earlier run")->required();
  CLI::Option* seed_opt = replay->add_option("--seed", replay_seed, "override the recorded seed");
  replay->add_option("--output", replay_output.path, "output file");
  replay->add_option("--format", replay_output.format, "table format: csv or json");
  replay->add_flag("--allow-version-mismatch", allow_mismatch, "run even if the record came from another version");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (replay->parsed()) {
      const Json record = read_json(replay_file);
      if (!record.is_object() || !record.contains("subcommand") || !record.contains("config_echo")) {
        throw ValidationError("'" + replay_file + "' is not a run record (needs subcommand and config_echo)");
      }
      const std::string version = record.value("tool_version", std::string("unknown"));
      if (version != tool_version()) {
        const std::string msg =
            "record was written by version " + version + ", this is " + std::string(tool_version());
        if (!allow_mismatch) throw ValidationError(msg + "; pass --allow-version-mismatch to run anyway");
        diag::warn(msg);
      }
      const Command& cmd = find_command(record.at("subcommand").get<std::string>());
      Json config = cmd.defaults;
      merge_config(config, record.at("config_echo"), "recorded config");
      if (seed_opt->count() > 0) config["seed"] = replay_seed;
      execute(cmd, config, replay_output, out);
      return 0;
    }
    for (const auto& b : bound) {
      if (!b.sub->parsed()) continue;
      Json config = b.cmd->defaults;
      if (!b.config_file.empty()) {
        merge_config(config, config_payload(read_json(b.config_file), b.cmd->name, b.config_file), b.config_file);
      }
      merge_config(config, b.flags->explicit_values(), "command line");
      execute(*b.cmd, config, b.output, out);
      return 0;
    }
    throw ValidationError("no subcommand given");
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const Json::exception& e) {
    err << "error: malformed configuration value: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace modsensor::cli
