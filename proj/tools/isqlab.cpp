// isqlab: command-line front end. Each subcommand mirrors a run-spec command;
// flags carry the same names as the JSON fields. Exit codes: 0 success,
// 2 validation, 3 numerical failure, 4 I/O.

#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "isq/cli.hpp"

namespace {

using isq::Json;

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << Json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

struct FlagSet {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app, const std::string& name, const std::string& help) {
    opts[name] = app->add_option("--" + name, values[name], help);
  }
  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }
};

double parse_number(const std::string& flag, const std::string& text) {
  const auto v = isq::cli::parse_reals(text, "--" + flag);
  if (v.size() != 1) throw isq::ValidationError("--" + flag + ": expected one number");
  return v[0];
}

/// Builds the run-spec JSON from flags so both entry points share validation.
Json spec_from_flags(const std::string& command, const FlagSet& model, const FlagSet& opts) {
  Json j;
  j["command"] = command;
  Json params = Json::object();
  if (!model.given("alpha")) throw isq::ValidationError("--alpha is required");
  params["alpha"] = parse_number("alpha", model.values.at("alpha"));
  if (model.given("x0")) params["x0"] = parse_number("x0", model.values.at("x0"));
  j["params"] = params;
  Json reg = Json::object();
  if (model.given("kind")) reg["kind"] = model.values.at("kind");
  if (model.given("b")) reg["b"] = parse_number("b", model.values.at("b"));
  if (model.given("g")) reg["g"] = parse_number("g", model.values.at("g"));
  if (model.given("profile_s") || model.given("profile_f")) {
    reg["profile"] = {{"s", isq::cli::parse_reals(model.values.at("profile_s"), "--profile_s")},
                      {"f", isq::cli::parse_reals(model.values.at("profile_f"), "--profile_f")}};
  }
  if (!reg.empty()) j["regulator"] = reg;
  Json o = Json::object();
  for (const auto& [name, opt] : opts.opts) {
    if (opt->count() > 0) o[name] = opts.values.at(name);
  }
  j["options"] = o;
  if (model.given("output")) j["output"] = model.values.at("output");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regulated inverse-square potential: RG flow, spectra, propagators, scattering, paths"};
  app.require_subcommand(0, 1);
  std::string spec_path;
  unsigned threads = 0;
  app.add_option("--spec", spec_path, "run spec JSON file (instead of a subcommand)");
  app.add_option("--threads", threads, "cap on worker threads (0: all cores)");

  struct Sub {
    CLI::App* app;
    FlagSet model, opts;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  for (const auto& c : isq::cli::commands()) {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(c.name, c.help);
    s->model.add(s->app, "alpha", "inverse-square coupling");
    s->model.add(s->app, "x0", "length scale (default 1)");
    s->model.add(s->app, "kind", "regulator: square | linear | generic");
    s->model.add(s->app, "b", "regulator width factor");
    s->model.add(s->app, "g", "regulator depth");
    s->model.add(s->app, "profile_s", "generic profile nodes on [0, 1]");
    s->model.add(s->app, "profile_f", "generic profile values");
    s->model.add(s->app, "output", "output directory (default $ISQLAB_OUTPUT_DIR or .)");
    for (const auto& o : c.options) {
      std::string help = o.help;
      if (!o.fallback.is_null()) {
        help += " [" + (o.fallback.is_string() ? o.fallback.get<std::string>() : o.fallback.dump()) + "]";
      }
      s->opts.add(s->app, o.name, help);
    }
    subs.push_back(std::move(s));
  }
  std::string golden_dir;
  auto* golden = app.add_subcommand("regen-golden", "rewrite the golden reference tables");
  golden->add_option("--output", golden_dir, "directory (default $ISQLAB_OUTPUT_DIR or .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "validation", e.what());
  }

  try {
    isq::thread_cap() = threads;
    if (golden->parsed()) {
      std::filesystem::path dir = golden_dir;
      if (dir.empty()) {
        const char* env = std::getenv("ISQLAB_OUTPUT_DIR");
        dir = env && *env ? env : ".";
      }
      const auto files = isq::cli::regen_golden(dir);
      std::cout << Json{{"command", "regen-golden"}, {"files", files}}.dump() << std::endl;
      return 0;
    }
    Json spec_json;
    if (!spec_path.empty()) {
      if (!app.get_subcommands().empty()) throw isq::ValidationError("--spec cannot be combined with a subcommand");
      spec_json = Json::parse(isq::read_file(spec_path), nullptr, false);
      if (spec_json.is_discarded()) throw isq::ValidationError("run spec: " + spec_path + " is not valid JSON");
    } else {
      const Sub* chosen = nullptr;
      for (const auto& s : subs) {
        if (s->app->parsed()) chosen = s.get();
      }
      if (!chosen) {
        std::cout << app.help() << std::endl;
        return 2;
      }
      spec_json = spec_from_flags(chosen->app->get_name(), chosen->model, chosen->opts);
    }
    const auto spec = isq::run_spec_from_json(spec_json);
    const auto res = isq::cli::run(spec);
    Json line = res.summary["result"];
    line["command"] = spec.command;
    line["files"] = res.files;
    std::cout << line.dump() << std::endl;
    return 0;
  } catch (const isq::ValidationError& e) {
    return fail(2, "validation", e.what());
  } catch (const isq::DomainError& e) {
    return fail(2, "domain", e.what());
  } catch (const isq::NumericalError& e) {
    return fail(3, "numerical", e.what());
  } catch (const isq::IoError& e) {
    return fail(4, "io", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(4, "io", e.what());
  } catch (const std::exception& e) {
    return fail(3, "numerical", e.what());
  }
}
