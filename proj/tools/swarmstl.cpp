#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "swarmstl/log.hpp"
#include "swarmstl/planner.hpp"
#include "swarmstl/plot.hpp"
#include "swarmstl/runtime.hpp"

namespace fs = std::filesystem;
using namespace swarmstl;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kPlanFailed = 2, kViolation = 3 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

fs::path out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw IoError("output directory " + dir + " is not writable");
  return p;
}

stl::FormulaPtr formula_for(const Scenario& sc, const std::string& text) {
  auto ctx = stl::context_for(sc);
  return stl::parse(text.empty() ? sc.formula : text, &ctx);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Flags {
  std::string scenario, plan, trace, formula, out = ".";
  int tau_max = 0;
  double dt = 0.0;
  unsigned long seed = 0;
};

int cmd_plan(const Flags& f) {
  Scenario sc = load_scenario(read_file(f.scenario));
  auto formula = formula_for(sc, f.formula);
  plan::Options opt;
  opt.tau_max = f.tau_max;
  auto dir = out_dir(f.out);

  auto res = plan::plan(sc, formula, opt);
  std::ostringstream log;
  for (auto& it : res.log)
    log << "iteration " << it.iteration << ": milp=" << it.milp_status << " nodes=" << it.nodes
        << " lazy_rounds=" << it.lazy_rounds << " groups=" << it.groups_active << " eps_milp=" << fmt(it.eps_milp)
        << " milp_time=" << fmt(it.milp_seconds) << "s ellipsoid=" << it.ellipsoid_status
        << " eps=" << fmt(it.eps_ellipsoid) << " ellipsoid_time=" << fmt(it.ellipsoid_seconds) << "s\n";
  if (res.status == plan::Status::Success) {
    log << "epsilon >= 0\n";
  } else {
    log << "planner failed after " << res.iterations << " iterations: " << res.reason;
    if (res.has_path) log << " (last epsilon " << fmt(res.path.epsilon) << ")";
    log << "; outcome unknown\n";
    for (auto& [family, slack] : res.certificate.worst) log << "  worst " << family << " slack " << fmt(slack) << "\n";
  }
  std::cout << log.str();
  write_file(dir / "plan.log", log.str());
  if (res.has_path) write_file(dir / "plan.json", plan::to_json(res.path));

  json m;
  m["command"] = "plan";
  m["scenario"] = f.scenario;
  m["formula"] = stl::to_string(formula);
  m["settings"] = {{"tau_max", opt.tau_max > 0 ? opt.tau_max : sc.constants.tau_max},
                   {"node_limit", opt.node_limit},
                   {"milp_time_limit", opt.milp_time_limit},
                   {"max_lazy_rounds", opt.max_lazy_rounds},
                   {"lazy", opt.lazy}};
  m["output_dir"] = f.out;
  m["seed"] = f.seed;
  m["version"] = kVersion;
  m["status"] = res.status == plan::Status::Success ? "success" : "failure";
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  return res.status == plan::Status::Success ? kOk : kPlanFailed;
}

int cmd_simulate(const Flags& f) {
  auto path = plan::path_from_json(read_file(f.plan));
  Scenario sc = load_scenario(read_file(f.scenario));
  auto dir = out_dir(f.out);
  auto tr = rt::simulate(path, sc, f.dt);
  std::ofstream out(dir / "trace.csv");
  if (!out) throw IoError("cannot write " + (dir / "trace.csv").string());
  rt::write_trace_csv(out, tr);
  auto safety = rt::monitor_safety(tr, sc);
  std::cout << "samples " << tr.num_samples() << ", agents " << tr.num_agents() << ", dt " << fmt(tr.dt) << "\n"
            << "min pairwise distance " << fmt(safety.min_distance) << "\n"
            << "worst ellipsoid membership " << fmt(safety.max_membership) << "\n";
  return kOk;
}

int cmd_check(const Flags& f) {
  Scenario sc = load_scenario(read_file(f.scenario));
  auto formula = formula_for(sc, f.formula);
  std::ifstream in(f.trace);
  if (!in) throw IoError("cannot open " + f.trace);
  auto tr = rt::read_trace_csv(in, sc);
  if (!f.plan.empty()) rt::attach_shapes(tr, plan::path_from_json(read_file(f.plan)));
  auto dir = out_dir(f.out);
  auto stl_rep = rt::monitor_stl(tr, formula, sc.regions);
  auto safety = rt::monitor_safety(tr, sc);
  write_file(dir / "report.json", rt::report_json(stl_rep, safety));
  for (auto& c : stl_rep.conjuncts) std::cout << (c.satisfied ? "ok   " : "FAIL ") << c.formula << "\n";
  auto line = [](const char* name, bool ok, double when) {
    std::cout << (ok ? "ok   " : "FAIL ") << name;
    if (!ok) std::cout << " (first violation at t = " << fmt(when) << ")";
    std::cout << "\n";
  };
  line("pairwise distance", safety.distance_ok, safety.first_distance_violation);
  line("obstacle margin", safety.obstacle_ok, safety.first_obstacle_violation);
  if (tr.has_shapes()) line("ellipsoid membership", safety.membership_ok, safety.first_membership_violation);
  return stl_rep.satisfied && safety.ok() ? kOk : kViolation;
}

int cmd_plot(const Flags& f) {
  Scenario sc = load_scenario(read_file(f.scenario));
  std::optional<plan::PlanPath> path;
  std::optional<rt::Trace> tr;
  if (!f.plan.empty()) path = plan::path_from_json(read_file(f.plan));
  if (!f.trace.empty()) {
    std::ifstream in(f.trace);
    if (!in) throw IoError("cannot open " + f.trace);
    tr = rt::read_trace_csv(in, sc);
  }
  auto svg = viz::plot_svg(sc, path ? &*path : nullptr, tr ? &*tr : nullptr);
  write_file(out_dir(f.out) / "plot.svg", svg);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"swarmstl: swarm STL planning, simulation and monitoring"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;

  auto* p = app.add_subcommand("plan", "plan a scenario; writes plan.json, plan.log and manifest.json");
  p->add_option("scenario", f.scenario, "scenario JSON")->required();
  p->add_option("--tau-max", f.tau_max, "iteration limit (default: scenario value)")->check(CLI::NonNegativeNumber);
  p->add_option("--formula", f.formula, "override the scenario formula");
  p->add_option("--seed", f.seed, "recorded in the manifest");
  p->add_option("--out", f.out, "output directory");

  auto* s = app.add_subcommand("simulate", "execute a plan; writes trace.csv");
  s->add_option("plan", f.plan, "plan JSON")->required();
  s->add_option("scenario", f.scenario, "scenario JSON")->required();
  s->add_option("--dt", f.dt, "sample step (default: min segment duration / 50)");
  s->add_option("--seed", f.seed, "unused; accepted for symmetry");
  s->add_option("--out", f.out, "output directory");

  auto* c = app.add_subcommand("check", "monitor a trace; writes report.json");
  c->add_option("trace", f.trace, "trace CSV")->required();
  c->add_option("scenario", f.scenario, "scenario JSON")->required();
  c->add_option("--formula", f.formula, "formula (default: scenario formula)");
  c->add_option("--plan", f.plan, "plan JSON, enables ellipsoid membership checks");
  c->add_option("--out", f.out, "output directory");

  auto* g = app.add_subcommand("plot", "render plot.svg");
  g->add_option("scenario", f.scenario, "scenario JSON")->required();
  g->add_option("--plan", f.plan, "plan JSON");
  g->add_option("--trace", f.trace, "trace CSV");
  g->add_option("--out", f.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (p->parsed()) return cmd_plan(f);
    if (s->parsed()) return cmd_simulate(f);
    if (c->parsed()) return cmd_check(f);
    if (g->parsed()) return cmd_plot(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
