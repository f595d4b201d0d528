// bbfit: binned template fits with finite Monte-Carlo statistics.
//
//   bbfit fit --input model.json [--method approx] [--output result.json]
//   bbfit toy-study --seed 7 --output records.csv [--n-mc 50,100] [--n-toys 1000]
//   bbfit bench --seed 1 [--bins 100] [--methods approx,conway,exact]
//
// Exit codes: 0 success, 1 invalid input, 2 fit did not converge.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bbfit/io.hpp"
#include "bbfit/optimizer.hpp"
#include "bbfit/study.hpp"

namespace {

using namespace bbfit;

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

ToyConfig load_toy_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  return toy_config_from_json(nlohmann::json::parse(in));
}

std::string summary_path_for(const std::string& records) {
  std::filesystem::path p(records);
  auto ext = p.extension().string();
  if (ext.empty()) ext = ".csv";
  return (p.parent_path() / (p.stem().string() + "_summary" + ext)).string();
}

void print_summary(const std::vector<PullStats>& stats) {
  std::printf("%-8s %7s %6s %10s %9s %9s %9s\n", "method", "n_mc", "conv",
              "mean_z", "sem", "std_z", "sem");
  for (const auto& s : stats) {
    const auto name = std::string(method_name(s.method));
    if (s.moments)
      std::printf("%-8s %7zu %6zu %10.4f %9.4f %9.4f %9.4f\n", name.c_str(),
                  s.n_mc, s.n_converged, s.moments->mean_z, s.moments->sem_mean,
                  s.moments->std_z, s.moments->sem_std);
    else
      std::printf("%-8s %7zu %6zu %10s %9s %9s %9s\n", name.c_str(), s.n_mc,
                  s.n_converged, "-", "-", "-", "-");
  }
}

struct FitArgs {
  std::string method = "approx";
  std::string input;
  std::string output = "-";
  bool weighted = false;
};

int cmd_fit(const FitArgs& a) {
  const Method method = parse_method(a.method);
  std::ifstream in(a.input);
  if (!in) throw std::invalid_argument("cannot open input " + a.input);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  TemplateModel model = model_from_json(j);
  const bool weighted = a.weighted || !model.is_unweighted();
  if (method == Method::Exact && weighted)
    throw std::invalid_argument(
        "method=exact requires unweighted input (sumw2 must equal sumw)");
  const CostFunction cost(method, std::move(model), weighted);
  const FitResult r = fit(cost);
  const std::string text = fit_result_to_json(r).dump(2) + "\n";
  if (a.output == "-") {
    std::cout << text;
  } else {
    std::ofstream out(a.output);
    if (!out) throw std::invalid_argument("cannot write " + a.output);
    out << text;
  }
  if (!r.converged) std::cerr << "bbfit: fit did not converge\n";
  return r.converged ? 0 : 2;
}

struct StudyArgs {
  std::vector<std::string> methods{"approx", "conway", "exact"};
  std::vector<std::size_t> n_mc{50, 100, 200, 500, 1000, 10000};
  std::size_t n_toys = 1000;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bins;
  int jobs = 0;
  std::string output;
  std::string summary;
  std::string config;
};

int cmd_toy_study(const StudyArgs& a) {
  StudyOptions o;
  o.base = load_toy_config(a.config);
  o.base.seed = *a.seed;
  if (a.bins) o.base.nbins = *a.bins;
  o.n_mc_grid = a.n_mc;
  o.n_toys = a.n_toys;
  o.methods = parse_methods(a.methods);
  o.jobs = a.jobs;
  const auto records = run_study(o);
  const auto stats = summarize(records);

  std::ofstream rec(a.output);
  if (!rec) throw std::invalid_argument("cannot write " + a.output);
  write_records_csv(rec, records);
  const std::string sp = a.summary.empty() ? summary_path_for(a.output) : a.summary;
  std::ofstream sum(sp);
  if (!sum) throw std::invalid_argument("cannot write " + sp);
  write_summary_csv(sum, stats);
  print_summary(stats);
  return 0;
}

struct BenchArgs {
  std::vector<std::string> methods{"approx", "conway", "exact"};
  std::size_t n_mc = 100;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bins;
  std::size_t repetitions = 11;
  std::string config;
};

int cmd_bench(const BenchArgs& a) {
  ToyConfig cfg = load_toy_config(a.config);
  cfg.seed = *a.seed;
  cfg.n_mc = a.n_mc;
  if (a.bins) cfg.nbins = *a.bins;
  auto stream = rng_stream(cfg.seed, 0);
  const TemplateModel model = to_model(cfg, draw(cfg, stream));
  const auto rows = bench(model, parse_methods(a.methods), a.repetitions);
  std::printf("%-8s %14s %8s\n", "method", "median_ms", "ratio");
  for (const auto& r : rows)
    std::printf("%-8s %14.4f %8.2f\n", std::string(method_name(r.method)).c_str(),
                r.median_seconds * 1e3, r.ratio);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binned template fits with finite Monte-Carlo statistics"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model given as JSON");
  fit_cmd->add_option("--method", fa.method, "exact, conway or approx")
      ->capture_default_str();
  fit_cmd->add_option("--input", fa.input, "Model JSON")->required();
  fit_cmd->add_option("--output", fa.output, "Result JSON ('-' for stdout)")
      ->capture_default_str();
  fit_cmd->add_flag("--weighted", fa.weighted,
                    "Use the weighted likelihoods (implied by sumw2 != sumw)");

  StudyArgs sa;
  auto* study_cmd = app.add_subcommand("toy-study", "Pull study over toy experiments");
  study_cmd->add_option("--method,--methods", sa.methods, "Comma list of methods")
      ->delimiter(',')
      ->capture_default_str();
  study_cmd->add_option("--n-mc", sa.n_mc, "Comma list of template sizes")
      ->delimiter(',')
      ->capture_default_str();
  study_cmd->add_option("--n-toys", sa.n_toys, "Toys per template size")
      ->capture_default_str();
  study_cmd->add_option("--seed", sa.seed, "Seed (required)")->required();
  study_cmd->add_option("--bins", sa.bins, "Override the number of bins");
  study_cmd->add_option("--jobs", sa.jobs, "Worker threads (0: all cores)")
      ->capture_default_str();
  study_cmd->add_option("--output", sa.output, "Records CSV")->required();
  study_cmd->add_option("--summary", sa.summary,
                        "Summary CSV (default: <output stem>_summary.csv)");
  study_cmd->add_option("--config", sa.config, "Toy configuration JSON");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Time full fits per method");
  bench_cmd->add_option("--method,--methods", ba.methods, "Comma list of methods")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--n-mc", ba.n_mc, "Template size")->capture_default_str();
  bench_cmd->add_option("--seed", ba.seed, "Seed (required)")->required();
  bench_cmd->add_option("--bins", ba.bins, "Override the number of bins");
  bench_cmd->add_option("--repetitions", ba.repetitions, "Timed fits per method")
      ->capture_default_str();
  bench_cmd->add_option("--config", ba.config, "Toy configuration JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa);
    if (*study_cmd) return cmd_toy_study(sa);
    if (*bench_cmd) return cmd_bench(ba);
  } catch (const std::exception& e) {
    std::cerr << "bbfit: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
