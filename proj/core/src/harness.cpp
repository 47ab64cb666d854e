#include "csopt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "csopt/linalg.hpp"
#include "csopt/rng.hpp"

namespace csopt {

namespace {

using nlohmann::json;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Crude deterministic Lipschitz probe for the full gradient; used only when
// the instance carries no smoothness metadata.
double estimate_gradient_lipschitz(const CompositionProblem& problem) {
  OracleLedger scratch;
  Rng rng(0x9e3779b97f4a7c15ULL);
  double best = 1e-8;
  for (int trial = 0; trial < 16; ++trial) {
    VectorXd a(problem.q), d(problem.q);
    for (int i = 0; i < problem.q; ++i) a[i] = rng.normal();
    for (int i = 0; i < problem.q; ++i) d[i] = rng.normal();
    const double step = 1e-3 * std::max(1.0, a.norm());
    const VectorXd b = a + step * d / std::max(d.norm(), 1e-300);
    const VectorXd ga = full_gradient(problem, scratch, a);
    const VectorXd gb = full_gradient(problem, scratch, b);
    best = std::max(best, (ga - gb).norm() / step);
  }
  return best;
}

// Max-norm distance of w from the fixed point of the proximal KKT condition
// 0 in grad/subgrad R(w) + B^T lambda.
double omega_kkt_residual(const ConstraintSpec& constraint, const VectorXd& w,
                          const VectorXd& lambda) {
  const VectorXd bt_lambda = constraint.B.transpose() * lambda;
  const auto& reg = constraint.regularizer;
  if (reg.smooth()) return (reg.gradient(w) + bt_lambda).cwiseAbs().maxCoeff();
  const VectorXd v = w - bt_lambda;
  VectorXd prox(w.size());
  if (reg.kind == Regularizer::Kind::L1) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double a = v[i];
      prox[i] = a > reg.tau ? a - reg.tau : (a < -reg.tau ? a + reg.tau : 0.0);
    }
  } else {
    if (!reg.custom_prox) throw std::logic_error("custom regularizer without prox operator");
    prox = reg.custom_prox(v, 1.0);
  }
  return (w - prox).cwiseAbs().maxCoeff();
}

json require(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key))
    throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return node.at(key);
}

bool identity_split(const ConstraintSpec& constraint) {
  const auto& A = constraint.A;
  const auto& B = constraint.B;
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) return false;
  const double scale = std::max(1.0, std::max(A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff()));
  const MatrixXd eye = MatrixXd::Identity(A.rows(), A.cols());
  return (A - eye).cwiseAbs().maxCoeff() <= 1e-12 * scale &&
         (B + eye).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

ReferenceSolution reference_solve(const CompositionProblem& problem,
                                  const ConstraintSpec& constraint,
                                  const ReferenceSolveOptions& options) {
  problem.validate();
  constraint.validate();
  if (!(options.tol > 0.0) || options.max_iters < 1 || !(options.rho > 0.0))
    throw std::invalid_argument("reference_solve: bad options");

  const double L = problem.L_F ? *problem.L_F : estimate_gradient_lipschitz(problem);
  const double eta = options.eta ? *options.eta : 0.9 / L;
  if (!(eta > 0.0)) throw std::invalid_argument("reference_solve: bad stepsize");

  OracleLedger scratch;
  VectorXd x = VectorXd::Zero(problem.q);
  VectorXd w = VectorXd::Zero(constraint.l());
  VectorXd lambda = VectorXd::Zero(constraint.p());

  OmegaSubproblem omega(constraint, options.rho);
  FactoredSpd factor(1.0 / eta, options.rho, constraint.A);

  double residual = std::numeric_limits<double>::infinity();
  for (long long it = 0; it < options.max_iters; ++it) {
    const VectorXd grad = full_gradient(problem, scratch, x);
    const double r_x = (grad + constraint.A.transpose() * lambda).cwiseAbs().maxCoeff();
    const double r_w = omega_kkt_residual(constraint, w, lambda);
    const double r_feas = (constraint.A * x + constraint.B * w).cwiseAbs().maxCoeff();
    residual = std::max({r_x, r_w, r_feas});
    if (residual <= options.tol) break;

    const VectorXd w_next = omega.solve(x, lambda);
    const VectorXd x_next =
        solve_x_subproblem(factor, constraint, options.rho, x, lambda, w_next, grad, eta);
    lambda = update_dual(options.rho, lambda, constraint, x_next, w_next);
    x = x_next;
    w = w_next;
    if (!x.allFinite() || !w.allFinite() || !lambda.allFinite())
      throw std::runtime_error("reference_solve diverged");
  }

  ReferenceSolution ref;
  ref.x = x;
  ref.w = w;
  ref.lambda = lambda;
  ref.objective = objective_value(problem, constraint, scratch, x, w);
  ref.residual = residual;
  ref.reliable = residual <= options.tol;
  return ref;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  ExperimentConfig cfg;
  try {
    cfg.seed = root.value("seed", 0ULL);
    cfg.repetitions = root.value("repetitions", 1);
    if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (root.contains("output")) cfg.output_dir = root["output"].value("dir", cfg.output_dir);

    const json prob = require(root, "problem", "config root");
    cfg.problem.kind = require(prob, "kind", "problem").get<std::string>();
    if (cfg.problem.kind == "portfolio") {
      auto& p = cfg.problem.portfolio;
      p.assets = prob.value("assets", p.assets);
      p.slots = prob.value("slots", p.slots);
      p.cov = prob.value("cov", p.cov);
      p.mu_ridge = prob.value("mu_ridge", p.mu_ridge);
      p.seed = prob.value("seed", p.seed);
    } else if (cfg.problem.kind == "policy-eval") {
      auto& p = cfg.problem.policy_eval;
      p.states = prob.value("states", p.states);
      p.feature_dim = prob.value("feature_dim", p.feature_dim);
      p.discount = prob.value("discount", p.discount);
      p.mu_ridge = prob.value("mu_ridge", p.mu_ridge);
      p.seed = prob.value("seed", p.seed);
    } else if (cfg.problem.kind == "synthetic-quadratic") {
      auto& p = cfg.problem.quadratic;
      p.dim = prob.value("dim", p.dim);
      p.constraints = prob.value("constraints", p.constraints);
      p.condition = prob.value("condition", p.condition);
      p.mu_ridge = prob.value("mu_ridge", p.mu_ridge);
      p.rank = prob.value("rank", p.rank);
      p.seed = prob.value("seed", p.seed);
    } else {
      throw ConfigError("unknown problem kind '" + cfg.problem.kind + "'");
    }

    if (root.contains("reference")) {
      const json ref = root["reference"];
      const std::string mode = ref.value("mode", std::string("auto"));
      if (mode == "auto")
        cfg.reference_mode = ReferenceMode::Auto;
      else if (mode == "none")
        cfg.reference_mode = ReferenceMode::None;
      else
        throw ConfigError("reference mode must be 'auto' or 'none'");
      cfg.reference_options.tol = ref.value("tol", cfg.reference_options.tol);
      cfg.reference_options.max_iters = ref.value("max_iters", cfg.reference_options.max_iters);
      cfg.reference_options.rho = ref.value("rho", cfg.reference_options.rho);
      if (ref.contains("eta")) cfg.reference_options.eta = ref["eta"].get<double>();
    }

    const json runs = require(root, "runs", "config root");
    if (!runs.is_array() || runs.empty()) throw ConfigError("runs must be a nonempty array");
    for (const json& r : runs) {
      RunSpec spec;
      spec.id = require(r, "id", "run").get<std::string>();
      spec.algo = require(r, "algo", "run " + spec.id).get<std::string>();
      if (spec.algo == "svr-admm" || spec.algo == "svr-admm-gc") {
        auto& s = spec.solver;
        s.K = r.value("K", s.K);
        s.S = r.value("S", s.S);
        s.N = r.value("N", s.N);
        s.eta = r.value("eta", s.eta);
        s.rho = r.value("rho", s.rho);
        if (r.contains("L_F")) s.L_F = r["L_F"].get<double>();
        if (r.contains("stop_tolerance")) s.stop_tolerance = r["stop_tolerance"].get<double>();
        s.check_invariants = r.value("check_invariants", false);
        if (spec.algo == "svr-admm") {
          s.mode = SolverMode::StronglyConvex;
        } else {
          const std::string mode = r.value("mode", std::string("smooth"));
          if (mode == "smooth")
            s.mode = SolverMode::ConvexSmooth;
          else if (mode == "nonsmooth")
            s.mode = SolverMode::ConvexNonsmooth;
          else
            throw ConfigError("run " + spec.id + ": mode must be 'smooth' or 'nonsmooth'");
        }
      } else if (spec.algo == "sgd" || spec.algo == "comp-svrg") {
        auto& b = spec.baseline;
        b.steps = r.value("steps", b.steps);
        b.step_c = r.value("step_c", b.step_c);
        b.trace_every = r.value("trace_every", b.trace_every);
        b.K = r.value("K", b.K);
        b.N = r.value("N", b.N);
        b.S = r.value("S", b.S);
        b.eta = r.value("eta", b.eta);
        if (r.contains("stop_tolerance")) b.stop_tolerance = r["stop_tolerance"].get<double>();
        const std::string sched = r.value("schedule", std::string("invsqrt"));
        if (sched == "constant")
          b.step_schedule = StepSchedule::Constant;
        else if (sched == "invsqrt")
          b.step_schedule = StepSchedule::InvSqrt;
        else
          throw ConfigError("run " + spec.id + ": schedule must be 'constant' or 'invsqrt'");
      } else {
        throw ConfigError("run " + spec.id + ": unknown algo '" + spec.algo + "'");
      }
      for (const RunSpec& prev : cfg.runs)
        if (prev.id == spec.id) throw ConfigError("duplicate run id '" + spec.id + "'");
      cfg.runs.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

GeneratedProblem instantiate_problem(const ProblemSpec& spec) {
  if (spec.kind == "portfolio") return make_portfolio(spec.portfolio);
  if (spec.kind == "policy-eval") return make_policy_eval(spec.policy_eval);
  if (spec.kind == "synthetic-quadratic") return make_synthetic_quadratic(spec.quadratic);
  throw ConfigError("unknown problem kind '" + spec.kind + "'");
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_override,
                                int jobs) {
  ExperimentResult result;
  GeneratedProblem gen;
  try {
    gen = instantiate_problem(config.problem);
    for (const RunSpec& spec : config.runs) {
      if ((spec.algo == "sgd" || spec.algo == "comp-svrg") && !identity_split(gen.constraint))
        throw ConfigError("run " + spec.id +
                          ": unconstrained baselines require the identity split A = I, B = -I");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("problem construction failed: ") + e.what());
  }

  if (config.reference_mode == ReferenceMode::Auto) {
    if (gen.optimum)
      result.reference = gen.optimum;
    else
      result.reference = reference_solve(gen.problem, gen.constraint, config.reference_options);
  }
  const ReferenceSolution* ref = result.reference ? &*result.reference : nullptr;

  struct Cell {
    const RunSpec* spec;
    int run_index;
    int repetition;
  };
  std::vector<Cell> cells;
  for (int ri = 0; ri < static_cast<int>(config.runs.size()); ++ri)
    for (int rep = 0; rep < config.repetitions; ++rep)
      cells.push_back({&config.runs[static_cast<std::size_t>(ri)], ri, rep});
  result.outcomes.resize(cells.size());

  std::atomic<int> exit_code{0};
  auto raise_code = [&exit_code](int code) {
    int cur = exit_code.load();
    while (cur < code && !exit_code.compare_exchange_weak(cur, code)) {
    }
  };

  auto run_cell = [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const RunSpec& spec = *cell.spec;
    RunOutcome& out = result.outcomes[idx];
    out.run_id = config.repetitions > 1
                     ? spec.id + "-rep" + std::to_string(cell.repetition)
                     : spec.id;
    out.algorithm = spec.algo;
    out.repetition = cell.repetition;
    const std::uint64_t seed = Rng::derive(
        Rng::derive(config.seed, static_cast<std::uint64_t>(cell.run_index)),
        static_cast<std::uint64_t>(cell.repetition));
    try {
      RunResult run;
      if (spec.algo == "svr-admm" || spec.algo == "svr-admm-gc") {
        SolverConfig sc = spec.solver;
        sc.seed = seed;
        run = spec.algo == "svr-admm" ? run_algorithm1(gen.problem, gen.constraint, sc, ref)
                                      : run_algorithm2(gen.problem, gen.constraint, sc, ref);
      } else {
        BaselineConfig bc = spec.baseline;
        bc.seed = seed;
        run = spec.algo == "sgd"
                  ? run_sgd(gen.problem, gen.constraint.regularizer, bc, ref)
                  : run_comp_svrg(gen.problem, gen.constraint.regularizer, bc, ref);
      }
      out.trace = std::move(run.trace);
      out.ledger = run.ledger;
    } catch (const DivergenceError& e) {
      out.trace = e.partial_trace;
      out.aborted = true;
      raise_code(2);
    } catch (const std::invalid_argument& e) {
      out.error = e.what();
      raise_code(1);
    } catch (const std::exception& e) {
      out.error = e.what();
      raise_code(2);
    }
    out.trace.run_id = out.run_id;
    if (out.trace.algorithm.empty()) out.trace.algorithm = spec.algo;
  };

  const int worker_count =
      std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  if (worker_count <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(worker_count));
    for (int t = 0; t < worker_count; ++t)
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
          run_cell(i);
      });
    for (std::thread& t : workers) t.join();
  }

  const std::string out_dir = out_override.empty() ? config.output_dir : out_override;
  try {
    std::filesystem::create_directories(out_dir);
    for (const RunOutcome& out : result.outcomes)
      if (out.error.empty())
        write_trace_csv(out.trace, out_dir + "/" + out.run_id + ".csv");

    std::ofstream summary(out_dir + "/summary.csv");
    if (!summary) throw std::runtime_error("cannot open summary.csv");
    summary << "run_id,algorithm,repetition,rows,paper_oracle_calls,final_objective,"
               "final_objective_gap,final_feasibility,wall_ns,aborted,error\n";
    for (const RunOutcome& out : result.outcomes) {
      summary << out.run_id << ',' << out.algorithm << ',' << out.repetition << ','
              << out.trace.rows.size() << ',';
      if (!out.trace.rows.empty()) {
        const TraceRow& last = out.trace.rows.back();
        summary << last.oracle_calls << ',' << fmt17(last.objective) << ',';
        if (last.objective_gap) summary << fmt17(*last.objective_gap);
        summary << ',' << fmt17(last.feasibility) << ',' << last.wall_ns;
      } else {
        summary << "0,,,,0";
      }
      summary << ',' << (out.aborted ? 1 : 0) << ',' << out.error << '\n';
    }
    if (!summary) throw std::runtime_error("summary.csv write failed");

    if (result.reference) {
      json ref_json;
      ref_json["objective"] = result.reference->objective;
      ref_json["residual"] = result.reference->residual;
      ref_json["reliable"] = result.reference->reliable;
      std::ofstream ref_out(out_dir + "/reference.json");
      if (!ref_out) throw std::runtime_error("cannot open reference.json");
      ref_out << ref_json.dump(2) << '\n';
    }
  } catch (const std::exception&) {
    raise_code(3);
    throw;
  }

  result.exit_code = exit_code.load();
  return result;
}

std::string render_plot_svg(const std::vector<Trace>& traces, PlotAxis axis) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  constexpr int kColors = 8;
  constexpr double width = 800.0, height = 500.0;
  constexpr double ml = 80.0, mr = 160.0, mt = 30.0, mb = 60.0;
  const double plot_w = width - ml - mr;
  const double plot_h = height - mt - mb;

  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> pts;  // (x, log10 gap)
  };
  std::vector<Series> series;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Trace& trace : traces) {
    Series s;
    s.label = trace.run_id.empty() ? trace.algorithm : trace.run_id;
    for (const TraceRow& row : trace.rows) {
      const double gap = row.objective_gap ? *row.objective_gap : row.objective;
      if (!(gap > 0.0) || !std::isfinite(gap)) continue;
      const double xv =
          axis == PlotAxis::Oracle ? static_cast<double>(row.oracle_calls)
                                   : static_cast<double>(row.wall_ns) * 1e-9;
      const double yv = std::log10(gap);
      s.pts.emplace_back(xv, yv);
      xmin = std::min(xmin, xv);
      xmax = std::max(xmax, xv);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
    }
    series.push_back(std::move(s));
  }
  if (!(xmax > xmin)) {
    xmin = 0.0;
    xmax = 1.0;
  }
  if (!(ymax > ymin)) {
    ymin -= 1.0;
    ymax += 1.0;
    if (!std::isfinite(ymin)) {
      ymin = -1.0;
      ymax = 1.0;
    }
  }

  auto sx = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * plot_w; };
  auto sy = [&](double v) { return mt + (ymax - v) / (ymax - ymin) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt6(width) << "\" height=\""
      << fmt6(height) << "\" viewBox=\"0 0 " << fmt6(width) << " " << fmt6(height) << "\">\n";
  svg << "<rect width=\"" << fmt6(width) << "\" height=\"" << fmt6(height)
      << "\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << fmt6(ml) << "\" y=\"" << fmt6(mt) << "\" width=\"" << fmt6(plot_w)
      << "\" height=\"" << fmt6(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int t = 0; t <= kTicks; ++t) {
    const double fx = xmin + (xmax - xmin) * t / kTicks;
    const double px = sx(fx);
    svg << "<line x1=\"" << fmt6(px) << "\" y1=\"" << fmt6(mt + plot_h) << "\" x2=\"" << fmt6(px)
        << "\" y2=\"" << fmt6(mt + plot_h + 5.0) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt6(px) << "\" y=\"" << fmt6(mt + plot_h + 20.0)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt6(fx) << "</text>\n";

    const double fy = ymin + (ymax - ymin) * t / kTicks;
    const double py = sy(fy);
    svg << "<line x1=\"" << fmt6(ml - 5.0) << "\" y1=\"" << fmt6(py) << "\" x2=\"" << fmt6(ml)
        << "\" y2=\"" << fmt6(py) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt6(ml - 8.0) << "\" y=\"" << fmt6(py + 4.0)
        << "\" font-size=\"11\" text-anchor=\"end\">1e" << fmt6(fy) << "</text>\n";
  }
  svg << "<text x=\"" << fmt6(ml + plot_w / 2.0) << "\" y=\"" << fmt6(height - 15.0)
      << "\" font-size=\"13\" text-anchor=\"middle\">"
      << (axis == PlotAxis::Oracle ? "oracle calls" : "wall time (s)") << "</text>\n";
  svg << "<text x=\"18\" y=\"" << fmt6(mt + plot_h / 2.0)
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fmt6(mt + plot_h / 2.0) << ")\">optimality gap</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % kColors];
    if (series[i].pts.size() >= 2) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t p = 0; p < series[i].pts.size(); ++p) {
        if (p) svg << ' ';
        svg << fmt6(sx(series[i].pts[p].first)) << ',' << fmt6(sy(series[i].pts[p].second));
      }
      svg << "\"/>\n";
    } else {
      for (const auto& pt : series[i].pts)
        svg << "<circle cx=\"" << fmt6(sx(pt.first)) << "\" cy=\"" << fmt6(sy(pt.second))
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    const double ly = mt + 10.0 + 18.0 * static_cast<double>(i);
    svg << "<rect x=\"" << fmt6(width - mr + 10.0) << "\" y=\"" << fmt6(ly - 9.0)
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << fmt6(width - mr + 28.0) << "\" y=\"" << fmt6(ly + 2.0)
        << "\" font-size=\"12\">" << series[i].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::vector<Trace>& traces, PlotAxis axis, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open plot output '" + path + "'");
  out << render_plot_svg(traces, axis);
  if (!out) throw std::runtime_error("plot write failed for '" + path + "'");
}

}  // namespace csopt
