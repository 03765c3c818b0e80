// Command-line front end: fit / predict / interval / select-dim / simulate.
//
// Exit codes: 0 success, 2 user error (bad flags, missing or malformed
// files, dimension mismatches), 1 internal numerical failure.
//
// Every successful run writes a resolved-config JSON next to its outputs so
// results are reproducible from artifacts alone. All numeric CSV output uses
// 17 significant digits.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fepls/csv.hpp"
#include "fepls/fepls.hpp"
#include "fepls/model_io.hpp"
#include "fepls/simlab.hpp"

namespace {

using fepls::BasisSet;
using fepls::DataError;
using fepls::InvalidArgument;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_num(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("cannot parse " + what + " '" + s + "'");
  }
}

// "spline:knots=0,0.25,0.5,0.75,1", "spline:nknots=5", or "fourier:m=13"
BasisSet parse_basis_spec(const std::string& spec) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "spline") {
    auto eq = args.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("basis spec '" + spec + "': expected knots=... or nknots=...");
    std::string key = args.substr(0, eq), val = args.substr(eq + 1);
    if (key == "knots") {
      std::vector<std::string> parts = split(val, ',');
      Eigen::VectorXd knots(parts.size());
      for (std::size_t i = 0; i < parts.size(); ++i)
        knots(i) = parse_num(parts[i], "knot");
      return fepls::natural_spline_basis(knots);
    }
    if (key == "nknots") {
      int k = static_cast<int>(parse_num(val, "knot count"));
      if (k < 2) throw InvalidArgument("basis spec: nknots must be >= 2");
      return fepls::natural_spline_basis(fepls::knot_vector(k));
    }
    throw InvalidArgument("basis spec '" + spec + "': unknown key '" + key + "'");
  }
  if (kind == "fourier") {
    auto eq = args.find('=');
    if (eq == std::string::npos || args.substr(0, eq) != "m")
      throw InvalidArgument("basis spec '" + spec + "': expected m=<count>");
    return fepls::fourier_basis(static_cast<int>(parse_num(args.substr(eq + 1), "m")));
  }
  throw InvalidArgument("basis spec '" + spec + "': unknown kind '" + kind +
                        "' (expected spline or fourier)");
}

// "0:1:0.01" (start:end:step, endpoints included) or "0.1,0.5,0.9"
Eigen::VectorXd parse_grid(const std::string& spec) {
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts = split(spec, ':');
    if (parts.size() != 3) throw InvalidArgument("grid spec '" + spec + "': use start:end:step");
    double a = parse_num(parts[0], "grid start");
    double b = parse_num(parts[1], "grid end");
    double h = parse_num(parts[2], "grid step");
    if (!(h > 0.0) || b < a) throw InvalidArgument("grid spec '" + spec + "': bad range");
    std::vector<double> pts;
    for (double t = a; t <= b + 1e-12; t += h) pts.push_back(std::min(t, b));
    return Eigen::Map<const Eigen::VectorXd>(pts.data(),
                                             static_cast<Eigen::Index>(pts.size()));
  }
  std::vector<std::string> parts = split(spec, ',');
  Eigen::VectorXd g(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) g(i) = parse_num(parts[i], "grid point");
  return g;
}

std::vector<int> parse_int_list(const std::string& spec) {
  std::vector<int> out;
  for (const auto& p : split(spec, ','))
    out.push_back(static_cast<int>(parse_num(p, "integer")));
  return out;
}

std::vector<fepls::PredictorBlock> load_predictors(const std::vector<std::string>& paths) {
  std::vector<fepls::PredictorBlock> preds;
  preds.reserve(paths.size());
  for (const auto& p : paths) preds.push_back(fepls::read_functional_csv(p));
  return preds;
}

Eigen::VectorXi load_labels(const std::string& path) {
  Eigen::MatrixXd m = fepls::read_matrix_csv(path);
  if (m.cols() != 1) throw DataError(path + ": expected a single label column");
  Eigen::VectorXi y(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, 0) != 0.0 && m(i, 0) != 1.0)
      throw DataError(path + ": labels must be 0 or 1");
    y(i) = static_cast<int>(m(i, 0));
  }
  return y;
}

// resolve the per-predictor basis list: one spec shared by all, or one each
std::vector<BasisSet> resolve_bases(const std::vector<std::string>& specs,
                                    std::size_t n_pred) {
  if (specs.empty()) throw InvalidArgument("--basis is required");
  std::vector<BasisSet> bases;
  if (specs.size() == 1) {
    BasisSet b = parse_basis_spec(specs[0]);
    bases.assign(n_pred, b);
  } else if (specs.size() == n_pred) {
    for (const auto& s : specs) bases.push_back(parse_basis_spec(s));
  } else {
    throw InvalidArgument("--basis count must be 1 or match the predictor count");
  }
  return bases;
}

void write_config_echo(const std::string& out_path, const nlohmann::json& cfg) {
  fepls::write_json_file(out_path + ".config.json", cfg);
}

struct FitArgs {
  std::vector<std::string> predictors;
  std::string response;
  std::string response_type = "functional";
  std::vector<std::string> basis;
  std::string response_basis;
  std::string method = "fepls";
  int dim = -1;
  int components = -1;
  double ridge = -1.0;
  std::uint64_t seed = 0;
  std::string out = "model.json";
};

int cmd_fit(const FitArgs& a) {
  auto preds = load_predictors(a.predictors);
  std::vector<BasisSet> bases_x = resolve_bases(a.basis, preds.size());
  fepls::ProjectionMethod pm = a.ridge >= 0.0 ? fepls::ProjectionMethod::ridge(a.ridge)
                                              : fepls::ProjectionMethod::ols();

  fepls::FunctionalDataset data;
  data.predictors = preds;

  nlohmann::json cfg;
  cfg["command"] = "fit";
  cfg["predictors"] = a.predictors;
  cfg["response"] = a.response;
  cfg["response_type"] = a.response_type;
  cfg["basis"] = a.basis;
  cfg["response_basis"] = a.response_basis;
  cfg["method"] = a.method;
  cfg["dim"] = a.dim;
  cfg["components"] = a.components;
  cfg["ridge"] = a.ridge;
  cfg["seed"] = a.seed;
  cfg["out"] = a.out;

  if (a.response_type == "binary") {
    data.response_type = fepls::ResponseType::binary;
    data.y_label = load_labels(a.response);
    if (a.method != "fepls" && a.method != "glm")
      throw InvalidArgument("binary response supports --method fepls or glm");
    int u = a.dim;
    if (a.method == "glm") {
      int m_x = 0;
      for (const auto& b : bases_x) m_x += b.m;
      u = m_x;  // full dimension: the unconstrained logistic MLE
    }
    fepls::GfeplsModel mdl = fepls::fit_gfepls(data, bases_x, u, pm);
    fepls::save_model(a.out, mdl);
    cfg["selected_dim"] = mdl.fit.u;
    write_config_echo(a.out, cfg);
    std::cout << "fitted logistic envelope (u=" << mdl.fit.u << ") -> " << a.out << "\n";
    return 0;
  }
  if (a.response_type != "functional")
    throw InvalidArgument("--response-type must be functional or binary");

  fepls::PredictorBlock yblock = fepls::read_functional_csv(a.response);
  if (yblock.per_subject())
    throw DataError("response must be observed on a shared grid");
  data.response_type = fepls::ResponseType::functional;
  data.y_grid = yblock.grid;
  data.y_values = yblock.values;

  if (a.response_basis.empty())
    throw InvalidArgument("--response-basis is required for a functional response");
  BasisSet basis_y = parse_basis_spec(a.response_basis);

  if (a.method == "fepls") {
    fepls::FeplsModel mdl = fepls::fit_fepls(data, bases_x, basis_y, a.dim, pm);
    fepls::save_model(a.out, mdl);
    cfg["selected_dim"] = mdl.fit.u;
    write_config_echo(a.out, cfg);
    std::cout << "fitted envelope model (u=" << mdl.fit.u << ") -> " << a.out << "\n";
    return 0;
  }
  if (a.method == "ols" || a.method == "pcr" || a.method == "pls") {
    int comp = a.components;
    if (a.method != "ols" && comp <= 0) {
      // choose by 5-fold cross-validation on held-out prediction error
      std::vector<BasisSet> bx = bases_x;
      for (auto& b : bx)
        if (!b.orthonormalized) b = fepls::orthonormalize(b);
      BasisSet by = basis_y.orthonormalized ? basis_y : fepls::orthonormalize(basis_y);
      fepls::CoordinateBlock cb = fepls::project_dataset(data, bx, by, pm);
      comp = fepls::detail::cv_components(cb.Xtil, cb.Ytil, a.method, a.seed);
    }
    fepls::BaselineLinearModel mdl =
        fepls::fit_baseline(data, bases_x, basis_y, a.method, comp, pm);
    fepls::save_model(a.out, mdl);
    cfg["selected_components"] = mdl.fit.components;
    write_config_echo(a.out, cfg);
    std::cout << "fitted " << a.method << " (components=" << mdl.fit.components
              << ") -> " << a.out << "\n";
    return 0;
  }
  throw InvalidArgument("--method must be one of fepls, ols, pcr, pls");
}

struct PredictArgs {
  std::string model;
  std::vector<std::string> new_files;
  std::string grid = "0:1:0.01";
  std::string out = "predictions.csv";
};

int cmd_predict(const PredictArgs& a) {
  fepls::LoadedModel mdl = fepls::load_model(a.model);
  auto preds = load_predictors(a.new_files);

  nlohmann::json cfg;
  cfg["command"] = "predict";
  cfg["model"] = a.model;
  cfg["new"] = a.new_files;
  cfg["grid"] = a.grid;
  cfg["out"] = a.out;

  if (mdl.type == "gfepls") {
    Eigen::VectorXd p = fepls::predict_prob(*mdl.gfepls, preds);
    std::ofstream out(a.out);
    if (!out) throw DataError("cannot open '" + a.out + "' for writing");
    out << "prob,label\n";
    for (Eigen::Index i = 0; i < p.size(); ++i)
      out << fepls::format_double(p(i)) << ',' << (p(i) >= 0.5 ? 1 : 0) << '\n';
    write_config_echo(a.out, cfg);
    std::cout << "wrote " << p.size() << " predictions -> " << a.out << "\n";
    return 0;
  }

  Eigen::VectorXd grid = parse_grid(a.grid);
  Eigen::MatrixXd Yhat;
  if (mdl.type == "fepls")
    Yhat = fepls::predict_function(*mdl.fepls, preds, grid);
  else
    Yhat = fepls::predict_function(*mdl.linear, preds, grid);
  std::vector<std::string> header(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    header[static_cast<std::size_t>(k)] = fepls::format_double(grid(k));
  fepls::write_matrix_csv(a.out, Yhat, header);
  write_config_echo(a.out, cfg);
  std::cout << "wrote " << Yhat.rows() << " predicted curves -> " << a.out << "\n";
  return 0;
}

struct IntervalArgs {
  std::string model;
  std::vector<std::string> new_files;
  std::string kind = "confidence";
  double level = 0.95;
  std::vector<double> t0;
  std::string out = "intervals.csv";
};

int cmd_interval(const IntervalArgs& a) {
  fepls::LoadedModel loaded = fepls::load_model(a.model);
  if (loaded.type != "fepls")
    throw InvalidArgument("interval requires a functional envelope model");
  if (a.t0.empty()) throw InvalidArgument("--t0 is required");
  if (a.kind != "confidence" && a.kind != "prediction")
    throw InvalidArgument("--kind must be confidence or prediction");
  const fepls::FeplsModel& mdl = *loaded.fepls;

  auto preds = load_predictors(a.new_files);
  Eigen::MatrixXd Xnew = fepls::project_new_predictors(mdl.bases_x, mdl.method, preds);

  std::ofstream out(a.out);
  if (!out) throw DataError("cannot open '" + a.out + "' for writing");
  out << "subject,t0,point,lower,upper,kind,level\n";
  for (Eigen::Index i = 0; i < Xnew.rows(); ++i) {
    for (double t0 : a.t0) {
      fepls::IntervalEstimate est =
          a.kind == "prediction"
              ? fepls::prediction_interval(mdl, Xnew.row(i).transpose(), t0, a.level)
              : fepls::confidence_interval(mdl, Xnew.row(i).transpose(), t0, a.level);
      out << i << ',' << fepls::format_double(est.t0) << ','
          << fepls::format_double(est.point) << ',' << fepls::format_double(est.lower)
          << ',' << fepls::format_double(est.upper) << ',' << est.kind << ','
          << fepls::format_double(est.level) << '\n';
    }
  }

  nlohmann::json cfg;
  cfg["command"] = "interval";
  cfg["model"] = a.model;
  cfg["new"] = a.new_files;
  cfg["kind"] = a.kind;
  cfg["level"] = a.level;
  cfg["t0"] = a.t0;
  cfg["out"] = a.out;
  write_config_echo(a.out, cfg);
  std::cout << "wrote " << Xnew.rows() * static_cast<Eigen::Index>(a.t0.size())
            << " intervals -> " << a.out << "\n";
  return 0;
}

struct SelectDimArgs {
  std::vector<std::string> predictors;
  std::string response;
  std::string response_type = "functional";
  std::vector<std::string> basis;
  std::string response_basis;
  int u_max = -1;
  double ridge = -1.0;
  std::string out = "bic.csv";
};

int cmd_select_dim(const SelectDimArgs& a) {
  auto preds = load_predictors(a.predictors);
  std::vector<BasisSet> bases_x = resolve_bases(a.basis, preds.size());
  for (auto& b : bases_x)
    if (!b.orthonormalized) b = fepls::orthonormalize(b);
  fepls::ProjectionMethod pm = a.ridge >= 0.0 ? fepls::ProjectionMethod::ridge(a.ridge)
                                              : fepls::ProjectionMethod::ols();
  fepls::FunctionalDataset data;
  data.predictors = preds;

  std::vector<fepls::BicRow> rows;
  int u_hat = 0;
  if (a.response_type == "binary") {
    data.response_type = fepls::ResponseType::binary;
    data.y_label = load_labels(a.response);
    fepls::CoordinateBlock cb = fepls::project_dataset(data, bases_x, std::nullopt, pm);
    fepls::GmelmSelectResult sel =
        fepls::select_dim_bic_gmelm(cb.Xtil, cb.labels, a.u_max);
    rows = sel.rows;
    u_hat = sel.u_hat;
  } else if (a.response_type == "functional") {
    fepls::PredictorBlock yblock = fepls::read_functional_csv(a.response);
    if (yblock.per_subject())
      throw DataError("response must be observed on a shared grid");
    data.response_type = fepls::ResponseType::functional;
    data.y_grid = yblock.grid;
    data.y_values = yblock.values;
    if (a.response_basis.empty())
      throw InvalidArgument("--response-basis is required for a functional response");
    BasisSet basis_y = fepls::orthonormalize(parse_basis_spec(a.response_basis));
    fepls::CoordinateBlock cb = fepls::project_dataset(data, bases_x, basis_y, pm);
    fepls::SelectDimResult sel = fepls::select_dim_bic(cb.Xtil, cb.Ytil, a.u_max);
    rows = sel.rows;
    u_hat = sel.u_hat;
  } else {
    throw InvalidArgument("--response-type must be functional or binary");
  }

  std::ofstream out(a.out);
  if (!out) throw DataError("cannot open '" + a.out + "' for writing");
  out << "u,loglik,params,bic,ok,note\n";
  for (const auto& r : rows)
    out << r.u << ',' << fepls::format_double(r.loglik) << ',' << r.params << ','
        << fepls::format_double(r.bic) << ',' << (r.ok ? 1 : 0) << ',' << r.note << '\n';

  nlohmann::json cfg;
  cfg["command"] = "select-dim";
  cfg["predictors"] = a.predictors;
  cfg["response"] = a.response;
  cfg["response_type"] = a.response_type;
  cfg["basis"] = a.basis;
  cfg["response_basis"] = a.response_basis;
  cfg["u_max"] = a.u_max;
  cfg["ridge"] = a.ridge;
  cfg["out"] = a.out;
  cfg["selected_u"] = u_hat;
  write_config_echo(a.out, cfg);
  std::cout << "selected u = " << u_hat << " -> " << a.out << "\n";
  return 0;
}

struct SimulateArgs {
  std::string scenario = "functional_response";
  std::string sizes = "50";
  int reps = 100;
  int test_size = 5000;
  std::string methods;
  std::uint64_t seed = 0;
  std::string out = "report.csv";
  std::string format = "csv";
};

int cmd_simulate(const SimulateArgs& a) {
  std::vector<int> sizes = parse_int_list(a.sizes);
  std::vector<std::string> methods;
  if (!a.methods.empty()) methods = split(a.methods, ',');
  if (a.format != "csv" && a.format != "json")
    throw InvalidArgument("--format must be csv or json");

  fepls::ReplicationReport rep =
      fepls::run_table(a.scenario, methods, sizes, a.reps, a.test_size, a.seed);

  if (a.format == "csv") {
    fepls::write_report_csv(a.out, rep);
  } else {
    nlohmann::json j;
    j["scenario"] = rep.scenario;
    j["replications"] = rep.replications;
    j["test_size"] = rep.test_size;
    j["seed"] = rep.seed;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : rep.cells) {
      nlohmann::json jc;
      jc["scenario"] = c.scenario;
      jc["method"] = c.method;
      jc["n"] = c.n;
      jc["mean"] = c.mean;
      jc["mc_se"] = c.mc_se;
      jc["reps"] = c.reps;
      jc["complete"] = c.complete;
      jc["note"] = c.note;
      cells.push_back(jc);
    }
    j["cells"] = cells;
    fepls::write_json_file(a.out, j);
  }

  nlohmann::json cfg;
  cfg["command"] = "simulate";
  cfg["scenario"] = a.scenario;
  cfg["n"] = sizes;
  cfg["reps"] = a.reps;
  cfg["test_size"] = a.test_size;
  cfg["methods"] = rep.methods;
  cfg["seed"] = a.seed;
  cfg["format"] = a.format;
  cfg["out"] = a.out;
  {  // resolved eigenvariances, for auditability
    std::vector<std::vector<double>> ev;
    for (Eigen::Index j = 0; j < rep.eigen_var.rows(); ++j) {
      std::vector<double> row;
      for (Eigen::Index l = 0; l < rep.eigen_var.cols(); ++l)
        row.push_back(rep.eigen_var(j, l));
      ev.push_back(row);
    }
    cfg["eigen_var"] = ev;
  }
  write_config_echo(a.out, cfg);
  std::cout << "wrote " << rep.cells.size() << " cells -> " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("FEPLS_THREADS")) {
    int t = std::atoi(threads);
    if (t > 0) Eigen::setNbThreads(t);
  }

  CLI::App app{"envelope-based partial least squares for functional regression"};
  app.require_subcommand(1);

  FitArgs fit;
  CLI::App* cfit = app.add_subcommand("fit", "fit a model from CSV data");
  cfit->add_option("--predictors", fit.predictors, "functional predictor CSVs")->required();
  cfit->add_option("--response", fit.response, "response CSV")->required();
  cfit->add_option("--response-type", fit.response_type, "functional|binary");
  cfit->add_option("--basis", fit.basis, "basis spec(s), e.g. spline:knots=0,0.25,0.5,0.75,1");
  cfit->add_option("--response-basis", fit.response_basis, "basis spec for the response");
  cfit->add_option("--method", fit.method, "fepls|ols|pcr|pls (glm for binary)");
  cfit->add_option("--dim", fit.dim, "envelope dimension; -1 selects by BIC");
  cfit->add_option("--components", fit.components, "pcr/pls components; <=0 uses 5-fold CV");
  cfit->add_option("--ridge", fit.ridge, "ridge penalty for coordinate projection");
  cfit->add_option("--seed", fit.seed, "seed for cross-validation folds");
  cfit->add_option("--out", fit.out, "output model path");

  PredictArgs pred;
  CLI::App* cpred = app.add_subcommand("predict", "predict with a fitted model");
  cpred->add_option("--model", pred.model, "model JSON")->required();
  cpred->add_option("--new", pred.new_files, "new predictor CSVs")->required();
  cpred->add_option("--grid", pred.grid, "evaluation grid, e.g. 0:1:0.01");
  cpred->add_option("--out", pred.out, "output CSV");

  IntervalArgs itv;
  CLI::App* citv = app.add_subcommand("interval", "pointwise intervals at t0");
  citv->add_option("--model", itv.model, "model JSON")->required();
  citv->add_option("--new", itv.new_files, "new predictor CSVs")->required();
  citv->add_option("--kind", itv.kind, "confidence|prediction");
  citv->add_option("--level", itv.level, "coverage level in (0,1)");
  citv->add_option("--t0", itv.t0, "evaluation points")->required();
  citv->add_option("--out", itv.out, "output CSV");

  SelectDimArgs sd;
  CLI::App* csd = app.add_subcommand("select-dim", "BIC table over envelope dimensions");
  csd->add_option("--predictors", sd.predictors, "functional predictor CSVs")->required();
  csd->add_option("--response", sd.response, "response CSV")->required();
  csd->add_option("--response-type", sd.response_type, "functional|binary");
  csd->add_option("--basis", sd.basis, "basis spec(s)");
  csd->add_option("--response-basis", sd.response_basis, "basis spec for the response");
  csd->add_option("--u-max", sd.u_max, "largest dimension to consider");
  csd->add_option("--ridge", sd.ridge, "ridge penalty for coordinate projection");
  csd->add_option("--out", sd.out, "output CSV");

  SimulateArgs sim;
  CLI::App* csim = app.add_subcommand("simulate", "run a replication table");
  csim->add_option("--scenario", sim.scenario,
                   "functional_response|categorical|vector_response");
  csim->add_option("--n", sim.sizes, "comma-separated training sizes");
  csim->add_option("--reps", sim.reps, "replications per cell");
  csim->add_option("--test-size", sim.test_size, "test draw size");
  csim->add_option("--methods", sim.methods, "comma-separated methods (default per scenario)");
  csim->add_option("--seed", sim.seed, "master seed");
  csim->add_option("--out", sim.out, "output path");
  csim->add_option("--format", sim.format, "csv|json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (cfit->parsed()) return cmd_fit(fit);
    if (cpred->parsed()) return cmd_predict(pred);
    if (citv->parsed()) return cmd_interval(itv);
    if (csd->parsed()) return cmd_select_dim(sd);
    if (csim->parsed()) return cmd_simulate(sim);
    std::cerr << "error: no subcommand given\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
