#pragma once

// JSON persistence for fitted models. Doubles go through nlohmann::json's
// shortest round-trip serializer, so save -> load -> save is bit-identical.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fepls/errors.hpp"
#include "fepls/fepls.hpp"

namespace fepls {

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json j;
  j["rows"] = M.rows();
  j["cols"] = M.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index k = 0; k < M.cols(); ++k) data.push_back(M(i, k));
  j["data"] = data;
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  Eigen::Index r = j.at("rows").get<Eigen::Index>();
  Eigen::Index c = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != r * c)
    throw DataError("model json: matrix payload size mismatch");
  Eigen::MatrixXd M(r, c);
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) M(i, k) = data[idx++].get<double>();
  return M;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json basis_to_json(const BasisSet& b) {
  nlohmann::json j;
  j["kind"] = to_string(b.kind);
  j["m"] = b.m;
  j["knots"] = vector_to_json(b.knots);
  j["coef"] = matrix_to_json(b.coef);
  j["orthonormalized"] = b.orthonormalized;
  if (b.kind == BasisKind::tabulated) {
    j["tab_grid"] = vector_to_json(b.tab_grid);
    j["tab_values"] = matrix_to_json(b.tab_values);
  }
  return j;
}

inline BasisSet basis_from_json(const nlohmann::json& j) {
  BasisSet b;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "fourier")
    b.kind = BasisKind::fourier;
  else if (kind == "natural-spline")
    b.kind = BasisKind::natural_spline;
  else if (kind == "tabulated")
    b.kind = BasisKind::tabulated;
  else
    throw DataError("model json: unknown basis kind '" + kind + "'");
  b.m = j.at("m").get<int>();
  b.knots = vector_from_json(j.at("knots"));
  b.coef = matrix_from_json(j.at("coef"));
  b.orthonormalized = j.at("orthonormalized").get<bool>();
  if (b.kind == BasisKind::tabulated) {
    b.tab_grid = vector_from_json(j.at("tab_grid"));
    b.tab_values = matrix_from_json(j.at("tab_values"));
  }
  return b;
}

inline nlohmann::json method_to_json(const ProjectionMethod& m) {
  nlohmann::json j;
  j["kind"] = m.kind == ProjectionMethod::Kind::ridge ? "ridge" : "ols";
  j["lambda"] = m.lambda;
  return j;
}

inline ProjectionMethod method_from_json(const nlohmann::json& j) {
  ProjectionMethod m;
  std::string kind = j.at("kind").get<std::string>();
  m.kind = kind == "ridge" ? ProjectionMethod::Kind::ridge : ProjectionMethod::Kind::ols;
  m.lambda = j.at("lambda").get<double>();
  return m;
}

inline nlohmann::json bic_rows_to_json(const std::vector<BicRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["u"] = r.u;
    j["loglik"] = r.loglik;
    j["params"] = r.params;
    j["bic"] = r.bic;
    j["ok"] = r.ok;
    j["note"] = r.note;
    arr.push_back(j);
  }
  return arr;
}

inline std::vector<BicRow> bic_rows_from_json(const nlohmann::json& arr) {
  std::vector<BicRow> rows;
  for (const auto& j : arr) {
    BicRow r;
    r.u = j.at("u").get<int>();
    r.loglik = j.at("loglik").get<double>();
    r.params = j.at("params").get<int>();
    r.bic = j.at("bic").get<double>();
    r.ok = j.at("ok").get<bool>();
    r.note = j.at("note").get<std::string>();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace detail

inline nlohmann::json to_json(const FeplsModel& mdl) {
  nlohmann::json j;
  j["format"] = "fepls-model";
  j["version"] = 1;
  j["type"] = "fepls";
  j["n"] = mdl.n;
  j["method"] = detail::method_to_json(mdl.method);
  nlohmann::json bx = nlohmann::json::array();
  for (const auto& b : mdl.bases_x) bx.push_back(detail::basis_to_json(b));
  j["bases_x"] = bx;
  j["basis_y"] = detail::basis_to_json(mdl.basis_y);
  j["block_offsets"] = mdl.block_offsets;
  j["Sigma_Ytil"] = detail::matrix_to_json(mdl.Sigma_Ytil);
  j["Sigma_epstil"] = detail::matrix_to_json(mdl.Sigma_epstil);
  j["bic"] = detail::bic_rows_to_json(mdl.bic_rows);

  nlohmann::json f;
  f["u"] = mdl.fit.u;
  f["Gamma"] = detail::matrix_to_json(mdl.fit.Gamma);
  f["Gamma0"] = detail::matrix_to_json(mdl.fit.Gamma0);
  f["eta"] = detail::matrix_to_json(mdl.fit.eta);
  f["alpha"] = detail::vector_to_json(mdl.fit.alpha);
  f["Delta"] = detail::matrix_to_json(mdl.fit.Delta);
  f["Delta0"] = detail::matrix_to_json(mdl.fit.Delta0);
  f["Sigma_eps"] = detail::matrix_to_json(mdl.fit.Sigma_eps);
  f["beta"] = detail::matrix_to_json(mdl.fit.beta);
  f["loglik"] = mdl.fit.loglik;
  f["objective"] = mdl.fit.objective;
  f["V"] = detail::matrix_to_json(mdl.fit.V_mpelm);
  f["converged"] = mdl.fit.converged;
  f["mono_violations"] = mdl.fit.mono_violations;
  f["x_mean"] = detail::vector_to_json(mdl.fit.x_mean);
  f["y_mean"] = detail::vector_to_json(mdl.fit.y_mean);
  j["fit"] = f;
  return j;
}

inline nlohmann::json to_json(const GfeplsModel& mdl) {
  nlohmann::json j;
  j["format"] = "fepls-model";
  j["version"] = 1;
  j["type"] = "gfepls";
  j["family"] = "binomial";
  j["link"] = "logit";
  j["n"] = mdl.n;
  j["method"] = detail::method_to_json(mdl.method);
  nlohmann::json bx = nlohmann::json::array();
  for (const auto& b : mdl.bases_x) bx.push_back(detail::basis_to_json(b));
  j["bases_x"] = bx;
  j["block_offsets"] = mdl.block_offsets;
  j["bic"] = detail::bic_rows_to_json(mdl.bic_rows);

  nlohmann::json f;
  f["u"] = mdl.fit.u;
  f["Gamma"] = detail::matrix_to_json(mdl.fit.Gamma);
  f["Gamma0"] = detail::matrix_to_json(mdl.fit.Gamma0);
  f["eta"] = detail::vector_to_json(mdl.fit.eta);
  f["alpha"] = mdl.fit.alpha;
  f["Delta"] = detail::matrix_to_json(mdl.fit.Delta);
  f["Delta0"] = detail::matrix_to_json(mdl.fit.Delta0);
  f["beta"] = detail::vector_to_json(mdl.fit.beta);
  f["loglik"] = mdl.fit.loglik;
  f["objective"] = mdl.fit.objective;
  f["V"] = detail::matrix_to_json(mdl.fit.V_gmelm);
  f["converged"] = mdl.fit.converged;
  f["separation"] = mdl.fit.separation;
  f["iterations"] = mdl.fit.iterations;
  f["x_mean"] = detail::vector_to_json(mdl.fit.x_mean);
  j["fit"] = f;
  return j;
}

inline nlohmann::json to_json(const BaselineLinearModel& mdl) {
  nlohmann::json j;
  j["format"] = "fepls-model";
  j["version"] = 1;
  j["type"] = "linear";
  j["n"] = mdl.n;
  j["method"] = detail::method_to_json(mdl.projection);
  nlohmann::json bx = nlohmann::json::array();
  for (const auto& b : mdl.bases_x) bx.push_back(detail::basis_to_json(b));
  j["bases_x"] = bx;
  j["basis_y"] = detail::basis_to_json(mdl.basis_y);
  j["block_offsets"] = mdl.block_offsets;

  nlohmann::json f;
  f["method"] = mdl.fit.method;
  f["components"] = mdl.fit.components;
  f["beta"] = detail::matrix_to_json(mdl.fit.beta);
  f["intercept"] = detail::vector_to_json(mdl.fit.intercept);
  f["directions"] = detail::matrix_to_json(mdl.fit.directions);
  f["deflation_stopped_early"] = mdl.fit.deflation_stopped_early;
  j["fit"] = f;
  return j;
}

inline BaselineLinearModel baseline_model_from_json(const nlohmann::json& j) {
  BaselineLinearModel mdl;
  mdl.n = j.at("n").get<Eigen::Index>();
  mdl.projection = detail::method_from_json(j.at("method"));
  for (const auto& b : j.at("bases_x")) mdl.bases_x.push_back(detail::basis_from_json(b));
  mdl.basis_y = detail::basis_from_json(j.at("basis_y"));
  mdl.block_offsets = j.at("block_offsets").get<std::vector<int>>();

  const auto& f = j.at("fit");
  mdl.fit.method = f.at("method").get<std::string>();
  mdl.method = mdl.fit.method;
  mdl.fit.components = f.at("components").get<int>();
  mdl.fit.beta = detail::matrix_from_json(f.at("beta"));
  mdl.fit.intercept = detail::vector_from_json(f.at("intercept"));
  mdl.fit.directions = detail::matrix_from_json(f.at("directions"));
  mdl.fit.deflation_stopped_early = f.at("deflation_stopped_early").get<bool>();
  return mdl;
}

inline FeplsModel fepls_model_from_json(const nlohmann::json& j) {
  FeplsModel mdl;
  mdl.n = j.at("n").get<Eigen::Index>();
  mdl.method = detail::method_from_json(j.at("method"));
  for (const auto& b : j.at("bases_x")) mdl.bases_x.push_back(detail::basis_from_json(b));
  mdl.basis_y = detail::basis_from_json(j.at("basis_y"));
  mdl.block_offsets = j.at("block_offsets").get<std::vector<int>>();
  mdl.Sigma_Ytil = detail::matrix_from_json(j.at("Sigma_Ytil"));
  mdl.Sigma_epstil = detail::matrix_from_json(j.at("Sigma_epstil"));
  mdl.bic_rows = detail::bic_rows_from_json(j.at("bic"));

  const auto& f = j.at("fit");
  mdl.fit.u = f.at("u").get<int>();
  mdl.fit.Gamma = detail::matrix_from_json(f.at("Gamma"));
  mdl.fit.Gamma0 = detail::matrix_from_json(f.at("Gamma0"));
  mdl.fit.eta = detail::matrix_from_json(f.at("eta"));
  mdl.fit.alpha = detail::vector_from_json(f.at("alpha"));
  mdl.fit.Delta = detail::matrix_from_json(f.at("Delta"));
  mdl.fit.Delta0 = detail::matrix_from_json(f.at("Delta0"));
  mdl.fit.Sigma_eps = detail::matrix_from_json(f.at("Sigma_eps"));
  mdl.fit.beta = detail::matrix_from_json(f.at("beta"));
  mdl.fit.loglik = f.at("loglik").get<double>();
  mdl.fit.objective = f.at("objective").get<double>();
  mdl.fit.V_mpelm = detail::matrix_from_json(f.at("V"));
  mdl.fit.converged = f.at("converged").get<bool>();
  mdl.fit.mono_violations = f.at("mono_violations").get<int>();
  mdl.fit.x_mean = detail::vector_from_json(f.at("x_mean"));
  mdl.fit.y_mean = detail::vector_from_json(f.at("y_mean"));
  return mdl;
}

inline GfeplsModel gfepls_model_from_json(const nlohmann::json& j) {
  GfeplsModel mdl;
  mdl.n = j.at("n").get<Eigen::Index>();
  mdl.method = detail::method_from_json(j.at("method"));
  for (const auto& b : j.at("bases_x")) mdl.bases_x.push_back(detail::basis_from_json(b));
  mdl.block_offsets = j.at("block_offsets").get<std::vector<int>>();
  mdl.bic_rows = detail::bic_rows_from_json(j.at("bic"));

  const auto& f = j.at("fit");
  mdl.fit.u = f.at("u").get<int>();
  mdl.fit.Gamma = detail::matrix_from_json(f.at("Gamma"));
  mdl.fit.Gamma0 = detail::matrix_from_json(f.at("Gamma0"));
  mdl.fit.eta = detail::vector_from_json(f.at("eta"));
  mdl.fit.alpha = f.at("alpha").get<double>();
  mdl.fit.Delta = detail::matrix_from_json(f.at("Delta"));
  mdl.fit.Delta0 = detail::matrix_from_json(f.at("Delta0"));
  mdl.fit.beta = detail::vector_from_json(f.at("beta"));
  mdl.fit.loglik = f.at("loglik").get<double>();
  mdl.fit.objective = f.at("objective").get<double>();
  mdl.fit.V_gmelm = detail::matrix_from_json(f.at("V"));
  mdl.fit.converged = f.at("converged").get<bool>();
  mdl.fit.separation = f.at("separation").get<bool>();
  mdl.fit.iterations = f.at("iterations").get<int>();
  mdl.fit.x_mean = detail::vector_from_json(f.at("x_mean"));
  return mdl;
}

struct LoadedModel {
  std::string type;  // "fepls", "gfepls", or "linear"
  std::optional<FeplsModel> fepls;
  std::optional<GfeplsModel> gfepls;
  std::optional<BaselineLinearModel> linear;
};

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid json: " + e.what());
  }
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

inline LoadedModel load_model(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  try {
    if (j.value("format", "") != "fepls-model")
      throw DataError(path + ": not a model file");
    LoadedModel out;
    out.type = j.at("type").get<std::string>();
    if (out.type == "fepls")
      out.fepls = fepls_model_from_json(j);
    else if (out.type == "gfepls")
      out.gfepls = gfepls_model_from_json(j);
    else if (out.type == "linear")
      out.linear = baseline_model_from_json(j);
    else
      throw DataError(path + ": unknown model type '" + out.type + "'");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": malformed model file: " + e.what());
  }
}

inline void save_model(const std::string& path, const FeplsModel& mdl) {
  write_json_file(path, to_json(mdl));
}

inline void save_model(const std::string& path, const GfeplsModel& mdl) {
  write_json_file(path, to_json(mdl));
}

inline void save_model(const std::string& path, const BaselineLinearModel& mdl) {
  write_json_file(path, to_json(mdl));
}

}  // namespace fepls
