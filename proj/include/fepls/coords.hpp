#pragma once

#include <Eigen/Dense>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fepls/basis.hpp"
#include "fepls/dataset.hpp"
#include "fepls/errors.hpp"
#include "fepls/linalg.hpp"

namespace fepls {

// Coordinates of a dataset after projection onto the bases: Xtil stacks the
// per-predictor coordinates in input order. For a functional/vector response
// Ytil holds the response coordinates (vector responses pass through
// unchanged); for a binary response the labels pass through.
struct CoordinateBlock {
  Eigen::MatrixXd Xtil;  // n x m_x
  Eigen::MatrixXd Ytil;  // n x m_y (functional/vector responses)
  Eigen::VectorXi labels;  // binary responses
  ResponseType response_type = ResponseType::functional;

  std::vector<BasisSet> bases_x;
  std::optional<BasisSet> basis_y;
  std::vector<int> block_offsets;  // start column of each predictor block

  Eigen::VectorXd x_mean;  // column means (filled by center())
  Eigen::VectorXd y_mean;

  int m_x() const { return static_cast<int>(Xtil.cols()); }
  int m_y() const { return static_cast<int>(Ytil.cols()); }
  int n() const { return static_cast<int>(Xtil.rows()); }
};

struct ProjectionMethod {
  enum class Kind { ols, ridge } kind = Kind::ols;
  double lambda = 0.0;

  static ProjectionMethod ols() { return {Kind::ols, 0.0}; }
  static ProjectionMethod ridge(double lambda) { return {Kind::ridge, lambda}; }
};

// Least-squares coordinates of one observed curve: minimize
// ||values - basis_eval * c||^2. The design must be well conditioned.
inline Eigen::VectorXd coordinate_ols(const Eigen::VectorXd& values,
                                      const Eigen::MatrixXd& basis_eval) {
  if (values.size() != basis_eval.rows())
    throw InvalidArgument("coordinate_ols: values/design length mismatch");
  if (basis_eval.rows() < basis_eval.cols())
    throw CoordinateRankError(
        "coordinate_ols: fewer observation points than basis functions; "
        "use coordinate_ridge");
  double c = cond(basis_eval);
  if (!(c < 1e10)) {
    std::ostringstream msg;
    msg << "coordinate_ols: design condition number " << c
        << " exceeds 1e10; use coordinate_ridge";
    throw CoordinateRankError(msg.str());
  }
  return basis_eval.colPivHouseholderQr().solve(values);
}

// Ridge coordinates: minimize ||values - basis_eval*c||^2 + lambda*||c||^2.
inline Eigen::VectorXd coordinate_ridge(const Eigen::VectorXd& values,
                                        const Eigen::MatrixXd& basis_eval,
                                        double lambda) {
  if (lambda < 0.0) throw InvalidArgument("coordinate_ridge: lambda must be >= 0");
  if (values.size() != basis_eval.rows())
    throw InvalidArgument("coordinate_ridge: values/design length mismatch");
  Eigen::MatrixXd A = basis_eval.transpose() * basis_eval;
  A.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("coordinate_ridge: normal equations failed");
  return ldlt.solve(basis_eval.transpose() * values);
}

namespace detail {

inline Eigen::VectorXd project_one(const Eigen::VectorXd& values,
                                   const Eigen::MatrixXd& basis_eval,
                                   const ProjectionMethod& method) {
  if (method.kind == ProjectionMethod::Kind::ridge)
    return coordinate_ridge(values, basis_eval, method.lambda);
  return coordinate_ols(values, basis_eval);
}

inline Eigen::MatrixXd project_block(const PredictorBlock& block,
                                     const BasisSet& basis,
                                     const ProjectionMethod& method,
                                     std::size_t block_index) {
  int n = block.n();
  Eigen::MatrixXd coords(n, basis.m);
  try {
    if (block.per_subject()) {
      for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd E = evaluate(basis, block.subject_grids[i]);
        coords.row(i) = project_one(block.subject_values[i], E, method).transpose();
      }
    } else {
      Eigen::MatrixXd E = evaluate(basis, block.grid);
      for (int i = 0; i < n; ++i)
        coords.row(i) = project_one(block.values.row(i).transpose(), E, method).transpose();
    }
  } catch (const CoordinateRankError& e) {
    throw CoordinateRankError("predictor " + std::to_string(block_index + 1) +
                              ": " + e.what());
  }
  return coords;
}

}  // namespace detail

// Project every subject of every predictor (and a functional response) onto
// the given bases. Vector/binary responses pass through untouched.
inline CoordinateBlock project_dataset(const FunctionalDataset& data,
                                       const std::vector<BasisSet>& bases_x,
                                       const std::optional<BasisSet>& basis_y,
                                       const ProjectionMethod& method = ProjectionMethod::ols()) {
  data.validate();
  if (bases_x.size() != data.predictors.size())
    throw InvalidArgument("project_dataset: one basis per predictor required");
  if (data.response_type == ResponseType::functional && !basis_y)
    throw InvalidArgument("project_dataset: functional response requires basis_y");

  CoordinateBlock out;
  out.response_type = data.response_type;
  out.bases_x = bases_x;
  out.basis_y = basis_y;

  int m_x = 0;
  for (const auto& b : bases_x) m_x += b.m;
  int n = data.n();
  out.Xtil.resize(n, m_x);
  int off = 0;
  for (std::size_t j = 0; j < bases_x.size(); ++j) {
    out.block_offsets.push_back(off);
    out.Xtil.middleCols(off, bases_x[j].m) =
        detail::project_block(data.predictors[j], bases_x[j], method, j);
    off += bases_x[j].m;
  }

  switch (data.response_type) {
    case ResponseType::functional: {
      Eigen::MatrixXd E = evaluate(*basis_y, data.y_grid);
      out.Ytil.resize(n, basis_y->m);
      for (int i = 0; i < n; ++i)
        out.Ytil.row(i) =
            detail::project_one(data.y_values.row(i).transpose(), E, method).transpose();
      break;
    }
    case ResponseType::vector:
      out.Ytil = data.y_vec;
      break;
    case ResponseType::binary:
      out.labels = data.y_label;
      break;
  }
  return out;
}

// Function values on `grid` from coordinates: evaluate(basis, grid) * coords.
inline Eigen::VectorXd reconstruct(const Eigen::VectorXd& coords,
                                   const BasisSet& basis,
                                   const Eigen::VectorXd& grid) {
  if (coords.size() != basis.m)
    throw InvalidArgument("reconstruct: coordinate length does not match basis size");
  return evaluate(basis, grid) * coords;
}

inline Eigen::MatrixXd reconstruct_rows(const Eigen::MatrixXd& coords,
                                        const BasisSet& basis,
                                        const Eigen::VectorXd& grid) {
  if (coords.cols() != basis.m)
    throw InvalidArgument("reconstruct: coordinate width does not match basis size");
  return coords * evaluate(basis, grid).transpose();
}

}  // namespace fepls
