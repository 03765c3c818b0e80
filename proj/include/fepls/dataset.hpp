#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fepls/errors.hpp"

namespace fepls {

// One functional predictor observed discretely. Either all subjects share
// `grid` (rows of `values` are subjects), or each subject has its own grid
// (per-subject vectors, same length pairwise per subject).
struct PredictorBlock {
  Eigen::VectorXd grid;
  Eigen::MatrixXd values;  // n x len(grid)

  std::vector<Eigen::VectorXd> subject_grids;   // optional per-subject design
  std::vector<Eigen::VectorXd> subject_values;

  bool per_subject() const { return !subject_grids.empty(); }

  int n() const {
    return per_subject() ? static_cast<int>(subject_grids.size())
                         : static_cast<int>(values.rows());
  }
};

enum class ResponseType { functional, vector, binary };

inline std::string to_string(ResponseType r) {
  switch (r) {
    case ResponseType::functional: return "functional";
    case ResponseType::vector: return "vector";
    case ResponseType::binary: return "binary";
  }
  return "?";
}

struct FunctionalDataset {
  std::vector<PredictorBlock> predictors;
  ResponseType response_type = ResponseType::functional;

  // functional response
  Eigen::VectorXd y_grid;
  Eigen::MatrixXd y_values;  // n x len(y_grid)

  // vector response
  Eigen::MatrixXd y_vec;  // n x d_y

  // binary response
  Eigen::VectorXi y_label;  // n, entries in {0,1}

  int n() const {
    switch (response_type) {
      case ResponseType::functional: return static_cast<int>(y_values.rows());
      case ResponseType::vector: return static_cast<int>(y_vec.rows());
      case ResponseType::binary: return static_cast<int>(y_label.size());
    }
    return 0;
  }

  void validate() const {
    int nn = n();
    for (std::size_t j = 0; j < predictors.size(); ++j)
      if (predictors[j].n() != nn)
        throw DataError("dataset: predictor " + std::to_string(j + 1) +
                        " row count differs from response");
    if (response_type == ResponseType::binary)
      for (Eigen::Index i = 0; i < y_label.size(); ++i)
        if (y_label(i) != 0 && y_label(i) != 1)
          throw DataError("dataset: binary labels must be 0 or 1");
  }
};

}  // namespace fepls
