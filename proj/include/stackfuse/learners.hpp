#pragma once

#include "stackfuse/learners/common.hpp"
#include "stackfuse/learners/forest.hpp"
#include "stackfuse/learners/linear_svm.hpp"
#include "stackfuse/learners/logreg.hpp"
#include "stackfuse/learners/naive_bayes.hpp"

namespace stackfuse {

inline std::vector<std::size_t> predict(const LinearModel& model, const Matrix& x) {
  return argmax_rows(model.scores(x));
}

inline std::vector<std::size_t> predict(const GaussianNBModel& model, const Matrix& x) {
  return argmax_rows(joint_log_likelihood(model, x));
}

inline std::vector<std::size_t> predict(const ForestModel& model, const Matrix& x) {
  return argmax_rows(predict_proba(model, x));
}

}  // namespace stackfuse
