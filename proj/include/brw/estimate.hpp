#pragma once

namespace brw {

enum class EstimateMethod { Naive, Splitting };

// Probability estimate from repeated simulation.  std_error is the binomial
// error for Naive estimates and the between-replicate error for Splitting;
// cap_hits counts runs in which a population cap forced subsampling (always
// 0 for single-walk estimators).
struct SurvivalEstimate {
  long n = 0;  // horizon the estimate refers to, in steps or generations
  double p_hat = 0.0;
  double std_error = 0.0;
  long runs = 0;
  EstimateMethod method = EstimateMethod::Naive;
  long cap_hits = 0;
};

}  // namespace brw
