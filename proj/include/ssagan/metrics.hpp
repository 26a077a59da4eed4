#pragma once

#include "ssagan/tensor.hpp"

namespace ssagan::metrics {

struct InceptionScore {
  double mean = 0;
  double std = 0;  // population std across splits
};

/// probs: (N, K) class distributions. Per split, exp(mean_i KL(p_i || p_split)).
/// A remainder of N modulo splits is dropped with a warning.
InceptionScore inception_score(const Tensor& probs, int splits = 1);

/// Frechet distance between Gaussian fits of two (N, F) feature sets,
/// with unbiased covariances.
double fid(const Tensor& a, const Tensor& b);

}  // namespace ssagan::metrics
