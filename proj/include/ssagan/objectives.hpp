#pragma once

#include <functional>

#include "ssagan/tensor.hpp"

namespace ssagan {

struct AdvLossTerms {
  Tensor real_matched;      // mean max(0, 1 - D(x, s))
  Tensor fake;              // mean max(0, 1 + D(G(z), s))
  Tensor real_mismatched;   // mean max(0, 1 + D(x, s_hat))
  Tensor gradient_penalty;  // 0 until added
  Tensor total;
};

/// Hinge terms; total = real + fake/2 + mismatched/2.
AdvLossTerms d_hinge_loss(const Tensor& d_real_matched, const Tensor& d_fake, const Tensor& d_real_mismatched);
/// Adds a penalty to the hinge total.
AdvLossTerms with_penalty(AdvLossTerms terms, const Tensor& penalty);

using DiscriminatorFn = std::function<Tensor(const Tensor& images, const Tensor& sentence)>;

/// lambda * mean_b (||dD/dx_b|| + ||dD/ds_b||)^p at real matched pairs. The
/// penalty stays differentiable with respect to the discriminator weights.
Tensor ma_gp(const Tensor& images, const Tensor& sentence, const DiscriminatorFn& d, Real lambda, Real p);
/// Same penalty when the logits were already computed from leaves `images`
/// and `sentence` that require gradients.
Tensor ma_gp_from_logits(const Tensor& logits, const Tensor& images, const Tensor& sentence, Real lambda, Real p);

/// -mean D(G(z), s).
Tensor g_adv_loss(const Tensor& d_fake);

struct GenLossTerms {
  Tensor adversarial;
  Tensor damsm;
  Tensor total;
};
GenLossTerms g_total_loss(const Tensor& adversarial, const Tensor& damsm, Real lambda_da);

}  // namespace ssagan
