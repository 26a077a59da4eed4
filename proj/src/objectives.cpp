#include "ssagan/objectives.hpp"

#include "ssagan/error.hpp"
#include "ssagan/ops.hpp"

namespace ssagan {

namespace {

Tensor hinge_mean(const Tensor& margin) { return ops::mean(ops::relu(margin)); }

void require_logits(const Tensor& t, std::int64_t batch, const char* what) {
  if (t.rank() != 1 || t.dim(0) != batch) throw InputError(std::string(what) + " logits must be (B) with equal B");
}

}  // namespace

AdvLossTerms d_hinge_loss(const Tensor& d_real_matched, const Tensor& d_fake, const Tensor& d_real_mismatched) {
  if (d_real_matched.rank() != 1) throw InputError("logits must be rank 1");
  const std::int64_t b = d_real_matched.dim(0);
  require_logits(d_fake, b, "fake");
  require_logits(d_real_mismatched, b, "mismatched");
  AdvLossTerms t;
  t.real_matched = hinge_mean(1.0 - d_real_matched);
  t.fake = hinge_mean(1.0 + d_fake);
  t.real_mismatched = hinge_mean(1.0 + d_real_mismatched);
  t.gradient_penalty = Tensor::scalar(0.0);
  t.total = t.real_matched + 0.5 * t.fake + 0.5 * t.real_mismatched;
  return t;
}

AdvLossTerms with_penalty(AdvLossTerms terms, const Tensor& penalty) {
  terms.gradient_penalty = penalty;
  terms.total = terms.total + penalty;
  return terms;
}

Tensor ma_gp_from_logits(const Tensor& logits, const Tensor& images, const Tensor& sentence, Real lambda, Real p) {
  if (!images.requires_grad() || !sentence.requires_grad())
    throw ContractError("gradient penalty needs image and sentence inputs that require gradients");
  if (!logits.requires_grad()) throw ContractError("gradient penalty on a discriminator that is not differentiable");
  if (logits.rank() != 1 || logits.dim(0) != images.dim(0)) throw InputError("logits must be (B)");
  // Samples are independent, so the gradient of the summed logits holds every per-sample gradient.
  auto g = grad(ops::sum(logits), {images, sentence}, {.create_graph = true});
  Tensor norms = ops::norm_per_sample(g[0]) + ops::norm_per_sample(g[1]);
  return lambda * ops::mean(ops::pow(norms, p));
}

Tensor ma_gp(const Tensor& images, const Tensor& sentence, const DiscriminatorFn& d, Real lambda, Real p) {
  Tensor x = images.detach().set_requires_grad(true);
  Tensor s = sentence.detach().set_requires_grad(true);
  return ma_gp_from_logits(d(x, s), x, s, lambda, p);
}

Tensor g_adv_loss(const Tensor& d_fake) {
  if (d_fake.rank() != 1) throw InputError("logits must be rank 1");
  return -ops::mean(d_fake);
}

GenLossTerms g_total_loss(const Tensor& adversarial, const Tensor& damsm, Real lambda_da) {
  return {adversarial, damsm, adversarial + lambda_da * damsm};
}

}  // namespace ssagan
