#include "levelnet/losses.hpp"

#include <cmath>

#include "levelnet/error.hpp"

namespace levelnet {

Tensor kl_prior_loss(const LatentDistribution& dist) {
  if (dist.mu.shape() != dist.log_var.shape() || dist.mu.rank() != 2)
    throw ShapeError("mu and log_var must both be (B, d)");
  const int batch = dist.mu.dim(0);
  Tensor terms = ag::square(dist.mu) + ag::exp(dist.log_var) - dist.log_var;
  Tensor total = ag::add_scalar(ag::sum_all(terms), -static_cast<double>(dist.mu.size()));
  return ag::scale(total, 0.5 / batch);
}

Tensor reconstruction_loss(const Tensor& pred, const Tensor& y) {
  if (pred.shape() != y.shape() || pred.rank() < 2)
    throw ShapeError("prediction " + ag::to_string(pred.shape()) + " vs target " +
                     ag::to_string(y.shape()));
  const std::size_t cells = pred.size() / static_cast<std::size_t>(pred.shape().back());
  Tensor logp = ag::log(ag::add_scalar(pred, kLogEpsilon));
  Tensor picked = ag::mul_const(logp, std::make_shared<const std::vector<double>>(y.values()));
  return ag::scale(ag::sum_all(picked), -1.0 / static_cast<double>(cells));
}

Tensor gradient_penalty(const Tensor& real, const Tensor& fake, const Critic& critic,
                        std::mt19937_64& rng) {
  if (real.shape() != fake.shape() || real.rank() < 1)
    throw ShapeError("real " + ag::to_string(real.shape()) + " vs fake " +
                     ag::to_string(fake.shape()));
  const int batch = real.dim(0);
  const std::size_t per = real.size() / static_cast<std::size_t>(batch);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> mixed(real.size());
  for (int b = 0; b < batch; ++b) {
    const double u = uni(rng);
    for (std::size_t i = b * per; i < (b + 1) * per; ++i)
      mixed[i] = u * real[i] + (1.0 - u) * fake[i];
  }
  Tensor x = Tensor::parameter(real.shape(), std::move(mixed));
  Tensor scores = critic(x);
  Tensor g = ag::grad(ag::sum_all(scores), {x}, true)[0];
  Tensor sq = ag::sum_last(ag::reshape(ag::square(g), {batch, static_cast<int>(per)}));
  Tensor norm = ag::sqrt(ag::add_scalar(sq, 1e-12));
  return ag::mean_all(ag::square(ag::add_scalar(norm, -1.0)));
}

Tensor discriminator_loss(const Tensor& d_fake, const Tensor& d_real, const Tensor& gp,
                          double lambda) {
  return ag::mean_all(d_fake) - ag::mean_all(d_real) + ag::scale(gp, lambda);
}

Tensor generator_loss(const Tensor& d_fake) { return ag::neg(ag::mean_all(d_fake)); }

}  // namespace levelnet
