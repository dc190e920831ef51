#pragma once

#include <functional>
#include <random>

#include "levelnet/networks.hpp"

namespace levelnet {

inline constexpr double kLogEpsilon = 1e-7;

/// Closed-form KL(q || N(0, I)) summed over latent dims, averaged over batch.
Tensor kl_prior_loss(const LatentDistribution& dist);

/// Mean over batch and cells of -sum_c y_c log(pred_c + 1e-7).
Tensor reconstruction_loss(const Tensor& pred, const Tensor& y);

using Critic = std::function<Tensor(const Tensor&)>;

/// WGAN-GP term: interpolates x = u real + (1 - u) fake with one u ~ U(0,1)
/// per sample and returns mean (||d critic / d x||_2 - 1)^2. The result keeps
/// history so it can be differentiated with respect to the critic weights.
/// The caller decides how the critic is run (noise off, dropout as usual).
Tensor gradient_penalty(const Tensor& real, const Tensor& fake, const Critic& critic,
                        std::mt19937_64& rng);

/// mean(d_fake) - mean(d_real) + lambda gp.
Tensor discriminator_loss(const Tensor& d_fake, const Tensor& d_real, const Tensor& gp,
                          double lambda);

/// -mean(d_fake).
Tensor generator_loss(const Tensor& d_fake);

}  // namespace levelnet
