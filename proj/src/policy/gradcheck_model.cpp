#include "iact/policy/gradcheck_model.hpp"

#include "iact/policy/model.hpp"

namespace iact {

GradCheckReport check_model_gradients(const ModelConfig& config, const GradCheckOptions& options) {
  InterActModel<double> model(config);
  Rng data = Rng(config.seed).substream("gradcheck-data");
  const std::size_t a = config.action_dim(), k = config.chunk_size;

  ModelInput<double> in;
  for (std::size_t i = 0; i < a; ++i) in.qpos.push_back(data.normal());
  if (config.use_visual) {
    Tensor<double> img({config.image_height, config.image_width, config.image_channels});
    for (auto& v : img.storage()) v = data.uniform();
    in.image = std::move(img);
  }
  Tensor<double> target({k, a});
  for (auto& v : target.storage()) v = data.normal();
  std::vector<std::uint8_t> mask(k, 1);
  if (k > 1) mask.back() = 0;

  const Rng dropout_seed = Rng(config.seed).substream("gradcheck-dropout");
  const Rng latent_seed = Rng(config.seed).substream("gradcheck-latent");
  auto objective = [&](Graph<double>& g) {
    Rng dropout = dropout_seed;
    Rng latent = latent_seed;
    const ModelOutput<double> out = model.forward(g, in, &target, nn::Mode{true, &dropout}, &latent);
    return chunk_loss(g, out.chunk(), target, out.mu, out.logvar, config.beta, mask).total;
  };
  return finite_diff_check(objective, model.params(), options);
}

}  // namespace iact
