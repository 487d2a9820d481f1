#include <stdexcept>

#include "mmgan/checkpoint.hpp"
#include "mmgan/metrics.hpp"
#include "mmgan/models.hpp"
#include "mmgan/random.hpp"

namespace mmgan {

const std::vector<std::string>& optimizable_sets() {
  static const std::vector<std::string> s{net::kGenerator, net::kDiscriminator, net::kText, net::kImage,
                                          net::kStyleHead};
  return s;
}

ModelBundle ModelBundle::create(TrainConfig config, enc::Vocabulary vocab) {
  config.arch.vocab_size = vocab.size();
  config.arch.max_caption_len = vocab.max_caption_len();
  config.validate();
  ModelBundle b;
  const auto& a = config.arch;
  const auto seed = config.seed;
  auto init = [&](const char* name, const nn::LayerSpec& spec) {
    b.params.emplace(name, nn::init_params(spec, substream_seed(seed, std::string("init.") + name)));
  };
  init(net::kGenerator, models::generator_spec(a));
  init(net::kDiscriminator, models::discriminator_spec(a));
  init(net::kText, enc::text_encoder_spec(a));
  init(net::kImage, enc::image_encoder_spec(a));
  init(net::kStyleHead, models::style_head_spec(a));
  init(net::kStyleNet, enc::style_net_spec(a));
  init(net::kClassifier, metrics::classifier_spec(a));
  init(net::kFidNet, metrics::fid_net_spec(a));
  for (const auto& name : optimizable_sets()) b.adam.emplace(name, nn::make_adam_state(b.params.at(name), config.adam()));
  b.config = std::move(config);
  b.vocab = std::move(vocab);
  return b;
}

const nn::ParamSet& ModelBundle::at(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("bundle has no parameter set '" + name + "'");
  return it->second;
}

nn::ParamSet& ModelBundle::at(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("bundle has no parameter set '" + name + "'");
  return it->second;
}

}  // namespace mmgan
