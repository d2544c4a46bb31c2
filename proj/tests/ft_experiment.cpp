// Standalone knob-sweep harness for the adversarial fine-tuning stage.
// Not part of any test target; built by hand while tuning the acceptance
// suite's training budget:
//   c++ -O2 -std=c++20 -Iinclude -Ivendor -I/usr/include/eigen3 \
//       tests/ft_experiment.cpp -o build/ft_experiment
// Usage: ft_experiment <pairs> <dur_s> <pre_epochs> <ft_epochs> <k> <warmup>
//                      <d_lr> <g_lr_eff> <seed...>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "se/checkpoint.hpp"
#include "se/pipeline.hpp"
#include "se/training.hpp"
#include "testutil.hpp"

using se::Index;

struct ToyCorpus {
  std::string dir;
  se::GeneratorConfig cfg = se::toy_generator_config();
  se::FrameParams<float> p;
  std::vector<se::TrainUtterance<float>> train;
  std::vector<se::TrainUtterance<float>> val;
  se::MetricFn<float> metric = se::make_metric<float>("qsnr");

  ToyCorpus(int pairs, double duration_s, const std::string& tag)
      : p(se::frame_params_for<float>(cfg)) {
    dir = tu::scratch_dir(tag);
    std::vector<se::MixSpec> specs;
    const double snrs[3] = {0.0, 5.0, 10.0};
    for (int i = 0; i < pairs; ++i) {
      se::MixSpec ms;
      ms.duration_s = duration_s;
      ms.snr_db = snrs[i % 3];
      ms.noise = i % 2 == 0 ? se::NoiseType::kWhite : se::NoiseType::kPink;
      ms.seed = 4200 + i;
      specs.push_back(ms);
    }
    const auto entries = se::synth_dataset<float>(specs, dir, 2 * p.window_len);
    const auto [tr, va] = se::split(entries, 0.8, 0);
    train = se::load_utterances<float>(tr, p);
    val = se::load_utterances<float>(va, p);
  }
  ~ToyCorpus() { std::filesystem::remove_all(dir); }
};

int main(int argc, char** argv) {
  if (argc < 10) {
    std::fprintf(stderr,
                 "usage: %s pairs dur pre_epochs ft_epochs k warmup d_lr g_lr_eff seed...\n",
                 argv[0]);
    return 1;
  }
  const int pairs = std::atoi(argv[1]);
  const double dur = std::atof(argv[2]);
  const Index pre_epochs = std::atoll(argv[3]);
  const Index ft_epochs = std::atoll(argv[4]);
  const Index k = std::atoll(argv[5]);
  const Index warmup = std::atoll(argv[6]);
  const double d_lr = std::atof(argv[7]);
  const double g_lr_eff = std::atof(argv[8]);

  ToyCorpus corpus(pairs, dur, "ftexp");
  const auto t0 = std::chrono::steady_clock::now();
  double gain_sum = 0;
  for (int ai = 9; ai < argc; ++ai) {
    const std::uint64_t seed = std::strtoull(argv[ai], nullptr, 10);
    se::Rng rng(seed);
    se::GeneratorWeights<float> gw = se::GeneratorWeights<float>::init(corpus.cfg, rng);

    se::TrainConfig pre;
    pre.lr = 1e-3;
    pre.max_epochs = pre_epochs;
    pre.patience = 3;
    pre.seed = seed;
    se::pretrain(corpus.cfg, gw, corpus.train, corpus.val, pre, corpus.metric, corpus.p);

    se::TrainConfig ft;
    ft.phase = "finetune";
    ft.lr = g_lr_eff / 0.1;  // finetune_lr_scale multiplies this back down
    ft.max_epochs = ft_epochs;
    ft.patience = ft_epochs;
    ft.d_lr = d_lr;
    ft.d_warmup_steps = warmup;
    ft.d_steps_per_g = k;
    ft.seed = seed;
    const se::FinetuneResult res =
        se::metricgan_finetune(corpus.cfg, gw, corpus.train, corpus.val, ft, corpus.metric,
                               corpus.p);
    const double gain = res.best_val_q - res.pretrained_val_q;
    gain_sum += gain;
    std::printf("seed %llu: pretrained %.5f best %.5f gain %.5f (best epoch %lld)\n",
                static_cast<unsigned long long>(seed), res.pretrained_val_q, res.best_val_q,
                gain, static_cast<long long>(res.best_epoch));
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("mean gain %.5f over %d seeds, %.1f s\n", gain_sum / (argc - 9), argc - 9, wall);
  return 0;
}
