#include <doctest.h>

#include "helpers.hpp"
#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"
#include "iact/model/decoder.hpp"
#include "iact/policy/model.hpp"

using namespace iact;

namespace {

struct Fixture {
  ModelConfig config;
  InterActModel<double> model;
  Graph<double> g{GraphOptions{.record = false}};
  Rng rng{41};
  ModelInput<double> input;
  EncodedState<double> enc;

  explicit Fixture(ModelConfig c = test::quiet_desk())
      : config(c), model(c), input(test::random_input<double>(rng, c)), enc(model.encode(g, input, {})) {}

  Var<double> latent() {
    Rng r(5);
    return g.constant(test::random_tensor<double>(r, {1, config.d_model}));
  }
};

Tensor<double> part(const std::optional<Var<double>>& v) { return v->value(); }

}  // namespace

TEST_CASE("decoder memory order per arm") {
  Fixture fx;
  const auto z = fx.latent();
  const auto& e = fx.enc;
  const auto& dec = fx.model.decoder();
  const std::size_t j = fx.config.joints_per_arm, c = 2, v = 64;

  const auto m1 = dec.build_context(fx.g, 0, e, z);
  const auto& a = m1.memory.value();
  CHECK(a.rows() == j + c + c + v + 1);
  CHECK(test::rows_of(a, 0, j) == part(e.payload[kArm1]));
  CHECK(test::rows_of(a, j, c) == part(e.cls[kArm2]));
  CHECK(test::rows_of(a, j + c, c) == part(e.cls[kVisual]));
  CHECK(test::rows_of(a, j + 2 * c, v) == part(e.payload[kVisual]));
  CHECK(test::rows_of(a, j + 2 * c + v, 1) == z.value());
  CHECK(m1.cls_begin == j);
  CHECK(m1.cls_end == j + c);

  const auto m2 = dec.build_context(fx.g, 1, e, z);
  const auto& b = m2.memory.value();
  CHECK(test::rows_of(b, 0, c) == part(e.cls[kArm1]));
  CHECK(test::rows_of(b, c, j) == part(e.payload[kArm2]));
  CHECK(test::rows_of(b, c + j, c) == part(e.cls[kVisual]));
  CHECK(m2.cls_begin == 0);
  CHECK(m2.cls_end == c);
}

TEST_CASE("no-cls memory carries no CLS rows and refuses to trace") {
  ModelConfig c = test::quiet_desk();
  c.ablation.no_cls = true;
  Fixture fx(c);
  const auto ctx = fx.model.decoder().build_context(fx.g, 0, fx.enc, std::nullopt);
  CHECK(ctx.cls_length() == 0);
  CHECK(ctx.memory.rows() == c.joints_per_arm + 64);
  const auto out = fx.model.forward(fx.g, fx.input, nullptr, {}, nullptr);
  CHECK_THROWS_AS(out.decode.trace(), UsageError);
}

TEST_CASE("sync block is symmetric under swapping the arms") {
  Fixture fx;
  Rng r(6);
  const std::size_t k = fx.config.chunk_size, d = fx.config.d_model;
  const auto h1 = fx.g.constant(test::random_tensor<double>(r, {k, d}));
  const auto h2 = fx.g.constant(test::random_tensor<double>(r, {k, d}));
  const auto [a1, a2] = fx.model.decoder().sync_exchange(fx.g, h1, h2, {});
  const auto [b1, b2] = fx.model.decoder().sync_exchange(fx.g, h2, h1, {});
  CHECK(test::max_abs_diff(a1.value(), b2.value()) < 1e-12);
  CHECK(test::max_abs_diff(a2.value(), b1.value()) < 1e-12);
  // The exchange mixes the arms.
  const auto h2b = fx.g.constant(test::random_tensor<double>(r, {k, d}));
  const auto [c1, c2] = fx.model.decoder().sync_exchange(fx.g, h1, h2b, {});
  (void)c2;
  CHECK(test::max_abs_diff(a1.value(), c1.value()) > 1e-6);
  CHECK_THROWS_AS(fx.model.decoder().sync_exchange(fx.g, h1, fx.g.constant(Tensor<double>({k + 1, d})), {}),
                  DimensionError);
}

TEST_CASE("no-sync replaces the block with the identity") {
  ModelConfig c = test::quiet_desk();
  c.ablation.no_sync = true;
  Fixture fx(c);
  CHECK(fx.model.decoder().sync_layers().empty());
  CHECK_FALSE(fx.model.params().contains("dec.sync0.attn.q.w"));
  Rng r(7);
  const auto h1 = fx.g.constant(test::random_tensor<double>(r, {c.chunk_size, c.d_model}));
  const auto h2 = fx.g.constant(test::random_tensor<double>(r, {c.chunk_size, c.d_model}));
  const auto [a, b] = fx.model.decoder().sync_exchange(fx.g, h1, h2, {});
  CHECK(a.value() == h1.value());
  CHECK(b.value() == h2.value());
}

TEST_CASE("decode equals front, sync, back and heads composed by hand") {
  Fixture fx;
  const auto& dec = fx.model.decoder();
  const auto z = fx.latent();
  const auto full = dec.decode(fx.g, fx.enc, z, {});

  std::array<ArmContext<double>, 2> ctx;
  std::array<Var<double>, 2> front;
  for (std::size_t a = 0; a < 2; ++a) {
    ctx[a] = dec.build_context(fx.g, a, fx.enc, z);
    front[a] = dec.decode_front(fx.g, a, ctx[a], dec.queries(fx.g, a), {}).hidden;
  }
  const auto [s1, s2] = dec.sync_exchange(fx.g, front[0], front[1], {});
  const Var<double> shared[2] = {s1, s2};
  std::vector<Var<double>> heads;
  for (std::size_t a = 0; a < 2; ++a) {
    heads.push_back(dec.action_head(fx.g, dec.decode_back(fx.g, a, ctx[a], shared[a], {}).hidden, a));
  }
  const auto want = ops::concat_cols<double>(heads).value();
  CHECK(full.chunk.value().shape() == Shape{fx.config.chunk_size, fx.config.action_dim()});
  CHECK(test::max_abs_diff(full.chunk.value(), want) < 1e-12);
  CHECK(full.stacks[0].cross_weights.size() == fx.config.dec_layers);
}

TEST_CASE("queries start as the sinusoidal table and are trainable") {
  Fixture fx;
  const auto& q = fx.model.params().at("dec.arm1.queries");
  CHECK(q.trainable);
  CHECK(q.value == nn::sinusoidal_pe<double>(fx.config.chunk_size, fx.config.d_model));
}

TEST_CASE("trace recomputes from the raw cross-attention weights") {
  Fixture fx;
  const auto out = fx.model.forward(fx.g, fx.input, nullptr, {}, nullptr);
  const auto tr = out.decode.trace();
  CHECK(tr.layers == fx.config.dec_layers);
  CHECK(tr.heads == fx.config.n_heads);
  for (std::size_t arm = 0; arm < 2; ++arm) {
    const auto& ctx = out.decode.contexts[arm];
    for (std::size_t l = 0; l < tr.layers; ++l) {
      double avg = 0;
      for (std::size_t h = 0; h < tr.heads; ++h) {
        const auto& w = out.decode.stacks[arm].cross_weights[l][h].value();
        double m = 0;
        for (std::size_t q = 0; q < w.rows(); ++q)
          for (std::size_t c = ctx.cls_begin; c < ctx.cls_end; ++c) m += w(q, c);
        m /= static_cast<double>(w.rows());
        CHECK(tr.at(arm, l, h) == doctest::Approx(m).epsilon(1e-12));
        CHECK((tr.at(arm, l, h) >= 0.0 && tr.at(arm, l, h) <= 1.0));
        avg += m / static_cast<double>(tr.heads);
      }
      CHECK(tr.head_average(arm, l) == doctest::Approx(avg).epsilon(1e-12));
    }
  }
}
