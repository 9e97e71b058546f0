#include <doctest.h>

#include <string>

#include "helpers.hpp"
#include "iact/core/error.hpp"
#include "iact/core/ops.hpp"
#include "iact/model/hier_encoder.hpp"
#include "iact/policy/model.hpp"

using namespace iact;

namespace {

struct Fixture {
  ModelConfig config = test::quiet_desk();
  ParameterStore<double> store;
  HierEncoder<double> enc;
  Graph<double> g{GraphOptions{.record = false}};
  Rng rng{31};

  explicit Fixture(ModelConfig c = test::quiet_desk()) : config(c), enc(store, c, Rng(c.seed).substream("init")) {}

  SegmentSet<double> segments() {
    const auto in = test::random_input<double>(rng, config);
    const std::size_t j = config.joints_per_arm;
    const auto a1 = enc.embed_joints(g, std::span<const double>(in.qpos).first(j), 0);
    const auto a2 = enc.embed_joints(g, std::span<const double>(in.qpos).last(j), 1);
    std::optional<Var<double>> vis;
    if (config.use_visual) vis = enc.embed_visual(g, *in.image);
    return enc.assemble(g, a1, a2, vis);
  }
};

std::string schedule_string(const HierEncoder<double>& e) {
  const auto s = e.schedule();
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("paper profile has the published token and layer counts") {
  const ModelConfig c = ModelConfig::paper();
  CHECK(c.cls_counts == std::array<std::size_t, 3>{7, 7, 5});
  CHECK(c.seg_layers == 3);
  CHECK(c.cross_layers == 3);
  CHECK(c.dec_layers == 4);
  CHECK(c.sync_layers == 1);
  CHECK(c.d_model == 512);
  CHECK(c.n_heads == 8);
  CHECK(c.ffn_dim == 3200);
  CHECK(c.chunk_size == 50);
  CHECK(c.lr == 1e-5);
  CHECK(c.beta == 10.0);
  CHECK(c.batch_size == 8);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("paper profile parameter count matches the analytic formula") {
  const ModelConfig c = ModelConfig::paper();
  InterActModel<float> model(c);
  const std::size_t d = c.d_model, f = c.ffn_dim, j = c.joints_per_arm, k = c.chunk_size, z = c.latent_dim;
  auto lin = [](std::size_t i, std::size_t o) { return i * o + o; };
  const std::size_t enc_layer = 4 * lin(d, d) + lin(d, f) + lin(f, d) + 2 * 2 * d;
  const std::size_t dec_layer = 8 * lin(d, d) + lin(d, f) + lin(f, d) + 3 * 2 * d;
  const std::size_t n_cls = 7 + 7 + 5;
  const std::size_t stem = lin(4 * 1, c.stem_channels) + lin(4 * c.stem_channels, c.stem_channels) +
                           lin(4 * c.stem_channels, d);
  const std::size_t encoder = lin(1, d) + stem + n_cls * d + n_cls * d + 3 * enc_layer + 3 * enc_layer;
  const std::size_t decoder = 2 * (4 * dec_layer + k * d + lin(d, j)) + 1 * enc_layer;
  const std::size_t style = d + 2 * lin(2 * j, d) + lin(d, 2 * z) + 4 * enc_layer;
  const std::size_t latent = lin(z, d);
  CHECK(model.params().scalar_count() == encoder + decoder + style + latent);

  CHECK(model.encoder().segment_layers().size() == 3);
  CHECK(model.encoder().cross_layers().size() == 3);
  CHECK(model.decoder().layers(0).size() == 4);
  CHECK(model.decoder().layers(1).size() == 4);
  CHECK(model.decoder().sync_layers().size() == 1);
  for (std::size_t s = 0; s < 3; ++s) CHECK(model.encoder().cls_bank(s)->value.rows() == c.cls_counts[s]);
}

TEST_CASE("schedules for interleaved and sequential stacking") {
  ModelConfig c = test::quiet_desk();
  c.seg_layers = 3;
  c.cross_layers = 2;
  {
    Fixture fx(c);
    CHECK(schedule_string(fx.enc) == "scscs");
  }
  c.stacking = Stacking::kSequential;
  {
    Fixture fx(c);
    CHECK(schedule_string(fx.enc) == "sssc" "c");
  }
  c.ablation.no_cross = true;
  {
    Fixture fx(c);
    CHECK(schedule_string(fx.enc) == "sss");
    CHECK_FALSE(fx.store.contains("enc.role_pe"));
    CHECK_FALSE(fx.store.contains("enc.cross0.attn.q.w"));
  }
}

TEST_CASE("token counts are conserved through every pass") {
  ModelConfig c = test::quiet_desk();
  c.seg_layers = 2;
  c.cross_layers = 2;
  Fixture fx(c);
  const auto s = fx.segments();
  REQUIRE(s.size() == 3);
  CHECK(s.length(0) == c.cls_counts[0] + c.joints_per_arm);
  CHECK(s.length(1) == c.cls_counts[1] + c.joints_per_arm);
  CHECK(s.length(2) == c.cls_counts[2] + 64);
  CHECK(c.visual_tokens() == 64);

  auto cur = s;
  auto check_conserved = [&](const SegmentSet<double>& before, const SegmentSet<double>& after) {
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(after.length(i) == before.length(i));
      CHECK(after.cls_counts[i] == before.cls_counts[i]);
      CHECK(after.segments[i].cols() == c.d_model);
    }
  };
  for (std::size_t l = 0; l < 2; ++l) {
    const auto a = fx.enc.segment_wise_pass(fx.g, cur, fx.enc.segment_layers()[l], nn::Mode{});
    check_conserved(cur, a);
    const auto b = fx.enc.cross_segment_pass(fx.g, a, fx.enc.cross_layers()[l], nn::Mode{});
    check_conserved(a, b);
    cur = b;
  }
  const auto e = fx.enc.encode(fx.g, s, nn::Mode{});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(e.cls_length(i) == c.cls_counts[i]);
    CHECK(e.payload_length(i) == s.payload_length(i));
  }
}

TEST_CASE("segment-wise pass equals the layer applied to each segment alone") {
  Fixture fx;
  const auto s = fx.segments();
  const auto& layer = fx.enc.segment_layers()[0];
  const auto out = fx.enc.segment_wise_pass(fx.g, s, layer, nn::Mode{});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto alone = layer.forward(fx.g, s.segments[i], nn::Mode{}).value();
    CHECK(out.segments[i].value() == alone);
  }
}

TEST_CASE("cross pass equals gather, role embedding, layer, scatter") {
  Fixture fx;
  const auto s = fx.segments();
  const auto& layer = fx.enc.cross_layers()[0];
  const auto out = fx.enc.cross_segment_pass(fx.g, s, layer, nn::Mode{});

  std::vector<Var<double>> cls;
  for (std::size_t i = 0; i < s.size(); ++i) cls.push_back(ops::slice_rows(s.segments[i], 0, s.cls_counts[i]));
  auto gathered = ops::concat_rows<double>(cls);
  gathered = ops::add(gathered, fx.enc.role_embedding().rows(fx.g, gathered.rows()));
  const auto mixed = layer.forward(fx.g, gathered, nn::Mode{}).value();

  std::size_t offset = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t n = s.cls_counts[i];
    const auto& seg_out = out.segments[i].value();
    CHECK(test::max_abs_diff(test::rows_of(seg_out, 0, n), test::rows_of(mixed, offset, n)) < 1e-12);
    // Payload rows are untouched, bit for bit.
    CHECK(test::rows_of(seg_out, n, s.payload_length(i)) ==
          test::rows_of(s.segments[i].value(), n, s.payload_length(i)));
    offset += n;
  }
}

TEST_CASE("segment-wise pass isolates segments; cross pass connects them") {
  Fixture fx;
  const auto s = fx.segments();
  auto perturbed = s;
  Tensor<double> v = s.segments[1].value();
  for (auto& x : v.storage()) x += 0.1;
  perturbed.segments[1] = fx.g.constant(v);

  const auto& seg = fx.enc.segment_layers()[0];
  CHECK(fx.enc.segment_wise_pass(fx.g, s, seg, {}).segments[0].value() ==
        fx.enc.segment_wise_pass(fx.g, perturbed, seg, {}).segments[0].value());
  const auto& cross = fx.enc.cross_layers()[0];
  const auto a = fx.enc.cross_segment_pass(fx.g, s, cross, {}).segments[0].value();
  const auto b = fx.enc.cross_segment_pass(fx.g, perturbed, cross, {}).segments[0].value();
  CHECK(test::max_abs_diff(a, b) > 1e-6);
}

TEST_CASE("CLS banks are learned parameters prepended to each segment") {
  Fixture fx;
  const auto s = fx.segments();
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(fx.enc.cls_bank(i) != nullptr);
    CHECK(fx.enc.cls_bank(i)->trainable);
  }
  CHECK(fx.store.contains("enc.cls.arm1"));
  CHECK(fx.store.contains("enc.cls.visual"));
  // Zero CLS slots: the segment has no CLS part and no bank.
  ModelConfig c = test::quiet_desk();
  c.cls_counts = {0, 2, 2};
  Fixture fz(c);
  CHECK(fz.enc.cls_bank(0) == nullptr);
  const auto e = fz.enc.encode(fz.g, fz.segments(), {});
  CHECK_FALSE(e.cls[0].has_value());
  CHECK(e.cls_length(1) == 2);
}

TEST_CASE("visual stem maps a 64x64 frame to 64 tokens and is input sensitive") {
  Fixture fx;
  Tensor<double> img({64, 64, 1});
  const auto t0 = fx.enc.embed_visual(fx.g, img).value();
  CHECK(t0.shape() == Shape{64, fx.config.d_model});
  img(10, 10) = 1.0;
  const auto t1 = fx.enc.embed_visual(fx.g, img).value();
  CHECK(test::max_abs_diff(t0, t1) > 0);
  CHECK_THROWS_AS(fx.enc.embed_visual(fx.g, Tensor<double>({32, 32, 1})), DimensionError);
  const std::vector<double> three(3, 0.0);
  CHECK_THROWS_AS(fx.enc.embed_joints(fx.g, three, 0), DimensionError);
}

TEST_CASE("visual segment can be disabled") {
  ModelConfig c = test::quiet_desk();
  c.use_visual = false;
  Fixture fx(c);
  const auto s = fx.segments();
  CHECK(s.size() == 2);
  const auto e = fx.enc.encode(fx.g, s, {});
  CHECK_FALSE(e.has_visual());
  CHECK_FALSE(e.cls[kVisual].has_value());
  CHECK_FALSE(fx.store.contains("enc.stem0.w"));
}
