// Copyright 2026 The genleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "genleak/nn.h"
#include "gradcheck.h"

namespace genleak {
namespace {

NetworkSpec tiny_discriminator() {
  NetworkSpec spec;
  spec.role = NetworkRole::discriminator;
  spec.input_shape = {2};
  spec.layers = {LayerSpec::dense(4, Activation::leaky_relu),
                 LayerSpec::dense(1, Activation::sigmoid)};
  return spec;
}

TEST(BuildNetwork, DenseShapes) {
  Rng rng(1);
  Parameters p = build_network(tiny_discriminator(), rng);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p.at("l0.weight").shape(), (Shape{2, 4}));
  EXPECT_EQ(p.at("l0.bias").shape(), (Shape{4}));
  EXPECT_EQ(p.at("l1.weight").shape(), (Shape{4, 1}));
  EXPECT_EQ(p.at("l1.bias").shape(), (Shape{1}));
  for (Real b : p.at("l0.bias").data()) EXPECT_EQ(b, 0);
}

TEST(BuildNetwork, DeterministicGivenSeed) {
  Rng a(42), b(42);
  NetworkSpec spec = make_network("conv-small", NetworkRole::discriminator, {1, 8, 8}, {});
  EXPECT_EQ(build_network(spec, a), build_network(spec, b));
}

TEST(BuildNetwork, InitializationStatistics) {
  NetworkSpec spec;
  spec.role = NetworkRole::discriminator;
  spec.input_shape = {200};
  spec.layers = {LayerSpec::dense(200, Activation::relu), LayerSpec::dense(1, Activation::sigmoid)};
  Rng rng(5);
  Parameters p = build_network(spec, rng);
  double s = 0, ss = 0;
  const Tensor& w = p.at("l0.weight");
  for (Real x : w.data()) {
    s += x;
    ss += x * x;
  }
  double n = static_cast<double>(w.numel());
  EXPECT_NEAR(s / n, 0.0, 0.001);
  EXPECT_NEAR(std::sqrt(ss / n), 0.02, 0.0005);
}

TEST(BuildNetwork, ConvGeneratorShapePropagation) {
  PresetOptions o;
  o.latent_dim = 16;
  NetworkSpec g = make_network("conv-small", NetworkRole::generator, {1, 8, 8}, o);
  // dense -> reshape [32,2,2] -> tconv 4/2/1 -> [16,4,4] -> tconv -> [1,8,8]
  auto shapes = g.layer_shapes();
  EXPECT_EQ(shapes.back(), (Shape{1, 8, 8}));
  Rng rng(2);
  Parameters p = build_network(g, rng);
  Tensor z = sample_latent(g, 3, rng);
  EXPECT_EQ(forward_network(p, g, z).shape(), (Shape{3, 1, 8, 8}));
}

TEST(BuildNetwork, ConvSmallOnTinyRecords) {
  for (NetworkRole role : {NetworkRole::generator, NetworkRole::discriminator,
                           NetworkRole::encoder, NetworkRole::autoencoder}) {
    NetworkSpec s = make_network("conv-small", role, {1, 1, 2}, {});
    EXPECT_NO_THROW(s.validate());
  }
  NetworkSpec g16 = make_network("conv-small", NetworkRole::generator, {1, 16, 16}, {});
  EXPECT_EQ(g16.output_shape(), (Shape{1, 16, 16}));
}

TEST(BuildNetwork, InconsistentShapesRejected) {
  NetworkSpec spec;
  spec.role = NetworkRole::discriminator;
  spec.input_shape = {2};
  spec.layers = {LayerSpec::conv(4, 3, 1, 0), LayerSpec::dense(1, Activation::sigmoid)};
  Rng rng(0);
  EXPECT_THROW(build_network(spec, rng), ShapeError);
  spec.input_shape = {1, 2, 2};
  EXPECT_THROW(build_network(spec, rng), ShapeError);  // 3x3 kernel on 2x2
}

TEST(BuildNetwork, RoleInvariants) {
  NetworkSpec d = tiny_discriminator();
  d.layers.back().activation = Activation::none;
  EXPECT_THROW(d.validate(), InvalidArgument);
  NetworkSpec e = make_network("mlp-small", NetworkRole::encoder, {2}, {});
  EXPECT_EQ(e.output_shape(), (Shape{16}));
  e.latent_dim = 3;
  EXPECT_THROW(e.validate(), InvalidArgument);
  LayerSpec bad = LayerSpec::act(Activation::relu);
  bad.weight_norm = true;
  d = tiny_discriminator();
  d.layers.insert(d.layers.begin(), bad);
  EXPECT_THROW(d.validate(), ShapeError);
}

TEST(ForwardNetwork, UntrainedDiscriminatorInsideUnitInterval) {
  Rng rng(3);
  NetworkSpec spec = make_network("mlp-small", NetworkRole::discriminator, {2}, {});
  Parameters p = build_network(spec, rng);
  Tensor x = testing::random_tensor(rng, {64, 2}, 5.0);
  Tensor y = forward_network(p, spec, x);
  for (Real v : y.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(ForwardNetwork, ExtremeInputStaysInClosedUnitInterval) {
  Rng rng(3);
  PresetOptions o;
  o.init_stddev = 1.0;
  NetworkSpec spec = make_network("mlp-small", NetworkRole::discriminator, {2}, o);
  Parameters p = build_network(spec, rng);
  Tensor x = Tensor::from({2, 2}, {1e4, -1e4, -1e4, 1e4});
  Tensor y = forward_network(p, spec, x);
  for (Real v : y.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(ForwardNetwork, DropoutEvalIsIdentity) {
  NetworkSpec spec;
  spec.role = NetworkRole::autoencoder;
  spec.input_shape = {5};
  spec.layers = {LayerSpec::dropout(0.5)};
  Parameters p;
  Tensor x = Tensor::from({1, 5}, {1, 2, 3, 4, 5});
  Tape tape;
  Rng rng(0);
  auto t = forward_network(tape, p, spec, tape.constant(x), Mode::eval, rng);
  EXPECT_EQ(t.output.value(), x);
  EXPECT_EQ(rng.position(), 0u);
}

TEST(ForwardNetwork, DropoutMaskReproducibleFromSeed) {
  NetworkSpec spec;
  spec.role = NetworkRole::autoencoder;
  spec.input_shape = {50};
  spec.layers = {LayerSpec::dropout(0.5)};
  Parameters p;
  Tensor x(Shape{4, 50}, 1.0);
  Tape tape;
  Rng rng(99);
  auto t = forward_network(tape, p, spec, tape.constant(x), Mode::train, rng);
  Rng replay(99);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    Real expected = replay.bernoulli(0.5) ? 2.0 : 0.0;
    EXPECT_EQ(t.output.value()[i], expected) << i;
  }
}

TEST(ForwardNetwork, NoiseLayerOnlyInTrainMode) {
  NetworkSpec spec;
  spec.role = NetworkRole::autoencoder;
  spec.input_shape = {3};
  spec.layers = {LayerSpec::noise(0.5)};
  Parameters p;
  Tensor x = Tensor::from({1, 3}, {0.1, 0.2, 0.3});
  EXPECT_EQ(forward_network(p, spec, x), x);
  Tape tape;
  Rng rng(4);
  auto t = forward_network(tape, p, spec, tape.constant(x), Mode::train, rng);
  EXPECT_NE(t.output.value(), x);
}

TEST(ForwardNetwork, EvalModeIsPure) {
  Rng rng(8);
  NetworkSpec spec = make_network("mlp-small", NetworkRole::discriminator, {2},
                                  PresetOptions{.dropout_p = 0.5, .batchnorm = true});
  Parameters p = build_network(spec, rng);
  Tensor x = testing::random_tensor(rng, {6, 2});
  Parameters before = p;
  EXPECT_EQ(forward_network(p, spec, x), forward_network(p, spec, x));
  EXPECT_EQ(p, before);
}

TEST(ForwardNetwork, BatchShapeMismatch) {
  Rng rng(0);
  NetworkSpec spec = tiny_discriminator();
  Parameters p = build_network(spec, rng);
  EXPECT_THROW(forward_network(p, spec, Tensor(Shape{3, 3})), ShapeError);
}

TEST(ForwardNetwork, FeaturesAreInputOfLastWeightedLayer) {
  Rng rng(0);
  NetworkSpec spec = tiny_discriminator();
  Parameters p = build_network(spec, rng);
  Tape tape;
  auto t = forward_network(tape, p, spec, tape.constant(Tensor(Shape{5, 2}, 0.3)),
                           Mode::eval, rng);
  EXPECT_EQ(t.features.shape(), (Shape{5, 4}));
  EXPECT_EQ(t.logits.shape(), (Shape{5, 1}));
}

TEST(SampleLatent, StandardNormalMoments) {
  NetworkSpec g = make_network("mlp-small", NetworkRole::generator, {2}, {});
  Rng rng(10);
  Tensor z = sample_latent(g, 100000 / g.latent_dim, rng);
  double s = 0, ss = 0;
  for (Real x : z.data()) s += x;
  double mean = s / static_cast<double>(z.numel());
  for (Real x : z.data()) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(ss / static_cast<double>(z.numel()), 1.0, 0.05);
}

TEST(SampleLatent, UniformRangeAndDeterminism) {
  NetworkSpec g = make_network("mlp-small", NetworkRole::generator, {2}, {});
  g.latent_prior = LatentPrior::uniform;
  Rng a(1), b(1);
  Tensor z = sample_latent(g, 1000, a);
  for (Real x : z.data()) {
    EXPECT_GE(x, -1.0);
    EXPECT_LE(x, 1.0);
  }
  EXPECT_EQ(z, sample_latent(g, 1000, b));
  EXPECT_THROW(sample_latent(g, 0, a), InvalidArgument);
}

TEST(Reparameterize, VanishingVarianceReturnsMean) {
  Tape tape;
  Rng rng(0);
  Var mu = tape.input(Tensor::from({3}, {0.5, -1.0, 2.0}));
  Var lv = tape.input(Tensor(Shape{3}, -50.0));
  Var z = reparameterize(mu, lv, rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(z.value()[i], mu.value()[i], 1e-6);
}

TEST(Reparameterize, UnitVarianceSamples) {
  Tape tape;
  Rng rng(12);
  Var mu = tape.input(Tensor(Shape{100000}, 0.0));
  Var lv = tape.input(Tensor(Shape{100000}, 0.0));
  Var z = reparameterize(mu, lv, rng);
  double s = 0, ss = 0;
  for (Real x : z.value().data()) {
    s += x;
    ss += x * x;
  }
  double n = 100000.0, m = s / n;
  EXPECT_NEAR(ss / n - m * m, 1.0, 0.05);
}

TEST(Reparameterize, GradientWrtMuIsIdentity) {
  Tape tape;
  Rng rng(0);
  Var mu = tape.input(Tensor::from({2}, {0.3, 0.4}));
  Var lv = tape.input(Tensor::from({2}, {0.1, -0.2}));
  Var z = reparameterize(mu, lv, rng);
  tape.backward(sum(z));
  EXPECT_EQ(tape.grad(mu)[0], 1.0);
  EXPECT_EQ(tape.grad(mu)[1], 1.0);
  EXPECT_NE(tape.grad(lv)[0], 0.0);
}

TEST(WeightNorm, PythagoreanExample) {
  NetworkSpec spec;
  spec.role = NetworkRole::discriminator;
  spec.input_shape = {2};
  spec.layers = {LayerSpec::dense(1, Activation::sigmoid)};
  Rng rng(0);
  Parameters p = build_network(spec, rng);
  p.at("l0.weight") = Tensor::from({2, 1}, {3, 4});
  apply_weight_norm(p, spec);
  EXPECT_TRUE(spec.layers[0].weight_norm);
  EXPECT_NEAR(p.at("l0.weight_g")[0], 5.0, 1e-12);
  const Tensor& v = p.at("l0.weight_v");
  double n = std::hypot(v[0], v[1]);
  EXPECT_NEAR(v[0] / n, 0.6, 1e-12);
  EXPECT_NEAR(v[1] / n, 0.8, 1e-12);
  Tape tape;
  Var w = weight_norm(tape.constant(v), tape.constant(p.at("l0.weight_g")), 1);
  EXPECT_NEAR(w.value()[0], 3.0, 1e-12);
  EXPECT_NEAR(w.value()[1], 4.0, 1e-12);
}

TEST(WeightNorm, PreservesForwardFunction) {
  for (const char* preset : {"mlp-small", "conv-small"}) {
    Rng rng(21);
    Shape rec = std::string(preset) == "mlp-small" ? Shape{2} : Shape{1, 8, 8};
    NetworkSpec spec = make_network(preset, NetworkRole::discriminator, rec, {});
    Parameters p = build_network(spec, rng);
    Shape xs{7};
    xs.insert(xs.end(), rec.begin(), rec.end());
    Tensor x = testing::random_tensor(rng, xs);
    Tensor before = forward_logits(p, spec, x);
    apply_weight_norm(p, spec);
    Tensor after = forward_logits(p, spec, x);
    for (std::size_t i = 0; i < before.numel(); ++i) EXPECT_NEAR(before[i], after[i], 1e-6);
  }
}

TEST(WeightNorm, ZeroNormRejected) {
  NetworkSpec spec = tiny_discriminator();
  Rng rng(0);
  Parameters p = build_network(spec, rng);
  for (Real& x : p.at("l1.weight").data()) x = 0;
  Parameters before = p;
  EXPECT_THROW(apply_weight_norm(p, spec), DomainError);
  EXPECT_EQ(p, before);
}

TEST(WeightNorm, GradientCheckOnDirectionAndMagnitude) {
  Rng rng(31);
  NetworkSpec spec = tiny_discriminator();
  Parameters p = build_network(spec, rng);
  apply_weight_norm(p, spec);
  Tensor x = testing::random_tensor(rng, {3, 2});
  std::vector<Tensor> inputs;
  for (const auto& e : p.entries()) {
    Tensor t = e.tensor;
    for (Real& v : t.data()) v = static_cast<Real>(v * 25 + 0.1);
    inputs.push_back(t);
  }
  auto fn = [&](Tape& tape, const std::vector<Var>& v) {
    Var h = matmul(tape.constant(x), weight_norm(v[0], v[1], 1));
    h = leaky_relu(bias_add(h, v[2]), 0.2);
    h = bias_add(matmul(h, weight_norm(v[3], v[4], 1)), v[5]);
    return sum(sigmoid(h));
  };
  EXPECT_LT(testing::grad_check(fn, inputs).max_rel_error, 1e-4);
}

TEST(Parameters, AccessLogRecordsReads) {
  Rng rng(0);
  Parameters p = build_network(tiny_discriminator(), rng);
  p.enable_access_log(true);
  p.at("l1.bias");
  ASSERT_EQ(p.access_log().size(), 1u);
  EXPECT_EQ(p.access_log()[0], "l1.bias");
  EXPECT_THROW(p.add("l1.bias", Tensor(Shape{1})), InvalidArgument);
}

TEST(Serialization, RoundTripThroughConfig) {
  PresetOptions o;
  o.dropout_p = 0.5;
  o.weight_norm = true;
  o.batchnorm = true;
  for (const char* preset : {"mlp-small", "conv-small"}) {
    for (NetworkRole role : {NetworkRole::generator, NetworkRole::discriminator,
                             NetworkRole::encoder, NetworkRole::autoencoder}) {
      NetworkSpec spec = make_network(preset, role, {1, 8, 8}, o);
      ConfigDocument doc;
      write_network(spec, doc.section("net"));
      ConfigDocument back = parse_config(doc.to_text());
      NetworkSpec r = read_network(*back.find_section("net"));
      EXPECT_EQ(r.layers.size(), spec.layers.size());
      for (std::size_t i = 0; i < r.layers.size(); ++i) {
        EXPECT_EQ(layer_to_text(r.layers[i]), layer_to_text(spec.layers[i]));
      }
      EXPECT_EQ(r.input_shape, spec.input_shape);
      EXPECT_EQ(r.latent_dim, spec.latent_dim);
      EXPECT_EQ(r.role, spec.role);
    }
  }
  EXPECT_THROW(layer_from_text("dense units=4 colour=red"), ConfigError);
  EXPECT_THROW(layer_from_text("pool size=2"), ConfigError);
}

}  // namespace
}  // namespace genleak
