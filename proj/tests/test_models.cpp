#include <gtest/gtest.h>

#include <random>
#include <set>

#include "inrlab/acceptance.hpp"
#include "inrlab/gradcheck.hpp"
#include "inrlab/models.hpp"

using namespace inrlab;

namespace {

ModelConfig image_config(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.d_in = 2;
  c.d_out = 3;
  c.hidden_width = 16;
  c.table_resolution = {9, 9};
  c.grid.log2_table_size = 10;
  c.grid.num_levels = 4;
  c.table_init_scale = 0.1;
  return c;
}

Matrix grid_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng, 0.0, 1.0);
}

const ModelKind kAllKinds[] = {ModelKind::siren, ModelKind::pe_mlp,      ModelKind::diner,
                               ModelKind::ngp,   ModelKind::rhino_diner, ModelKind::rhino_ngp};

}  // namespace

class ModelGradients : public ::testing::TestWithParam<ModelKind> {};

TEST_P(ModelGradients, AllParametersAndCoordinates) {
  const auto r = check_model(GetParam(), {});
  EXPECT_TRUE(r.pass()) << r.name << ": " << r.failures << " failures, worst " << r.worst;
}

INSTANTIATE_TEST_SUITE_P(Kinds, ModelGradients, ::testing::ValuesIn(kAllKinds),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(TransformNet, Gradients) {
  const auto r = check_transform({});
  EXPECT_TRUE(r.pass()) << r.worst;
}

TEST(Model, KindNamesRoundTrip) {
  for (auto k : kAllKinds) EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_THROW(parse_model_kind("nerf"), ConfigError);
  EXPECT_THROW(parse_transform_kind("sometimes"), ConfigError);
}

TEST(Model, LookupBackbonesHaveNoCoordinatePath) {
  for (auto k : {ModelKind::diner, ModelKind::ngp}) {
    Model m = build_model(image_config(k), 1);
    EXPECT_FALSE(m.has_coordinate_path());
    m.forward(grid_points(5, 2, 2));
    EXPECT_FALSE(m.backward(Matrix::Ones(5, 3)).has_value());
  }
  for (auto k : {ModelKind::siren, ModelKind::pe_mlp, ModelKind::rhino_diner, ModelKind::rhino_ngp}) {
    EXPECT_TRUE(build_model(image_config(k), 1).has_coordinate_path()) << to_string(k);
  }
}

TEST(Model, CoordinateJacobianMatchesDifferences) {
  for (auto k : {ModelKind::pe_mlp, ModelKind::rhino_diner, ModelKind::rhino_ngp}) {
    Model m = build_model(image_config(k), 4);
    EXPECT_LT(AcceptanceSuite::coordinate_jacobian_error(m, 20, 11), 1e-3) << to_string(k);
  }
}

// Paired initialization: a rhino model with the coordinate branch disabled
// computes exactly its backbone's function.
TEST(Model, DisabledTransformReducesToBackbone) {
  const std::pair<ModelKind, ModelKind> pairs[] = {{ModelKind::rhino_diner, ModelKind::diner},
                                                   {ModelKind::rhino_ngp, ModelKind::ngp}};
  const Matrix x = grid_points(64, 2, 5);
  for (const auto& [rhino, base] : pairs) {
    ModelConfig rc = image_config(rhino);
    rc.transform = TransformKind::none;
    const Model r = build_model(rc, 17);
    const Model b = build_model(image_config(base), 17);
    EXPECT_NEAR((r.predict(x) - b.predict(x)).cwiseAbs().maxCoeff(), 0.0, 1e-14);
    EXPECT_FALSE(r.has_coordinate_path());
  }
}

TEST(Model, RhinoTrunkSeesEncoderPlusCoordinateBranch) {
  const Model m = build_model(image_config(ModelKind::rhino_ngp), 1);
  EXPECT_EQ(m.trunk_input_width(), m.encoder_width() + 2);
  const Matrix x = grid_points(7, 2, 3);
  const Matrix in = m.trunk_inputs(x);
  EXPECT_EQ(in.leftCols(static_cast<Eigen::Index>(m.encoder_width())), m.encode(x));
  EXPECT_EQ(m.predict_from_features(m.encode(x), x), m.predict(x));
}

TEST(Model, WidthArithmetic) {
  ModelConfig c = image_config(ModelKind::rhino_diner);
  EXPECT_EQ(build_model(c, 0).trunk_input_width(), c.table_width + 2);
  c.kind = ModelKind::pe_mlp;
  EXPECT_EQ(build_model(c, 0).trunk_input_width(), 40u);
  c.kind = ModelKind::diner;
  c.table_resolution = {64, 64};
  const Model d = build_model(c, 0);
  std::size_t table_entries = 0;
  for (const Parameter* p : d.parameters()) {
    if (p->group == ParamGroup::table) table_entries += p->values.size();
  }
  EXPECT_EQ(table_entries, 8192u);
}

TEST(Model, IdentityTransformFeedsRawCoordinates) {
  ModelConfig c = image_config(ModelKind::rhino_diner);
  c.transform = TransformKind::identity;
  const Model m = build_model(c, 2);
  const Matrix x = grid_points(5, 2, 8);
  EXPECT_EQ(m.trunk_inputs(x).rightCols(2), x);
}

TEST(Model, FrozenTableReceivesNoGradient) {
  Model m = build_model(image_config(ModelKind::rhino_diner), 3);
  m.set_table_frozen(true);
  m.forward(grid_points(10, 2, 1));
  m.backward(Matrix::Ones(10, 3));
  for (const Parameter* p : m.parameters()) {
    if (p->group != ParamGroup::table) continue;
    for (double g : p->grads) EXPECT_EQ(g, 0.0);
  }
}

TEST(Model, ParameterNamesAreUnique) {
  for (auto k : kAllKinds) {
    const Model m = build_model(image_config(k), 0);
    std::set<std::string> names;
    for (const Parameter* p : m.parameters()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  }
}

TEST(Model, BlockedPredictionMatchesSinglePass) {
  const Model m = build_model(image_config(ModelKind::rhino_ngp), 6);
  const Matrix x = grid_points(1000, 2, 9);
  EXPECT_NEAR((m.predict(x, 97) - m.predict(x, 5000)).cwiseAbs().maxCoeff(), 0.0, 1e-13);
}

TEST(Model, SameSeedSameParameters) {
  for (auto k : kAllKinds) {
    const Model a = build_model(image_config(k), 21), b = build_model(image_config(k), 21);
    const auto pa = a.parameters(), pb = b.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->values, pb[i]->values);
  }
}

TEST(Model, RejectsBadConfigAndInputs) {
  ModelConfig c = image_config(ModelKind::diner);
  c.table_resolution = {9};
  EXPECT_THROW(build_model(c, 0), ConfigError);
  c = image_config(ModelKind::pe_mlp);
  c.hidden_width = 0;
  EXPECT_THROW(build_model(c, 0), ConfigError);
  c.hidden_width = 8;
  c.d_in = 4;
  EXPECT_THROW(build_model(c, 0), ConfigError);
  Model m = build_model(image_config(ModelKind::ngp), 0);
  EXPECT_THROW(m.predict(Matrix::Constant(1, 2, 1.5)), DomainError);
  EXPECT_THROW(m.predict(Matrix::Constant(1, 3, 0.5)), ConfigError);
  EXPECT_THROW(m.backward(Matrix::Ones(1, 3)), UsageError);
}

// A band-limited coordinate branch varies slowly: its finite-difference
// Jacobian is bounded by what the low encoding bands allow, while a wide-band
// branch at the same init is much steeper on average.
TEST(TransformNet, LowBandIsSmootherThanHighBand) {
  const auto mean_slope = [](std::size_t freqs) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      TransformNet t(2, TransformKind::mlp, freqs, 32);
      std::mt19937_64 rng(seed);
      detail::init_relu_mlp(t.mlp(), rng);
      const Matrix x = grid_points(200, 2, seed + 100);
      const double h = 1e-6;
      Matrix xp = x;
      xp.col(0).array() += h;
      total += ((t.infer(xp) - t.infer(x)) / h).rowwise().norm().mean();
    }
    return total / 5.0;
  };
  EXPECT_LT(mean_slope(2) * 10.0, mean_slope(10));
}
