#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "../support/finite_difference.hpp"
#include "cegnn/adam.hpp"
#include "cegnn/error.hpp"
#include "cegnn/named_tensors.hpp"
#include "cegnn/ops.hpp"

using namespace cegnn;
using cegnn::testing::central_difference;
using cegnn::testing::random_tensor;
using cegnn::testing::relative_error;
using cegnn::testing::tape_gradient;

namespace {

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

/// Weighted sum with fixed random weights, so every output entry matters.
Tensor probe(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

void check_gradient(Tensor& param, const std::function<Tensor()>& objective) {
  const auto analytic = tape_gradient(param, objective);
  const auto numeric = central_difference(param, [&] { return objective().item(); });
  CHECK(relative_error(analytic, numeric) < 1e-5);
}

}  // namespace

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
}

TEST_CASE("matmul values") {
  const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto b = Tensor::from({2, 2}, {5, 6, 7, 8});
  CHECK(vec(matmul(eye, b).values()) == std::vector<double>{5, 6, 7, 8});
  const auto row = Tensor::from({1, 2}, {1, 2});
  const auto col = Tensor::from({2, 1}, {3, 4});
  CHECK(matmul(row, col).item() == 11.0);
  CHECK_THROWS_AS(matmul(row, row), ShapeError);
}

TEST_CASE("matmul gradient of sum(A.B) at A = I") {
  auto a = Tensor::from({2, 2}, {1, 0, 0, 1}, true);
  const auto b = Tensor::from({2, 2}, {1, 2, 3, 4});
  const auto g = tape_gradient(a, [&] { return sum(matmul(a, b)); });
  CHECK(g == std::vector<double>{3, 7, 3, 7});
}

TEST_CASE("segment_sum") {
  const auto v = Tensor::from({4, 1}, {1, 2, 3, 4});
  const std::vector<std::size_t> ids{0, 0, 1, 1};
  CHECK(vec(segment_sum(v, ids, 2).values()) == std::vector<double>{3, 7});
  const std::vector<std::size_t> same{1, 1, 1, 1};
  CHECK(vec(segment_sum(v, same, 3).values()) == std::vector<double>{0, 10, 0});
  const std::vector<std::size_t> bad{0, 0, 3, 1};
  CHECK_THROWS_AS(segment_sum(v, bad, 3), ShapeError);

  SUBCASE("backward copies the segment gradient to every member row") {
    auto x = Tensor::from({4, 1}, {1, 2, 3, 4}, true);
    const auto w = Tensor::from({2, 1}, {5, -2});
    const auto g = tape_gradient(x, [&] { return probe(segment_sum(x, ids, 2), w); });
    CHECK(g == std::vector<double>{5, 5, -2, -2});
  }
}

TEST_CASE("segment_sum is invariant to permuting rows that share an id") {
  std::mt19937_64 rng(11);
  // Integer-valued rows make any summation order exact, so equality must be bitwise.
  std::vector<double> values(12 * 3);
  for (double& x : values) x = static_cast<double>(std::uniform_int_distribution<int>(-50, 50)(rng));
  std::vector<std::size_t> ids(12);
  for (auto& id : ids) id = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
  const auto base = vec(segment_sum(Tensor::from({12, 3}, values), ids, 4).values());
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> order(12);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> pv(values.size());
    std::vector<std::size_t> pid(12);
    for (std::size_t r = 0; r < 12; ++r) {
      std::copy_n(values.begin() + order[r] * 3, 3, pv.begin() + r * 3);
      pid[r] = ids[order[r]];
    }
    CHECK(vec(segment_sum(Tensor::from({12, 3}, pv), pid, 4).values()) == base);
  }
}

TEST_CASE("batched_outer") {
  CHECK(vec(batched_outer(Tensor::from({1, 2}, {1, 2})).values()) == std::vector<double>{1, 2, 2, 4});
  CHECK(vec(batched_outer(Tensor::zeros({1, 3})).values()) == std::vector<double>(9, 0.0));
  std::mt19937_64 rng(3);
  const auto x = random_tensor({5, 4}, rng, false);
  const auto outer = batched_outer(x);
  const auto out = outer.values();
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(out[n * 16 + i * 4 + j] == out[n * 16 + j * 4 + i]);
}

TEST_CASE("contract3") {
  const auto w = Tensor::from({2, 2, 2}, {1, 0, 0, 0, 0, 0, 0, 1});
  const auto x = Tensor::from({1, 2, 2}, {1, 2, 2, 4});
  CHECK(vec(contract3(w, x).values()) == std::vector<double>{1, 4});
  CHECK(vec(contract3(Tensor::zeros({2, 2, 2}), x).values()) == std::vector<double>{0, 0});
  CHECK_THROWS_AS(contract3(Tensor::zeros({2, 3, 2}), x), ShapeError);

  SUBCASE("gradient matches finite differences on a 2x2x2 instance") {
    std::mt19937_64 rng(5);
    auto wt = random_tensor({2, 2, 2}, rng);
    auto xt = random_tensor({3, 2, 2}, rng);
    const auto probe_w = random_tensor({3, 2}, rng, false);
    auto f = [&] { return probe(contract3(wt, xt), probe_w); };
    for (Tensor* p : {&wt, &xt}) {
      const auto analytic = tape_gradient(*p, f);
      const auto numeric = central_difference(*p, [&] { return f().item(); });
      CHECK(relative_error(analytic, numeric) < 1e-6);
    }
  }
}

TEST_CASE("elementwise, reshape, concat, layer_norm") {
  CHECK(vec(relu(Tensor::from({3}, {-1, 0, 2})).values()) == std::vector<double>{0, 0, 2});
  CHECK(vec(scale(Tensor::from({2}, {1, -2}), 3.0).values()) == std::vector<double>{3, -6});
  const auto a = Tensor::zeros({4, 2});
  const auto b = Tensor::zeros({4, 3});
  CHECK(concat({a, b}).shape() == Shape{4, 5});
  CHECK_THROWS_AS(concat({a, Tensor::zeros({3, 3})}), ShapeError);
  CHECK_THROWS_AS(reshape(a, {3, 3}), ShapeError);
  CHECK_THROWS_AS(add(a, Tensor::zeros({4})), ShapeError);

  const auto bias = Tensor::from({4}, {0.5, -1, 2, 0});
  const auto gain = Tensor::from({4}, {3, 3, 3, 3});
  const auto ln = layer_norm(Tensor::full({1, 4}, 7.0), gain, bias);
  CHECK(vec(ln.values()) == vec(bias.values()));
}

TEST_CASE("non-finite values surface as errors") {
  const auto big = Tensor::from({1, 1}, {1e200});
  CHECK_THROWS_AS(matmul(big, big), NumericError);
  CHECK_THROWS_AS(sqrt(Tensor::from({1}, {-1.0})), NumericError);
}

TEST_CASE("backward basics") {
  auto x = Tensor::from({3}, {1, 2, 3}, true);
  CHECK(tape_gradient(x, [&] { return sum(mul(x, x)); }) == std::vector<double>{2, 4, 6});

  SUBCASE("reshape passes flattened gradients through unchanged") {
    auto m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    const auto w = Tensor::from({3, 2}, {1, -1, 2, -2, 3, -3});
    CHECK(tape_gradient(m, [&] { return probe(reshape(m, {3, 2}), w); }) ==
          std::vector<double>{1, -1, 2, -2, 3, -3});
  }

  SUBCASE("non-scalar loss is rejected") {
    Tape tape;
    Tensor y;
    {
      TapeScope scope(tape);
      y = mul(x, x);
    }
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
  }

  SUBCASE("repeated backward accumulates into leaves") {
    x.zero_grad();
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = sum(mul(x, x));
    }
    tape.backward(loss);
    tape.backward(loss);
    CHECK(vec(x.grad()) == std::vector<double>{4, 8, 12});
  }

  SUBCASE("nothing is recorded without an active tape") {
    const auto y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
}

TEST_CASE("backward of a sum of losses equals the sum of separate backwards") {
  std::mt19937_64 rng(17);
  auto w = random_tensor({3, 3}, rng);
  const auto x = random_tensor({4, 3}, rng, false);
  const auto p1 = random_tensor({4, 3}, rng, false);
  const auto p2 = random_tensor({4, 3}, rng, false);
  auto l1 = [&] { return probe(relu(matmul(x, w)), p1); };
  auto l2 = [&] { return probe(layer_norm(matmul(x, w), Tensor::full({3}, 1.0), Tensor::zeros({3})), p2); };
  const auto g1 = tape_gradient(w, l1);
  const auto g2 = tape_gradient(w, l2);
  const auto g12 = tape_gradient(w, [&] { return add(l1(), l2()); });
  for (std::size_t i = 0; i < g12.size(); ++i) CHECK(g12[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
}

TEST_CASE("every differentiable op matches central differences") {
  std::mt19937_64 rng(23);
  auto a = random_tensor({4, 3}, rng);
  auto b = random_tensor({3, 5}, rng);
  auto v = random_tensor({5}, rng);
  auto c = random_tensor({4, 3}, rng);
  auto gain = random_tensor({3}, rng);
  auto bias = random_tensor({3}, rng);
  auto w3 = random_tensor({2, 3, 3}, rng);
  const auto p43 = random_tensor({4, 3}, rng, false);
  const auto p45 = random_tensor({4, 5}, rng, false);
  const auto p433 = random_tensor({4, 3, 3}, rng, false);
  const auto p42 = random_tensor({4, 2}, rng, false);
  const auto p66 = random_tensor({2, 6}, rng, false);
  const auto p22 = random_tensor({2, 2}, rng, false);
  const std::vector<std::size_t> rows{3, 0, 3, 1, 2};
  const std::vector<std::size_t> seg{1, 0, 1, 1};

  SUBCASE("matmul") {
    for (Tensor* p : {&a, &b}) check_gradient(*p, [&] { return probe(matmul(a, b), p45); });
  }
  SUBCASE("linear") {
    for (Tensor* p : {&a, &b, &v}) check_gradient(*p, [&] { return probe(linear(a, b, v), p45); });
  }
  SUBCASE("add/sub/mul with broadcasting") {
    for (Tensor* p : {&a, &bias}) {
      check_gradient(*p, [&] { return probe(add(a, bias), p43); });
      check_gradient(*p, [&] { return probe(sub(a, bias), p43); });
      check_gradient(*p, [&] { return probe(mul(a, bias), p43); });
    }
    for (Tensor* p : {&a, &c}) check_gradient(*p, [&] { return probe(mul(a, c), p43); });
  }
  SUBCASE("relu and scale") {
    check_gradient(a, [&] { return probe(relu(a), p43); });
    check_gradient(a, [&] { return probe(scale(a, -2.5), p43); });
  }
  SUBCASE("concat and slice_last") {
    for (Tensor* p : {&a, &c}) {
      check_gradient(*p, [&] { return probe(concat({a, c}), reshape(concat({p43, p43}), {4, 6})); });
    }
    check_gradient(a, [&] { return probe(slice_last(a, 1, 2), p42); });
  }
  SUBCASE("layer_norm") {
    for (Tensor* p : {&a, &gain, &bias}) check_gradient(*p, [&] { return probe(layer_norm(a, gain, bias), p43); });
  }
  SUBCASE("gather_rows and segment_sum") {
    const auto p53 = random_tensor({5, 3}, rng, false);
    check_gradient(a, [&] { return probe(gather_rows(a, rows), p53); });
    const auto p23 = random_tensor({2, 3}, rng, false);
    check_gradient(a, [&] { return probe(segment_sum(a, seg, 2), p23); });
  }
  SUBCASE("batched_outer and contract3") {
    check_gradient(a, [&] { return probe(batched_outer(a), p433); });
    auto x3 = random_tensor({4, 3, 3}, rng);
    for (Tensor* p : {&w3, &x3}) check_gradient(*p, [&] { return probe(contract3(w3, x3), p42); });
  }
  SUBCASE("sum and sqrt") {
    auto pos = random_tensor({2, 6}, rng, true, 0.5, 2.0);
    check_gradient(pos, [&] { return probe(sqrt(pos), p66); });
    check_gradient(pos, [&] { return sum(pos); });
    (void)p22;
  }
}

TEST_CASE("adam") {
  SUBCASE("first step moves by lr / (1 + eps)") {
    auto p = Tensor::from({2}, {0.5, -0.5}, true);
    std::vector<Tensor> params{p};
    AdamState state(params, AdamOptions{1e-4});
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = sum(p);  // gradient 1 everywhere
    }
    tape.backward(loss);
    adam_step(state, params);
    CHECK(p.values()[0] == doctest::Approx(0.5 - 1e-4 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(p.values()[1] == doctest::Approx(-0.5 - 1e-4 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(state.step_count() == 1);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = Tensor::from({3}, {1, 2, 3}, true);
    std::vector<Tensor> params{p};
    AdamState state(params);
    adam_step(state, params);
    adam_step(state, params);
    CHECK(vec(p.values()) == std::vector<double>{1, 2, 3});
    CHECK(state.step_count() == 2);
  }
  SUBCASE("default learning rate and moments") {
    AdamOptions options;
    CHECK(options.learning_rate == 1e-4);
    CHECK(options.beta1 == 0.9);
    CHECK(options.beta2 == 0.999);
    CHECK(options.epsilon == 1e-8);
  }
  SUBCASE("length mismatch") {
    std::vector<Tensor> params{Tensor::zeros({2}, true)};
    AdamState state(params);
    std::vector<Tensor> other{Tensor::zeros({3}, true)};
    CHECK_THROWS_AS(adam_step(state, other), ShapeError);
  }
}

TEST_CASE("parameter blob round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cegnn_blob_test";
  std::filesystem::create_directories(dir);
  NamedTensors tensors{{"a.weight", Tensor::from({2, 2}, {1, -2.5, 3e-300, 4})},
                       {"a.bias", Tensor::from({3}, {0.1, 0.2, 0.3})}};
  save_tensors(dir / "p.bin", tensors);
  const auto loaded = load_tensors(dir / "p.bin");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "a.weight");
  CHECK(loaded[0].second.shape() == Shape{2, 2});
  CHECK(vec(loaded[0].second.values()) == vec(tensors[0].second.values()));
  CHECK(vec(loaded[1].second.values()) == vec(tensors[1].second.values()));

  std::filesystem::resize_file(dir / "p.bin", std::filesystem::file_size(dir / "p.bin") - 8);
  CHECK_THROWS_AS(load_tensors(dir / "p.bin"), IoError);
  std::filesystem::remove_all(dir);
}
