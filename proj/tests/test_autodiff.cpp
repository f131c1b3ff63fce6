// Copyright 2026 The liptraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "doctest.h"
#include "liptraj/autodiff.hpp"
#include "liptraj/rng.hpp"
#include "test_util.hpp"

using namespace liptraj;
using namespace liptraj::ad;

namespace {

using D = Tensor<double>;

struct Fixture {
  ParamStore<double> params;
  Rng rng{17};

  D& Param(const std::string& name, int rows, int cols, double scale = 1.0) {
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (double& x : v) x = rng.Normal(0.0, scale);
    return params.Add(name, {rows, cols}, std::move(v));
  }
  D Input(int rows, int cols, double scale = 1.0) {
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (double& x : v) x = rng.Normal(0.0, scale);
    return D::Constant({rows, cols}, std::move(v));
  }
  // Scalar loss <out, fixed random weights>, so every output entry matters.
  D Project(Tape<double>& tape, const D& out) {
    Rng local(out.size() * 7919 + static_cast<uint64_t>(out.cols()));
    std::vector<double> w(out.size());
    for (double& x : w) x = local.Normal();
    return Sum(tape, Mul(tape, out, D::Constant(out.shape(), std::move(w))));
  }
  double Check(const std::function<D(Tape<double>&)>& fn) {
    const GradCheckResult r = GradCheck(params, fn);
    CHECK(r.coordinates_checked > 0);
    return r.max_relative_error;
  }
};

constexpr double kTol = 1e-4;

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("elementwise and matrix primitives pass the gradient check") {
    Fixture f;
    const D& a = f.Param("a", 3, 4);
    const D& b = f.Param("b", 4, 2);
    const D& c = f.Param("c", 3, 4);
    const D& bias = f.Param("bias", 1, 4);
    const D& y = f.Param("y", 2, 4);
    const D& g = f.Param("g", 3, 2);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, MatMul(t, a, b)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Add(t, a, c)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Mul(t, a, c)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Scale(t, a, -2.5)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, AddBias(t, a, bias)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) {
      return f.Project(t, AddGroupBroadcast(t, Reshape(t, Add(t, a, c), 6, 2), g, 2));
    }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, ConcatCols(t, {a, c, MatMul(t, a, b)})); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, ConcatRows(t, {a, c, y})); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, SliceCols(t, a, 1, 2)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, SliceRows(t, a, 1, 2)); }) < kTol);
    const std::vector<int> idx{2, -1, 0, 2};
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, GatherRows(t, a, idx)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Embedding(t, a, idx)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Tanh(t, a)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Sigmoid(t, a)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Relu(t, a)); }) < kTol);
    const std::vector<int> lengths{4, 2, 3};
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Softmax(t, a, lengths)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) {
      Rng r(5);
      return f.Project(t, Dropout(t, a, 0.3, r, true));
    }) < kTol);
  }

  TEST_CASE("sequence primitives pass the gradient check") {
    Fixture f;
    const SeqLayout layout{2, 5, {5, 3}, false};
    const D& x = f.Param("x", 10, 3);
    const D& w = f.Param("w", 5 * 3, 4, 0.5);
    const D& cb = f.Param("cb", 1, 4);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Conv1d(t, x, w, cb, layout)); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, Conv1d(t, x, w, D(), layout)); }) < kTol);

    const D& gamma = f.Param("gamma", 1, 3);
    const D& beta = f.Param("beta", 1, 3);
    D& mean = f.params.Add("mean", {1, 3}, {0.1, -0.2, 0.3}, false);
    D& var = f.params.Add("var", {1, 3}, {1.5, 0.5, 2.0}, false);
    CHECK(f.Check([&](Tape<double>& t) {
      return f.Project(t, BatchNorm(t, x, gamma, beta, mean, var, layout, true));
    }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) {
      return f.Project(t, BatchNorm(t, x, gamma, beta, mean, var, layout, false));
    }) < kTol);

    const D& mem = f.Param("mem", 10, 3);
    const D& align = f.Param("align", 2, 5);
    CHECK(f.Check([&](Tape<double>& t) { return f.Project(t, GroupMatVec(t, align, mem)); }) < kTol);
  }

  TEST_CASE("lstm cell passes the gradient check, masked rows included") {
    Fixture f;
    const D& x = f.Param("x", 3, 4);
    const D& h = f.Param("h", 3, 5);
    const D& c = f.Param("c", 3, 5);
    const D& w = f.Param("w", 9, 20, 0.4);
    const D& b = f.Param("b", 1, 20, 0.4);
    const std::vector<uint8_t> mask{1, 0, 1};
    CHECK(f.Check([&](Tape<double>& t) {
      const auto out = LstmCell(t, x, h, c, w, b, mask);
      return Add(t, f.Project(t, out.h), f.Project(t, out.c));
    }) < kTol);
    Tape<double> tape(false);
    const auto out = LstmCell(tape, x, h, c, w, b, mask);
    for (int j = 0; j < 5; ++j) {
      CHECK(out.h.at(1, j) == h.at(1, j));
      CHECK(out.c.at(1, j) == c.at(1, j));
    }
  }

  TEST_CASE("losses pass the gradient check") {
    Fixture f;
    const D& p = f.Param("p", 4, 3, 2.0);
    const D target = f.Input(4, 3);
    const D bits = D::Constant({4, 3}, {1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 0, 1});
    const std::vector<uint8_t> mask{1, 0, 1, 1};
    CHECK(f.Check([&](Tape<double>& t) { return SmoothL1Loss(t, p, target, mask, 1.0); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return MseLoss(t, p, target, mask); }) < kTol);
    CHECK(f.Check([&](Tape<double>& t) { return BceWithLogitsLoss(t, p, bits, {}); }) < kTol);
    Tape<double> tape;
    const std::vector<uint8_t> none(4, 0);
    test::CheckError(ErrorKind::kContract, [&] { SmoothL1Loss(tape, p, target, none, 1.0); });
  }

  TEST_CASE("quadratic loss is checked to rounding") {
    Fixture f;
    const D& w = f.Param("w", 3, 3);
    const GradCheckResult r = GradCheck(f.params, [&](Tape<double>& t) { return Scale(t, Sum(t, Mul(t, w, w)), 0.5); });
    CHECK(r.max_relative_error < 1e-9);
  }

  TEST_CASE("forward values") {
    Tape<double> tape(false);
    const D x = D::Constant({2, 4}, {3, 3, 3, 3, -1, 0, 1, 2});
    const D s = Softmax(tape, x);
    for (int j = 0; j < 4; ++j) CHECK(s.at(0, j) == doctest::Approx(0.25));
    double row = 0;
    for (int j = 0; j < 4; ++j) row += s.at(1, j);
    CHECK(std::abs(row - 1.0) < 1e-12);
    const std::vector<int> lengths{2, 3};
    const D m = Softmax(tape, x, lengths);
    CHECK(m.at(0, 2) == 0.0);
    CHECK(m.at(0, 0) == doctest::Approx(0.5));
    CHECK(m.at(1, 3) == 0.0);
    CHECK(Sigmoid(tape, D::Constant({1, 1}, {0.0})).item() == 0.5);

    Rng rng(3);
    const D same = Dropout(tape, x, 0.5, rng, false);
    CHECK(std::equal(same.value().begin(), same.value().end(), x.value().begin()));
    Rng r1(8), r2(8);
    const D d1 = Dropout(tape, x, 0.5, r1, true), d2 = Dropout(tape, x, 0.5, r2, true);
    CHECK(std::equal(d1.value().begin(), d1.value().end(), d2.value().begin()));
  }

  TEST_CASE("convolution matches a direct sum") {
    Rng rng(4);
    const int batch = 2, time = 6, cin = 3, cout = 2, k = 5;
    const SeqLayout layout{batch, time, {6, 4}, true};
    std::vector<double> xv(static_cast<size_t>(batch * time * cin)), wv(static_cast<size_t>(k * cin * cout)), bv{0.5, -0.25};
    for (double& v : xv) v = rng.Normal();
    for (double& v : wv) v = rng.Normal();
    Tape<double> tape(false);
    const D x = D::Constant({batch * time, cin}, xv), w = D::Constant({k * cin, cout}, wv), b = D::Constant({1, cout}, bv);
    const D y = Conv1d(tape, x, w, b, layout);
    for (int s = 0; s < batch; ++s) {
      for (int t = 0; t < time; ++t) {
        for (int o = 0; o < cout; ++o) {
          double expect = 0.0;
          if (layout.Valid(s, t)) {
            expect = bv[static_cast<size_t>(o)];
            for (int j = 0; j < k; ++j) {
              const int src = t + j - k / 2;
              if (src < 0 || src >= layout.lengths[static_cast<size_t>(s)]) continue;
              for (int c = 0; c < cin; ++c) {
                expect += xv[static_cast<size_t>(layout.Row(s, src) * cin + c)] * wv[static_cast<size_t>((j * cin + c) * cout + o)];
              }
            }
          }
          CHECK(y.at(layout.Row(s, t), o) == doctest::Approx(expect).epsilon(1e-12));
        }
      }
    }
    // Averaging kernel over a constant signal keeps the interior constant.
    const SeqLayout one{1, 5, {5}, false};
    const D flat = D::Constant({5, 1}, {2, 2, 2, 2, 2});
    const D avg = Conv1d(tape, flat, D::Constant({3, 1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}), D(), one);
    for (int t = 1; t < 4; ++t) CHECK(avg.at(t, 0) == doctest::Approx(2.0));
  }

  TEST_CASE("batchnorm running statistics") {
    ParamStore<double> ps;
    const D gamma = ps.Add("g", {1, 1}, {1.0});
    const D beta = ps.Add("b", {1, 1}, {0.0});
    D& mean = ps.Add("m", {1, 1}, {0.0}, false);
    D& var = ps.Add("v", {1, 1}, {1.0}, false);
    const SeqLayout layout{1, 4, {3}, false};
    const D x = D::Constant({4, 1}, {1, 2, 3, 100});
    Tape<double> tape(false);
    const D y = BatchNorm(tape, x, gamma, beta, mean, var, layout, true);
    CHECK(mean.at(0, 0) == doctest::Approx(0.2));
    CHECK(var.at(0, 0) == doctest::Approx(0.9 + 0.1 * 1.0));
    CHECK(y.at(1, 0) == doctest::Approx(0.0));
    const D e = BatchNorm(tape, x, gamma, beta, mean, var, layout, false);
    CHECK(e.at(0, 0) == doctest::Approx((1 - 0.2) / std::sqrt(1.0 + 1e-5)));
    CHECK(mean.at(0, 0) == doctest::Approx(0.2));
  }

  TEST_CASE("backward contracts") {
    ParamStore<double> ps;
    const D w = ps.Add("w", {1, 2}, {1.0, 2.0});
    const D u = ps.Add("u", {2, 2}, {1, 2, 3, 4});
    {
      Tape<double> t;
      t.Backward(Sum(t, u));
      for (const double g : u.grad()) CHECK(g == 1.0);
    }
    ps.ZeroGrad();
    {
      Tape<double> t;
      t.Backward(Scale(t, Sum(t, Mul(t, w, w)), 0.5));
      CHECK(w.grad()[0] == 1.0);
      CHECK(w.grad()[1] == 2.0);
      CHECK(u.grad().empty());
      CHECK(t.size() == 0);
    }
    {
      Tape<double> t;
      const D sq = Mul(t, w, w);
      test::CheckError(ErrorKind::kContract, [&] { t.Backward(sq); });
    }
    ps.ZeroGrad();
    ps.SetFrozen("w", true);
    {
      Tape<double> t;
      t.Backward(Add(t, Sum(t, w), Sum(t, u)));
      CHECK(w.grad().empty());
      CHECK_FALSE(u.grad().empty());
    }
    CHECK(ps.IsFrozen("w"));
    CHECK(ps.FrozenPrefixes() == std::vector<std::string>{"w"});
  }

  TEST_CASE("shape errors name the primitive") {
    Tape<double> t;
    const D a = D::Zeros({2, 3}), b = D::Zeros({2, 3});
    const std::string what = test::CheckError(ErrorKind::kShape, [&] { MatMul(t, a, b); });
    CHECK(what.find("matmul") != std::string::npos);
    test::CheckError(ErrorKind::kShape, [&] { Add(t, a, D::Zeros({3, 2})); });
    Rng rng(1);
    test::CheckError(ErrorKind::kContract, [&] { Dropout(t, a, 1.0, rng, true); });
  }

  TEST_CASE("float and double stores convert") {
    ParamStore<double> ps;
    ps.Add("a", {1, 2}, {0.5, -1.25});
    ps.Add("buf", {1, 1}, {3.0}, false);
    const ParamStore<float> fs = CastParams<float>(ps);
    CHECK(fs.Get("a").at(0, 1) == -1.25f);
    CHECK_FALSE(fs.Entry("buf").trainable);
    CHECK(fs.ParameterCount() == ps.ParameterCount());
  }
}
