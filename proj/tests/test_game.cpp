#include "game.hpp"

#include <cmath>

#include "doctest.h"
#include "errors.hpp"
#include "game_oracle.hpp"
#include "lp.hpp"
#include "rng.hpp"

using namespace eigenflow;

TEST_CASE("lp: basic solves") {
  // max x+y s.t. x <= 2, y <= 3, x+y <= 4
  Eigen::MatrixXd A(3, 2);
  A << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd b(3), c(2);
  b << 2, 3, 4;
  c << 1, 1;
  const auto res = solve_lp(A, b, c);
  REQUIRE(res.status == LpStatus::optimal);
  CHECK(res.value == doctest::Approx(4.0).epsilon(1e-12));

  // Infeasible: x <= -1.
  Eigen::MatrixXd A2(1, 1);
  A2 << 1;
  CHECK(solve_lp(A2, Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Ones(1)).status ==
        LpStatus::infeasible);

  // Unbounded: maximize x with only -x <= 0.
  Eigen::MatrixXd A3(1, 1);
  A3 << -1;
  CHECK(solve_lp(A3, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)).status ==
        LpStatus::unbounded);

  // Phase-1 path: x >= 1 encoded as -x <= -1, maximize -x.
  Eigen::MatrixXd A4(1, 1);
  A4 << -1;
  const auto r4 = solve_lp(A4, Eigen::VectorXd::Constant(1, -1.0),
                           Eigen::VectorXd::Constant(1, -1.0));
  REQUIRE(r4.status == LpStatus::optimal);
  CHECK(r4.value == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r4.x[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("game: closed-form values") {
  Eigen::MatrixXd pennies(2, 2);
  pennies << 1, -1, -1, 1;
  const auto s = solve_matrix_game(pennies);
  CHECK(s.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.duality_gap <= 1e-9);
  CHECK(s.row_mix[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.col_mix[0] == doctest::Approx(0.5).epsilon(1e-9));

  Eigen::MatrixXd g(2, 2);
  g << 2, 0, 1, 3;
  const auto s2 = solve_matrix_game(g);
  CHECK(s2.value == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(s2.row_mix[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s2.col_mix[0] == doctest::Approx(0.75).epsilon(1e-9));

  // Saddle point in pure strategies.
  Eigen::MatrixXd saddle(2, 2);
  saddle << 3, 5, 1, 2;
  CHECK(solve_matrix_game(saddle).value == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("game: single row and single column") {
  Eigen::MatrixXd row(1, 4);
  row << 0.3, -0.7, 1.2, 0.1;
  const auto s = solve_matrix_game(row);
  CHECK(s.value == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(s.col_mix[1] == doctest::Approx(1.0).epsilon(1e-9));

  Eigen::MatrixXd col(3, 1);
  col << -2, 5, 1;
  CHECK(solve_matrix_game(col).value == doctest::Approx(5.0).epsilon(1e-12));

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 5);
  CHECK(solve_matrix_game(zero).value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("game: duplicated strategies are harmless") {
  Eigen::MatrixXd g(3, 4);
  g << 1, -1, 1, -1,
       1, -1, 1, -1,
       -1, 1, -1, 1;
  const auto s = solve_matrix_game(g);
  CHECK(s.value == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(s.duality_gap <= 1e-9);
}

TEST_CASE("game: random matrices agree with brute force") {
  Rng rng(99);
  for (int trial = 0; trial < 12; ++trial) {
    const int r = 2 + static_cast<int>(rng.word() % 7);   // up to 8 rows
    const int c = 2 + static_cast<int>(rng.word() % 39);  // up to 40 columns
    Eigen::MatrixXd P(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) P(i, j) = 2.0 * rng.unit() - 1.0;
    const auto s = solve_matrix_game(P);
    CHECK(s.duality_gap <= 1e-9);
    const double bf = oracle::game_value_brute_force(P, 6, 1000 + trial);
    CHECK(s.value == doctest::Approx(bf).epsilon(0).scale(1).epsilon(1e-7));
    CHECK(std::abs(s.value - bf) <= 1e-7);
  }
}

TEST_CASE("game: growing the row set never lowers the value") {
  Rng rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    Eigen::MatrixXd P(4, 9);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 9; ++j) P(i, j) = 2.0 * rng.unit() - 1.0;
    const auto base = solve_matrix_game(P.topRows(3));
    const auto grown = solve_matrix_game(P);
    CHECK(grown.value >= base.value - 1e-9);

    // And growing the column set never raises it.
    const auto fewer_cols = solve_matrix_game(P.leftCols(5));
    CHECK(grown.value <= fewer_cols.value + 1e-9);
  }
}
