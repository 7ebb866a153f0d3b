#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "palab/forecast.hpp"
#include "palab/game.hpp"
#include "palab/rng.hpp"

using namespace palab;

namespace {

// Two-action contract game with state-independent outcomes, so the preferred
// benchmark and its optimistic response are the same under every forecast:
// exactly one of the four declared (policy, response) events fires each round.
LinearContractGame flat_outcome_game() {
  return LinearContractGame({}, {0.25, 0.5}, {1.0, 2.0}, {{0, 0}, {1, 1}},
                            {0.25, 0.5});
}

// Indicator events "benchmark p is principal-preferred AND its optimistic
// best response is a", one per (p, a) pair.  The game must outlive them.
std::vector<Event> declared_pair_events(const LinearContractGame& g) {
  std::vector<Event> evs;
  for (int p = 0; p < 2; ++p) {
    for (int a = 0; a < 2; ++a) {
      std::string id = "E4:p" + std::to_string(p) + ":a" + std::to_string(a);
      evs.push_back(Event{id, [&g, p, a](const Forecast& pi) {
                            if (principal_best_policy_index(g, pi) != p)
                              return false;
                            return optimistic_best_response(
                                       g, g.benchmarks()[p], pi, 0.0) == a;
                          }});
    }
  }
  return evs;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= x.size();
  ym /= y.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  return num / den;
}

}  // namespace

TEST_CASE("forecast grid enumerates simplex cells") {
  ForecastGrid g2(2, 32);
  REQUIRE(g2.num_cells() == 33);
  CHECK(g2.cell(0) == Forecast{1.0, 0.0});
  CHECK(g2.cell(32) == Forecast{0.0, 1.0});
  CHECK(g2.cell(16)[0] == 0.5);
  for (int k = 0; k <= 32; ++k) {
    CHECK(g2.cell(k)[1] == doctest::Approx(k / 32.0).epsilon(1e-15));
    CHECK(g2.cell_index(g2.cell(k)) == k);
  }
  CHECK_THROWS_AS(g2.cell_index(Forecast{0.3, 0.7}), std::domain_error);
  CHECK_THROWS_AS(g2.cell_index(Forecast{1.0}), std::domain_error);

  ForecastGrid g3(3, 4);
  REQUIRE(g3.num_cells() == 15);  // C(6,2)
  CHECK(g3.cell(0) == Forecast{1.0, 0.0, 0.0});
  for (int i = 0; i < g3.num_cells(); ++i) {
    double s = 0.0;
    for (double v : g3.cell(i)) {
      s += v;
      CHECK(std::fabs(v * 4.0 - std::llround(v * 4.0)) < 1e-12);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g3.cell_index(g3.cell(i)) == i);
  }

  CHECK_THROWS_AS(ForecastGrid(2, 0), std::invalid_argument);
  CHECK_THROWS_AS(ForecastGrid(6, 64), std::invalid_argument);
}

TEST_CASE("bias ledger matches hand arithmetic") {
  ForecastGrid grid(2, 2);
  int mid = grid.cell_index(Forecast{0.5, 0.5});
  BiasLedger ledger(grid, 2);

  ledger.record({0}, mid, 0);
  CHECK(ledger.scaled_bias(0) == std::vector<std::int64_t>{-1, 1});
  CHECK(ledger.bias_l1(0) == 1.0);
  CHECK(ledger.scaled_bias(1) == std::vector<std::int64_t>{0, 0});
  CHECK(ledger.activations(0) == 1);
  CHECK(ledger.activations(1) == 0);

  ledger.record({0}, mid, 1);
  ledger.record({0}, mid, 0);
  CHECK(ledger.rounds() == 3);
  CHECK(ledger.scaled_bias(0) == std::vector<std::int64_t>{-1, 1});
  CHECK(ledger.alpha(0) == 1.0 / 3.0);
  CHECK(ledger.alpha(1) == 0.0);

  // The from-scratch audit of the same three rounds agrees exactly.
  std::vector<ForecastRecord> transcript = {
      {Forecast{0.5, 0.5}, 0}, {Forecast{0.5, 0.5}, 1}, {Forecast{0.5, 0.5}, 0}};
  std::vector<Event> events = {
      Event{"always", [](const Forecast&) { return true; }},
      Event{"never", [](const Forecast&) { return false; }}};
  std::vector<BiasRow> rows = audit_bias(transcript, events);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].event_id == "always");
  CHECK(rows[0].alpha == 1.0 / 3.0);
  CHECK(rows[0].n_e == 3);
  CHECK(rows[0].t == 3);
  CHECK(rows[1].alpha == 0.0);
  CHECK(rows[1].n_e == 0);
}

TEST_CASE("prescient forecasts have zero bias") {
  ForecastGrid grid(2, 32);
  std::mt19937_64 rng = make_stream(3, 0);
  std::vector<ForecastRecord> transcript;
  for (int t = 0; t < 200; ++t) {
    int y = uniform01(rng) < 0.5 ? 0 : 1;
    transcript.push_back({grid.cell(y == 0 ? 0 : 32), y});
  }
  std::vector<Event> events = {
      Event{"always", [](const Forecast&) { return true; }},
      Event{"upper", [](const Forecast& pi) { return pi[1] >= 0.5; }}};
  for (const BiasRow& row : audit_bias(transcript, events))
    CHECK(row.alpha == 0.0);
}

TEST_CASE("first rounds are deterministic and misuse throws") {
  CalibratedForecaster cal(ForecastGrid(2, 32), 1, 2);
  const Forecast& pi = cal.step();
  CHECK(pi == Forecast{0.5, 0.5});
  CHECK(cal.last_cell() == 16);
  CHECK_THROWS_AS(cal.step(), std::logic_error);
  cal.observe(0);
  CHECK_THROWS_AS(cal.observe(0), std::logic_error);
  CHECK(cal.ledger().count(16) == 1);
  CHECK(cal.ledger().rounds() == 1);
  // After one round the realized bias is at most the simplex diameter.
  CHECK(cal.ledger().error_l1(16) <= 2.0);

  EventForecaster ev(ForecastGrid(2, 32), {}, 1, 3);
  CHECK(ev.num_events() == 1);
  CHECK(ev.event_id(0) == "E:always");
  CHECK_THROWS_AS(ev.observe(0), std::logic_error);
  ev.step();
  CHECK(ev.last_cell() == 0);
  CHECK(static_cast<int>(ev.last_mix().cells.size()) <= 3);
}

TEST_CASE("calibrated forecaster converges on a constant stream") {
  CalibratedForecaster cal(ForecastGrid(2, 32), 5, 0);
  const int kRounds = 10000;
  double mean_state0 = 0.0;
  for (int t = 0; t < kRounds; ++t) {
    const Forecast& pi = cal.step();
    CHECK(cal.last_mix().cells.size() <= 3);
    mean_state0 += pi[0];
    cal.observe(0);
  }
  mean_state0 /= kRounds;
  CHECK(mean_state0 >= 0.95);
  std::int64_t total = 0;
  for (int g = 0; g < cal.grid().num_cells(); ++g) total += cal.ledger().count(g);
  CHECK(total == kRounds);
}

TEST_CASE("calibrated forecaster is calibrated on a fair coin") {
  ForecastGrid grid(2, 32);
  CalibratedForecaster cal(grid, 9, 1);
  std::mt19937_64 states = make_stream(9, 100);
  const int kRounds = 100000;
  std::vector<ForecastRecord> transcript;
  transcript.reserve(kRounds);
  for (int t = 0; t < kRounds; ++t) {
    Forecast pi = cal.step();
    int y = uniform01(states) < 0.5 ? 1 : 0;
    cal.observe(y);
    transcript.push_back({std::move(pi), y});
  }
  double budget = 5.0 * 32.0 / std::sqrt(static_cast<double>(kRounds));
  std::int64_t total = 0;
  for (int g = 0; g < grid.num_cells(); ++g) {
    CHECK(cal.ledger().error_l1(g) / kRounds <= budget);
    total += cal.ledger().count(g);
  }
  CHECK(total == kRounds);

  // Calibration dominates the bias of any forecast-measurable event: alpha(E)
  // is at most the summed per-cell calibration error over E's cells.
  std::vector<Event> events;
  for (double c : {0.1, 0.3, 0.5, 0.7, 0.9})
    events.push_back(Event{"thr", [c](const Forecast& pi) { return pi[1] >= c; }});
  std::vector<BiasRow> rows = audit_bias(transcript, events);
  for (std::size_t e = 0; e < events.size(); ++e) {
    double covered = 0.0;
    for (int g = 0; g < grid.num_cells(); ++g)
      if (events[e].predicate(grid.cell(g)))
        covered += cal.ledger().error_l1(g) / kRounds;
    CHECK(rows[e].alpha <= covered + 1e-12);
  }
}

TEST_CASE("event forecaster beats an adversarial state stream") {
  EventForecaster ev(ForecastGrid(2, 32), {}, 7, 0);
  const int kRounds = 10000;
  for (int t = 0; t < kRounds; ++t) {
    const Forecast& pi = ev.step();
    CHECK(ev.last_mix().cells.size() <= 3);
    int y = pi[1] < pi[0] ? 1 : 0;  // realize the less-predicted state
    ev.observe(y);
  }
  CHECK(ev.ledger().alpha(0) <= 0.05);
  CHECK(ev.ledger().bias_l1(0) <= 2.0 * ev.ledger().activations(0));
}

TEST_CASE("declared context events stay unbiased and decay") {
  LinearContractGame game = flat_outcome_game();
  std::vector<Event> events = declared_pair_events(game);
  ForecastGrid grid(2, 32);
  EventForecaster ev(grid, events, 17, 4);
  std::mt19937_64 states = make_stream(21, 3);
  double a14 = 0.0;
  const int kT14 = 1 << 14;
  const int kT16 = 1 << 16;
  for (int t = 1; t <= kT16; ++t) {
    ev.step();
    ev.observe(uniform01(states) < 0.5 ? 1 : 0);
    if (t == kT14) {
      for (int e = 0; e < ev.num_events(); ++e)
        a14 = std::max(a14, ev.ledger().alpha(e));
    }
  }
  double a16 = 0.0;
  for (int e = 0; e < ev.num_events(); ++e)
    a16 = std::max(a16, ev.ledger().alpha(e));
  // The flat-outcome game always prefers benchmark 0 with optimistic
  // response 1, so exactly that event fires every round.
  CHECK(ev.ledger().activations(1) == kT16);  // E4:p0:a1
  CHECK(ev.ledger().activations(0) == 0);
  CHECK(ev.ledger().activations(2) == 0);
  CHECK(ev.ledger().activations(3) == 0);
  CHECK(a14 > 0.0);
  CHECK(a16 <= 2.0 * a14 * std::pow(0.25, 0.35));
  for (int e = 0; e < ev.num_events(); ++e)
    CHECK(ev.ledger().bias_l1(e) <= 2.0 * ev.ledger().activations(e));
}

TEST_CASE("per-cell bias meets the scale budget and equals ledger errors") {
  ForecastGrid grid(2, 32);
  CalibratedForecaster cal(grid, 13, 2);
  std::mt19937_64 states = make_stream(13, 50);
  const int kRounds = 1 << 14;
  std::vector<ForecastRecord> transcript;
  transcript.reserve(kRounds);
  for (int t = 0; t < kRounds; ++t) {
    Forecast pi = cal.step();
    int y = uniform01(states) < 0.5 ? 1 : 0;
    cal.observe(y);
    transcript.push_back({std::move(pi), y});
  }
  std::vector<Event> events;
  for (int k = 0; k < grid.num_cells(); ++k) {
    events.push_back(Event{"cell:" + std::to_string(k),
                           [&grid, k](const Forecast& pi) {
                             return grid.cell_index(pi) == k;
                           }});
  }
  std::vector<BiasRow> rows = audit_bias(transcript, events);
  double worst = 0.0;
  for (int k = 0; k < grid.num_cells(); ++k) {
    // A cell indicator's bias vector IS that cell's calibration error, and
    // with a power-of-two resolution both paths are exact in doubles.
    CHECK(rows[k].alpha == cal.ledger().error_l1(k) / kRounds);
    CHECK(rows[k].n_e == cal.ledger().count(k));
    worst = std::max(worst, rows[k].alpha);
  }
  CHECK(worst <= 3.0 * 2.0 / std::sqrt(static_cast<double>(kRounds)));
}

TEST_CASE("adversarial event bias grows sublinearly") {
  // The realize-the-less-predicted-state adversary is cancelled exactly (the
  // cumulative bias cycles through zero), so this stream instead picks the
  // state that maximizes the worst per-event bias after the round.
  LinearContractGame game = flat_outcome_game();
  std::vector<Event> events = {
      Event{"always", [](const Forecast&) { return true; }}};
  for (Event& e : declared_pair_events(game)) events.push_back(std::move(e));
  EventForecaster ev(ForecastGrid(2, 32), events, 29, 0);
  std::vector<double> log_t, log_bias;
  const int kT16 = 1 << 16;
  for (int t = 1; t <= kT16; ++t) {
    const Forecast& pi = ev.step();
    int cell = ev.last_cell();
    double best_damage = -1.0;
    int y_pick = 0;
    for (int y = 0; y < 2; ++y) {
      double damage = 0.0;
      for (int e = 0; e < ev.num_events(); ++e) {
        double b0 = ev.ledger().scaled_bias(e)[0] / 32.0;
        double b1 = ev.ledger().scaled_bias(e)[1] / 32.0;
        if (ev.active_at(e, cell)) {
          b0 += pi[0] - (y == 0 ? 1.0 : 0.0);
          b1 += pi[1] - (y == 1 ? 1.0 : 0.0);
        }
        damage = std::max(damage, std::fabs(b0) + std::fabs(b1));
      }
      if (damage > best_damage) {
        best_damage = damage;
        y_pick = y;
      }
    }
    ev.observe(y_pick);
    if (t == (1 << 10) || t == (1 << 12) || t == (1 << 14) || t == kT16) {
      double worst = 0.0;
      for (int e = 0; e < ev.num_events(); ++e)
        worst = std::max(worst, ev.ledger().bias_l1(e));
      REQUIRE(worst > 0.0);
      log_t.push_back(std::log(static_cast<double>(t)));
      log_bias.push_back(std::log(worst));
    }
  }
  CHECK(fit_slope(log_t, log_bias) <= 0.75);
}

TEST_CASE("incremental ledgers equal recomputation exactly") {
  LinearContractGame game = flat_outcome_game();
  ForecastGrid grid(2, 12);  // non-dyadic resolution stresses the int path
  std::vector<Event> events = {
      Event{"always", [](const Forecast&) { return true; }}};
  for (Event& e : declared_pair_events(game)) events.push_back(std::move(e));
  for (double c : {0.25, 0.5, 0.75})
    events.push_back(
        Event{"thr:" + std::to_string(c),
              [c](const Forecast& pi) { return pi[1] >= c; }});
  EventForecaster ev(grid, events, 31, 5);
  std::mt19937_64 states = make_stream(31, 9);
  std::vector<std::pair<int, int>> history;  // (cell, state)
  std::vector<ForecastRecord> transcript;
  for (int t = 0; t < 500; ++t) {
    Forecast pi = ev.step();
    int cell = ev.last_cell();
    int y = uniform01(states) < 0.3 ? 1 : 0;
    ev.observe(y);
    history.push_back({cell, y});
    transcript.push_back({std::move(pi), y});
  }
  std::vector<BiasRow> rows = audit_bias(transcript, events);
  for (int e = 0; e < ev.num_events(); ++e) {
    std::vector<std::int64_t> b(2, 0);
    std::int64_t n = 0;
    for (const auto& [cell, y] : history) {
      if (!events[e].predicate(grid.cell(cell))) continue;
      ++n;
      for (int yy = 0; yy < 2; ++yy)
        b[yy] += grid.scaled_cell(cell)[yy] - (yy == y ? 12 : 0);
    }
    CHECK(ev.ledger().scaled_bias(e) == b);
    CHECK(ev.ledger().activations(e) == n);
    std::int64_t l1 = std::llabs(b[0]) + std::llabs(b[1]);
    CHECK(l1 <= 2 * 12 * n);
    CHECK(std::fabs(rows[e].alpha - ev.ledger().alpha(e)) <= 1e-12);
  }
  // The stacked per-cell vectors maintained through overlap counts agree
  // with summing the per-event ledgers directly.
  for (int g = 0; g < grid.num_cells(); ++g) {
    std::vector<std::int64_t> stacked(2, 0);
    for (int e = 0; e < ev.num_events(); ++e) {
      if (!ev.active_at(e, g)) continue;
      for (int y = 0; y < 2; ++y) stacked[y] += ev.ledger().scaled_bias(e)[y];
    }
    CHECK(ev.scaled_stacked_bias(g) == stacked);
  }
}

TEST_CASE("minimax mixes are optimal for two states") {
  {
    MixedForecast m = minimax_mix({{1.0, 1.0}}, 2);
    CHECK(m.cells == std::vector<int>{0});
    CHECK(m.value == doctest::Approx(1.0));
  }
  {
    MixedForecast m = minimax_mix({{0.0, 2.0}, {2.0, 0.0}}, 2);
    CHECK(m.cells == std::vector<int>{0, 1});
    CHECK(m.weights[0] == doctest::Approx(0.5));
    CHECK(m.value == doctest::Approx(1.0));
  }
  {
    MixedForecast m = minimax_mix({{0.0, 2.0}, {1.8, 0.0}, {5.0, 5.0}}, 2);
    CHECK(m.cells == std::vector<int>{0, 1});
    CHECK(m.weights[0] == doctest::Approx(9.0 / 19.0));
    CHECK(m.weights[1] == doctest::Approx(10.0 / 19.0));
    CHECK(m.value == doctest::Approx(18.0 / 19.0));
  }
  std::mt19937_64 rng = make_stream(33, 0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<double>> loss(9, std::vector<double>(2));
    for (auto& row : loss)
      for (double& v : row) v = 2.0 * uniform01(rng) - 1.0;
    MixedForecast m = minimax_mix(loss, 2);
    double wsum = 0.0;
    for (double w : m.weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.cells.size() <= 2);
    for (const auto& row : loss)
      CHECK(m.value <= std::max(row[0], row[1]) + 1e-12);
    for (int probe = 0; probe < 50; ++probe) {
      int g = static_cast<int>(uniform01(rng) * 9);
      int h = static_cast<int>(uniform01(rng) * 9);
      double w = uniform01(rng);
      double v0 = w * loss[g][0] + (1.0 - w) * loss[h][0];
      double v1 = w * loss[g][1] + (1.0 - w) * loss[h][1];
      CHECK(m.value <= std::max(v0, v1) + 1e-12);
    }
  }
}

TEST_CASE("minimax mixes stay small and sound for three states") {
  std::mt19937_64 rng = make_stream(35, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> loss(15, std::vector<double>(3));
    double lo = 1e300;
    for (auto& row : loss) {
      for (double& v : row) {
        v = 2.0 * uniform01(rng) - 1.0;
        lo = std::min(lo, v);
      }
    }
    MixedForecast m = minimax_mix(loss, 3);
    CHECK(m.cells.size() <= 4);
    double wsum = 0.0;
    for (double w : m.weights) {
      CHECK(w >= -1e-15);
      wsum += w;
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    double recomputed = -1e300;
    for (int y = 0; y < 3; ++y) {
      double v = 0.0;
      for (std::size_t i = 0; i < m.cells.size(); ++i)
        v += m.weights[i] * loss[m.cells[i]][y];
      recomputed = std::max(recomputed, v);
    }
    CHECK(std::fabs(recomputed - m.value) <= 1e-9);
    double best_single = 1e300;
    for (const auto& row : loss)
      best_single = std::min(best_single,
                             std::max({row[0], row[1], row[2]}));
    CHECK(m.value <= best_single + 1e-12);
    CHECK(m.value >= lo - 1e-12);
  }
}
