#ifndef PALAB_FORECAST_HPP
#define PALAB_FORECAST_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "palab/game.hpp"

namespace palab {

// A forecast-measurable event: its truth value depends only on the forecast
// handed to the agent, never on realized states or actions.  Bias is audited
// per event as alpha(E) = (1/T) * ||sum_t E(pi_t) (pi_t - y_t)||_1.
struct Event {
  std::string id;
  std::function<bool(const Forecast&)> predicate;
};

// Discretized forecast support: every probability vector over num_states
// whose entries are multiples of 1/resolution.  For two states the cells are
// ((m-k)/m, k/m) in ascending k, so index m/2 is the fair coin when m is even.
class ForecastGrid {
 public:
  ForecastGrid(int num_states, int resolution);

  int num_states() const { return num_states_; }
  int resolution() const { return resolution_; }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  const Forecast& cell(int index) const { return cells_.at(index); }
  const std::vector<Forecast>& cells() const { return cells_; }

  // Index of the cell equal to pi (entries must be multiples of
  // 1/resolution within 1e-9); throws std::domain_error otherwise.
  int cell_index(const Forecast& pi) const;

  // Integer representation resolution*cell, used for exact bookkeeping.
  const std::vector<std::int64_t>& scaled_cell(int index) const {
    return scaled_.at(index);
  }

 private:
  int num_states_;
  int resolution_;
  std::vector<Forecast> cells_;
  std::vector<std::vector<std::int64_t>> scaled_;
  std::map<std::vector<std::int64_t>, int> index_;
};

// Per-cell calibration bookkeeping.  Counts and outcome tallies are integers,
// so the error vector e_g = n_g * g - (outcome histogram) is exact: it is
// stored scaled by the grid resolution.
class CalibrationLedger {
 public:
  explicit CalibrationLedger(const ForecastGrid& grid);

  void record(int cell, int realized_state);

  std::int64_t rounds() const { return rounds_; }
  std::int64_t count(int cell) const { return count_.at(cell); }
  // resolution * sum_{t: cell_t = cell} (g - delta_{y_t}), exact integers.
  std::vector<std::int64_t> scaled_error(int cell) const;
  // ||e_g||_1 for a cell, in probability units.
  double error_l1(int cell) const;
  // Phi = sum_g ||e_g||_2^2, the approachability potential.
  double potential() const;

  const ForecastGrid& grid() const { return *grid_; }

 private:
  const ForecastGrid* grid_;
  std::int64_t rounds_ = 0;
  std::vector<std::int64_t> count_;
  std::vector<std::vector<std::int64_t>> outcome_;  // [cell][state] tallies
};

// Per-event bias bookkeeping, scaled by the grid resolution so that the
// incremental ledger and a from-scratch recomputation agree exactly.
class BiasLedger {
 public:
  BiasLedger(const ForecastGrid& grid, int num_events);

  void record(const std::vector<int>& active_events, int cell,
              int realized_state);

  std::int64_t rounds() const { return rounds_; }
  std::int64_t activations(int event) const { return n_.at(event); }
  const std::vector<std::int64_t>& scaled_bias(int event) const {
    return scaled_b_.at(event);
  }
  // ||b_E||_1 in probability units.
  double bias_l1(int event) const;
  double alpha(int event) const;  // bias_l1 / rounds (0 when no rounds)

  const ForecastGrid& grid() const { return *grid_; }

 private:
  const ForecastGrid* grid_;
  std::int64_t rounds_ = 0;
  std::vector<std::int64_t> n_;
  std::vector<std::vector<std::int64_t>> scaled_b_;
};

// A randomized forecast: a distribution over grid cells with support at most
// num_states + 1, plus the attained minimax value max_y sum_g q_g L[g][y].
struct MixedForecast {
  std::vector<int> cells;
  std::vector<double> weights;
  double value = 0.0;
};

// Solve min over distributions q of max_y sum_g q_g * loss[g][y].  Exact for
// two states (best single cell or best equalizing pair); fictitious play with
// a Caratheodory support-reduction step otherwise.
MixedForecast minimax_mix(const std::vector<std::vector<double>>& loss,
                          int num_states);

// Shared skeleton: step() computes per-cell losses, solves the per-round
// minimax, samples a cell, and remembers it until observe() charges the
// realized state to the ledgers.  Consumes only past states, never actions.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  const Forecast& step();
  void observe(int realized_state);

  const ForecastGrid& grid() const { return grid_; }
  int last_cell() const;
  const MixedForecast& last_mix() const { return mix_; }

 protected:
  Forecaster(ForecastGrid grid, std::uint64_t seed, std::uint64_t stream);

  virtual std::vector<std::vector<double>> round_losses() const = 0;
  virtual void charge(int cell, int realized_state) = 0;

  ForecastGrid grid_;

 private:
  std::mt19937_64 rng_;
  MixedForecast mix_;
  int pending_cell_ = -1;
  bool armed_ = false;
};

// Forecaster that minimizes the calibration potential Phi = sum_g ||e_g||^2.
// Per-round loss of forecasting cell g when the state turns out to be y is
// the potential increase 2<e_g, g - delta_y> + ||g - delta_y||^2.
class CalibratedForecaster : public Forecaster {
 public:
  CalibratedForecaster(ForecastGrid grid, std::uint64_t seed,
                       std::uint64_t stream);

  const CalibrationLedger& ledger() const { return ledger_; }

 protected:
  std::vector<std::vector<double>> round_losses() const override;
  void charge(int cell, int realized_state) override;

 private:
  CalibrationLedger ledger_;
};

// Forecaster that drives every declared event's bias vector toward zero:
// the loss of cell g against state y is <B_g, g - delta_y> with
// B_g = sum of b_E over events active at g.  B_g is maintained incrementally
// through the precomputed activation-overlap counts.
class EventForecaster : public Forecaster {
 public:
  // An empty event list falls back to a single always-on event, which makes
  // the forecaster track plain marginal unbiasedness.
  EventForecaster(ForecastGrid grid, std::vector<Event> events,
                  std::uint64_t seed, std::uint64_t stream);

  const BiasLedger& ledger() const { return ledger_; }
  int num_events() const { return static_cast<int>(event_ids_.size()); }
  const std::string& event_id(int event) const { return event_ids_.at(event); }
  bool active_at(int event, int cell) const {
    return activation_[event][cell] != 0;
  }
  // sum_{E active at cell} b_E, scaled by the grid resolution (exact).
  const std::vector<std::int64_t>& scaled_stacked_bias(int cell) const {
    return scaled_stacked_.at(cell);
  }

 protected:
  std::vector<std::vector<double>> round_losses() const override;
  void charge(int cell, int realized_state) override;

 private:
  std::vector<std::string> event_ids_;
  std::vector<std::vector<char>> activation_;      // [event][cell]
  std::vector<std::vector<std::int64_t>> overlap_;  // [cell][cell] counts
  std::vector<std::vector<std::int64_t>> scaled_stacked_;  // [cell][state]
  BiasLedger ledger_;
};

// One audited transcript row: the emitted forecast and the realized state.
struct ForecastRecord {
  Forecast forecast;
  int state = 0;
};

struct BiasRow {
  std::string event_id;
  std::int64_t n_e = 0;
  double alpha = 0.0;
  std::int64_t t = 0;
};

// Recompute alpha(E) for every event from a complete transcript, in
// transcript order (so it matches incremental ledgers exactly on grid
// forecasts).  Rows come back in the order the events were given.
std::vector<BiasRow> audit_bias(const std::vector<ForecastRecord>& transcript,
                                const std::vector<Event>& events);

}  // namespace palab

#endif
