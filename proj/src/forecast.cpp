#include "palab/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "palab/rng.hpp"

namespace palab {

namespace {

void enumerate_cells(int states_left, int budget, std::vector<std::int64_t>& cur,
                     std::vector<std::vector<std::int64_t>>& out) {
  if (states_left == 1) {
    cur.push_back(budget);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int k = budget; k >= 0; --k) {
    cur.push_back(k);
    enumerate_cells(states_left - 1, budget - k, cur, out);
    cur.pop_back();
  }
}

}  // namespace

ForecastGrid::ForecastGrid(int num_states, int resolution)
    : num_states_(num_states), resolution_(resolution) {
  if (num_states < 1) throw std::invalid_argument("grid needs >= 1 state");
  if (resolution < 1) throw std::invalid_argument("grid resolution must be >= 1");
  long double expected = 1.0L;  // C(m + ny - 1, ny - 1), checked pre-alloc
  for (int i = 1; i < num_states; ++i)
    expected = expected * (resolution + i) / i;
  if (expected > 200000.0L)
    throw std::invalid_argument("forecast grid too large");
  std::vector<std::int64_t> cur;
  enumerate_cells(num_states, resolution, cur, scaled_);
  cells_.reserve(scaled_.size());
  for (std::size_t i = 0; i < scaled_.size(); ++i) {
    Forecast f(num_states_);
    for (int y = 0; y < num_states_; ++y)
      f[y] = static_cast<double>(scaled_[i][y]) / resolution_;
    cells_.push_back(std::move(f));
    index_[scaled_[i]] = static_cast<int>(i);
  }
}

int ForecastGrid::cell_index(const Forecast& pi) const {
  if (static_cast<int>(pi.size()) != num_states_)
    throw std::domain_error("forecast has wrong number of states");
  std::vector<std::int64_t> key(num_states_);
  for (int y = 0; y < num_states_; ++y) {
    key[y] = std::llround(pi[y] * resolution_);
    if (std::fabs(pi[y] - static_cast<double>(key[y]) / resolution_) > 1e-9)
      throw std::domain_error("forecast is not a grid cell");
  }
  auto it = index_.find(key);
  if (it == index_.end()) throw std::domain_error("forecast is not a grid cell");
  return it->second;
}

CalibrationLedger::CalibrationLedger(const ForecastGrid& grid)
    : grid_(&grid),
      count_(grid.num_cells(), 0),
      outcome_(grid.num_cells(),
               std::vector<std::int64_t>(grid.num_states(), 0)) {}

void CalibrationLedger::record(int cell, int realized_state) {
  if (cell < 0 || cell >= grid_->num_cells())
    throw std::out_of_range("calibration cell out of range");
  if (realized_state < 0 || realized_state >= grid_->num_states())
    throw std::out_of_range("realized state out of range");
  ++count_[cell];
  ++outcome_[cell][realized_state];
  ++rounds_;
}

std::vector<std::int64_t> CalibrationLedger::scaled_error(int cell) const {
  const std::vector<std::int64_t>& g = grid_->scaled_cell(cell);
  std::vector<std::int64_t> e(grid_->num_states());
  for (int y = 0; y < grid_->num_states(); ++y)
    e[y] = count_[cell] * g[y] - grid_->resolution() * outcome_[cell][y];
  return e;
}

double CalibrationLedger::error_l1(int cell) const {
  std::vector<std::int64_t> e = scaled_error(cell);
  std::int64_t s = 0;
  for (std::int64_t v : e) s += std::llabs(v);
  return static_cast<double>(s) / grid_->resolution();
}

double CalibrationLedger::potential() const {
  double m = static_cast<double>(grid_->resolution());
  double phi = 0.0;
  for (int g = 0; g < grid_->num_cells(); ++g) {
    std::vector<std::int64_t> e = scaled_error(g);
    double s = 0.0;
    for (std::int64_t v : e) s += static_cast<double>(v) * static_cast<double>(v);
    phi += s / (m * m);
  }
  return phi;
}

BiasLedger::BiasLedger(const ForecastGrid& grid, int num_events)
    : grid_(&grid),
      n_(num_events, 0),
      scaled_b_(num_events,
                std::vector<std::int64_t>(grid.num_states(), 0)) {}

void BiasLedger::record(const std::vector<int>& active_events, int cell,
                        int realized_state) {
  const std::vector<std::int64_t>& g = grid_->scaled_cell(cell);
  std::int64_t m = grid_->resolution();
  for (int e : active_events) {
    std::vector<std::int64_t>& b = scaled_b_.at(e);
    for (int y = 0; y < grid_->num_states(); ++y)
      b[y] += g[y] - (y == realized_state ? m : 0);
    ++n_[e];
  }
  ++rounds_;
}

double BiasLedger::bias_l1(int event) const {
  std::int64_t s = 0;
  for (std::int64_t v : scaled_b_.at(event)) s += std::llabs(v);
  return static_cast<double>(s) / grid_->resolution();
}

double BiasLedger::alpha(int event) const {
  if (rounds_ == 0) return 0.0;
  return bias_l1(event) / static_cast<double>(rounds_);
}

namespace {

// Nonzero lambda with sum_i lambda_i * cols[i] = 0, for #cols > dim(col).
// Gauss-Jordan with partial pivoting; the first non-pivot column is freed.
std::vector<double> affine_dependence(
    const std::vector<std::vector<double>>& cols) {
  int k = static_cast<int>(cols.size());
  int rows = static_cast<int>(cols[0].size());
  std::vector<std::vector<double>> a(rows, std::vector<double>(k));
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < rows; ++r) a[r][c] = cols[c][r];
  std::vector<int> pivot_col;
  std::vector<char> is_pivot(k, 0);
  int r = 0;
  for (int c = 0; c < k && r < rows; ++c) {
    int best = -1;
    double mag = 1e-11;
    for (int rr = r; rr < rows; ++rr) {
      if (std::fabs(a[rr][c]) > mag) {
        mag = std::fabs(a[rr][c]);
        best = rr;
      }
    }
    if (best < 0) continue;
    std::swap(a[r], a[best]);
    double p = a[r][c];
    for (int cc = 0; cc < k; ++cc) a[r][cc] /= p;
    for (int rr = 0; rr < rows; ++rr) {
      if (rr == r) continue;
      double f = a[rr][c];
      if (f != 0.0)
        for (int cc = 0; cc < k; ++cc) a[rr][cc] -= f * a[r][cc];
    }
    pivot_col.push_back(c);
    is_pivot[c] = 1;
    ++r;
  }
  std::vector<double> lambda(k, 0.0);
  int free_col = -1;
  for (int c = 0; c < k; ++c) {
    if (!is_pivot[c]) {
      free_col = c;
      break;
    }
  }
  if (free_col < 0) return lambda;
  lambda[free_col] = 1.0;
  for (std::size_t pr = 0; pr < pivot_col.size(); ++pr)
    lambda[pivot_col[pr]] = -a[pr][free_col];
  return lambda;
}

// Reduce the support of q to at most num_states+1 atoms while preserving
// sum_g q_g and every column value sum_g q_g L[g][y] (Caratheodory steps).
void reduce_support(std::vector<int>& cells, std::vector<double>& weights,
                    const std::vector<std::vector<double>>& loss,
                    int num_states) {
  while (static_cast<int>(cells.size()) > num_states + 1) {
    int take = num_states + 2;
    std::vector<std::vector<double>> cols;
    for (int i = 0; i < take; ++i) {
      std::vector<double> col(loss[cells[i]]);
      col.push_back(1.0);
      cols.push_back(std::move(col));
    }
    std::vector<double> lambda = affine_dependence(cols);
    double biggest = 0.0;
    for (double v : lambda) biggest = std::max(biggest, std::fabs(v));
    if (biggest < 1e-14) break;
    bool has_positive = false;
    for (double v : lambda)
      if (v > 1e-15) has_positive = true;
    if (!has_positive)
      for (double& v : lambda) v = -v;
    double t = 0.0;
    int hit = -1;
    for (int i = 0; i < take; ++i) {
      if (lambda[i] > 1e-15) {
        double cand = weights[i] / lambda[i];
        if (hit < 0 || cand < t) {
          t = cand;
          hit = i;
        }
      }
    }
    if (hit < 0) break;
    for (int i = 0; i < take; ++i) weights[i] -= t * lambda[i];
    weights[hit] = 0.0;
    std::vector<int> kept_cells;
    std::vector<double> kept_weights;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (weights[i] > 1e-15) {
        kept_cells.push_back(cells[i]);
        kept_weights.push_back(weights[i]);
      }
    }
    cells = std::move(kept_cells);
    weights = std::move(kept_weights);
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (total > 0.0)
    for (double& w : weights) w /= total;
}

double mix_value(const std::vector<int>& cells,
                 const std::vector<double>& weights,
                 const std::vector<std::vector<double>>& loss,
                 int num_states) {
  double worst = -1e300;
  for (int y = 0; y < num_states; ++y) {
    double v = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i)
      v += weights[i] * loss[cells[i]][y];
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

MixedForecast minimax_mix(const std::vector<std::vector<double>>& loss,
                          int num_states) {
  int cells = static_cast<int>(loss.size());
  if (cells == 0) throw std::invalid_argument("minimax over empty grid");

  // Best single cell, lowest index on ties: the deterministic backbone.
  int best_cell = 0;
  double best_single = 1e300;
  for (int g = 0; g < cells; ++g) {
    double v = loss[g][0];
    for (int y = 1; y < num_states; ++y) v = std::max(v, loss[g][y]);
    if (v < best_single - 1e-15) {
      best_single = v;
      best_cell = g;
    }
  }

  MixedForecast out;
  out.cells = {best_cell};
  out.weights = {1.0};
  out.value = best_single;

  if (num_states == 2) {
    // With two states the optimum is a single cell or an equalizing pair of
    // cells whose losses lean opposite ways; search all pairs exactly.
    for (int g = 0; g < cells; ++g) {
      double dg = loss[g][0] - loss[g][1];
      if (dg <= 0.0) continue;
      for (int h = 0; h < cells; ++h) {
        double dh = loss[h][0] - loss[h][1];
        if (dh >= 0.0) continue;
        double w = -dh / (dg - dh);
        double value = w * loss[g][1] + (1.0 - w) * loss[h][1];
        if (value < out.value - 1e-15) {
          out.value = value;
          if (g < h) {
            out.cells = {g, h};
            out.weights = {w, 1.0 - w};
          } else {
            out.cells = {h, g};
            out.weights = {1.0 - w, w};
          }
        }
      }
    }
    return out;
  }

  // Fictitious play for three or more states, then support reduction.
  std::vector<double> cum_loss(num_states, 0.0);  // of the averaged forecast
  std::vector<double> state_count(num_states, 0.0);
  std::vector<double> q(cells, 0.0);
  double primal = 1e300;
  for (int iter = 1; iter <= 200; ++iter) {
    // Forecaster best-responds to the opponent's empirical state mix
    // (uniform on the first iteration).
    int bg = 0;
    double bv = 1e300;
    for (int g = 0; g < cells; ++g) {
      double s = 0.0;
      if (iter == 1) {
        for (int y = 0; y < num_states; ++y) s += loss[g][y];
      } else {
        for (int y = 0; y < num_states; ++y) s += state_count[y] * loss[g][y];
      }
      if (s < bv - 1e-15) {
        bv = s;
        bg = g;
      }
    }
    q[bg] += 1.0;
    for (int y = 0; y < num_states; ++y) cum_loss[y] += loss[bg][y];
    // Adversary best-responds to the averaged forecast so far.
    int by = 0;
    double wv = -1e300;
    for (int y = 0; y < num_states; ++y) {
      if (cum_loss[y] > wv + 1e-15) {
        wv = cum_loss[y];
        by = y;
      }
    }
    state_count[by] += 1.0;
    primal = wv / iter;
    // Dual: forecaster's best response value against the state mix.
    double dual = 1e300;
    for (int g = 0; g < cells; ++g) {
      double s = 0.0;
      for (int y = 0; y < num_states; ++y)
        s += state_count[y] / iter * loss[g][y];
      dual = std::min(dual, s);
    }
    if (primal - dual <= 1e-6) break;
  }
  double total = 0.0;
  for (double v : q) total += v;
  std::vector<int> sup_cells;
  std::vector<double> sup_weights;
  for (int g = 0; g < cells; ++g) {
    if (q[g] > 0.0) {
      sup_cells.push_back(g);
      sup_weights.push_back(q[g] / total);
    }
  }
  reduce_support(sup_cells, sup_weights, loss, num_states);
  double fp_value = mix_value(sup_cells, sup_weights, loss, num_states);
  // The averaged play may still trail the best single cell; never return a
  // mix worse than the deterministic choice.
  if (fp_value < best_single - 1e-15) {
    out.cells = std::move(sup_cells);
    out.weights = std::move(sup_weights);
    out.value = fp_value;
  }
  return out;
}

Forecaster::Forecaster(ForecastGrid grid, std::uint64_t seed,
                       std::uint64_t stream)
    : grid_(std::move(grid)), rng_(make_stream(seed, stream)) {}

const Forecast& Forecaster::step() {
  if (armed_)
    throw std::logic_error("step() called twice without observe()");
  std::vector<std::vector<double>> losses = round_losses();
  mix_ = minimax_mix(losses, grid_.num_states());
  if (mix_.cells.size() == 1) {
    pending_cell_ = mix_.cells[0];
  } else {
    pending_cell_ = mix_.cells[sample_index(mix_.weights, rng_)];
  }
  armed_ = true;
  return grid_.cell(pending_cell_);
}

void Forecaster::observe(int realized_state) {
  if (!armed_) throw std::logic_error("observe() without a pending step()");
  if (realized_state < 0 || realized_state >= grid_.num_states())
    throw std::out_of_range("realized state out of range");
  charge(pending_cell_, realized_state);
  armed_ = false;
}

int Forecaster::last_cell() const {
  if (pending_cell_ < 0) throw std::logic_error("no forecast emitted yet");
  return pending_cell_;
}

CalibratedForecaster::CalibratedForecaster(ForecastGrid grid,
                                           std::uint64_t seed,
                                           std::uint64_t stream)
    : Forecaster(std::move(grid), seed, stream), ledger_(grid_) {}

std::vector<std::vector<double>> CalibratedForecaster::round_losses() const {
  int cells = grid_.num_cells();
  int ny = grid_.num_states();
  double m = static_cast<double>(grid_.resolution());
  std::int64_t mi = grid_.resolution();
  std::vector<std::vector<double>> loss(cells, std::vector<double>(ny));
  for (int g = 0; g < cells; ++g) {
    std::vector<std::int64_t> e = ledger_.scaled_error(g);
    const std::vector<std::int64_t>& sg = grid_.scaled_cell(g);
    for (int y = 0; y < ny; ++y) {
      double dot = 0.0;
      double norm = 0.0;
      for (int yy = 0; yy < ny; ++yy) {
        std::int64_t diff = sg[yy] - (yy == y ? mi : 0);
        dot += static_cast<double>(e[yy]) * static_cast<double>(diff);
        norm += static_cast<double>(diff) * static_cast<double>(diff);
      }
      loss[g][y] = (2.0 * dot + norm) / (m * m);
    }
  }
  return loss;
}

void CalibratedForecaster::charge(int cell, int realized_state) {
  ledger_.record(cell, realized_state);
}

EventForecaster::EventForecaster(ForecastGrid grid, std::vector<Event> events,
                                 std::uint64_t seed, std::uint64_t stream)
    : Forecaster(std::move(grid), seed, stream),
      ledger_(grid_, events.empty() ? 1 : static_cast<int>(events.size())) {
  if (events.empty()) {
    events.push_back(Event{"E:always", [](const Forecast&) { return true; }});
  }
  int ne = static_cast<int>(events.size());
  int cells = grid_.num_cells();
  activation_.assign(ne, std::vector<char>(cells, 0));
  for (int e = 0; e < ne; ++e) {
    event_ids_.push_back(events[e].id);
    for (int g = 0; g < cells; ++g)
      activation_[e][g] = events[e].predicate(grid_.cell(g)) ? 1 : 0;
  }
  overlap_.assign(cells, std::vector<std::int64_t>(cells, 0));
  for (int g = 0; g < cells; ++g) {
    for (int h = g; h < cells; ++h) {
      std::int64_t c = 0;
      for (int e = 0; e < ne; ++e)
        if (activation_[e][g] && activation_[e][h]) ++c;
      overlap_[g][h] = c;
      overlap_[h][g] = c;
    }
  }
  scaled_stacked_.assign(cells,
                         std::vector<std::int64_t>(grid_.num_states(), 0));
}

std::vector<std::vector<double>> EventForecaster::round_losses() const {
  int cells = grid_.num_cells();
  int ny = grid_.num_states();
  double m = static_cast<double>(grid_.resolution());
  std::int64_t mi = grid_.resolution();
  std::vector<std::vector<double>> loss(cells, std::vector<double>(ny));
  for (int g = 0; g < cells; ++g) {
    const std::vector<std::int64_t>& b = scaled_stacked_[g];
    const std::vector<std::int64_t>& sg = grid_.scaled_cell(g);
    for (int y = 0; y < ny; ++y) {
      double dot = 0.0;
      for (int yy = 0; yy < ny; ++yy) {
        std::int64_t diff = sg[yy] - (yy == y ? mi : 0);
        dot += static_cast<double>(b[yy]) * static_cast<double>(diff);
      }
      loss[g][y] = dot / (m * m);
    }
  }
  return loss;
}

void EventForecaster::charge(int cell, int realized_state) {
  std::vector<int> active;
  for (int e = 0; e < num_events(); ++e)
    if (activation_[e][cell]) active.push_back(e);
  ledger_.record(active, cell, realized_state);
  const std::vector<std::int64_t>& sc = grid_.scaled_cell(cell);
  std::int64_t mi = grid_.resolution();
  int cells = grid_.num_cells();
  for (int g = 0; g < cells; ++g) {
    std::int64_t ov = overlap_[g][cell];
    if (ov == 0) continue;
    for (int y = 0; y < grid_.num_states(); ++y)
      scaled_stacked_[g][y] += ov * (sc[y] - (y == realized_state ? mi : 0));
  }
}

std::vector<BiasRow> audit_bias(const std::vector<ForecastRecord>& transcript,
                                const std::vector<Event>& events) {
  std::vector<BiasRow> rows;
  std::int64_t t = static_cast<std::int64_t>(transcript.size());
  for (const Event& ev : events) {
    BiasRow row;
    row.event_id = ev.id;
    row.t = t;
    if (t == 0) {
      rows.push_back(std::move(row));
      continue;
    }
    std::vector<double> b(transcript[0].forecast.size(), 0.0);
    for (const ForecastRecord& rec : transcript) {
      if (!ev.predicate(rec.forecast)) continue;
      ++row.n_e;
      for (std::size_t y = 0; y < b.size(); ++y)
        b[y] += rec.forecast[y] -
                (static_cast<int>(y) == rec.state ? 1.0 : 0.0);
    }
    double l1 = 0.0;
    for (double v : b) l1 += std::fabs(v);
    row.alpha = l1 / static_cast<double>(t);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace palab
