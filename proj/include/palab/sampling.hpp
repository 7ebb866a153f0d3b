#ifndef PALAB_SAMPLING_HPP
#define PALAB_SAMPLING_HPP

#include <random>

#include "palab/game.hpp"

namespace palab {

// Random point in the probability simplex with all coordinates >= floor.
Forecast random_forecast(std::mt19937_64& rng, int num_states, double floor = 0.01);

// Random linear-contract game: pairwise-distinct costs (gap >= 0.02), outcome
// values in [0,1], random outcome table, and benchmark contracts in [0,1].
LinearContractGame random_linear_game(std::mt19937_64& rng, int min_actions = 2,
                                      int max_actions = 4, int num_states = 1,
                                      int num_benchmarks = 3);

// Random binary-state persuasion game built so every strategy owns an
// interval of the utility envelope (interval lengths >= 1/(3n), unit-range
// utilities); principal values uniform in [0,1].
PersuasionGame random_persuasion_game(std::mt19937_64& rng, int min_strategies = 2,
                                      int max_strategies = 4);

}  // namespace palab

#endif
