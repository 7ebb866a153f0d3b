#ifndef PALAB_LEMMAS_HPP
#define PALAB_LEMMAS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace palab {

// One randomized property suite: how many cases ran and how many violated the
// property.  A healthy library reports zero failures on every suite.
struct LemmaResult {
  std::string name;
  long long cases = 0;
  long long failures = 0;
};

// Test-only fault injection: kFlipStability inverts the oracle stability
// verdict inside the two stability suites, which must then report failures.
// It exists to prove the suites can fail at all.
enum class LemmaMutation { kNone, kFlipStability };

// Runs every suite at the requested case count with per-suite substreams of
// the given seed.  Suites:
//   tie-count           multi-response contracts number at most |A|-1 and
//                       each has a genuine multi-member best-response set
//   gap-margin          a unique best response on both sides of a contract
//                       window keeps an agent-utility margin >= gap * beta
//   monotonicity        best expected outcome value over the eps-BR set is
//                       nondecreasing in the contract
//   closure-shape       the concave closure dominates the pointwise value
//                       and is midpoint concave on a grid
//   contract-stability  the contract oracle's output is stable, near-optimal
//                       and within |A|(beta+delta) of the optimistic contract
//   signal-stability    the signal oracle's output is stable at its certified
//                       (beta, gamma), has stochastic columns, and its split
//                       averages back to the prior
std::vector<LemmaResult> run_lemma_suites(long long cases_per_suite, std::uint64_t seed,
                                          LemmaMutation mutation = LemmaMutation::kNone);

}  // namespace palab

#endif
