#ifndef SUPERBUNCH_CONDITIONAL_HPP
#define SUPERBUNCH_CONDITIONAL_HPP

#include "superbunch/dicke.hpp"

#include <cmath>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace superbunch {

// Atomic states conditioned on a transmitted detection, weak-drive closed
// forms. All three are diagonal in the Dicke basis.

enum class ConditioningScheme {
  AnyClick,          // any transmitted click, steady state before it
  FirstClickNoTrans, // no transmitted click beforehand
  FirstClickNoAny,   // no click of either channel beforehand
};

inline std::string_view to_string(ConditioningScheme s)
{
  switch (s) {
  case ConditioningScheme::AnyClick: return "any_click";
  case ConditioningScheme::FirstClickNoTrans: return "first_click_no_trans";
  case ConditioningScheme::FirstClickNoAny: return "first_click_no_any";
  }
  return "?";
}

struct ConditionalState {
  CMatrix rho_c;
  ConditioningScheme scheme;
  std::vector<double> populations; // index k = number of excited atoms

  double mean_excitation() const
  {
    double m = 0.0;
    for (std::size_t k = 0; k < populations.size(); ++k) m += static_cast<double>(k) * populations[k];
    return m;
  }
};

namespace detail {

inline ConditionalState diagonal_state(std::vector<double> pops, ConditioningScheme scheme)
{
  const auto dim = static_cast<Eigen::Index>(pops.size());
  CMatrix rho = CMatrix::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) rho(k, k) = pops[static_cast<std::size_t>(k)];
  return {std::move(rho), scheme, std::move(pops)};
}

} // namespace detail

/// a_R rho a_R^dagger / Tr(.) for the steady state: I/(N+1) at any drive.
inline ConditionalState conditional_any_click(int n_atoms)
{
  const DickeBasis basis{n_atoms};
  return detail::diagonal_state(std::vector<double>(static_cast<std::size_t>(basis.dim()), 1.0 / basis.dim()),
                                ConditioningScheme::AnyClick);
}

/// Truncated geometric law 1 / (2^{N-k} (2 - 2^{-N})) over k excited atoms.
inline ConditionalState first_click_distribution(int n_atoms)
{
  const DickeBasis basis{n_atoms};
  const double norm = 2.0 - std::ldexp(1.0, -n_atoms);
  std::vector<double> pops(static_cast<std::size_t>(basis.dim()));
  for (int k = 0; k <= n_atoms; ++k) pops[static_cast<std::size_t>(k)] = std::ldexp(1.0, k - n_atoms) / norm;
  return detail::diagonal_state(std::move(pops), ConditioningScheme::FirstClickNoTrans);
}

/// Pure |N>_ex: a transmitted click preceded by silence in both channels.
inline ConditionalState fully_excited_conditional(int n_atoms)
{
  const DickeBasis basis{n_atoms};
  std::vector<double> pops(static_cast<std::size_t>(basis.dim()), 0.0);
  pops.back() = 1.0;
  return detail::diagonal_state(std::move(pops), ConditioningScheme::FirstClickNoAny);
}

/// k reflected clicks followed by a transmitted one leave |N-k>_ex.
inline ConditionalState conditional_after_k_reflections(int n_atoms, int k)
{
  const DickeBasis basis{n_atoms};
  if (k < 0 || k > n_atoms)
    throw std::invalid_argument("conditional_after_k_reflections: k must lie in [0, N]");
  std::vector<double> pops(static_cast<std::size_t>(basis.dim()), 0.0);
  pops[static_cast<std::size_t>(n_atoms - k)] = 1.0;
  return detail::diagonal_state(std::move(pops), ConditioningScheme::FirstClickNoAny);
}

/// (2^{N+1} N + 1)/(2^{N+1} - 1) - 1, the mean of first_click_distribution.
inline double avg_excitation_after_first_click(int n_atoms)
{
  (void)DickeBasis{n_atoms};
  const double p = std::ldexp(1.0, n_atoms + 1);
  return (p * n_atoms + 1.0) / (p - 1.0) - 1.0;
}

} // namespace superbunch

#endif // SUPERBUNCH_CONDITIONAL_HPP
