#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aerostate/sampler.hpp"

namespace aerostate::diagnostics {

inline constexpr double kRhatFlag = 1.05;

// Split R-hat over chains of equal or unequal length; each chain is halved.
// Returns nullopt for fewer than 2 chains. Zero within- and between-chain
// variance counts as converged (1.0).
std::optional<double> split_rhat(const std::vector<std::vector<double>>& chains);

// Geyer initial-positive-sequence ESS pooled across chains.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

struct ParameterDiagnostic {
  std::string name;
  std::optional<double> rhat;
  double ess = 0.0;
  bool flagged = false;  // rhat > kRhatFlag
};

std::vector<ParameterDiagnostic> diagnose(const sampler::PosteriorDraws& draws);
bool any_flagged(const std::vector<ParameterDiagnostic>& diags);
double max_rhat(const std::vector<ParameterDiagnostic>& diags);

void write_diagnostics_csv(const std::vector<ParameterDiagnostic>& diags, const std::string& path);

}  // namespace aerostate::diagnostics
