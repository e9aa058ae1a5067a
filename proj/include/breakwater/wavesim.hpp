#pragma once

#include <string>
#include <vector>

#include "breakwater/domain.hpp"
#include "breakwater/geometry.hpp"
#include "breakwater/grid.hpp"

namespace breakwater {

enum class Provenance { builtin_oracle, external_model, surrogate };

struct WaveField {
  Grid<float> heights;  // significant wave height, meters, >= 0
  Provenance provenance = Provenance::builtin_oracle;
};

// Built-in oracle tuning. The model marches a steady directional energy
// balance on an internally refined grid: waves enter the upwind boundary at
// boundary_coeff * wind_speed, advect along the propagation direction,
// relax toward the local depth-limited equilibrium (regrowth per cell
// travelled, saturation at gamma * depth), vanish on obstacle cells, and
// spread laterally with a (lateral, 1-2*lateral, lateral) kernel per sweep
// step. The march runs once per incident direction over a cosine-squared
// spread around the mean wind and the fields combine by spectral weight, so
// shadow zones close through both kernel diffusion and directional spread.
struct WaveParams {
  double boundary_coeff = 0.2;  // h0 = boundary_coeff * wind_speed  [s]
  double gamma = 0.5;           // depth-induced breaking ratio
  double lateral = 0.25;        // lateral diffusion kernel weight
  double regrowth = 0.02;       // relaxation toward equilibrium per cell
  int refine = 6;               // internal resolution multiplier
  int n_directions = 25;        // directional spread bins (made odd)
  double spread_deg = 40.0;     // half-width of the directional spread
};

// Deterministic wave field for a candidate system; same inputs give
// bit-identical outputs. The caller is responsible for checking
// constraints first; the field is defined for any geometry.
WaveField simulate(const BreakwaterSystem& sys, const DomainConfig& dom,
                   const WaveParams& params = {});

std::vector<double> wave_height_at_targets(const WaveField& field,
                                           const DomainConfig& dom);

enum class Aggregation { sum, mean, max };

double aggregate_target_heights(const std::vector<double>& heights,
                                Aggregation agg = Aggregation::sum);

// External-model hook: exchanges plain-text matrices with a user-supplied
// command run inside `exchange_dir` (created if missing). The command reads
// domain.txt and obstacles.txt and must write waves.txt (H x W reals,
// row-major). Parallel callers must use distinct exchange directories.
struct ExternalAdapterConfig {
  std::string command;       // run via /bin/sh -c
  std::string exchange_dir;  // working directory for the exchange
  double timeout_sec = 60.0;
};

WaveField external_simulate(const BreakwaterSystem& sys,
                            const DomainConfig& dom,
                            const ExternalAdapterConfig& adapter);

}  // namespace breakwater
