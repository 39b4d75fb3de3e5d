#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "spindecay/sweep.hpp"
#include "spindecay/types.hpp"

namespace spindecay {

/// Parsed JSON configuration.  Sections: "model", "geometry", "irf",
/// "sweep", "io", plus top-level "polarization", "seed", "label".  Unknown
/// keys anywhere are rejected; missing fields take documented defaults.
struct ConfigDocument {
    SpinModelParams model{};
    FieldGeometry geometry{};
    bool has_irf = false;
    IrfModel irf{};
    SweepPlan sweep{};
    bool sweep_oracle = false;
    Polarization polarization = Polarization::RCP;
    std::uint64_t seed = 1;
    std::string label;
    std::string out_path;
    /// FNV-1a hash of the canonical (key-sorted) JSON text; embedded in
    /// output file headers for provenance.
    std::uint64_t hash = 0;
};

/// Throws ConfigError with a field path in the message on any problem.
ConfigDocument parse_config(const std::string& json_text);
ConfigDocument load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace spindecay
