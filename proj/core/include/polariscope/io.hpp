#ifndef POLARISCOPE_IO_HPP
#define POLARISCOPE_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "polariscope/reconstruction.hpp"

namespace polariscope {

inline constexpr const char* kToolVersion = "0.1.0";

/// Canonical description of every phase/angle convention the numbers depend
/// on; its hash is embedded in all outputs so convention drift across versions
/// is detectable.
std::string convention_description();
std::string convention_fingerprint();

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Provenance block embedded in every output file; identical manifests must
/// reproduce byte-identical outputs.
struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;
    std::string output;
    uint64_t seed = 0;
    long long shots = 0; // 0 means noiseless
    std::vector<int> k_x2;
    std::string mode;
    double lambda = 0.0;
    bool psd_project = false;
    std::string tool_version = kToolVersion;
    std::string fingerprint = convention_fingerprint();
};

/// Diagnostics + matrix pair as written by the reconstruct command.
struct ReconstructionResult {
    CorrelationMatrix G;
    ReconstructionDiagnostics diag;
};

std::string state_to_json(const TwoModeState& state, const RunManifest* manifest = nullptr);
TwoModeState state_from_json(const std::string& text);

std::string directions_to_json(const DirectionSet& set, const RunManifest* manifest = nullptr);
DirectionSet directions_from_json(const std::string& text);

std::string measurements_to_json(const std::vector<MeasurementRecord>& records,
                                 const RunManifest* manifest = nullptr);
std::vector<MeasurementRecord> measurements_from_json(const std::string& text);

std::string results_to_json(const std::vector<ReconstructionResult>& results,
                            const RunManifest* manifest = nullptr);
std::vector<ReconstructionResult> results_from_json(const std::string& text);

std::string read_text_file(const std::string& path);

/// Write-temp-then-rename so partially written outputs are never observable.
void atomic_write_text(const std::string& path, const std::string& content);

} // namespace polariscope

#endif
