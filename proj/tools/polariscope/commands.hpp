#ifndef POLARISCOPE_CLI_COMMANDS_HPP
#define POLARISCOPE_CLI_COMMANDS_HPP

#include <string>
#include <vector>

#include "polariscope/io.hpp"

namespace polariscope::cli {

/// Verification mismatch beyond tolerance; mapped to exit code 3.
struct VerificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenStateArgs {
    std::string family; // pure-layer | random | noon | manual
    double spin = 0.0;
    std::string amps;
    int rank = 0; // 0 means full rank
    int noon_n = 0;
    uint64_t seed = 0;
    std::string input;
    std::string out;
};

struct DirectionsArgs {
    int L = 0;
    uint64_t seed = 0;
    std::string out;
};

struct SimulateArgs {
    std::string state_file;
    std::vector<std::string> direction_files;
    std::vector<double> k_values;
    long long shots = 0; // 0 with noiseless=true
    bool noiseless = false;
    uint64_t seed = 0;
    std::string out;
};

struct ReconstructArgs {
    std::string measurements_file;
    std::string mode = "exact"; // exact | lsq
    double lambda = 0.0;
    bool psd_project = false;
    std::string out;
};

struct VerifyArgs {
    std::string state_file;
    std::string reconstruction_file;
    std::vector<double> k_filter;
    double tol = 1e-6;
    std::string out; // CSV report
};

int cmd_gen_state(const GenStateArgs& args);
int cmd_directions(const DirectionsArgs& args);
int cmd_simulate(const SimulateArgs& args);
int cmd_reconstruct(const ReconstructArgs& args);
int cmd_verify(const VerifyArgs& args);

} // namespace polariscope::cli

#endif
