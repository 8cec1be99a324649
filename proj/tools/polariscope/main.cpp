#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "polariscope/reconstruction.hpp"

using namespace polariscope;

int main(int argc, char** argv) {
    CLI::App app{"polariscope: two-mode polarization multipole simulation and reconstruction"};
    app.require_subcommand(1);

    cli::GenStateArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-state", "generate a state file");
    gen_cmd->add_option("--family", gen.family, "pure-layer | random | noon | manual")
        ->required();
    gen_cmd->add_option("--spin", gen.spin, "layer spin S (total photons = 2S)");
    gen_cmd->add_option("--amps", gen.amps, "comma-separated amplitudes, m = S ... -S (re or re:im)");
    gen_cmd->add_option("--rank", gen.rank, "rank of the random density matrix (default full)");
    gen_cmd->add_option("--n", gen.noon_n, "photon number for the noon family");
    gen_cmd->add_option("--seed", gen.seed, "random seed");
    gen_cmd->add_option("--input", gen.input, "input state JSON for the manual family");
    gen_cmd->add_option("--out", gen.out, "output state file")->required();

    cli::DirectionsArgs dir;
    CLI::App* dir_cmd = app.add_subcommand("directions", "design a measurement direction set");
    dir_cmd->add_option("--L", dir.L, "multipole order (2L+1 directions)")->required();
    dir_cmd->add_option("--seed", dir.seed, "random seed");
    dir_cmd->add_option("--out", dir.out, "output directions file")->required();

    cli::SimulateArgs sim;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "simulate intensity-moment measurements");
    sim_cmd->add_option("--state", sim.state_file, "input state file")->required();
    sim_cmd->add_option("--directions", sim.direction_files,
                        "direction files covering L = 0 ... 2K (repeatable)")
        ->required();
    sim_cmd->add_option("--K", sim.k_values, "moment orders (half-integers, repeatable)")
        ->required();
    sim_cmd->add_option("--shots", sim.shots, "shots per direction (>= 1)");
    sim_cmd->add_flag("--noiseless", sim.noiseless, "write exact expectation values");
    sim_cmd->add_option("--seed", sim.seed, "random seed");
    sim_cmd->add_option("--out", sim.out, "output measurements file")->required();

    cli::ReconstructArgs rec;
    CLI::App* rec_cmd = app.add_subcommand("reconstruct", "invert measurements into G^K");
    rec_cmd->add_option("--measurements", rec.measurements_file, "input measurements file")
        ->required();
    rec_cmd->add_option("--mode", rec.mode, "exact | lsq (default exact)");
    rec_cmd->add_option("--lambda", rec.lambda, "Tikhonov strength for lsq (default 0)");
    rec_cmd->add_flag("--psd-project", rec.psd_project, "project the estimate onto the PSD cone");
    rec_cmd->add_option("--out", rec.out, "output reconstruction file")->required();

    cli::VerifyArgs ver;
    CLI::App* ver_cmd = app.add_subcommand("verify", "compare a reconstruction to ground truth");
    ver_cmd->add_option("--state", ver.state_file, "ground-truth state file")->required();
    ver_cmd->add_option("--reconstruction", ver.reconstruction_file, "reconstruction file")
        ->required();
    ver_cmd->add_option("--K", ver.k_filter, "restrict to these orders (repeatable)");
    ver_cmd->add_option("--tol", ver.tol, "max |Delta G| tolerance (default 1e-6)");
    ver_cmd->add_option("--out", ver.out, "CSV report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen_cmd->parsed()) return cli::cmd_gen_state(gen);
        if (dir_cmd->parsed()) return cli::cmd_directions(dir);
        if (sim_cmd->parsed()) return cli::cmd_simulate(sim);
        if (rec_cmd->parsed()) return cli::cmd_reconstruct(rec);
        if (ver_cmd->parsed()) return cli::cmd_verify(ver);
    } catch (const cli::VerificationFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const ConditioningError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
